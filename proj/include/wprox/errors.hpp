#pragma once

#include <stdexcept>
#include <string>

namespace wprox {

// Coarse error classes; the CLI maps each to a distinct exit code.
enum class ErrorClass { Config, NotConverged, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

#define WPROX_DEFINE_ERROR(Name, Cls)                                       \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what) : Error(ErrorClass::Cls, what) {} \
    };

WPROX_DEFINE_ERROR(ConfigError, Config)
WPROX_DEFINE_ERROR(NotConverged, NotConverged)
WPROX_DEFINE_ERROR(NonpositiveMass, Numerical)
WPROX_DEFINE_ERROR(NegativeFluxComponent, Numerical)
WPROX_DEFINE_ERROR(EntropyDomainError, Numerical)
WPROX_DEFINE_ERROR(InvalidTime, Numerical)
WPROX_DEFINE_ERROR(DegenerateDenominator, Numerical)
WPROX_DEFINE_ERROR(ShapeMismatch, Numerical)
WPROX_DEFINE_ERROR(RootFindFailure, Numerical)
WPROX_DEFINE_ERROR(NewtonDivergence, Numerical)
WPROX_DEFINE_ERROR(StepSizeViolation, Config)

#undef WPROX_DEFINE_ERROR

} // namespace wprox
