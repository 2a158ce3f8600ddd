#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "wprox/errors.hpp"
#include "wprox/grid.hpp"

// Closed forms for the quadratic potential V(x) = |x - x0|^2 / 2, used as exact test references.
namespace wprox::analytic {

struct GaussianDensity {
    std::vector<double> mean;
    double variance;

    GaussianDensity(std::vector<double> m, double var) : mean(std::move(m)), variance(var) {
        if (!(var > 0.0)) throw ConfigError("Gaussian variance must be positive");
    }
    GaussianDensity(double m, double var) : GaussianDensity(std::vector<double>{m}, var) {}

    std::size_t dim() const noexcept { return mean.size(); }

    double pdf(std::span<const double> x) const {
        double r2 = 0.0;
        for (std::size_t k = 0; k < mean.size(); ++k) r2 += (x[k] - mean[k]) * (x[k] - mean[k]);
        return std::pow(2.0 * std::numbers::pi * variance, -0.5 * static_cast<double>(dim())) *
               std::exp(-r2 / (2.0 * variance));
    }
    double pdf(double x) const { return pdf(std::span<const double>(&x, 1)); }

    GridFn sample(const Grid1D& g) const {
        return GridFn::sample(g, [this](double x) { return pdf(x); });
    }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("points differ in dimension");
    double r2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) r2 += (a[k] - b[k]) * (a[k] - b[k]);
    return r2;
}

/// Phi(t, x) = beta d log(1/(T - t + 1)) - |x - x0|^2 / (2 (T - t + 1))
inline double quadratic_phi(std::span<const double> x, double t, std::span<const double> x0, double T, double beta) {
    const double s = T - t + 1.0;
    const double d = static_cast<double>(x.size());
    return beta * d * std::log(1.0 / s) - squared_distance(x, x0) / (2.0 * s);
}

inline double quadratic_phi(double x, double t, double x0, double T, double beta) {
    return quadratic_phi(std::span<const double>(&x, 1), t, std::span<const double>(&x0, 1), T, beta);
}

/// Density at time t in (0, T]: the intermediate Gaussian kernel of the quadratic example
/// (mean (y (T-t+1) + t x0)/(T+1), variance 2 beta t (T-t+1)/(T+1)) convolved with rho0.
inline GaussianDensity quadratic_rho_t(const GaussianDensity& rho0, std::span<const double> x0, double t, double T,
                                       double beta) {
    if (!(t >= 0.0 && t <= T)) throw InvalidTime("quadratic_rho_t needs 0 <= t <= T");
    if (x0.size() != rho0.dim()) throw ShapeMismatch("x0 and rho0 differ in dimension");
    const double a = (T - t + 1.0) / (T + 1.0);
    std::vector<double> mean(rho0.dim());
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = a * rho0.mean[k] + (t / (T + 1.0)) * x0[k];
    const double var = a * a * rho0.variance + 2.0 * beta * t * (T - t + 1.0) / (T + 1.0);
    return {std::move(mean), var};
}

inline GaussianDensity quadratic_rho_T(const GaussianDensity& rho0, std::span<const double> x0, double T, double beta) {
    if (x0.size() != rho0.dim()) throw ShapeMismatch("x0 and rho0 differ in dimension");
    std::vector<double> mean(rho0.dim());
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = (rho0.mean[k] + T * x0[k]) / (1.0 + T);
    const double var = rho0.variance / ((1.0 + T) * (1.0 + T)) + 2.0 * beta * T / (1.0 + T);
    return {std::move(mean), var};
}

inline GaussianDensity quadratic_rho_t(const GaussianDensity& rho0, double x0, double t, double T, double beta) {
    return quadratic_rho_t(rho0, std::span<const double>(&x0, 1), t, T, beta);
}
inline GaussianDensity quadratic_rho_T(const GaussianDensity& rho0, double x0, double T, double beta) {
    return quadratic_rho_T(rho0, std::span<const double>(&x0, 1), T, beta);
}

} // namespace wprox::analytic
