#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "wprox/grid.hpp"

namespace wprox {

using ScalarFn = std::function<double(double)>;

/// Pointwise internal energy U(s; x). The x argument lets reference densities
/// (relative entropy) enter; epsilon is the regularizer of entropy-type terms.
struct InternalEnergy {
    std::function<double(double s, double x, double eps)> value;
    std::function<double(double s, double x, double eps)> derivative;
    std::function<double(double s, double x, double eps)> second_derivative;
    bool entropy_type = false;
};

/// F(rho) = sum V rho + 1/2 sum sum W rho rho + sum U(rho), each part optional.
struct EnergySpec {
    std::optional<ScalarFn> potential;
    std::optional<ScalarFn> interaction;
    std::optional<InternalEnergy> internal;
    double epsilon = 0.0;
    std::string tag;

    bool is_linear() const noexcept { return !interaction && !internal; }

    void validate() const {
        if (!potential && !interaction && !internal)
            throw ConfigError("energy spec has no potential, interaction or internal part");
        if (!(epsilon >= 0.0)) throw ConfigError("energy epsilon must be nonnegative");
        if (interaction) {
            static constexpr std::array<double, 6> probes{0.1, 0.37, 1.0, 2.5, 4.2, 9.7};
            for (double z : probes) {
                if (std::abs((*interaction)(z) - (*interaction)(-z)) > 1e-12)
                    throw ConfigError("interaction kernel W must be even");
            }
        }
    }

    static EnergySpec zero() {
        EnergySpec s;
        s.potential = [](double) { return 0.0; };
        s.tag = "zero";
        return s;
    }
};

namespace energies {

inline double gaussian_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// V(x) = amplitude * exp(-(x - center)^2 / width)
inline ScalarFn gaussian_bump_potential(double amplitude, double center, double width) {
    return [=](double x) { return amplitude * std::exp(-(x - center) * (x - center) / width); };
}

/// V(x) = strength/2 * (x - center)^2
inline ScalarFn quadratic_potential(double center, double strength = 1.0) {
    return [=](double x) { return 0.5 * strength * (x - center) * (x - center); };
}

/// W(z) = lambda * z^2
inline ScalarFn quadratic_interaction(double lambda) {
    return [=](double z) { return lambda * z * z; };
}

/// U(s) = coefficient/2 * s^2
inline InternalEnergy quadratic_internal(double coefficient) {
    InternalEnergy u;
    u.value = [=](double s, double, double) { return 0.5 * coefficient * s * s; };
    u.derivative = [=](double s, double, double) { return coefficient * s; };
    u.second_derivative = [=](double, double, double) { return coefficient; };
    return u;
}

/// Modified relative entropy U(s; x) = lambda * s * log((s + eps) / (rho_F(x) + eps)).
inline InternalEnergy kl_internal(double lambda, ScalarFn reference) {
    InternalEnergy u;
    u.entropy_type = true;
    u.value = [=](double s, double x, double eps) {
        if (s == 0.0) return 0.0;
        return lambda * s * std::log((s + eps) / (reference(x) + eps));
    };
    u.derivative = [=](double s, double x, double eps) {
        const double r = reference(x);
        return lambda * (std::log((s + eps) / (r + eps)) + s / (s + eps));
    };
    u.second_derivative = [=](double s, double, double eps) {
        return lambda * (1.0 / (s + eps) + eps / ((s + eps) * (s + eps)));
    };
    return u;
}

} // namespace energies

/// Dense W(x_i - x_j) on a grid.
inline std::vector<double> interaction_matrix(const ScalarFn& w, const Grid1D& grid) {
    const auto n = grid.size();
    std::vector<double> out(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = w(grid.point(i) - grid.point(j));
    return out;
}

/// (W * rho)(x_i) = h sum_j W(x_i - x_j) rho_j with a fixed summation order per output point.
inline GridFn convolve_interaction(std::span<const double> wmat, const GridFn& rho) {
    const auto n = rho.size();
    const double h = rho.grid.spacing();
    GridFn out(rho.grid);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += wmat[i * n + j] * rho[j];
        out[i] = h * s;
    }
    return out;
}

inline double eval_energy(const EnergySpec& spec, const GridFn& rho) {
    const Grid1D& g = rho.grid;
    const double h = g.spacing();
    const auto n = rho.size();
    double local = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double x = g.point(j);
        if (spec.potential) local += (*spec.potential)(x) * rho[j];
        if (spec.internal) local += spec.internal->value(rho[j], x, spec.epsilon);
    }
    double pair = 0.0;
    if (spec.interaction) {
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += (*spec.interaction)(g.point(i) - g.point(j)) * rho[j];
            pair += rho[i] * row;
        }
    }
    return h * local + 0.5 * h * h * pair;
}

inline void check_entropy_domain(const EnergySpec& spec, const GridFn& rho) {
    if (spec.internal && spec.internal->entropy_type && spec.epsilon == 0.0) {
        for (double v : rho.values)
            if (v <= 0.0) throw EntropyDomainError("entropy-type energy with epsilon = 0 evaluated at zero density");
    }
}

/// L2 first variation V + W*rho + U'(rho) on the grid of rho.
inline GridFn first_variation(const EnergySpec& spec, const GridFn& rho) {
    check_entropy_domain(spec, rho);
    const Grid1D& g = rho.grid;
    GridFn out(g);
    if (spec.interaction) out = convolve_interaction(interaction_matrix(*spec.interaction, g), rho);
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double x = g.point(j);
        if (spec.potential) out[j] += (*spec.potential)(x);
        if (spec.internal) out[j] += spec.internal->derivative(rho[j], x, spec.epsilon);
    }
    return out;
}

/// Variation of the epsilon-modified relative entropy lambda * rho log((rho+eps)/(rho_F+eps)).
inline GridFn kl_first_variation(const GridFn& rho, const GridFn& rho_ref, double lambda, double epsilon) {
    require_same_grid(rho, rho_ref);
    if (!(epsilon > 0.0)) throw ConfigError("kl_first_variation needs epsilon > 0");
    GridFn out(rho.grid);
    for (std::size_t j = 0; j < rho.size(); ++j) {
        const double s = rho[j];
        out[j] = lambda * (std::log((s + epsilon) / (rho_ref[j] + epsilon)) + s / (s + epsilon));
    }
    return out;
}

} // namespace wprox
