#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wprox/energy.hpp"
#include "wprox/grid.hpp"

namespace wprox {

/// Full input of every solver: initial density, energy, terminal time, diffusion.
struct ProxProblem {
    DensityField rho0;
    EnergySpec spec;
    double T;
    double beta;

    const Grid1D& grid() const noexcept { return rho0.grid(); }

    void validate() const {
        if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("terminal time T must be positive");
        if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("diffusion beta must be positive");
        spec.validate();
    }
};

// Dense materialization stops at this many grid points; larger grids are applied matrix-free.
inline constexpr std::size_t kDenseKernelLimit = 512;

/// K(x_i, y_j) in row-major order (row = x, column = y).
struct KernelMatrix {
    Grid1D grid;
    std::vector<double> entries;
    double beta = 0.0;
    double T = 0.0;
    std::string tag;

    std::size_t size() const noexcept { return grid.size(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return entries[i * grid.size() + j]; }
};

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> a) {
    double m = kNegInf;
    for (double v : a) m = std::max(m, v);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double v : a) s += std::exp(v - m);
    return m + std::log(s);
}

/// Log Gibbs weights of column y_j, shifted by their maximum; returns log of the
/// Riemann denominator relative to that shift.
inline double gibbs_column(const GridFn& potential, double T, double beta, std::size_t j,
                           std::vector<double>& shifted) {
    const Grid1D& g = potential.grid;
    const auto n = g.size();
    const double y = g.point(j);
    shifted.resize(n);
    double m = kNegInf;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = g.point(i) - y;
        shifted[i] = -(potential[i] + dx * dx / (2.0 * T)) / (2.0 * beta);
        if (std::isnan(shifted[i])) throw DegenerateDenominator("Gibbs exponent is NaN");
        m = std::max(m, shifted[i]);
    }
    if (!std::isfinite(m)) throw DegenerateDenominator("Gibbs kernel column has no finite weight");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        shifted[i] = std::exp(shifted[i] - m);
        s += shifted[i];
    }
    const double denom = g.spacing() * s;
    if (!(denom > 0.0) || !std::isfinite(denom)) throw DegenerateDenominator("Gibbs denominator underflowed");
    return denom;
}

} // namespace detail

inline double heat_kernel(std::span<const double> x, std::span<const double> y, double t, double beta) {
    if (!(t > 0.0)) throw InvalidTime("heat kernel needs t > 0");
    if (x.size() != y.size()) throw ShapeMismatch("heat kernel points differ in dimension");
    double r2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
    const double d = static_cast<double>(x.size());
    return std::pow(4.0 * std::numbers::pi * beta * t, -0.5 * d) * std::exp(-r2 / (4.0 * beta * t));
}

inline double heat_kernel(double x, double y, double t, double beta) {
    return heat_kernel(std::span<const double>(&x, 1), std::span<const double>(&y, 1), t, beta);
}

inline double log_heat_kernel_1d(double x, double y, double t, double beta) {
    return -0.5 * std::log(4.0 * std::numbers::pi * beta * t) - (x - y) * (x - y) / (4.0 * beta * t);
}

/// Softmax kernel of the potential field `potential` sampled on its grid.
inline KernelMatrix gibbs_kernel(const GridFn& potential, double T, double beta, std::string tag = {}) {
    if (!potential.all_finite()) throw DegenerateDenominator("potential has non-finite entries");
    const auto n = potential.size();
    KernelMatrix k{potential.grid, std::vector<double>(n * n), beta, T, std::move(tag)};
    std::vector<double> col;
    for (std::size_t j = 0; j < n; ++j) {
        const double denom = detail::gibbs_column(potential, T, beta, j, col);
        for (std::size_t i = 0; i < n; ++i) k.entries[i * n + j] = col[i] / denom;
    }
    return k;
}

inline GridFn sampled_potential(const ProxProblem& p) {
    if (!p.spec.potential) return GridFn(p.grid());
    return GridFn::sample(p.grid(), *p.spec.potential);
}

inline KernelMatrix linear_kernel(const ProxProblem& p) {
    p.validate();
    if (!p.spec.is_linear()) throw ConfigError("linear_kernel requires an energy without interaction or internal parts");
    return gibbs_kernel(sampled_potential(p), p.T, p.beta, p.spec.tag);
}

/// Kernel with V replaced by the first variation F(x, guess).
inline KernelMatrix nonlinear_kernel(const ProxProblem& p, const DensityField& guess) {
    p.validate();
    require_same_grid(p.rho0, guess);
    return gibbs_kernel(first_variation(p.spec, guess), p.T, p.beta, p.spec.tag);
}

inline DensityField apply_kernel(const KernelMatrix& k, const DensityField& rho0) {
    if (!(k.grid == rho0.grid())) throw ShapeMismatch("kernel and density grids differ");
    const auto n = k.size();
    const double h = k.grid.spacing();
    GridFn out(k.grid);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        const double* row = &k.entries[i * n];
        for (std::size_t j = 0; j < n; ++j) s += row[j] * rho0[j];
        out[i] = h * s;
    }
    return DensityField::adopt(std::move(out));
}

/// Applies the Gibbs kernel of `potential` without storing it.
inline DensityField apply_gibbs_matrix_free(const GridFn& potential, double T, double beta, const DensityField& rho0) {
    require_same_grid(potential, rho0);
    if (!potential.all_finite()) throw DegenerateDenominator("potential has non-finite entries");
    const auto n = potential.size();
    const double h = potential.grid.spacing();
    // Column weights are recomputed per output row so every entry sums over j in
    // the same order as the dense product.
    std::vector<double> col;
    std::vector<double> norm_rho(n);
    std::vector<double> log_shift(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double denom = detail::gibbs_column(potential, T, beta, j, col);
        const double y = potential.grid.point(j);
        double m = detail::kNegInf;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = potential.grid.point(i) - y;
            m = std::max(m, -(potential[i] + dx * dx / (2.0 * T)) / (2.0 * beta));
        }
        log_shift[j] = m;
        norm_rho[j] = 1.0 / denom;
    }
    GridFn out(potential.grid);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = potential.grid.point(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = x - potential.grid.point(j);
            const double a = -(potential[i] + dx * dx / (2.0 * T)) / (2.0 * beta);
            s += std::exp(a - log_shift[j]) * norm_rho[j] * rho0[j];
        }
        out[i] = h * s;
    }
    return DensityField::adopt(std::move(out));
}

/// Terminal density of the kernel map for a potential field, dense below the size limit.
inline DensityField apply_gibbs(const GridFn& potential, double T, double beta, const DensityField& rho0) {
    if (potential.size() > kDenseKernelLimit) return apply_gibbs_matrix_free(potential, T, beta, rho0);
    return apply_kernel(gibbs_kernel(potential, T, beta), rho0);
}

/// Kernel terminal density for a linear energy.
inline DensityField kernel_terminal_density(const ProxProblem& p) {
    p.validate();
    if (!p.spec.is_linear()) throw ConfigError("closed-form terminal density needs a linear energy");
    return apply_gibbs(sampled_potential(p), p.T, p.beta, p.rho0);
}

/// Snapshots of rho(t, x) and Phi(t, x) at t_l = l T / n_t.
struct SpaceTimeSolution {
    Grid1D grid;
    std::vector<double> times;
    std::vector<GridFn> rho;
    std::vector<GridFn> phi;

    std::size_t n_slices() const noexcept { return times.size(); }

    double max_mass_error() const {
        double e = 0.0;
        for (const auto& r : rho) e = std::max(e, std::abs(riemann_integral(r) - 1.0));
        return e;
    }
};

namespace detail {

/// log( h sum_k G_s(x_i, z_k) exp(log_f_k) ) for every grid point x_i.
inline std::vector<double> log_heat_convolve(const Grid1D& g, std::span<const double> log_f, double s, double beta) {
    const auto n = g.size();
    const double log_h = std::log(g.spacing());
    std::vector<double> out(n);
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = g.point(i);
        for (std::size_t k = 0; k < n; ++k) terms[k] = log_heat_kernel_1d(x, g.point(k), s, beta) + log_f[k];
        out[i] = log_sum_exp(terms) + log_h;
    }
    return out;
}

} // namespace detail

/// Space-time Hopf-Cole solution of a linear-energy problem: eta = G_{T-t} * e^{-V/2beta},
/// eta_hat = G_t * (rho0 / eta(0)), rho = eta * eta_hat, Phi = 2 beta log eta.
inline SpaceTimeSolution spacetime_solution(const ProxProblem& p, std::size_t n_t) {
    p.validate();
    if (!p.spec.is_linear()) throw ConfigError("space-time kernel solution needs a linear energy");
    if (n_t == 0) throw ConfigError("need at least one time step");
    const Grid1D& g = p.grid();
    const auto n = g.size();
    const GridFn v = sampled_potential(p);
    if (!v.all_finite()) throw DegenerateDenominator("potential has non-finite entries");

    std::vector<double> log_eta_T(n);
    for (std::size_t j = 0; j < n; ++j) log_eta_T[j] = -v[j] / (2.0 * p.beta);

    const std::vector<double> log_eta0 = detail::log_heat_convolve(g, log_eta_T, p.T, p.beta);
    std::vector<double> log_eta_hat0(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(log_eta0[j])) throw DegenerateDenominator("eta(0) underflowed");
        log_eta_hat0[j] = p.rho0[j] > 0.0 ? std::log(p.rho0[j]) - log_eta0[j] : detail::kNegInf;
    }

    SpaceTimeSolution sol{g, {}, {}, {}};
    for (std::size_t l = 0; l <= n_t; ++l) {
        const double t = p.T * static_cast<double>(l) / static_cast<double>(n_t);
        sol.times.push_back(t);
        GridFn rho(g), phi(g);
        if (l == 0) {
            rho = p.rho0.fn();
            for (std::size_t j = 0; j < n; ++j) phi[j] = 2.0 * p.beta * log_eta0[j];
        } else {
            const std::vector<double> log_eta =
                l == n_t ? log_eta_T : detail::log_heat_convolve(g, log_eta_T, p.T - t, p.beta);
            const std::vector<double> log_eta_hat = detail::log_heat_convolve(g, log_eta_hat0, t, p.beta);
            for (std::size_t j = 0; j < n; ++j) {
                rho[j] = std::exp(log_eta[j] + log_eta_hat[j]);
                phi[j] = l == n_t ? -v[j] : 2.0 * p.beta * log_eta[j];
            }
        }
        sol.rho.push_back(std::move(rho));
        sol.phi.push_back(std::move(phi));
    }
    return sol;
}

/// rho(t, x) from the double-integral formula and from its recast Gaussian form,
/// each evaluated by independent quadrature on the problem grid.
inline std::pair<double, double> rho_recast_check(const ProxProblem& p, double t, double x) {
    p.validate();
    if (!(t > 0.0 && t < p.T)) throw InvalidTime("recast check needs 0 < t < T");
    const Grid1D& g = p.grid();
    const auto n = g.size();
    const double h = g.spacing();
    const double beta = p.beta, T = p.T;
    const GridFn v = sampled_potential(p);

    std::vector<double> log_denom(n), terms(n);
    for (std::size_t jy = 0; jy < n; ++jy) {
        const double y = g.point(jy);
        for (std::size_t k = 0; k < n; ++k) {
            const double d = y - g.point(k);
            terms[k] = -(v[k] + d * d / (2.0 * T)) / (2.0 * beta);
        }
        log_denom[jy] = detail::log_sum_exp(terms) + std::log(h);
    }

    const double pref = std::pow(4.0 * std::numbers::pi * beta * t * (T - t) / T, -0.5);
    double direct = 0.0, recast = 0.0;
    for (std::size_t jy = 0; jy < n; ++jy) {
        if (p.rho0[jy] == 0.0) continue;
        const double y = g.point(jy);
        double sd = 0.0, sr = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double z = g.point(k);
            const double e_direct =
                -(v[k] + (x - z) * (x - z) / (2.0 * (T - t)) + (x - y) * (x - y) / (2.0 * t)) / (2.0 * beta);
            const double c = (t * z + (T - t) * y) / T;
            const double e_recast = -(v[k] + (y - z) * (y - z) / (2.0 * T)) / (2.0 * beta) -
                                    (x - c) * (x - c) / (2.0 * (T - t) * t / T) / (2.0 * beta);
            sd += std::exp(e_direct - log_denom[jy]);
            sr += std::exp(e_recast - log_denom[jy]);
        }
        direct += sd * p.rho0[jy];
        recast += sr * p.rho0[jy];
    }
    return {pref * h * h * direct, pref * h * h * recast};
}

/// Largest density magnitude at the two outermost grid points; a truncation diagnostic.
inline double boundary_magnitude(const GridFn& rho) {
    return std::max(std::abs(rho[0]), std::abs(rho[rho.size() - 1]));
}

} // namespace wprox
