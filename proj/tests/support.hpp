#pragma once

// Independent reference computations shared by the tests. Nothing here calls the
// solver code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "wprox/grid.hpp"

namespace testsupport {

inline double gaussian_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Mass of N(mean, sigma^2) on [lo, hi] via the error function.
inline double gaussian_mass_on_interval(double mean, double sigma, double lo, double hi) {
    const double s = sigma * std::sqrt(2.0);
    return 0.5 * (std::erf((hi - mean) / s) - std::erf((lo - mean) / s));
}

inline wprox::GridFn random_fn(const wprox::Grid1D& g, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    wprox::GridFn f(g);
    for (double& v : f.values) v = u(rng);
    return f;
}

/// Smooth zero-mean perturbation sum_k a_k sin(k pi (x + b)/b) with random amplitudes.
inline wprox::GridFn smooth_zero_mean(const wprox::Grid1D& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const double b = g.half_width();
    wprox::GridFn f(g);
    for (int k = 1; k <= 4; ++k) {
        const double a = n(rng) / k;
        for (std::size_t j = 0; j < g.size(); ++j) f[j] += a * std::sin(k * std::numbers::pi * (g.point(j) + b) / b);
    }
    return f;
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Max residual of the forward-backward pair
///   d_t rho + d_x(rho d_x Phi) = beta rho_xx,   d_t Phi + |d_x Phi|^2/2 + beta Phi_xx = 0
/// at interior space-time nodes, with central differences built from the sampled slices.
/// Only slices with t in [t_lo, t_hi] and points with |x| <= window count, so the interior region
/// is the same physical set on every mesh.
struct PairResidual {
    double fokker_planck = 0.0;
    double hamilton_jacobi = 0.0;
};

inline PairResidual pde_pair_residual(const std::vector<std::vector<double>>& rho, const std::vector<std::vector<double>>& phi,
                                      double b, double T, double beta, double t_lo, double t_hi, double window) {
    const std::size_t nt = rho.size() - 1;
    const std::size_t n = rho.front().size();
    const double h = 2.0 * b / static_cast<double>(n), ht = T / static_cast<double>(nt);
    PairResidual r;
    for (std::size_t l = 1; l < nt; ++l) {
        const double t = static_cast<double>(l) * ht;
        if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double x = static_cast<double>(j) * h - b;
            if (std::abs(x) > window) continue;
            const double rt = (rho[l + 1][j] - rho[l - 1][j]) / (2.0 * ht);
            const double pt = (phi[l + 1][j] - phi[l - 1][j]) / (2.0 * ht);
            const double px = (phi[l][j + 1] - phi[l][j - 1]) / (2.0 * h);
            const double pxx = (phi[l][j + 1] - 2.0 * phi[l][j] + phi[l][j - 1]) / (h * h);
            const double rxx = (rho[l][j + 1] - 2.0 * rho[l][j] + rho[l][j - 1]) / (h * h);
            // d_x(rho Phi_x) via flux differences at half points.
            const double fr = 0.5 * (rho[l][j + 1] + rho[l][j]) * (phi[l][j + 1] - phi[l][j]) / h;
            const double fl = 0.5 * (rho[l][j] + rho[l][j - 1]) * (phi[l][j] - phi[l][j - 1]) / h;
            r.fokker_planck = std::max(r.fokker_planck, std::abs(rt + (fr - fl) / h - beta * rxx));
            r.hamilton_jacobi = std::max(r.hamilton_jacobi, std::abs(pt + 0.5 * px * px + beta * pxx));
        }
    }
    return r;
}

/// Max residual of the forward/backward heat equations d_t eta_hat = beta eta_hat_xx and
/// d_t eta = -beta eta_xx for eta = e^{Phi/2beta}, eta_hat = rho e^{-Phi/2beta}.
inline PairResidual heat_system_residual(const std::vector<std::vector<double>>& rho,
                                         const std::vector<std::vector<double>>& phi, double b, double T, double beta,
                                         double t_lo, double t_hi, double window) {
    const std::size_t nt = rho.size() - 1;
    const std::size_t n = rho.front().size();
    const double h = 2.0 * b / static_cast<double>(n), ht = T / static_cast<double>(nt);
    std::vector<std::vector<double>> eta(nt + 1, std::vector<double>(n)), etah = eta;
    for (std::size_t l = 0; l <= nt; ++l)
        for (std::size_t j = 0; j < n; ++j) {
            eta[l][j] = std::exp(phi[l][j] / (2.0 * beta));
            etah[l][j] = rho[l][j] * std::exp(-phi[l][j] / (2.0 * beta));
        }
    PairResidual r;  // fokker_planck slot: forward equation for eta_hat; hamilton_jacobi slot: eta
    for (std::size_t l = 1; l < nt; ++l) {
        const double t = static_cast<double>(l) * ht;
        if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double x = static_cast<double>(j) * h - b;
            if (std::abs(x) > window) continue;
            const double a_t = (etah[l + 1][j] - etah[l - 1][j]) / (2.0 * ht);
            const double a_xx = (etah[l][j + 1] - 2.0 * etah[l][j] + etah[l][j - 1]) / (h * h);
            const double e_t = (eta[l + 1][j] - eta[l - 1][j]) / (2.0 * ht);
            const double e_xx = (eta[l][j + 1] - 2.0 * eta[l][j] + eta[l][j - 1]) / (h * h);
            r.fokker_planck = std::max(r.fokker_planck, std::abs(a_t - beta * a_xx));
            r.hamilton_jacobi = std::max(r.hamilton_jacobi, std::abs(e_t + beta * e_xx));
        }
    }
    return r;
}

} // namespace testsupport
