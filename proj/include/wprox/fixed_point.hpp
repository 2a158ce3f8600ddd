#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "wprox/kernel_prox.hpp"

namespace wprox {

struct FixedPointOptions {
    double tol = 1e-10;
    std::size_t max_iters = 200;
    /// When set, exactly this many iterations run and `tol` only decides the converged flag.
    std::optional<std::size_t> fixed_iterations;
    /// Snapshot iterations to keep, iteration 0 being rho0.
    std::vector<std::size_t> keep = {0, 1, 2, 5, 10, 20};
    /// Additionally keep every k-th iterate when nonzero.
    std::size_t keep_every = 0;
};

struct FixedPointReport {
    std::vector<std::pair<std::size_t, DensityField>> iterates_kept;
    std::vector<double> residuals;  // residuals[n-1] = |rho^n - rho^{n-1}|
    std::size_t n_iters = 0;
    bool converged = false;
    std::optional<DensityField> final;
};

/// Picard iteration rho^n = K[rho^{n-1}] rho0 starting from rho^0 = rho0.
inline FixedPointReport solve_fixed_point(const ProxProblem& p, const FixedPointOptions& opt = {}) {
    p.validate();
    if (!(opt.tol > 0.0)) throw ConfigError("fixed-point tolerance must be positive");
    const std::size_t budget = opt.fixed_iterations.value_or(opt.max_iters);
    if (budget < 1) throw ConfigError("fixed-point iteration needs at least one step");

    auto keep = [&](std::size_t n) {
        if (opt.keep_every != 0 && n % opt.keep_every == 0) return true;
        return std::find(opt.keep.begin(), opt.keep.end(), n) != opt.keep.end();
    };

    FixedPointReport report;
    DensityField current = p.rho0;
    if (keep(0)) report.iterates_kept.emplace_back(0, current);
    for (std::size_t n = 1; n <= budget; ++n) {
        DensityField next = apply_gibbs(first_variation(p.spec, current), p.T, p.beta, p.rho0);
        const double r = l2_distance(next, current);
        report.residuals.push_back(r);
        report.n_iters = n;
        current = std::move(next);
        if (keep(n)) report.iterates_kept.emplace_back(n, current);
        if (!opt.fixed_iterations && r <= opt.tol) break;
    }
    report.converged = report.residuals.back() <= opt.tol;
    report.final = current;
    return report;
}

} // namespace wprox
