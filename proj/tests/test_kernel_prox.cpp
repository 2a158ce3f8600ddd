#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "wprox/analytic.hpp"
#include "wprox/kernel_prox.hpp"

using namespace wprox;

namespace {

DensityField gauss(const Grid1D& g, double mean, double sigma) {
    return normalize(GridFn::sample(g, [=](double x) { return testsupport::gaussian_pdf(x, mean, sigma); }));
}

ProxProblem example_a(std::size_t n) {
    Grid1D g(5.0, n);
    EnergySpec s;
    s.potential = energies::gaussian_bump_potential(1.0, -0.25, 0.5);
    return {gauss(g, 0.25, 0.1), s, 0.2, 0.25};
}

ProxProblem free_diffusion(std::size_t n, double mean, double sigma, double T, double beta) {
    return {gauss(Grid1D(5.0, n), mean, sigma), EnergySpec::zero(), T, beta};
}

ProxProblem quadratic_v(std::size_t n, double T, double beta, double x0 = 0.0) {
    EnergySpec s;
    s.potential = energies::quadratic_potential(x0);
    return {gauss(Grid1D(5.0, n), 0.25, 0.1), s, T, beta};
}

std::vector<std::vector<double>> as_rows(const std::vector<GridFn>& v) {
    std::vector<std::vector<double>> out;
    for (const auto& f : v) out.push_back(f.values);
    return out;
}

} // namespace

TEST(HeatKernel, Examples) {
    EXPECT_NEAR(heat_kernel(0.3, 0.3, 1.0, 0.25), 1.0 / std::sqrt(std::numbers::pi), 1e-15);
    EXPECT_NEAR(heat_kernel(0.3, 0.3, 1.0, 0.25), 0.56419, 1e-5);
    EXPECT_EQ(heat_kernel(0.1, -0.7, 0.3, 0.2), heat_kernel(-0.7, 0.1, 0.3, 0.2));
    EXPECT_THROW(heat_kernel(0.0, 0.0, 0.0, 0.25), InvalidTime);
    EXPECT_THROW(heat_kernel(0.0, 0.0, -1.0, 0.25), InvalidTime);

    // Mass on [-5, 5): the Gaussian has variance 2 beta t.
    Grid1D g(5.0, 320);
    auto f = GridFn::sample(g, [](double x) { return heat_kernel(x, 0.0, 0.2, 0.25); });
    const double oracle = testsupport::gaussian_mass_on_interval(0.0, std::sqrt(2.0 * 0.25 * 0.2), -5.0, 5.0);
    EXPECT_NEAR(riemann_integral(f), oracle, 1e-9);
    EXPECT_NEAR(riemann_integral(f), 1.0, 1e-9);
}

TEST(HeatKernel, MultiDimensional) {
    const std::vector<double> x{0.1, 0.2}, y{0.4, -0.2};
    const double r2 = 0.09 + 0.16;
    const double expected = std::exp(-r2 / (4.0 * 0.25 * 0.5)) / (4.0 * std::numbers::pi * 0.25 * 0.5);
    EXPECT_NEAR(heat_kernel(x, y, 0.5, 0.25), expected, 1e-15);
}

TEST(LinearKernel, ZeroPotentialIsNormalizedHeatKernel) {
    auto p = free_diffusion(80, 0.0, 0.5, 0.2, 0.25);
    auto k = linear_kernel(p);
    const Grid1D& g = p.grid();
    const double h = g.spacing();
    for (std::size_t j = 0; j < g.size(); j += 7) {
        double denom = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) denom += heat_kernel(g.point(i), g.point(j), 0.2, 0.25);
        denom *= h;
        for (std::size_t i = 0; i < g.size(); ++i)
            EXPECT_NEAR(k(i, j), heat_kernel(g.point(i), g.point(j), 0.2, 0.25) / denom, 1e-13);
    }
}

TEST(LinearKernel, ShiftInvariance) {
    auto p = example_a(160);
    auto shifted = p;
    shifted.spec.potential = [v = *p.spec.potential](double x) { return v(x) + 3.7; };
    auto k1 = linear_kernel(p), k2 = linear_kernel(shifted);
    double e = 0.0;
    for (std::size_t i = 0; i < k1.entries.size(); ++i) e = std::max(e, std::abs(k1.entries[i] - k2.entries[i]));
    EXPECT_LE(e, 1e-12);

    auto c = free_diffusion(120, 0.0, 0.5, 0.2, 0.25);
    auto c2 = c;
    c2.spec.potential = [](double) { return 5.0; };
    auto z1 = linear_kernel(c), z2 = linear_kernel(c2);
    for (std::size_t i = 0; i < z1.entries.size(); ++i) EXPECT_NEAR(z1.entries[i], z2.entries[i], 1e-12);
}

TEST(LinearKernel, ColumnStochasticAndNonnegative) {
    for (auto p : {example_a(160), example_a(320), quadratic_v(200, 1.0, 0.5)}) {
        auto k = linear_kernel(p);
        const auto n = k.size();
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_GE(k(i, j), 0.0);
                s += k(i, j);
            }
            EXPECT_NEAR(s * p.grid().spacing(), 1.0, 1e-13);
        }
    }
}

TEST(LinearKernel, ColumnStochasticAgainstAnalyticDenominator) {
    // For V = 0 the exact denominator is the Gaussian mass of G_T on R, i.e. 1. Replacing the
    // grid sum by it leaves every column summing to 1 within 1e-6 for columns away from the edge.
    auto p = free_diffusion(320, 0.0, 0.5, 0.2, 0.25);
    const Grid1D& g = p.grid();
    const double h = g.spacing();
    for (std::size_t j = 0; j < g.size(); ++j) {
        if (std::abs(g.point(j)) > 3.0) continue;
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += heat_kernel(g.point(i), g.point(j), p.T, p.beta);
        EXPECT_NEAR(s * h, 1.0, 1e-6);
    }
}

TEST(LinearKernel, RejectsNonlinearSpec) {
    auto p = example_a(40);
    p.spec.internal = energies::quadratic_internal(1.0);
    EXPECT_THROW(linear_kernel(p), ConfigError);
}

TEST(ApplyKernel, HeatReductionOnGaussians) {
    for (double mean : {0.0, 0.4}) {
        auto p = free_diffusion(320, mean, 0.3, 0.2, 0.25);
        auto out = kernel_terminal_density(p);
        auto exact = GridFn::sample(p.grid(), [=](double x) {
            return testsupport::gaussian_pdf(x, mean, std::sqrt(0.09 + 2.0 * 0.25 * 0.2));
        });
        EXPECT_LE(l2_distance(out, exact), 1e-6);
    }
}

TEST(ApplyKernel, ShortTimeIsNearIdentity) {
    auto p = free_diffusion(320, 0.25, 0.1, 1e-4, 0.25);
    EXPECT_LE(l2_distance(kernel_terminal_density(p), p.rho0), 1e-3);
}

TEST(ApplyKernel, ShapeMismatch) {
    auto p = example_a(80);
    auto k = linear_kernel(p);
    auto other = gauss(Grid1D(5.0, 100), 0.0, 1.0);
    EXPECT_THROW(apply_kernel(k, other), ShapeMismatch);
}

TEST(ApplyKernel, MatrixFreeAgreesWithDense) {
    auto p = example_a(200);
    auto v = sampled_potential(p);
    auto dense = apply_kernel(gibbs_kernel(v, p.T, p.beta), p.rho0);
    auto free = apply_gibbs_matrix_free(v, p.T, p.beta, p.rho0);
    for (std::size_t j = 0; j < p.grid().size(); ++j) EXPECT_NEAR(dense[j], free[j], 1e-13);
}

TEST(NonlinearKernel, LinearSpecIgnoresGuess) {
    auto p = example_a(120);
    auto k0 = linear_kernel(p);
    auto k1 = nonlinear_kernel(p, gauss(p.grid(), -1.0, 0.3));
    EXPECT_EQ(k0.entries, k1.entries);
}

TEST(NonlinearKernel, UsesFirstVariation) {
    auto p = example_a(100);
    p.spec.interaction = energies::quadratic_interaction(0.2);
    auto guess = gauss(p.grid(), 0.5, 0.1);
    auto k = nonlinear_kernel(p, guess);
    auto ref = gibbs_kernel(first_variation(p.spec, guess), p.T, p.beta);
    EXPECT_EQ(k.entries, ref.entries);
}

TEST(SpaceTime, EndpointsAndMass) {
    auto p = example_a(160);
    auto sol = spacetime_solution(p, 16);
    ASSERT_EQ(sol.n_slices(), 17u);
    EXPECT_EQ(sol.rho.front().values, p.rho0.values());
    auto rk = apply_kernel(linear_kernel(p), p.rho0);
    for (std::size_t j = 0; j < p.grid().size(); ++j) {
        EXPECT_NEAR(sol.rho.back()[j], rk[j], 1e-10);
        EXPECT_EQ(sol.phi.back()[j], -(*p.spec.potential)(p.grid().point(j)));
    }
    EXPECT_LE(sol.max_mass_error(), 1e-6);
    for (const auto& f : sol.phi) EXPECT_TRUE(f.all_finite());
    EXPECT_DOUBLE_EQ(sol.times.back(), 0.2);
}

TEST(SpaceTime, MassConservationAcrossSlices) {
    for (auto p : {example_a(200), quadratic_v(160, 1.0, 0.25), free_diffusion(160, 0.0, 0.2, 0.5, 0.1)}) {
        auto sol = spacetime_solution(p, 20);
        for (const auto& r : sol.rho) EXPECT_NEAR(riemann_integral(r), 1.0, 1e-6);
    }
}

TEST(SpaceTime, AnalyticPhiAtOrigin) {
    EnergySpec s;
    s.potential = energies::quadratic_potential(0.0);
    ProxProblem p{gauss(Grid1D(5.0, 320), 0.25, 0.1), s, 1.0, 0.5};
    auto sol = spacetime_solution(p, 4);
    ASSERT_EQ(p.grid().point(160), 0.0);
    EXPECT_NEAR(sol.phi.front()[160], 0.5 * std::log(0.5), 1e-6);
    EXPECT_NEAR(sol.phi.front()[160], -0.34657, 1e-5);
}

TEST(SpaceTime, RejectsNonlinear) {
    auto p = example_a(40);
    p.spec.interaction = energies::quadratic_interaction(0.2);
    EXPECT_THROW(spacetime_solution(p, 4), ConfigError);
}

TEST(RecastCheck, ExampleAPairAgrees) {
    auto p = example_a(160);
    for (double x : {0.0, 0.25, -0.5, 1.0}) {
        auto [direct, recast] = rho_recast_check(p, p.T / 2, x);
        EXPECT_NEAR(direct, recast, 1e-8) << x;
        EXPECT_GT(direct, 0.0);
    }
    EXPECT_THROW(rho_recast_check(p, 0.0, 0.0), InvalidTime);
    EXPECT_THROW(rho_recast_check(p, p.T, 0.0), InvalidTime);
}

TEST(RecastCheck, FreeDiffusionMatchesHeatSolution) {
    auto p = free_diffusion(320, 0.25, 0.1, 0.2, 0.25);
    const double t = 0.1;
    for (double x : {0.0, 0.25, 0.6}) {
        auto [direct, recast] = rho_recast_check(p, t, x);
        const double heat = testsupport::gaussian_pdf(x, 0.25, std::sqrt(0.01 + 2.0 * 0.25 * t));
        EXPECT_NEAR(direct, heat, 1e-8) << x;
        EXPECT_NEAR(recast, heat, 1e-8) << x;
    }
}

TEST(RecastCheck, QuadraticPotentialMatchesClosedForm) {
    auto p = quadratic_v(320, 0.2, 0.25);
    const double t = 0.1;
    auto exact = analytic::quadratic_rho_t(analytic::GaussianDensity(0.25, 0.01), 0.0, t, 0.2, 0.25);
    for (double x : {0.0, 0.2, 0.5}) {
        auto [direct, recast] = rho_recast_check(p, t, x);
        EXPECT_NEAR(direct, exact.pdf(x), 1e-6) << x;
        EXPECT_NEAR(recast, exact.pdf(x), 1e-6) << x;
    }
}

TEST(SpaceTime, PdePairResidualHalves) {
    // Central-difference residual of the forward-backward pair on the sampled solution.
    std::vector<testsupport::PairResidual> res;
    for (auto [n, nt] : {std::pair<std::size_t, std::size_t>{160, 16}, {320, 32}, {640, 64}}) {
        auto p = example_a(n);
        auto sol = spacetime_solution(p, nt);
        res.push_back(testsupport::pde_pair_residual(as_rows(sol.rho), as_rows(sol.phi), 5.0, p.T, p.beta, p.T / 8, 7 * p.T / 8, 3.0));
    }
    for (std::size_t k = 1; k < res.size(); ++k) {
        EXPECT_GE(res[k - 1].fokker_planck / res[k].fokker_planck, 2.5) << k;
        EXPECT_GE(res[k - 1].hamilton_jacobi / res[k].hamilton_jacobi, 2.5) << k;
    }
}

TEST(SpaceTime, HopfColeHeatSystemResidualHalves) {
    std::vector<testsupport::PairResidual> res;
    for (auto [n, nt] : {std::pair<std::size_t, std::size_t>{160, 16}, {320, 32}, {640, 64}}) {
        auto p = example_a(n);
        auto sol = spacetime_solution(p, nt);
        res.push_back(
            testsupport::heat_system_residual(as_rows(sol.rho), as_rows(sol.phi), 5.0, p.T, p.beta, p.T / 8, 7 * p.T / 8, 3.0));
    }
    for (std::size_t k = 1; k < res.size(); ++k) {
        EXPECT_GE(res[k - 1].fokker_planck / res[k].fokker_planck, 2.5) << k;
        EXPECT_GE(res[k - 1].hamilton_jacobi / res[k].hamilton_jacobi, 2.5) << k;
    }
}

TEST(BoundaryMagnitude, SmallForPaperSetups) {
    auto p = example_a(160);
    EXPECT_LT(boundary_magnitude(kernel_terminal_density(p)), 1e-12);
}
