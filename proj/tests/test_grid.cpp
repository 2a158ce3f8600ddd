#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "wprox/grid.hpp"

using namespace wprox;

TEST(Grid1D, SpacingAndPoints) {
    Grid1D g(5.0, 160);
    EXPECT_DOUBLE_EQ(g.spacing() * 160, 10.0);
    EXPECT_EQ(g.point(0), -5.0);
    auto xs = g.points();
    for (std::size_t j = 1; j < xs.size(); ++j) EXPECT_LT(xs[j - 1], xs[j]);
    EXPECT_LT(xs.back(), 5.0);
    EXPECT_NEAR(xs.back() + g.spacing(), 5.0, 1e-13);
    EXPECT_EQ(g.wrap(160), 0u);
    EXPECT_EQ(g.wrap(-1), 159u);
}

TEST(Grid1D, RejectsBadInput) {
    EXPECT_THROW(Grid1D(0.0, 10), ConfigError);
    EXPECT_THROW(Grid1D(-1.0, 10), ConfigError);
    EXPECT_THROW(Grid1D(1.0, 0), ConfigError);
}

TEST(RiemannIntegral, ConstantAndZero) {
    Grid1D g(5.0, 160);
    EXPECT_DOUBLE_EQ(riemann_integral(GridFn(g, 1.0)), 10.0);
    EXPECT_EQ(riemann_integral(GridFn(g, 0.0)), 0.0);
}

TEST(RiemannIntegral, GaussianAgainstErf) {
    Grid1D g(5.0, 320);
    auto f = GridFn::sample(g, [](double x) { return testsupport::gaussian_pdf(x, 0.0, 1.0); });
    // Endpoint sum = trapezoid; leading Euler-Maclaurin term h^2/12 (f'(b) - f'(-b)).
    const double h = g.spacing();
    const double dfb = -5.0 * testsupport::gaussian_pdf(5.0, 0.0, 1.0);
    const double oracle = testsupport::gaussian_mass_on_interval(0.0, 1.0, -5.0, 5.0) + h * h / 12.0 * 2.0 * dfb;
    EXPECT_NEAR(riemann_integral(f), oracle, 1e-12);
    EXPECT_NEAR(riemann_integral(f), 1.0, 1e-6);
}

TEST(RiemannIntegral, ConvergesOnDecayingIntegrand) {
    auto err = [](std::size_t n) {
        Grid1D g(3.0, n);
        auto f = GridFn::sample(g, [](double x) { return std::exp(-x * x / 0.5) * (1.0 + 0.3 * x); });
        const double exact =
            testsupport::gaussian_mass_on_interval(0.0, 0.5, -3.0, 3.0) * std::sqrt(std::numbers::pi * 0.5);
        return std::abs(riemann_integral(f) - exact);
    };
    for (std::size_t n : {6, 8, 10}) EXPECT_GE(err(n) / std::max(err(2 * n), 1e-300), 3.0) << n;
}

TEST(L2Norm, Examples) {
    Grid1D g(5.0, 160);
    EXPECT_EQ(l2_norm(GridFn(g, 0.0)), 0.0);
    EXPECT_NEAR(l2_norm(GridFn(g, 1.0)), std::sqrt(10.0), 1e-14);
    GridFn spike(g, 0.0);
    spike[7] = 1.0 / std::sqrt(g.spacing());
    EXPECT_NEAR(l2_norm(spike), 1.0, 1e-14);
}

TEST(Normalize, Examples) {
    Grid1D g(5.0, 160);
    auto d = normalize(GridFn(g, 2.0));
    for (double v : d.values()) EXPECT_NEAR(v, 0.1, 1e-15);
    EXPECT_THROW(normalize(GridFn(g, 0.0)), NonpositiveMass);

    Grid1D g2(5.0, 320);
    auto e = normalize(GridFn::sample(g2, [](double x) { return std::exp(-x * x); }));
    double m = 0.0;
    for (double v : e.values()) m += v;
    EXPECT_NEAR(m * g2.spacing(), 1.0, 1e-12);
}

TEST(Normalize, NegativeHandling) {
    Grid1D g(1.0, 4);
    GridFn f(g, std::vector<double>{1.0, -5e-13, 1.0, 1.0});
    auto d = normalize(f);
    EXPECT_EQ(d[1], 0.0);
    GridFn bad(g, std::vector<double>{1.0, -1e-9, 1.0, 1.0});
    EXPECT_THROW(normalize(bad), NonpositiveMass);
}

TEST(Normalize, Idempotent) {
    Grid1D g(5.0, 200);
    auto d1 = normalize(GridFn::sample(g, [](double x) { return std::exp(-(x - 0.3) * (x - 0.3)) + 0.01; }));
    auto d2 = normalize(d1.fn());
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(d1[j], d2[j], 1e-14);
}

TEST(DensityFieldAdopt, ChecksMass) {
    Grid1D g(5.0, 10);
    EXPECT_NO_THROW(DensityField::adopt(GridFn(g, 0.1)));
    EXPECT_THROW(DensityField::adopt(GridFn(g, 0.2)), NonpositiveMass);
}

TEST(PeriodicLaplacian, Examples) {
    Grid1D g(5.0, 64);
    const double h2 = g.spacing() * g.spacing();
    auto zero = periodic_laplacian(GridFn(g, 3.7));
    for (double v : zero.values) EXPECT_NEAR(v, 0.0, 1e-10);

    GridFn spike(g, 0.0);
    spike[0] = 1.0;
    auto ls = periodic_laplacian(spike);
    EXPECT_DOUBLE_EQ(ls[0], -2.0 / h2);
    EXPECT_DOUBLE_EQ(ls[1], 1.0 / h2);
    EXPECT_DOUBLE_EQ(ls[63], 1.0 / h2);
    for (std::size_t j = 2; j < 63; ++j) EXPECT_EQ(ls[j], 0.0);
}

TEST(PeriodicLaplacian, CosineSecondOrder) {
    auto max_err = [](std::size_t n) {
        Grid1D g(5.0, n);
        const double k = std::numbers::pi / 5.0;
        auto f = GridFn::sample(g, [k](double x) { return std::cos(k * x); });
        auto lf = periodic_laplacian(f);
        double e = 0.0;
        for (std::size_t j = 0; j < n; ++j) e = std::max(e, std::abs(lf[j] + k * k * f[j]));
        return e;
    };
    const double e1 = max_err(40), e2 = max_err(80);
    EXPECT_LT(e1, 2e-3);
    EXPECT_NEAR(e1 / e2, 4.0, 0.05);
}

TEST(UpwindDivergence, Examples) {
    Grid1D g(1.0, 4);
    const double h = g.spacing();
    auto d0 = upwind_divergence(GridFn(g, 2.5), GridFn(g, 0.0));
    for (double v : d0.values) EXPECT_EQ(v, 0.0);
    auto dz = upwind_divergence(GridFn(g, 0.0), GridFn(g, 0.0));
    for (double v : dz.values) EXPECT_EQ(v, 0.0);

    // Hand-applied stencil (m+_j - m+_{j-1})/h: a unit spike at j = 0 contributes +1/h at j = 0
    // and -1/h at j = 1.
    GridFn spike(g, 0.0);
    spike[0] = 1.0;
    auto ds = upwind_divergence(spike, GridFn(g, 0.0));
    EXPECT_DOUBLE_EQ(ds[0], 1.0 / h);
    EXPECT_DOUBLE_EQ(ds[1], -1.0 / h);
    EXPECT_EQ(ds[2], 0.0);
    EXPECT_EQ(ds[3], 0.0);

    // m-: -(m-_{j+1} - m-_j)/h, so a spike at j = 0 gives +1/h at j = 0 and -1/h at j = 3.
    auto dm = upwind_divergence(GridFn(g, 0.0), spike);
    EXPECT_DOUBLE_EQ(dm[0], 1.0 / h);
    EXPECT_DOUBLE_EQ(dm[3], -1.0 / h);
}

TEST(UpwindDivergence, RejectsNegativeFlux) {
    Grid1D g(1.0, 4);
    GridFn bad(g, 0.0);
    bad[2] = -1e-9;
    EXPECT_THROW(upwind_divergence(bad, GridFn(g, 0.0)), NegativeFluxComponent);
    EXPECT_THROW(upwind_divergence(GridFn(g, 0.0), bad), NegativeFluxComponent);
    bad[2] = -1e-13;
    EXPECT_NO_THROW(upwind_divergence(bad, GridFn(g, 0.0)));
}

TEST(GridProperties, DivergenceAndLaplacianAreMassNeutral) {
    Grid1D g(5.0, 97);
    for (int trial = 0; trial < 5; ++trial) {
        auto mp = testsupport::random_fn(g, 100 + trial, 0.0, 3.0);
        auto mm = testsupport::random_fn(g, 200 + trial, 0.0, 3.0);
        auto f = testsupport::random_fn(g, 300 + trial, -2.0, 2.0);
        EXPECT_NEAR(riemann_integral(upwind_divergence(mp, mm)), 0.0, 1e-13);
        EXPECT_NEAR(riemann_integral(periodic_laplacian(f)), 0.0, 1e-13);
    }
}
