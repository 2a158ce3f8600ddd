#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wprox/errors.hpp"

namespace wprox {

/// Uniform periodic mesh of [-b, b): x_j = j*h - b for j = 0..n-1, with x_n identified with x_0.
class Grid1D {
public:
    Grid1D(double half_width, std::size_t n_cells) : b_(half_width), n_(n_cells) {
        if (!(half_width > 0.0) || !std::isfinite(half_width))
            throw ConfigError("grid half-width must be positive and finite");
        if (n_cells == 0) throw ConfigError("grid needs at least one cell");
    }

    double half_width() const noexcept { return b_; }
    std::size_t size() const noexcept { return n_; }
    double spacing() const noexcept { return 2.0 * b_ / static_cast<double>(n_); }
    double point(std::size_t j) const noexcept { return static_cast<double>(j) * spacing() - b_; }

    std::vector<double> points() const {
        std::vector<double> xs(n_);
        for (std::size_t j = 0; j < n_; ++j) xs[j] = point(j);
        return xs;
    }

    std::size_t wrap(std::ptrdiff_t j) const noexcept {
        const auto n = static_cast<std::ptrdiff_t>(n_);
        return static_cast<std::size_t>(((j % n) + n) % n);
    }

    friend bool operator==(const Grid1D& a, const Grid1D& b) noexcept {
        return a.b_ == b.b_ && a.n_ == b.n_;
    }

private:
    double b_;
    std::size_t n_;
};

/// Real values attached to the points of a grid.
struct GridFn {
    Grid1D grid;
    std::vector<double> values;

    explicit GridFn(const Grid1D& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    GridFn(const Grid1D& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) throw ShapeMismatch("grid function length differs from grid size");
    }

    static GridFn sample(const Grid1D& g, const std::function<double(double)>& f) {
        GridFn out(g);
        for (std::size_t j = 0; j < g.size(); ++j) out.values[j] = f(g.point(j));
        return out;
    }

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t j) const noexcept { return values[j]; }
    double& operator[](std::size_t j) noexcept { return values[j]; }
    std::span<const double> view() const noexcept { return values; }

    bool all_finite() const noexcept {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_grid(const GridFn& a, const GridFn& b) {
    if (!(a.grid == b.grid) || a.size() != b.size()) throw ShapeMismatch("grid functions live on different grids");
}

inline GridFn operator-(const GridFn& a, const GridFn& b) {
    require_same_grid(a, b);
    GridFn out(a.grid);
    for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
    return out;
}

inline double riemann_integral(const GridFn& f) {
    // Fixed left-to-right order keeps results bitwise reproducible.
    double s = 0.0;
    for (double v : f.values) s += v;
    return f.grid.spacing() * s;
}

inline double l2_norm(const GridFn& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    return std::sqrt(f.grid.spacing() * s);
}

inline double l2_distance(const GridFn& a, const GridFn& b) { return l2_norm(a - b); }

inline constexpr double kNegativeClampTol = 1e-12;

/// Nonnegative grid function with unit discrete mass. Only constructible through
/// normalization or a checked adoption of already-normalized values.
class DensityField {
public:
    const Grid1D& grid() const noexcept { return fn_.grid; }
    const GridFn& fn() const noexcept { return fn_; }
    operator const GridFn&() const noexcept { return fn_; }
    std::size_t size() const noexcept { return fn_.size(); }
    double operator[](std::size_t j) const noexcept { return fn_[j]; }
    std::span<const double> view() const noexcept { return fn_.view(); }
    const std::vector<double>& values() const noexcept { return fn_.values; }

    double mass() const { return riemann_integral(fn_); }

    /// Adopts values that already carry unit mass (within `tol`); negatives above -1e-12 are clamped.
    static DensityField adopt(GridFn f, double tol = 1e-6) {
        clamp_or_throw(f);
        const double m = riemann_integral(f);
        if (!(std::abs(m - 1.0) <= tol))
            throw NonpositiveMass("density mass " + std::to_string(m) + " is not 1 within tolerance");
        return DensityField(std::move(f));
    }

    friend DensityField normalize(const GridFn& f);

private:
    explicit DensityField(GridFn f) : fn_(std::move(f)) {}

    static void clamp_or_throw(GridFn& f) {
        for (double& v : f.values) {
            if (!std::isfinite(v)) throw NonpositiveMass("density has non-finite entries");
            if (v < -kNegativeClampTol) throw NonpositiveMass("density has negative entries");
            if (v < 0.0) v = 0.0;
        }
    }

    GridFn fn_;
};

inline DensityField normalize(const GridFn& f) {
    GridFn g = f;
    DensityField::clamp_or_throw(g);
    const double m = riemann_integral(g);
    if (!(m > 0.0)) throw NonpositiveMass("cannot normalize a function with nonpositive integral");
    for (double& v : g.values) v /= m;
    return DensityField(std::move(g));
}

inline GridFn periodic_laplacian(const GridFn& f) {
    const auto n = f.size();
    const double inv_h2 = 1.0 / (f.grid.spacing() * f.grid.spacing());
    GridFn out(f.grid);
    for (std::size_t j = 0; j < n; ++j) {
        const double fp = f[(j + 1) % n];
        const double fm = f[(j + n - 1) % n];
        out[j] = (fp + fm - 2.0 * f[j]) * inv_h2;
    }
    return out;
}

/// Split-flux divergence with both components stored nonnegative: the signed flux is
/// m = m_plus - m_minus, m_plus differenced backward and m_minus forward (upwind).
inline GridFn upwind_divergence(const GridFn& m_plus, const GridFn& m_minus) {
    require_same_grid(m_plus, m_minus);
    for (std::size_t j = 0; j < m_plus.size(); ++j) {
        if (m_plus[j] < -kNegativeClampTol || m_minus[j] < -kNegativeClampTol)
            throw NegativeFluxComponent("split flux components must be nonnegative");
    }
    const auto n = m_plus.size();
    const double inv_h = 1.0 / m_plus.grid.spacing();
    GridFn out(m_plus.grid);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jm = (j + n - 1) % n;
        const std::size_t jp = (j + 1) % n;
        out[j] = (m_plus[j] - m_plus[jm]) * inv_h - (m_minus[jp] - m_minus[j]) * inv_h;
    }
    return out;
}

} // namespace wprox
