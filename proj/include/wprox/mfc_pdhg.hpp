#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wprox/energy.hpp"
#include "wprox/grid.hpp"
#include "wprox/kernel_prox.hpp"

// Finite-difference mean-field control oracle solved by primal-dual hybrid gradient.
//
// Unknowns on a uniform (t_l, x_j) mesh: rho^l for l = 1..N (rho^0 = rho0 is pinned),
// split fluxes m+^l, m-^l >= 0 for l = 1..N (signed flux m+ - m-), and multipliers
// Phi^l for the N implicit constraints
//   (rho^{l+1} - rho^l)/h_t + div m^{l+1} - beta Lap rho^{l+1} = 0,  l = 0..N-1.
// Both primal and dual spaces carry the weight h_t h_x, so the weights cancel from
// the constraint term and only rescale the terminal energy by 1/h_t.
namespace wprox {

inline constexpr double kRhoFloor = 1e-10;
/// Per-slice mass tolerance of a converged trajectory.
inline constexpr double kMassTolerance = 5e-4;

struct PdhgConfig {
    std::size_t n_t = 64;
    /// Nonpositive step sizes select the defaults: 0.95 / L each without preconditioning;
    /// with preconditioning tau = default_tau(spec) and sigma = 0.95^2 / tau.
    double tau = -1.0;
    double sigma = -1.0;
    double theta = 1.0;
    std::size_t max_iters = 200000;
    double tol = 1e-7;
    /// Precondition the dual step with (A A^T)^{-1}; L = 1 in that metric.
    bool preconditioned = true;
    std::size_t log_every = 100;
    std::size_t power_iters = 50;

    static std::size_t default_n_t(double T) { return T <= 0.2 ? 64 : 128; }
    /// The linearized interaction term tolerates only short primal steps.
    static double default_tau(const EnergySpec& spec) { return spec.interaction ? 0.005 : 0.03; }
};

struct PdhgState {
    Grid1D grid;
    std::size_t n_t;
    std::vector<double> rho;      // (n_t + 1) x n_x, row 0 = rho0
    std::vector<double> m_plus;   // n_t x n_x, row l-1 holds time level l
    std::vector<double> m_minus;  // n_t x n_x
    std::vector<double> phi;      // n_t x n_x, row l multiplies constraint l
    std::vector<double> rho_bar;
    std::vector<double> m_plus_bar;
    std::vector<double> m_minus_bar;

    PdhgState(const DensityField& rho0, std::size_t steps)
        : grid(rho0.grid()), n_t(steps), rho((steps + 1) * rho0.size()), m_plus(steps * rho0.size(), 0.0),
          m_minus(steps * rho0.size(), 0.0), phi(steps * rho0.size(), 0.0) {
        const auto n = rho0.size();
        for (std::size_t l = 0; l <= steps; ++l)
            std::copy(rho0.values().begin(), rho0.values().end(), rho.begin() + static_cast<std::ptrdiff_t>(l * n));
        rho_bar = rho;
        m_plus_bar = m_plus;
        m_minus_bar = m_minus;
    }

    std::size_t n_x() const noexcept { return grid.size(); }
    std::span<const double> rho_slice(std::size_t l) const { return {rho.data() + l * n_x(), n_x()}; }
};

struct PdhgLogEntry {
    std::size_t iter;
    double primal_change;
    double lagrangian;
    double mass_error;
};

struct PdhgResult {
    SpaceTimeSolution trajectory;
    DensityField terminal;
    std::vector<PdhgLogEntry> log;
    std::size_t iterations = 0;
    double final_primal_change = 0.0;
    double final_mass_error = 0.0;
    bool converged = false;
    double tau = 0.0;
    double sigma = 0.0;
    double operator_norm = 0.0;
    /// Set when the terminal slice missed kMassTolerance and was rescaled to unit mass.
    bool terminal_renormalized = false;
};

namespace pdhg_detail {

struct Mesh {
    std::size_t n;    // spatial points
    std::size_t n_t;  // time steps
    double h;
    double h_t;
    double beta;
};

/// r^l = a rho^{l+1} - rho^l / h_t + D+ m+^{l+1} + D- m-^{l+1}, a = 1/h_t - beta Lap.
/// `rho` has n_t + 1 rows; row 0 enters only through the -rho^0/h_t term.
inline void apply_constraint(const Mesh& g, std::span<const double> rho, std::span<const double> mp,
                             std::span<const double> mm, std::span<double> out) {
    const auto n = g.n;
    const double ih = 1.0 / g.h, iht = 1.0 / g.h_t, bl = g.beta / (g.h * g.h);
    for (std::size_t l = 0; l < g.n_t; ++l) {
        const double* r0 = rho.data() + l * n;
        const double* r1 = rho.data() + (l + 1) * n;
        const double* p = mp.data() + l * n;
        const double* q = mm.data() + l * n;
        double* o = out.data() + l * n;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jm = j == 0 ? n - 1 : j - 1;
            const std::size_t jp = j + 1 == n ? 0 : j + 1;
            o[j] = (r1[j] - r0[j]) * iht + (p[j] - p[jm]) * ih - (q[jp] - q[j]) * ih -
                   bl * (r1[jp] + r1[jm] - 2.0 * r1[j]);
        }
    }
}

/// Adjoint of the constraint restricted to the unknown rows rho^1..rho^N.
inline void apply_adjoint(const Mesh& g, std::span<const double> phi, std::span<double> g_rho,
                          std::span<double> g_mp, std::span<double> g_mm) {
    const auto n = g.n;
    const double ih = 1.0 / g.h, iht = 1.0 / g.h_t, bl = g.beta / (g.h * g.h);
    for (std::size_t l = 1; l <= g.n_t; ++l) {
        const double* f0 = phi.data() + (l - 1) * n;
        const double* f1 = l < g.n_t ? phi.data() + l * n : nullptr;
        double* gr = g_rho.data() + (l - 1) * n;
        double* gp = g_mp.data() + (l - 1) * n;
        double* gm = g_mm.data() + (l - 1) * n;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jm = j == 0 ? n - 1 : j - 1;
            const std::size_t jp = j + 1 == n ? 0 : j + 1;
            double v = f0[j] * iht - bl * (f0[jp] + f0[jm] - 2.0 * f0[j]);
            if (f1) v -= f1[j] * iht;
            gr[j] = v;
            gp[j] = (f0[j] - f0[jp]) * ih;
            gm[j] = (f0[j] - f0[jm]) * ih;
        }
    }
}

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Solves (A A^T) phi = r exactly: A A^T is block tridiagonal in time with circulant
/// blocks, so each spatial Fourier mode reduces to a real tridiagonal system.
class NormalEquationSolver {
public:
    explicit NormalEquationSolver(const Mesh& g)
        : g_(g), nk_(g.n / 2 + 1), real_(g.n * g.n_t), spec_(nk_ * g.n_t), cp_(nk_ * g.n_t), inv_den_(nk_ * g.n_t) {
        const double iht = 1.0 / g.h_t;
        for (std::size_t k = 0; k < nk_; ++k) {
            const double s = std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(g.n));
            const double lap = 4.0 * s * s / (g.h * g.h);
            const double a = iht + g.beta * lap;
            const double off = -a * iht;
            double prev_cp = 0.0;
            for (std::size_t l = 0; l < g.n_t; ++l) {
                const double diag = a * a + 2.0 * lap + (l >= 1 ? iht * iht : 0.0);
                const double den = l == 0 ? diag : diag - off * prev_cp;
                inv_den_[k * g.n_t + l] = 1.0 / den;
                prev_cp = off / den;
                cp_[k * g.n_t + l] = prev_cp;
            }
            off_.push_back(off);
        }
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        const int len = static_cast<int>(g.n);
        const int howmany = static_cast<int>(g.n_t);
        auto* cbuf = reinterpret_cast<fftw_complex*>(spec_.data());
        forward_ = fftw_plan_many_dft_r2c(1, &len, howmany, real_.data(), nullptr, 1, len, cbuf, nullptr, 1,
                                          static_cast<int>(nk_), FFTW_ESTIMATE);
        backward_ = fftw_plan_many_dft_c2r(1, &len, howmany, cbuf, nullptr, 1, static_cast<int>(nk_), real_.data(),
                                           nullptr, 1, len, FFTW_ESTIMATE);
    }

    NormalEquationSolver(const NormalEquationSolver&) = delete;
    NormalEquationSolver& operator=(const NormalEquationSolver&) = delete;

    ~NormalEquationSolver() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    void solve(std::span<const double> rhs, std::span<double> out) {
        std::copy(rhs.begin(), rhs.end(), real_.begin());
        fftw_execute(forward_);
        const auto nt = g_.n_t;
        for (std::size_t k = 0; k < nk_; ++k) {
            const double off = off_[k];
            const double* cp = &cp_[k * nt];
            const double* id = &inv_den_[k * nt];
            std::complex<double> prev{0.0, 0.0};
            for (std::size_t l = 0; l < nt; ++l) {
                auto& v = spec_[l * nk_ + k];
                v = (l == 0 ? v : v - off * prev) * id[l];
                prev = v;
            }
            for (std::size_t l = nt - 1; l-- > 0;) spec_[l * nk_ + k] -= cp[l] * spec_[(l + 1) * nk_ + k];
        }
        fftw_execute(backward_);
        const double scale = 1.0 / static_cast<double>(g_.n);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_[i] * scale;
    }

private:
    Mesh g_;
    std::size_t nk_;
    std::vector<double> real_;
    std::vector<std::complex<double>> spec_;
    std::vector<double> cp_;
    std::vector<double> inv_den_;
    std::vector<double> off_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

/// Largest singular value of the linear constraint operator by power iteration on A^T A.
inline double estimate_operator_norm(const Mesh& g, std::size_t iters) {
    const auto n = g.n, nt = g.n_t;
    std::vector<double> rho((nt + 1) * n, 0.0), mp(nt * n), mm(nt * n), r(nt * n);
    // Deterministic, non-symmetric start vector with components on every mode.
    for (std::size_t i = 0; i < nt * n; ++i) {
        rho[n + i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i));
        mp[i] = std::cos(1.3 * static_cast<double>(i));
        mm[i] = std::sin(2.1 * static_cast<double>(i) + 0.3);
    }
    double lambda = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        double nrm = 0.0;
        for (std::size_t i = 0; i < nt * n; ++i) nrm += rho[n + i] * rho[n + i] + mp[i] * mp[i] + mm[i] * mm[i];
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < nt * n; ++i) {
            rho[n + i] /= nrm;
            mp[i] /= nrm;
            mm[i] /= nrm;
        }
        apply_constraint(g, rho, mp, mm, r);
        std::span<double> gr(rho.data() + n, nt * n);
        apply_adjoint(g, r, gr, mp, mm);
        double dot = 0.0;
        for (std::size_t i = 0; i < nt * n; ++i) dot += rho[n + i] * rho[n + i] + mp[i] * mp[i] + mm[i] * mm[i];
        lambda = std::sqrt(dot);  // |A^T A v| for unit v
    }
    // 50 steps underestimate slightly; pad so the step rule stays on the safe side.
    return std::sqrt(lambda) * 1.01;
}

/// Convex scalar term g(rho) = slope * rho + weight * U(rho; x) added to the kinetic prox.
struct ScalarTerm {
    double slope = 0.0;
    double weight = 0.0;
    const InternalEnergy* internal = nullptr;
    double x = 0.0;
    double eps = 0.0;

    double d1(double r) const { return slope + (internal ? weight * internal->derivative(r, x, eps) : 0.0); }
    double d2(double r) const { return internal ? weight * internal->second_derivative(r, x, eps) : 0.0; }
};

} // namespace pdhg_detail

struct KineticPoint {
    double rho;
    double m_plus;
    double m_minus;
};

/// argmin |m|^2/(2 rho) + g(rho) + |(rho, m) - (rho_t, m_t)|^2 / (2 tau) over rho >= floor, m+-, m- >= 0.
/// For fixed rho the flux is rho m_t / (rho + tau); the remaining scalar condition
/// (rho - rho_t)/tau + g'(rho) = |m_t|^2 / (2 (rho + tau)^2) is monotone and solved by
/// safeguarded Newton.
inline KineticPoint kinetic_prox(double rho_t, double mp_t, double mm_t, double tau,
                                 const pdhg_detail::ScalarTerm& extra = {}, double floor = kRhoFloor) {
    if (!(tau > 0.0)) throw ConfigError("kinetic prox needs tau > 0");
    const double a = std::max(mp_t, 0.0);
    const double b = std::max(mm_t, 0.0);
    const double a2 = a * a + b * b;
    auto f = [&](double r) { return (r - rho_t) / tau + extra.d1(r) - a2 / (2.0 * (r + tau) * (r + tau)); };
    auto df = [&](double r) { return 1.0 / tau + extra.d2(r) + a2 / ((r + tau) * (r + tau) * (r + tau)); };

    double rho = floor;
    if (f(floor) < 0.0) {
        double lo = floor, hi = std::numeric_limits<double>::infinity();
        double r = std::max(rho_t, floor);
        bool done = false;
        for (int it = 0; it < 100; ++it) {
            const double fr = f(r);
            if (fr == 0.0) {
                done = true;
                break;
            }
            if (fr < 0.0)
                lo = std::max(lo, r);
            else
                hi = std::min(hi, r);
            const double step = fr / df(r);
            if (std::abs(step) <= 1e-12 * std::max(1.0, r)) {
                r = std::clamp(r - step, lo, hi);
                done = true;
                break;
            }
            double next = r - step;
            if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * r + 1.0;
            r = next;
        }
        if (!done) throw RootFindFailure("kinetic prox Newton iteration did not converge");
        rho = r;
    }
    const double scale = rho / (rho + tau);
    return {rho, a * scale, b * scale};
}

/// Pointwise prox of the terminal energy with step tau; W is linearized at q_t.
inline GridFn terminal_prox(const GridFn& q_t, const EnergySpec& spec, double tau, double floor = kRhoFloor) {
    if (!(tau > 0.0)) throw ConfigError("terminal prox needs tau > 0");
    const Grid1D& g = q_t.grid;
    GridFn slope(g);
    if (spec.interaction) slope = convolve_interaction(interaction_matrix(*spec.interaction, g), q_t);
    if (spec.potential)
        for (std::size_t j = 0; j < g.size(); ++j) slope[j] += (*spec.potential)(g.point(j));
    GridFn out(g);
    for (std::size_t j = 0; j < g.size(); ++j) {
        if (!spec.internal) {
            out[j] = std::max(q_t[j] - tau * slope[j], floor);
            continue;
        }
        const double x = g.point(j);
        const auto& u = *spec.internal;
        auto f = [&](double q) { return q - q_t[j] + tau * (slope[j] + u.derivative(q, x, spec.epsilon)); };
        auto df = [&](double q) { return 1.0 + tau * u.second_derivative(q, x, spec.epsilon); };
        if (f(floor) >= 0.0) {
            out[j] = floor;
            continue;
        }
        double lo = floor, hi = std::numeric_limits<double>::infinity();
        double q = std::max(q_t[j], floor);
        bool done = false;
        for (int it = 0; it < 100 && !done; ++it) {
            const double fq = f(q);
            if (!std::isfinite(fq)) throw NewtonDivergence("terminal prox produced a non-finite residual");
            if (fq == 0.0) {
                done = true;
                break;
            }
            if (fq < 0.0)
                lo = std::max(lo, q);
            else
                hi = std::min(hi, q);
            const double step = fq / df(q);
            if (std::abs(step) <= 1e-13 * std::max(1.0, q)) {
                q = std::clamp(q - step, lo, hi);
                done = true;
                break;
            }
            double next = q - step;
            if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * q + 1.0;
            q = next;
        }
        if (!done) throw NewtonDivergence("terminal prox Newton iteration did not converge");
        out[j] = q;
    }
    return out;
}

/// Residual of the discrete constraint at every (l, j), l = 0..N-1, row-major.
inline std::vector<double> constraint_apply(const PdhgState& s, double beta, double T) {
    const pdhg_detail::Mesh g{s.n_x(), s.n_t, s.grid.spacing(), T / static_cast<double>(s.n_t), beta};
    std::vector<double> out(s.n_t * s.n_x());
    pdhg_detail::apply_constraint(g, s.rho, s.m_plus, s.m_minus, out);
    return out;
}

/// Discrete Lagrangian h_t h_x sum |m|^2/(2 rho) + F(q) + h_t h_x sum Phi r.
inline double discrete_lagrangian(const PdhgState& s, const EnergySpec& spec, double beta, double T) {
    const auto n = s.n_x();
    const double h = s.grid.spacing(), ht = T / static_cast<double>(s.n_t);
    double kin = 0.0;
    for (std::size_t i = 0; i < s.n_t * n; ++i) {
        const double r = std::max(s.rho[n + i], kRhoFloor);
        kin += (s.m_plus[i] * s.m_plus[i] + s.m_minus[i] * s.m_minus[i]) / (2.0 * r);
    }
    const auto res = constraint_apply(s, beta, T);
    double pair = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i) pair += s.phi[i] * res[i];
    GridFn q(s.grid, std::vector<double>(s.rho.end() - static_cast<std::ptrdiff_t>(n), s.rho.end()));
    return ht * h * (kin + pair) + eval_energy(spec, q);
}

inline double max_slice_mass_error(const PdhgState& s) {
    const auto n = s.n_x();
    const double h = s.grid.spacing();
    double e = 0.0;
    for (std::size_t l = 0; l <= s.n_t; ++l) {
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j) m += s.rho[l * n + j];
        e = std::max(e, std::abs(h * m - 1.0));
    }
    return e;
}

/// Solves the discretized mean-field control problem; the terminal slice is rho_M^T.
inline PdhgResult solve_mfc(const ProxProblem& p, const PdhgConfig& cfg) {
    using namespace pdhg_detail;
    p.validate();
    if (cfg.n_t == 0) throw ConfigError("PDHG needs n_t >= 1");
    if (cfg.max_iters == 0) throw ConfigError("PDHG needs max_iters >= 1");
    if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) throw ConfigError("PDHG extrapolation theta must lie in [0, 1]");
    const Grid1D& grid = p.grid();
    const auto n = grid.size(), nt = cfg.n_t;
    const Mesh mesh{n, nt, grid.spacing(), p.T / static_cast<double>(nt), p.beta};

    const double L = cfg.preconditioned ? 1.0 : estimate_operator_norm(mesh, cfg.power_iters);
    double tau = cfg.tau > 0.0 ? cfg.tau : (cfg.preconditioned ? PdhgConfig::default_tau(p.spec) : 0.95 / L);
    double sigma = cfg.sigma > 0.0 ? cfg.sigma : 0.95 * 0.95 / (L * L * tau);
    if (cfg.tau <= 0.0 && cfg.sigma > 0.0) tau = 0.95 * 0.95 / (L * L * sigma);
    if (tau * sigma * L * L > 1.0)
        throw StepSizeViolation("PDHG steps violate tau*sigma*L^2 <= 1 (L = " + std::to_string(L) + ")");

    PdhgState s(p.rho0, nt);
    std::unique_ptr<NormalEquationSolver> precond;
    if (cfg.preconditioned) precond = std::make_unique<NormalEquationSolver>(mesh);

    // Terminal energy in the weighted metric: (V + W*q)/h_t linear part, U/h_t.
    const double inv_ht = 1.0 / mesh.h_t;
    std::vector<double> v_term(n, 0.0);
    if (p.spec.potential)
        for (std::size_t j = 0; j < n; ++j) v_term[j] = (*p.spec.potential)(grid.point(j));
    std::vector<double> wmat;
    if (p.spec.interaction) wmat = interaction_matrix(*p.spec.interaction, grid);
    const InternalEnergy* internal = p.spec.internal ? &*p.spec.internal : nullptr;

    std::vector<double> resid(nt * n), dual_step(nt * n);
    std::vector<double> g_rho(nt * n), g_mp(nt * n), g_mm(nt * n);
    std::vector<double> rho_old, mp_old, mm_old;

    PdhgResult result{SpaceTimeSolution{grid, {}, {}, {}}, p.rho0, {}, 0, 0.0, 0.0, false, tau, sigma, L};
    double change = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (it = 1; it <= cfg.max_iters; ++it) {
        // Dual ascent on the extrapolated primal.
        apply_constraint(mesh, s.rho_bar, s.m_plus_bar, s.m_minus_bar, resid);
        if (precond)
            precond->solve(resid, dual_step);
        else
            dual_step = resid;
        for (std::size_t i = 0; i < nt * n; ++i) s.phi[i] += sigma * dual_step[i];

        // Primal descent.
        apply_adjoint(mesh, s.phi, g_rho, g_mp, g_mm);
        rho_old = s.rho;
        mp_old = s.m_plus;
        mm_old = s.m_minus;

        std::vector<double> slope(n, 0.0);
        {
            const double* q = s.rho.data() + nt * n;
            GridFn qf(grid, std::vector<double>(q, q + n));
            GridFn wq = wmat.empty() ? GridFn(grid) : convolve_interaction(wmat, qf);
            for (std::size_t j = 0; j < n; ++j) slope[j] = (v_term[j] + wq[j]) * inv_ht;
        }
        for (std::size_t l = 1; l <= nt; ++l) {
            const bool terminal = l == nt;
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t ir = l * n + j, im = (l - 1) * n + j;
                ScalarTerm extra;
                if (terminal) extra = ScalarTerm{slope[j], inv_ht, internal, grid.point(j), p.spec.epsilon};
                const KineticPoint kp = kinetic_prox(s.rho[ir] - tau * g_rho[im], s.m_plus[im] - tau * g_mp[im],
                                                     s.m_minus[im] - tau * g_mm[im], tau, extra);
                s.rho[ir] = kp.rho;
                s.m_plus[im] = kp.m_plus;
                s.m_minus[im] = kp.m_minus;
            }
        }

        double dnorm = 0.0, xnorm = 0.0;
        for (std::size_t i = n; i < (nt + 1) * n; ++i) {
            const double d = s.rho[i] - rho_old[i];
            dnorm += d * d;
            xnorm += rho_old[i] * rho_old[i];
            s.rho_bar[i] = s.rho[i] + cfg.theta * d;
        }
        for (std::size_t i = 0; i < nt * n; ++i) {
            const double dp = s.m_plus[i] - mp_old[i], dm = s.m_minus[i] - mm_old[i];
            dnorm += dp * dp + dm * dm;
            xnorm += mp_old[i] * mp_old[i] + mm_old[i] * mm_old[i];
            s.m_plus_bar[i] = s.m_plus[i] + cfg.theta * dp;
            s.m_minus_bar[i] = s.m_minus[i] + cfg.theta * dm;
        }
        change = std::sqrt(dnorm) / std::max(std::sqrt(xnorm), 1e-300);

        const bool stop = change <= cfg.tol && max_slice_mass_error(s) <= kMassTolerance;
        if (cfg.log_every != 0 && (it % cfg.log_every == 0 || stop || it == cfg.max_iters))
            result.log.push_back({it, change, discrete_lagrangian(s, p.spec, p.beta, p.T), max_slice_mass_error(s)});
        if (stop) {
            result.converged = true;
            break;
        }
    }
    result.iterations = std::min(it, cfg.max_iters);
    result.final_primal_change = change;
    result.final_mass_error = max_slice_mass_error(s);

    SpaceTimeSolution& traj = result.trajectory;
    for (std::size_t l = 0; l <= nt; ++l) {
        traj.times.push_back(p.T * static_cast<double>(l) / static_cast<double>(nt));
        traj.rho.emplace_back(grid, std::vector<double>(s.rho.begin() + static_cast<std::ptrdiff_t>(l * n),
                                                        s.rho.begin() + static_cast<std::ptrdiff_t>((l + 1) * n)));
        if (l < nt) {
            traj.phi.emplace_back(grid, std::vector<double>(s.phi.begin() + static_cast<std::ptrdiff_t>(l * n),
                                                            s.phi.begin() + static_cast<std::ptrdiff_t>((l + 1) * n)));
        }
    }
    GridFn q = traj.rho.back();
    GridFn terminal_phi = first_variation(p.spec, q);
    for (double& v : terminal_phi.values) v = -v;
    traj.phi.push_back(std::move(terminal_phi));
    if (result.final_mass_error <= kMassTolerance) {
        result.terminal = DensityField::adopt(q, kMassTolerance);
    } else {
        result.terminal = normalize(q);
        result.terminal_renormalized = true;
    }
    return result;
}

} // namespace wprox
