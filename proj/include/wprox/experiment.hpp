#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wprox/energy.hpp"
#include "wprox/errors.hpp"
#include "wprox/fixed_point.hpp"
#include "wprox/io.hpp"
#include "wprox/kernel_prox.hpp"
#include "wprox/mfc_pdhg.hpp"

// Experiment configuration (JSON), compiled-in presets and the multi-mesh runner.
namespace wprox {

using json = nlohmann::json;

enum class SolverKind { Kernel, Pdhg, FixedPoint, Compare };
/// What `compare` measures against the PDHG terminal density.
enum class CompareMetric { KernelVsPdhg, FixedPointVsPdhg };

inline std::string to_string(SolverKind s) {
    switch (s) {
    case SolverKind::Kernel: return "kernel";
    case SolverKind::Pdhg: return "pdhg";
    case SolverKind::FixedPoint: return "fixed_point";
    case SolverKind::Compare: return "compare";
    }
    return "?";
}

inline SolverKind parse_solver(const std::string& s) {
    if (s == "kernel") return SolverKind::Kernel;
    if (s == "pdhg") return SolverKind::Pdhg;
    if (s == "fixed_point") return SolverKind::FixedPoint;
    if (s == "compare") return SolverKind::Compare;
    throw ConfigError("unknown solver '" + s + "' (kernel, pdhg, fixed_point, compare)");
}

inline std::string to_string(CompareMetric m) {
    return m == CompareMetric::KernelVsPdhg ? "kernel_vs_pdhg" : "fixed_point_vs_pdhg";
}

inline CompareMetric parse_metric(const std::string& s) {
    if (s == "kernel_vs_pdhg") return CompareMetric::KernelVsPdhg;
    if (s == "fixed_point_vs_pdhg") return CompareMetric::FixedPointVsPdhg;
    throw ConfigError("unknown metric '" + s + "' (kernel_vs_pdhg, fixed_point_vs_pdhg)");
}

struct GaussianSpec {
    double mean = 0.0;
    double sigma = 1.0;
};

/// A named built-in with numeric parameters, e.g. {"name": "quadratic_interaction", "lambda": 0.2}.
struct BuiltinSpec {
    std::string name;
    std::map<std::string, double> params;
    std::optional<GaussianSpec> reference;  // kl_internal only
};

struct EnergyConfig {
    std::optional<BuiltinSpec> potential;
    std::optional<BuiltinSpec> interaction;
    std::optional<BuiltinSpec> internal;
    double epsilon = 0.0;
};

struct FixedPointConfig {
    double tol = 1e-10;
    std::size_t max_iters = 200;
    std::optional<std::size_t> fixed_iterations;
    std::vector<std::size_t> keep = {0, 1, 2, 5, 10, 20};
};

struct ExperimentConfig {
    std::string name = "custom";
    double b = 5.0;
    std::vector<std::size_t> n_x = {160};
    double T = 0.2;
    double beta = 0.25;
    GaussianSpec rho0{0.25, 0.1};
    EnergyConfig energy;
    SolverKind solver = SolverKind::Compare;
    CompareMetric metric = CompareMetric::KernelVsPdhg;
    /// n_t = 0 selects PdhgConfig::default_n_t(T).
    PdhgConfig pdhg{0};
    FixedPointConfig fixed_point;
    /// Snapshot count of the kernel space-time output (linear energies).
    std::size_t spacetime_n_t = 20;
    std::string out = "out";
    /// Reserved; the pipeline is deterministic.
    std::int64_t seed = 0;

    void validate() const;
};

namespace config_detail {

inline void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

inline double number(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing '" + key + "' in " + where);
    if (!j.at(key).is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
    return j.at(key).get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
    return j.contains(key) ? number(j, key, where) : fallback;
}

inline std::size_t count(const json& v, const std::string& what) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(what + " must be a nonnegative integer");
    return v.get<std::size_t>();
}

inline std::string text(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string()) throw ConfigError("'" + key + "' in " + where + " must be a string");
    return j.at(key).get<std::string>();
}

inline GaussianSpec gaussian_from_json(const json& j, const std::string& where) {
    require_keys(j, {"type", "mean", "sigma"}, where);
    if (j.contains("type") && text(j, "type", where) != "gaussian")
        throw ConfigError(where + ": only gaussian densities are supported");
    return {number(j, "mean", where), number(j, "sigma", where)};
}

inline json gaussian_to_json(const GaussianSpec& g) { return {{"type", "gaussian"}, {"mean", g.mean}, {"sigma", g.sigma}}; }

struct BuiltinSchema {
    std::vector<std::string> required;
    std::map<std::string, double> defaults;
    bool has_reference = false;
};

inline const std::map<std::string, BuiltinSchema>& builtins(const std::string& slot) {
    static const std::map<std::string, BuiltinSchema> potential{
        {"gaussian_bump_potential", {{"amplitude", "center", "width"}, {}, false}},
        {"quadratic_potential", {{"center"}, {{"strength", 1.0}}, false}},
    };
    static const std::map<std::string, BuiltinSchema> interaction{
        {"quadratic_interaction", {{"lambda"}, {}, false}},
    };
    static const std::map<std::string, BuiltinSchema> internal{
        {"kl_internal", {{"lambda"}, {}, true}},
        {"quadratic_internal", {{"coefficient"}, {}, false}},
    };
    if (slot == "potential") return potential;
    if (slot == "interaction") return interaction;
    return internal;
}

inline BuiltinSpec builtin_from_json(const json& j, const std::string& slot) {
    const std::string where = "energy." + slot;
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    const std::string name = text(j, "name", where);
    const auto& table = builtins(slot);
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown " + slot + " built-in '" + name + "'");
    const BuiltinSchema& schema = it->second;
    std::set<std::string> allowed{"name"};
    for (const auto& k : schema.required) allowed.insert(k);
    for (const auto& [k, v] : schema.defaults) allowed.insert(k);
    if (schema.has_reference) allowed.insert("reference");
    require_keys(j, allowed, where);
    BuiltinSpec out{name, schema.defaults, std::nullopt};
    for (const auto& k : schema.required) out.params[k] = number(j, k, where);
    for (const auto& [k, v] : schema.defaults) out.params[k] = number_or(j, k, v, where);
    if (schema.has_reference) {
        if (!j.contains("reference")) throw ConfigError("missing 'reference' in " + where);
        out.reference = gaussian_from_json(j.at("reference"), where + ".reference");
    }
    return out;
}

inline json builtin_to_json(const BuiltinSpec& b) {
    json j{{"name", b.name}};
    for (const auto& [k, v] : b.params) j[k] = v;
    if (b.reference) j["reference"] = gaussian_to_json(*b.reference);
    return j;
}

} // namespace config_detail

inline ExperimentConfig config_from_json(const json& j) {
    using namespace config_detail;
    require_keys(j, {"name", "b", "n_x", "T", "beta", "rho0", "energy", "solver", "metric", "pdhg", "fixed_point",
                     "spacetime_n_t", "out", "seed"},
                 "config");
    ExperimentConfig c;
    if (j.contains("name")) c.name = text(j, "name", "config");
    c.b = number_or(j, "b", c.b, "config");
    if (j.contains("n_x")) {
        if (!j.at("n_x").is_array()) throw ConfigError("n_x must be a list of integers");
        c.n_x.clear();
        for (const auto& v : j.at("n_x")) c.n_x.push_back(count(v, "n_x entry"));
    }
    c.T = number_or(j, "T", c.T, "config");
    c.beta = number_or(j, "beta", c.beta, "config");
    if (j.contains("rho0")) c.rho0 = gaussian_from_json(j.at("rho0"), "rho0");
    if (!j.contains("energy")) throw ConfigError("missing 'energy' in config");
    {
        const json& e = j.at("energy");
        require_keys(e, {"potential", "interaction", "internal", "epsilon"}, "energy");
        for (const char* slot : {"potential", "interaction", "internal"}) {
            if (!e.contains(slot) || e.at(slot).is_null()) continue;
            BuiltinSpec b = builtin_from_json(e.at(slot), slot);
            if (std::string(slot) == "potential") c.energy.potential = std::move(b);
            else if (std::string(slot) == "interaction") c.energy.interaction = std::move(b);
            else c.energy.internal = std::move(b);
        }
        c.energy.epsilon = number_or(e, "epsilon", 0.0, "energy");
    }
    if (j.contains("solver")) c.solver = parse_solver(text(j, "solver", "config"));
    if (j.contains("metric")) c.metric = parse_metric(text(j, "metric", "config"));
    if (j.contains("pdhg")) {
        const json& p = j.at("pdhg");
        require_keys(p, {"n_t", "tau", "sigma", "theta", "max_iters", "tol", "preconditioned", "log_every", "power_iters"},
                     "pdhg");
        if (p.contains("n_t")) c.pdhg.n_t = count(p.at("n_t"), "pdhg.n_t");
        c.pdhg.tau = number_or(p, "tau", c.pdhg.tau, "pdhg");
        c.pdhg.sigma = number_or(p, "sigma", c.pdhg.sigma, "pdhg");
        c.pdhg.theta = number_or(p, "theta", c.pdhg.theta, "pdhg");
        if (p.contains("max_iters")) c.pdhg.max_iters = count(p.at("max_iters"), "pdhg.max_iters");
        c.pdhg.tol = number_or(p, "tol", c.pdhg.tol, "pdhg");
        if (p.contains("preconditioned")) {
            if (!p.at("preconditioned").is_boolean()) throw ConfigError("pdhg.preconditioned must be a boolean");
            c.pdhg.preconditioned = p.at("preconditioned").get<bool>();
        }
        if (p.contains("log_every")) c.pdhg.log_every = count(p.at("log_every"), "pdhg.log_every");
        if (p.contains("power_iters")) c.pdhg.power_iters = count(p.at("power_iters"), "pdhg.power_iters");
    }
    if (j.contains("fixed_point")) {
        const json& f = j.at("fixed_point");
        require_keys(f, {"tol", "max_iters", "fixed_iterations", "keep"}, "fixed_point");
        c.fixed_point.tol = number_or(f, "tol", c.fixed_point.tol, "fixed_point");
        if (f.contains("max_iters")) c.fixed_point.max_iters = count(f.at("max_iters"), "fixed_point.max_iters");
        if (f.contains("fixed_iterations") && !f.at("fixed_iterations").is_null())
            c.fixed_point.fixed_iterations = count(f.at("fixed_iterations"), "fixed_point.fixed_iterations");
        if (f.contains("keep")) {
            if (!f.at("keep").is_array()) throw ConfigError("fixed_point.keep must be a list of integers");
            c.fixed_point.keep.clear();
            for (const auto& v : f.at("keep")) c.fixed_point.keep.push_back(count(v, "fixed_point.keep entry"));
        }
    }
    if (j.contains("spacetime_n_t")) c.spacetime_n_t = count(j.at("spacetime_n_t"), "spacetime_n_t");
    if (j.contains("out")) c.out = text(j, "out", "config");
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer()) throw ConfigError("seed must be an integer");
        c.seed = j.at("seed").get<std::int64_t>();
    }
    c.validate();
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    using namespace config_detail;
    json energy{{"epsilon", c.energy.epsilon}};
    if (c.energy.potential) energy["potential"] = builtin_to_json(*c.energy.potential);
    if (c.energy.interaction) energy["interaction"] = builtin_to_json(*c.energy.interaction);
    if (c.energy.internal) energy["internal"] = builtin_to_json(*c.energy.internal);
    json fp{{"tol", c.fixed_point.tol}, {"max_iters", c.fixed_point.max_iters}, {"keep", c.fixed_point.keep}};
    fp["fixed_iterations"] = c.fixed_point.fixed_iterations ? json(*c.fixed_point.fixed_iterations) : json(nullptr);
    return {
        {"name", c.name},
        {"b", c.b},
        {"n_x", c.n_x},
        {"T", c.T},
        {"beta", c.beta},
        {"rho0", gaussian_to_json(c.rho0)},
        {"energy", energy},
        {"solver", to_string(c.solver)},
        {"metric", to_string(c.metric)},
        {"pdhg",
         {{"n_t", c.pdhg.n_t},
          {"tau", c.pdhg.tau},
          {"sigma", c.pdhg.sigma},
          {"theta", c.pdhg.theta},
          {"max_iters", c.pdhg.max_iters},
          {"tol", c.pdhg.tol},
          {"preconditioned", c.pdhg.preconditioned},
          {"log_every", c.pdhg.log_every},
          {"power_iters", c.pdhg.power_iters}}},
        {"fixed_point", fp},
        {"spacetime_n_t", c.spacetime_n_t},
        {"out", c.out},
        {"seed", c.seed},
    };
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

inline EnergySpec build_energy(const EnergyConfig& e) {
    EnergySpec s;
    std::string tag;
    auto add_tag = [&](const std::string& n) { tag += (tag.empty() ? "" : "+") + n; };
    if (e.potential) {
        const auto& p = e.potential->params;
        if (e.potential->name == "gaussian_bump_potential")
            s.potential = energies::gaussian_bump_potential(p.at("amplitude"), p.at("center"), p.at("width"));
        else
            s.potential = energies::quadratic_potential(p.at("center"), p.at("strength"));
        add_tag(e.potential->name);
    }
    if (e.interaction) {
        s.interaction = energies::quadratic_interaction(e.interaction->params.at("lambda"));
        add_tag(e.interaction->name);
    }
    if (e.internal) {
        const auto& p = e.internal->params;
        if (e.internal->name == "kl_internal") {
            const GaussianSpec ref = *e.internal->reference;
            s.internal = energies::kl_internal(p.at("lambda"),
                                               [ref](double x) { return energies::gaussian_pdf(x, ref.mean, ref.sigma); });
        } else {
            s.internal = energies::quadratic_internal(p.at("coefficient"));
        }
        add_tag(e.internal->name);
    }
    s.epsilon = e.epsilon;
    s.tag = tag;
    return s;
}

inline void ExperimentConfig::validate() const {
    if (n_x.empty()) throw ConfigError("n_x list must not be empty");
    for (auto n : n_x)
        if (n < 4) throw ConfigError("every n_x must be at least 4");
    if (!(b > 0.0)) throw ConfigError("b must be positive");
    if (!(T > 0.0)) throw ConfigError("T must be positive");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(rho0.sigma > 0.0)) throw ConfigError("rho0.sigma must be positive");
    if (energy.internal && energy.internal->reference && !(energy.internal->reference->sigma > 0.0))
        throw ConfigError("reference sigma must be positive");
    if (!(fixed_point.tol > 0.0)) throw ConfigError("fixed_point.tol must be positive");
    if (fixed_point.max_iters < 1) throw ConfigError("fixed_point.max_iters must be at least 1");
    if (pdhg.max_iters < 1) throw ConfigError("pdhg.max_iters must be at least 1");
    if (!(pdhg.tol > 0.0)) throw ConfigError("pdhg.tol must be positive");
    if (spacetime_n_t < 1) throw ConfigError("spacetime_n_t must be at least 1");
    build_energy(energy).validate();
    if (solver == SolverKind::Kernel && (energy.interaction || energy.internal))
        throw ConfigError("the kernel solver needs a linear energy; use fixed_point or compare");
}

// ---- presets --------------------------------------------------------------------------

inline std::vector<std::string> preset_names() {
    return {"example_a", "example_b", "example_c", "fp_example_c", "fp_quadratic"};
}

inline ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    c.b = 5.0;
    c.n_x = {160, 200, 320};
    c.solver = SolverKind::Compare;
    c.out = "out/" + name;
    if (name == "example_a") {
        c.T = 0.2;
        c.beta = 0.25;
        c.rho0 = {0.25, 0.1};
        c.energy.potential = BuiltinSpec{"gaussian_bump_potential", {{"amplitude", 1.0}, {"center", -0.25}, {"width", 0.5}}, {}};
    } else if (name == "example_b") {
        c.T = 0.1;
        c.beta = 0.1;
        c.rho0 = {0.5, 0.1};
        c.energy.interaction = BuiltinSpec{"quadratic_interaction", {{"lambda", 0.2}}, {}};
    } else if (name == "example_c" || name == "fp_example_c") {
        c.T = 0.2;
        c.beta = 0.1;
        c.rho0 = {0.5, 0.2};
        c.energy.internal = BuiltinSpec{"kl_internal", {{"lambda", 0.1}}, GaussianSpec{0.0, 0.4}};
        c.energy.epsilon = 1e-4;
        if (name == "fp_example_c") {
            c.metric = CompareMetric::FixedPointVsPdhg;
            c.fixed_point.fixed_iterations = 20;
        }
    } else if (name == "fp_quadratic") {
        c.T = 1.0;
        c.beta = 0.25;
        c.rho0 = {0.5, 0.1};
        c.n_x = {160};
        c.energy.internal = BuiltinSpec{"quadratic_internal", {{"coefficient", 1.0}}, {}};
        c.metric = CompareMetric::FixedPointVsPdhg;
        c.fixed_point.fixed_iterations = 40;
        c.fixed_point.keep = {0, 1, 2, 5, 10, 20, 40};
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    c.validate();
    return c;
}

// ---- runner ---------------------------------------------------------------------------

inline ProxProblem make_problem(const ExperimentConfig& c, std::size_t n_x, double T) {
    const Grid1D grid(c.b, n_x);
    const GaussianSpec g = c.rho0;
    DensityField rho0 = normalize(GridFn::sample(grid, [g](double x) { return energies::gaussian_pdf(x, g.mean, g.sigma); }));
    ProxProblem p{std::move(rho0), build_energy(c.energy), T, c.beta};
    p.validate();
    return p;
}

inline PdhgConfig resolved_pdhg(const ExperimentConfig& c) {
    PdhgConfig p = c.pdhg;
    if (p.n_t == 0) p.n_t = PdhgConfig::default_n_t(c.T);
    return p;
}

struct MeshOutcome {
    io::ConvergenceTable::Row row{};
    bool has_metric = false;
    bool converged = true;
    std::string note;
};

struct ExperimentResult {
    io::ConvergenceTable table;
    bool converged = true;
    std::vector<std::string> notes;
};

inline std::filesystem::path mesh_dir(const std::filesystem::path& out, std::size_t n_x) {
    return out / ("nx" + std::to_string(n_x));
}

inline MeshOutcome run_mesh(const ExperimentConfig& c, std::size_t n_x, const std::filesystem::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const ProxProblem p = make_problem(c, n_x, c.T);
    const std::filesystem::path dir = mesh_dir(out, n_x);
    MeshOutcome o;
    o.row.h_x = p.grid().spacing();
    o.row.n_x = n_x;
    io::atomic_write(dir / "rho0.csv", io::density_csv(p.rho0));
    if (c.energy.internal && c.energy.internal->reference) {
        const GaussianSpec ref = *c.energy.internal->reference;
        io::atomic_write(dir / "reference.csv",
                         io::density_csv(GridFn::sample(p.grid(), [ref](double x) {
                             return energies::gaussian_pdf(x, ref.mean, ref.sigma);
                         })));
    }
    const bool linear = p.spec.is_linear();
    const bool want_pdhg = c.solver == SolverKind::Pdhg || c.solver == SolverKind::Compare;
    const bool want_fp = c.solver == SolverKind::FixedPoint ||
                         (c.solver == SolverKind::Compare && c.metric == CompareMetric::FixedPointVsPdhg);

    if (c.solver == SolverKind::Kernel || (linear && c.solver == SolverKind::Compare)) {
        io::atomic_write(dir / "kernel_spacetime.csv", io::spacetime_csv(spacetime_solution(p, c.spacetime_n_t)));
    }
    if (c.solver == SolverKind::Kernel) {
        const DensityField rk = kernel_terminal_density(p);
        o.row.boundary_magnitude = boundary_magnitude(rk);
        io::atomic_write(dir / "kernel_terminal.csv", io::density_csv(rk));
    }

    std::optional<PdhgResult> mfc;
    if (want_pdhg) {
        mfc = solve_mfc(p, resolved_pdhg(c));
        io::atomic_write(dir / "pdhg_terminal.csv", io::density_csv(mfc->terminal));
        io::atomic_write(dir / "pdhg_spacetime.csv", io::spacetime_csv(mfc->trajectory));
        io::atomic_write(dir / "pdhg_log.csv", io::pdhg_log_csv(mfc->log));
        o.row.pdhg_iterations = mfc->iterations;
        o.row.pdhg_primal_change = mfc->final_primal_change;
        o.row.pdhg_mass_error = mfc->final_mass_error;
        if (!mfc->converged) {
            o.converged = false;
            o.note = "n_x=" + std::to_string(n_x) + ": PDHG stopped at max_iters with relative change " +
                     io::fmt(mfc->final_primal_change);
        }
    }

    std::optional<FixedPointReport> fp;
    if (want_fp) {
        FixedPointOptions fo;
        fo.tol = c.fixed_point.tol;
        fo.max_iters = c.fixed_point.max_iters;
        fo.fixed_iterations = c.fixed_point.fixed_iterations;
        fo.keep = c.fixed_point.keep;
        fp = solve_fixed_point(p, fo);
        io::atomic_write(dir / "fixed_point_residuals.csv", io::residuals_csv(fp->residuals));
        io::atomic_write(dir / "fixed_point_final.csv", io::density_csv(*fp->final));
        for (const auto& [n, rho] : fp->iterates_kept)
            io::atomic_write(dir / ("fixed_point_iter_" + std::to_string(n) + ".csv"), io::density_csv(rho));
        o.row.boundary_magnitude = boundary_magnitude(*fp->final);
        if (!fo.fixed_iterations && !fp->converged) {
            o.converged = false;
            o.note = "n_x=" + std::to_string(n_x) + ": fixed point did not reach tol";
        }
    }

    if (c.solver == SolverKind::Compare) {
        if (c.metric == CompareMetric::KernelVsPdhg) {
            // Kernel evaluated at the oracle's terminal density; guess-independent for linear energies.
            const DensityField rk = apply_gibbs(first_variation(p.spec, mfc->terminal), p.T, p.beta, p.rho0);
            io::atomic_write(dir / "kernel_terminal.csv", io::density_csv(rk));
            o.row.metric = l2_distance(rk, mfc->terminal);
            o.row.boundary_magnitude = boundary_magnitude(rk);
        } else {
            o.row.metric = l2_distance(*fp->final, mfc->terminal);
        }
        o.has_metric = true;
    }
    o.row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
}

inline std::string metric_label(const ExperimentConfig& c) {
    if (c.metric == CompareMetric::KernelVsPdhg) return "|rho_K(T) - rho_M(T)|_L2";
    return "|rho_itr^" + (c.fixed_point.fixed_iterations ? std::to_string(*c.fixed_point.fixed_iterations) : "final") +
           " - rho_M(T)|_L2";
}

/// Runs every mesh of the config, writing per-mesh CSVs under `out` plus table.csv and diagnostics.csv
/// (compare mode). Meshes run concurrently unless `serial`.
inline ExperimentResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& out, bool serial = true) {
    c.validate();
    std::vector<MeshOutcome> outcomes;
    if (serial || c.n_x.size() == 1) {
        for (auto n : c.n_x) outcomes.push_back(run_mesh(c, n, out));
    } else {
        std::vector<std::future<MeshOutcome>> jobs;
        for (auto n : c.n_x) jobs.push_back(std::async(std::launch::async, [&c, n, &out] { return run_mesh(c, n, out); }));
        for (auto& j : jobs) outcomes.push_back(j.get());
    }
    ExperimentResult r;
    r.table.metric_name = metric_label(c);
    for (const auto& o : outcomes) {
        if (o.has_metric) r.table.rows.push_back(o.row);
        if (!o.converged) {
            r.converged = false;
            r.notes.push_back(o.note);
        }
    }
    r.table.sort_rows();
    if (c.solver == SolverKind::Compare) {
        io::atomic_write(out / "table.csv", io::table_csv(r.table));
        io::atomic_write(out / "diagnostics.csv", io::diagnostics_csv(r.table));
    }
    io::atomic_write(out / "config.json", config_to_json(c).dump(2) + "\n");
    return r;
}

/// One kernel terminal density per T on a shared grid (the first n_x of the config).
inline std::vector<std::filesystem::path> vary_T_study(const ExperimentConfig& c, const std::vector<double>& T_list,
                                                       const std::filesystem::path& out) {
    c.validate();
    if (T_list.empty()) throw ConfigError("vary-t needs a nonempty T list");
    if (c.energy.interaction || c.energy.internal) throw ConfigError("vary-t needs a linear energy");
    std::vector<std::filesystem::path> files;
    for (double T : T_list) {
        if (!(T > 0.0)) throw ConfigError("every T must be positive");
        const ProxProblem p = make_problem(c, c.n_x.front(), T);
        char label[32];
        std::snprintf(label, sizeof label, "%g", T);
        const auto path = out / ("terminal_T" + std::string(label) + ".csv");
        io::atomic_write(path, io::density_csv(kernel_terminal_density(p)));
        files.push_back(path);
    }
    return files;
}

} // namespace wprox
