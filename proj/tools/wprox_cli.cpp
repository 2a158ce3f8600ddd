// wprox: experiment runner for the regularized Wasserstein proximal engine.
//
//   wprox run --config cfg.json [--out dir] [--solver kernel|pdhg|fixed_point|compare] [--mesh 160,320] [--serial]
//   wprox reproduce example_a [--out dir] ...
//   wprox vary-t (--config cfg.json | --preset example_a) --T 0.1,0.2,0.5 [--out dir]
//   wprox print-preset example_c
//   wprox validate-config --config cfg.json
//
// Exit codes: 0 ok, 2 config error, 3 not converged, 4 numerical degeneracy.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "wprox/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitNumerical = 4;

int exit_code(wprox::ErrorClass c) {
    switch (c) {
    case wprox::ErrorClass::Config: return kExitConfig;
    case wprox::ErrorClass::NotConverged: return kExitNotConverged;
    case wprox::ErrorClass::Numerical: return kExitNumerical;
    }
    return kExitNumerical;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof()) throw wprox::ConfigError(std::string("cannot parse ") + what + " entry '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw wprox::ConfigError(std::string(what) + " list is empty");
    return out;
}

struct RunOptions {
    std::string config;
    std::string out;
    std::string solver;
    std::string mesh;
    bool serial = false;
};

void apply_overrides(wprox::ExperimentConfig& c, const RunOptions& o) {
    if (!o.solver.empty()) c.solver = wprox::parse_solver(o.solver);
    if (!o.mesh.empty()) c.n_x = parse_list<std::size_t>(o.mesh, "mesh");
    if (!o.out.empty()) c.out = o.out;
    c.validate();
}

void print_table(const wprox::ExperimentConfig& c, const wprox::ExperimentResult& r) {
    if (c.solver != wprox::SolverKind::Compare) return;
    std::printf("%s  [%s]\n", c.name.c_str(), r.table.metric_name.c_str());
    std::printf("%10s %6s %14s %10s %12s %12s %9s\n", "h_x", "n_x", "metric", "pdhg_iter", "pdhg_change", "mass_error",
                "seconds");
    for (const auto& row : r.table.rows)
        std::printf("%10.4f %6zu %14.6e %10zu %12.3e %12.3e %9.2f\n", row.h_x, row.n_x, row.metric, row.pdhg_iterations,
                    row.pdhg_primal_change, row.pdhg_mass_error, row.seconds);
    std::printf("strictly decreasing in h_x: %s\n", r.table.strictly_decreasing() ? "yes" : "no");
}

int run_config(wprox::ExperimentConfig c, const RunOptions& o) {
    apply_overrides(c, o);
    const auto result = wprox::run_experiment(c, c.out, o.serial);
    print_table(c, result);
    std::printf("outputs written to %s\n", c.out.c_str());
    for (const auto& n : result.notes) std::fprintf(stderr, "warning: %s\n", n.c_str());
    return result.converged ? kExitOk : kExitNotConverged;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularized Wasserstein proximal operators: kernel formulas, fixed point and PDHG oracle"};
    app.require_subcommand(1);

    RunOptions run_opt;
    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("--config", run_opt.config, "JSON config path")->required();
    run->add_option("--out", run_opt.out, "Output directory (overrides config)");
    run->add_option("--solver", run_opt.solver, "kernel|pdhg|fixed_point|compare");
    run->add_option("--mesh", run_opt.mesh, "Comma-separated n_x list (overrides config)");
    run->add_flag("--serial", run_opt.serial, "Run meshes one after another");

    RunOptions rep_opt;
    std::string rep_preset;
    auto* rep = app.add_subcommand("reproduce", "Run a compiled-in preset");
    rep->add_option("preset", rep_preset, "example_a|example_b|example_c|fp_example_c|fp_quadratic")->required();
    rep->add_option("--out", rep_opt.out, "Output directory");
    rep->add_option("--solver", rep_opt.solver, "kernel|pdhg|fixed_point|compare");
    rep->add_option("--mesh", rep_opt.mesh, "Comma-separated n_x list");
    rep->add_flag("--serial", rep_opt.serial, "Run meshes one after another");

    std::string vt_config, vt_preset, vt_out, vt_T, vt_mesh;
    auto* vt = app.add_subcommand("vary-t", "Kernel terminal densities for several T on one grid");
    auto* vt_cfg_opt = vt->add_option("--config", vt_config, "JSON config path");
    vt->add_option("--preset", vt_preset, "Preset name")->excludes(vt_cfg_opt);
    vt->add_option("--T", vt_T, "Comma-separated list of T values")->required();
    vt->add_option("--out", vt_out, "Output directory");
    vt->add_option("--mesh", vt_mesh, "n_x of the shared grid");
    vt->add_flag("--serial", "Accepted for symmetry; vary-t is always serial");

    std::string pp_name;
    auto* pp = app.add_subcommand("print-preset", "Print a preset as JSON");
    pp->add_option("name", pp_name, "Preset name")->required();

    std::string vc_config;
    auto* vc = app.add_subcommand("validate-config", "Check a JSON config against the schema");
    vc->add_option("--config", vc_config, "JSON config path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) return run_config(wprox::load_config(run_opt.config), run_opt);
        if (*rep) return run_config(wprox::preset(rep_preset), rep_opt);
        if (*vt) {
            wprox::ExperimentConfig c = vt_config.empty() ? wprox::preset(vt_preset.empty() ? "example_a" : vt_preset)
                                                          : wprox::load_config(vt_config);
            if (!vt_mesh.empty()) c.n_x = parse_list<std::size_t>(vt_mesh, "mesh");
            const std::string out = vt_out.empty() ? c.out + "/vary_t" : vt_out;
            for (const auto& f : wprox::vary_T_study(c, parse_list<double>(vt_T, "T"), out))
                std::printf("%s\n", f.string().c_str());
            return kExitOk;
        }
        if (*pp) {
            std::printf("%s\n", wprox::config_to_json(wprox::preset(pp_name)).dump(2).c_str());
            return kExitOk;
        }
        if (*vc) {
            const auto c = wprox::load_config(vc_config);
            std::printf("ok: %s (%zu meshes, solver %s)\n", c.name.c_str(), c.n_x.size(), wprox::to_string(c.solver).c_str());
            return kExitOk;
        }
    } catch (const wprox::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.error_class());
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}
