#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wprox/errors.hpp"
#include "wprox/fixed_point.hpp"
#include "wprox/grid.hpp"
#include "wprox/kernel_prox.hpp"
#include "wprox/mfc_pdhg.hpp"

// CSV input/output. Numbers carry 17 significant digits so files round-trip exactly.
namespace wprox::io {

/// Rows of (h_x, metric) ordered by decreasing h_x, plus per-row solver diagnostics.
struct ConvergenceTable {
    struct Row {
        double h_x;
        std::size_t n_x;
        double metric;
        std::size_t pdhg_iterations = 0;
        double pdhg_primal_change = 0.0;
        double pdhg_mass_error = 0.0;
        double boundary_magnitude = 0.0;
        double seconds = 0.0;
    };
    std::string metric_name;
    std::vector<Row> rows;

    void sort_rows() {
        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.h_x > b.h_x; });
    }
    bool strictly_decreasing() const {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].metric < rows[i - 1].metric)) return false;
        return true;
    }
};

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw ConfigError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string density_csv(const GridFn& rho) {
    std::string s = "x,rho\n";
    for (std::size_t j = 0; j < rho.size(); ++j) s += fmt(rho.grid.point(j)) + "," + fmt(rho[j]) + "\n";
    return s;
}

inline std::string spacetime_csv(const SpaceTimeSolution& sol) {
    std::string s = "t,x,rho,phi\n";
    for (std::size_t l = 0; l < sol.n_slices(); ++l) {
        const std::string t = fmt(sol.times[l]) + ",";
        for (std::size_t j = 0; j < sol.grid.size(); ++j)
            s += t + fmt(sol.grid.point(j)) + "," + fmt(sol.rho[l][j]) + "," + fmt(sol.phi[l][j]) + "\n";
    }
    return s;
}

inline std::string residuals_csv(const std::vector<double>& residuals) {
    std::string s = "n,residual\n";
    for (std::size_t i = 0; i < residuals.size(); ++i) s += std::to_string(i + 1) + "," + fmt(residuals[i]) + "\n";
    return s;
}

inline std::string pdhg_log_csv(const std::vector<PdhgLogEntry>& log) {
    std::string s = "iter,primal_change,lagrangian,mass_error\n";
    for (const auto& e : log)
        s += std::to_string(e.iter) + "," + fmt(e.primal_change) + "," + fmt(e.lagrangian) + "," + fmt(e.mass_error) +
             "\n";
    return s;
}

inline std::string table_csv(const ConvergenceTable& t) {
    std::string s = "h_x,metric\n";
    for (const auto& r : t.rows) s += fmt(r.h_x) + "," + fmt(r.metric) + "\n";
    return s;
}

inline std::string diagnostics_csv(const ConvergenceTable& t) {
    // Wall time is left out so that identical configs give identical files.
    std::string s = "h_x,n_x,metric,pdhg_iterations,pdhg_primal_change,pdhg_mass_error,boundary_magnitude\n";
    for (const auto& r : t.rows)
        s += fmt(r.h_x) + "," + std::to_string(r.n_x) + "," + fmt(r.metric) + "," + std::to_string(r.pdhg_iterations) +
             "," + fmt(r.pdhg_primal_change) + "," + fmt(r.pdhg_mass_error) + "," + fmt(r.boundary_magnitude) + "\n";
    return s;
}

/// Parsed numeric CSV with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable parse_csv(const std::string& text, const std::vector<std::string>& expected_header) {
    std::istringstream in(text);
    std::string line;
    CsvTable t;
    if (!std::getline(in, line)) throw ConfigError("CSV is empty");
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    }
    if (t.header != expected_header) throw ConfigError("CSV header does not match the expected columns");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cell.size())
                throw ConfigError("CSV line " + std::to_string(lineno) + ": cannot parse '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != t.header.size())
            throw ConfigError("CSV line " + std::to_string(lineno) + " has the wrong number of columns");
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Rebuilds the grid from the x column; the first point is -b.
inline Grid1D grid_from_points(const std::vector<double>& xs) {
    if (xs.empty()) throw ConfigError("CSV has no grid points");
    Grid1D g(-xs.front(), xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j)
        if (std::abs(g.point(j) - xs[j]) > 1e-12 * std::max(1.0, g.half_width()))
            throw ConfigError("CSV x column is not a uniform periodic grid on [-b, b)");
    return g;
}

/// Loads an `x,rho` file and validates it as a density (unit mass within `mass_tol`; PDHG
/// terminal files are only held to kMassTolerance).
inline DensityField read_density_csv(const std::filesystem::path& path, double mass_tol = 1e-6) {
    const CsvTable t = parse_csv(read_file(path), {"x", "rho"});
    std::vector<double> xs, vs;
    for (const auto& r : t.rows) {
        xs.push_back(r[0]);
        vs.push_back(r[1]);
    }
    return DensityField::adopt(GridFn(grid_from_points(xs), std::move(vs)), mass_tol);
}

inline SpaceTimeSolution read_spacetime_csv(const std::filesystem::path& path) {
    const CsvTable t = parse_csv(read_file(path), {"t", "x", "rho", "phi"});
    if (t.rows.empty()) throw ConfigError("space-time CSV has no rows");
    std::vector<double> xs;
    for (const auto& r : t.rows) {
        if (r[0] != t.rows.front()[0]) break;
        xs.push_back(r[1]);
    }
    const Grid1D g = grid_from_points(xs);
    if (t.rows.size() % g.size() != 0) throw ConfigError("space-time CSV rows are not whole time slices");
    SpaceTimeSolution sol{g, {}, {}, {}};
    for (std::size_t base = 0; base < t.rows.size(); base += g.size()) {
        GridFn rho(g), phi(g);
        for (std::size_t j = 0; j < g.size(); ++j) {
            const auto& r = t.rows[base + j];
            if (r[0] != t.rows[base][0] || r[1] != xs[j]) throw ConfigError("space-time CSV is not time-major");
            rho[j] = r[2];
            phi[j] = r[3];
        }
        sol.times.push_back(t.rows[base][0]);
        sol.rho.push_back(std::move(rho));
        sol.phi.push_back(std::move(phi));
    }
    return sol;
}

inline std::vector<double> read_residuals_csv(const std::filesystem::path& path) {
    const CsvTable t = parse_csv(read_file(path), {"n", "residual"});
    std::vector<double> out;
    for (const auto& r : t.rows) out.push_back(r[1]);
    return out;
}

inline ConvergenceTable read_table_csv(const std::filesystem::path& path, std::string metric_name = {}) {
    const CsvTable t = parse_csv(read_file(path), {"h_x", "metric"});
    ConvergenceTable table;
    table.metric_name = std::move(metric_name);
    for (const auto& r : t.rows) table.rows.push_back({r[0], 0, r[1]});
    return table;
}

} // namespace wprox::io
