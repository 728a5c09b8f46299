#pragma once

#include "setdist/bounds.hpp"
#include "setdist/errors.hpp"
#include "setdist/evolution.hpp"
#include "setdist/grid.hpp"
#include "setdist/nagumo.hpp"
#include "setdist/stochastic.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace setdist {

/// Fixed 17-significant-digit formatting: round-trips doubles exactly and
/// keeps CSV outputs byte-identical across runs and thread counts.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << format_g17(row[i]);
        os << "\n";
    }
}

inline void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    if (!os)
        throw IoError("write_csv_file: cannot open " + path);
    write_csv(os, header, rows);
}

// ---------------------------------------------------------------------------
// curves: columns x,value; optional trailing row `inf,<value>`
// ---------------------------------------------------------------------------

inline void write_curve_csv(std::ostream& os, const Curve& c) {
    os << "x,value\n";
    const auto& x = c.grid->points();
    for (std::size_t i = 0; i < x.size(); ++i)
        os << format_g17(x[i]) << "," << format_g17(c.values[i]) << "\n";
    if (c.value_at_infinity)
        os << "inf," << format_g17(*c.value_at_infinity) << "\n";
}

inline void write_curve_csv_file(const std::string& path, const Curve& c) {
    std::ofstream os(path);
    if (!os)
        throw IoError("write_curve_csv_file: cannot open " + path);
    write_curve_csv(os, c);
}

inline Curve read_curve_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line))
        throw IoError("read_curve_csv: empty input");
    std::vector<double> xs, vs;
    std::optional<double> vinf;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IoError("read_curve_csv: malformed row '" + line + "'");
        const std::string key = line.substr(0, comma);
        const std::string val = line.substr(comma + 1);
        if (key == "inf") {
            vinf = std::stod(val);
            continue;
        }
        xs.push_back(std::stod(key));
        vs.push_back(std::stod(val));
    }
    if (xs.empty())
        throw IoError("read_curve_csv: no samples");
    // classify spacing for the grid tag
    GridKind kind = GridKind::Uniform;
    if (xs.size() > 2) {
        const double d0 = xs[1] - xs[0];
        for (std::size_t i = 2; i < xs.size(); ++i)
            if (std::abs((xs[i] - xs[i - 1]) - d0) > 1e-9 * std::max(1.0, std::abs(d0))) {
                kind = GridKind::LogSpaced;
                break;
            }
    }
    auto grid = std::make_shared<Grid>(std::move(xs), kind);
    return Curve(grid, std::move(vs), vinf);
}

inline Curve read_curve_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("read_curve_csv_file: cannot open " + path);
    return read_curve_csv(is);
}

// ---------------------------------------------------------------------------
// tables
// ---------------------------------------------------------------------------

inline void write_bound_table_csv(std::ostream& os, const StochasticBoundTable& t) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < t.times.size(); ++i)
        rows.push_back({t.times[i], t.phi_values[i], t.phi_se[i], t.psi_values[i], t.psi_se[i]});
    write_csv(os, {"t", "phi", "phi_se", "psi", "psi_se"}, rows);
}

inline void write_mc_estimate_csv(std::ostream& os, const McEstimate& e) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < e.times.size(); ++i)
        rows.push_back({e.times[i], e.rms[i], e.rms_se[i], e.mean[i], e.mean_se[i]});
    write_csv(os, {"t", "rms", "rms_se", "mean", "mean_se"}, rows);
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    std::vector<std::string> header{"t"};
    const std::size_t dim = traj.states.empty() ? 0 : traj.states.front().size();
    for (std::size_t i = 0; i < dim; ++i)
        header.push_back("state" + std::to_string(i));
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        row.insert(row.end(), traj.states[k].values.begin(), traj.states[k].values.end());
        rows.push_back(std::move(row));
    }
    write_csv(os, header, rows);
}

inline void write_panel_csv(std::ostream& os, const BrownianPanel& p) {
    std::vector<std::string> header{"t"};
    for (std::size_t j = 0; j < p.modes(); ++j)
        header.push_back("B" + std::to_string(j + 1));
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i <= p.fine_steps; ++i) {
        std::vector<double> row{p.fine_dt() * static_cast<double>(i)};
        for (std::size_t j = 0; j < p.modes(); ++j)
            row.push_back(p.paths[j][i]);
        rows.push_back(std::move(row));
    }
    write_csv(os, header, rows);
}

// ---------------------------------------------------------------------------
// JSON reports
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LiminfEstimate& e) {
    nlohmann::json j;
    j["form"] = e.form == LiminfEstimate::Form::Semigroup ? "semigroup" : "generator";
    j["t_sequence"] = e.t_sequence;
    j["quotients"] = e.quotients;
    j["estimate"] = e.estimate;
    j["flagged"] = e.flagged;
    j["input_outside_set"] = e.input_outside_set;
    j["warnings"] = e.warnings;
    return j;
}

inline nlohmann::json to_json(const SsncBatchReport& r) {
    nlohmann::json j;
    j["protocol"] = r.protocol;
    j["max_estimate"] = r.max_estimate;
    j["any_flagged"] = r.any_flagged;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        nlohmann::json je;
        je["h_index"] = e.h_index;
        je["u"] = e.u;
        je["estimate"] = e.estimate;
        je["flagged"] = e.flagged;
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    return j;
}

} // namespace setdist
