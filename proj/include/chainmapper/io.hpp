// io.hpp - CSV/JSON emission and parsing, atomic file writes
//
// CSV: header row, comma separated, '.' decimal point, doubles at 17 significant digits.
// JSON doubles are written by nlohmann::json in shortest round-trip form, which parses back
// to the identical bit pattern.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "chainmapper/chainmap.hpp"
#include "chainmapper/error.hpp"
#include "chainmapper/full_dynamics.hpp"
#include "chainmapper/single_excitation.hpp"

namespace chainmapper::io {

using json = nlohmann::json;

inline constexpr int coefficient_schema_version = 1;

inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Write `content` to `path` via a sibling temporary file and rename, so readers never see a
// partial file. Parent directories are created.
inline void write_atomic(const std::filesystem::path& path, std::string_view content)
{
    namespace fs = std::filesystem;
    static std::atomic<unsigned long> counter{0};
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp, ec);
            throw IoError("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename temporary file onto " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- CSV ----

inline std::string trajectory_csv(const WavepacketTrajectory& traj)
{
    std::string out = "t";
    for (std::size_t x = 1; x <= traj.sites(); ++x) {
        out += ",p_" + std::to_string(x);
    }
    out += '\n';
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        out += format_double(traj.times[i]);
        for (Eigen::Index x = 0; x < traj.populations.cols(); ++x) {
            out += ',';
            out += format_double(traj.populations(static_cast<Eigen::Index>(i), x));
        }
        out += '\n';
    }
    return out;
}

inline std::string full_dynamics_csv(const FullDynamicsRecord& rec)
{
    std::string out = "t,sigma_x";
    for (Eigen::Index k = 1; k <= rec.occupations.cols(); ++k) {
        out += ",n_" + std::to_string(k);
    }
    out += '\n';
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        out += format_double(rec.times[i]);
        out += ',';
        out += format_double(rec.sigma_x[i]);
        for (Eigen::Index k = 0; k < rec.occupations.cols(); ++k) {
            out += ',';
            out += format_double(rec.occupations(static_cast<Eigen::Index>(i), k));
        }
        out += '\n';
    }
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string_view name) const
    {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) {
                return j;
            }
        }
        throw ParameterError("csv: no column named " + std::string(name));
    }
};

// Numeric CSV reader for the files written above (no quoting). Empty cells read as NaN.
inline CsvTable parse_csv(std::string_view text)
{
    CsvTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ',')) {
            out.push_back(cell);
        }
        if (!s.empty() && s.back() == ',') {
            out.emplace_back();
        }
        return out;
    };
    if (!std::getline(in, line)) {
        throw ParameterError("csv: missing header row");
    }
    table.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != table.header.size()) {
            throw ParameterError("csv: line " + std::to_string(lineno) + " has the wrong number of fields");
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            if (c.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != c.size()) {
                throw ParameterError("csv: line " + std::to_string(lineno) + ": not a number: '" + c + "'");
            }
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---- chain coefficients ----

inline json to_json(const ChainCoefficients& c)
{
    json meta = {
        {"hard_cutoff", c.metadata.hard_cutoff},
        {"node_count", c.metadata.node_count},
        {"family", c.metadata.family},
        {"family_parameters", c.metadata.family_parameters},
    };
    return json{
        {"version", coefficient_schema_version},
        {"support", {c.support.lo, c.support.hi}},
        {"temperature_K", c.metadata.temperature_K},
        {"kappa0", c.kappa0},
        {"omegas", c.omegas},
        {"kappas", c.kappas},
        {"metadata", meta},
    };
}

namespace detail {

inline const json& require(const json& obj, const std::string& key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key)) {
        throw ConfigError(where + key, "missing key");
    }
    return obj.at(key);
}

inline double number(const json& v, const std::string& path)
{
    if (!v.is_number()) {
        throw ConfigError(path, "expected a number");
    }
    return v.get<double>();
}

inline std::vector<double> number_array(const json& v, const std::string& path)
{
    if (!v.is_array()) {
        throw ConfigError(path, "expected an array of numbers");
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(where + key, "unknown key");
        }
    }
}

} // namespace detail

inline ChainCoefficients coefficients_from_json(const json& j)
{
    using detail::number;
    using detail::require;
    if (!j.is_object()) {
        throw ConfigError("", "coefficient document must be an object");
    }
    detail::reject_unknown(j, {"version", "support", "temperature_K", "kappa0", "omegas", "kappas", "metadata"}, "");
    const json& version = require(j, "version", "");
    if (!version.is_number_integer() || version.get<int>() != coefficient_schema_version) {
        throw ConfigError("version", "unsupported coefficient schema version");
    }
    ChainCoefficients c;
    const auto support = detail::number_array(require(j, "support", ""), "support");
    if (support.size() != 2 || !(support[0] < support[1])) {
        throw ConfigError("support", "expected [min, max] with min < max");
    }
    c.support = {support[0], support[1]};
    c.metadata.temperature_K = number(require(j, "temperature_K", ""), "temperature_K");
    c.kappa0 = number(require(j, "kappa0", ""), "kappa0");
    c.omegas = detail::number_array(require(j, "omegas", ""), "omegas");
    c.kappas = detail::number_array(require(j, "kappas", ""), "kappas");
    if (c.omegas.empty() || c.kappas.size() + 1 != c.omegas.size()) {
        throw ConfigError("kappas", "expected exactly one fewer coupling than site energies");
    }
    const json& meta = require(j, "metadata", "");
    detail::reject_unknown(meta, {"hard_cutoff", "node_count", "family", "family_parameters"}, "metadata.");
    c.metadata.hard_cutoff = number(require(meta, "hard_cutoff", "metadata."), "metadata.hard_cutoff");
    const json& nodes = require(meta, "node_count", "metadata.");
    if (!nodes.is_number_unsigned()) {
        throw ConfigError("metadata.node_count", "expected a nonnegative integer");
    }
    c.metadata.node_count = nodes.get<std::size_t>();
    const json& family = require(meta, "family", "metadata.");
    if (!family.is_string()) {
        throw ConfigError("metadata.family", "expected a string");
    }
    c.metadata.family = family.get<std::string>();
    const json& params = require(meta, "family_parameters", "metadata.");
    if (!params.is_object()) {
        throw ConfigError("metadata.family_parameters", "expected an object");
    }
    for (const auto& [key, value] : params.items()) {
        c.metadata.family_parameters[key] = number(value, "metadata.family_parameters." + key);
    }
    return c;
}

inline std::string dump_coefficients(const ChainCoefficients& c) { return to_json(c).dump(2) + "\n"; }

inline ChainCoefficients parse_coefficients(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return coefficients_from_json(j);
}

// ---- full-dynamics diagnostics for the run manifest ----

inline json truncation_summary(const FullDynamicsRecord& rec)
{
    double max_norm_dev = 0.0;
    for (double n : rec.norm) {
        max_norm_dev = std::max(max_norm_dev, std::abs(n - 1.0));
    }
    double min_eig = 1.0;
    for (double e : rec.system_min_eigenvalue) {
        min_eig = std::min(min_eig, e);
    }
    double drift = 0.0;
    for (double e : rec.energy) {
        drift = std::max(drift, std::abs(e - rec.energy.front()));
    }
    return json{
        {"max_bond", rec.max_bond},
        {"max_discarded_weight", rec.max_discarded},
        {"min_norm_before_renormalization", rec.min_norm_before_renormalization},
        {"max_norm_deviation", max_norm_dev},
        {"min_system_eigenvalue", min_eig},
        {"max_energy_drift", drift},
        {"convergence_failure", rec.convergence_failure},
        {"warnings", rec.warnings},
    };
}

} // namespace chainmapper::io
