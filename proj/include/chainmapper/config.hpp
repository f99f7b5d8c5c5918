// config.hpp - run configuration: strict JSON schema, serialization and figure presets
//
//   {
//     "schema_version": 1,
//     "mode": "coeffs" | "single" | "full" | "thermalize-inspect",
//     "preset": "...", "variant": "...",                    (optional labels)
//     "spectral": { "family": "lorentzian" | "ohmic" | "tabulated",
//                   "parameters": {...}, "temperature_K": T, "hard_cutoff": w_hc },
//     "chain":    { "N": n | "auto", "M": m | "auto" },
//     "dynamics": { "t_max": t, "time_steps": n, "delta": D, "local_dim": d | "auto",
//                   "controls": { "dt", "chi_max", "svd_cutoff", "stride" } },
//     "output":   { "directory": "...", "formats": ["csv", "json"], "grid_points": n }
//   }
//
// Unknown keys are rejected; every error names the offending key path.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainmapper/chainmap.hpp"
#include "chainmapper/error.hpp"
#include "chainmapper/full_dynamics.hpp"
#include "chainmapper/io.hpp"
#include "chainmapper/spectral.hpp"

namespace chainmapper {

inline constexpr int config_schema_version = 1;

enum class Mode { coeffs, single, full, thermalize_inspect };

inline std::string mode_name(Mode m)
{
    switch (m) {
    case Mode::coeffs: return "coeffs";
    case Mode::single: return "single";
    case Mode::full: return "full";
    case Mode::thermalize_inspect: return "thermalize-inspect";
    }
    return "?";
}

inline Mode parse_mode(std::string_view name, const std::string& path = "mode")
{
    for (Mode m : {Mode::coeffs, Mode::single, Mode::full, Mode::thermalize_inspect}) {
        if (mode_name(m) == name) {
            return m;
        }
    }
    throw ConfigError(path, "unknown mode '" + std::string(name) +
                                "' (expected coeffs, single, full or thermalize-inspect)");
}

struct SpectralConfig {
    SpectralFamily family = Lorentzian{};
    double temperature_K = 0.0;
    double hard_cutoff = 1000.0;

    bool operator==(const SpectralConfig&) const = default;

    // Bare (zero-temperature) density; thermalize separately.
    SpectralDensity bare() const { return SpectralDensity(family, hard_cutoff); }
    SpectralDensity thermalized() const { return thermalize(bare(), temperature_K); }
};

struct ChainConfig {
    std::size_t N = 0; // 0: light-cone length for dynamics.t_max
    std::size_t M = 0; // 0: default node count for N

    bool operator==(const ChainConfig&) const = default;
};

struct DynamicsConfig {
    double t_max = 0.2;
    std::size_t time_steps = 400; // uniform grid for single-excitation runs
    std::optional<double> delta;  // required in full mode
    std::size_t local_dim = 0;    // 0: 12 for sub-Ohmic T > 0, else 8
    EvolutionControls controls;

    bool operator==(const DynamicsConfig& o) const
    {
        return t_max == o.t_max && time_steps == o.time_steps && delta == o.delta && local_dim == o.local_dim &&
               controls.dt == o.controls.dt && controls.t_max == o.controls.t_max &&
               controls.chi_max == o.controls.chi_max && controls.svd_cutoff == o.controls.svd_cutoff &&
               controls.stride == o.controls.stride;
    }
};

struct OutputConfig {
    std::string directory = "out";
    std::vector<std::string> formats = {"csv", "json"};
    std::size_t grid_points = 2001; // thermalize-inspect sampling

    bool operator==(const OutputConfig&) const = default;

    bool wants(std::string_view f) const { return std::find(formats.begin(), formats.end(), f) != formats.end(); }
};

struct RunConfig {
    int schema_version = config_schema_version;
    Mode mode = Mode::coeffs;
    std::string preset;
    std::string variant;
    SpectralConfig spectral;
    ChainConfig chain;
    std::optional<DynamicsConfig> dynamics;
    OutputConfig output;

    bool operator==(const RunConfig&) const = default;
};

// Local Fock dimension used when the config says "auto".
inline std::size_t default_local_dim(const SpectralConfig& s)
{
    const auto* o = std::get_if<Ohmic>(&s.family);
    return (o && o->s < 1.0 && s.temperature_K > 0.0) ? 12 : 8;
}

namespace detail {

using io::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& where)
{
    if (!obj.is_object()) {
        throw ConfigError(where.empty() ? "" : where.substr(0, where.size() - 1), "expected an object");
    }
    io::detail::reject_unknown(obj, allowed, where);
}

inline const json* optional_key(const json& obj, const std::string& key)
{
    return obj.contains(key) ? &obj.at(key) : nullptr;
}

inline double finite_number(const json& v, const std::string& path)
{
    const double x = io::detail::number(v, path);
    if (!std::isfinite(x)) {
        throw ConfigError(path, "must be finite");
    }
    return x;
}

inline double positive(const json& v, const std::string& path)
{
    const double x = finite_number(v, path);
    if (!(x > 0.0)) {
        throw ConfigError(path, "must be > 0");
    }
    return x;
}

inline std::size_t count(const json& v, const std::string& path, std::size_t min_value)
{
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
        throw ConfigError(path, "expected an integer >= " + std::to_string(min_value));
    }
    return v.get<std::size_t>();
}

// Integer or the string "auto" (returned as 0).
inline std::size_t count_or_auto(const json& v, const std::string& path, std::size_t min_value)
{
    if (v.is_string() && v.get<std::string>() == "auto") {
        return 0;
    }
    if (v.is_string()) {
        throw ConfigError(path, "expected an integer or \"auto\"");
    }
    return count(v, path, min_value);
}

inline std::string text(const json& v, const std::string& path)
{
    if (!v.is_string()) {
        throw ConfigError(path, "expected a string");
    }
    return v.get<std::string>();
}

inline SpectralFamily parse_family(const std::string& name, const json& p)
{
    const std::string where = "spectral.parameters.";
    auto get = [&](const std::string& key) -> const json& { return io::detail::require(p, key, where); };
    if (name == "lorentzian") {
        reject_unknown_keys(p, {"lambda", "gamma", "omega0"}, where);
        Lorentzian f;
        f.lambda = finite_number(get("lambda"), where + "lambda");
        f.gamma = positive(get("gamma"), where + "gamma");
        f.omega0 = positive(get("omega0"), where + "omega0");
        if (f.lambda < 0.0) {
            throw ConfigError(where + "lambda", "must be >= 0");
        }
        return f;
    }
    if (name == "ohmic") {
        reject_unknown_keys(p, {"lambda", "s", "omega_c"}, where);
        Ohmic f;
        f.lambda = finite_number(get("lambda"), where + "lambda");
        f.s = positive(get("s"), where + "s");
        f.omega_c = positive(get("omega_c"), where + "omega_c");
        if (f.lambda < 0.0) {
            throw ConfigError(where + "lambda", "must be >= 0");
        }
        return f;
    }
    if (name == "tabulated") {
        reject_unknown_keys(p, {"omega", "values"}, where);
        Tabulated t;
        t.omega = io::detail::number_array(get("omega"), where + "omega");
        t.values = io::detail::number_array(get("values"), where + "values");
        try {
            detail::validate(t);
        } catch (const ParameterError& e) {
            throw ConfigError(where + "values", e.what());
        }
        return t;
    }
    throw ConfigError("spectral.family", "unknown family '" + name + "' (expected lorentzian, ohmic or tabulated)");
}

inline json family_parameters_json(const SpectralFamily& family)
{
    struct Visitor {
        json operator()(const Lorentzian& p) const
        {
            return {{"lambda", p.lambda}, {"gamma", p.gamma}, {"omega0", p.omega0}};
        }
        json operator()(const Ohmic& p) const { return {{"lambda", p.lambda}, {"s", p.s}, {"omega_c", p.omega_c}}; }
        json operator()(const Tabulated& t) const { return {{"omega", t.omega}, {"values", t.values}}; }
    };
    return std::visit(Visitor{}, family);
}

inline json count_or_auto_json(std::size_t n) { return n == 0 ? json("auto") : json(n); }

} // namespace detail

inline io::json to_json(const RunConfig& c)
{
    using io::json;
    json out = {
        {"schema_version", c.schema_version},
        {"mode", mode_name(c.mode)},
        {"spectral",
         {{"family", family_name(c.spectral.family)},
          {"parameters", detail::family_parameters_json(c.spectral.family)},
          {"temperature_K", c.spectral.temperature_K},
          {"hard_cutoff", c.spectral.hard_cutoff}}},
        {"chain", {{"N", detail::count_or_auto_json(c.chain.N)}, {"M", detail::count_or_auto_json(c.chain.M)}}},
        {"output",
         {{"directory", c.output.directory}, {"formats", c.output.formats}, {"grid_points", c.output.grid_points}}},
    };
    if (!c.preset.empty()) {
        out["preset"] = c.preset;
    }
    if (!c.variant.empty()) {
        out["variant"] = c.variant;
    }
    if (c.dynamics) {
        const auto& d = *c.dynamics;
        json dyn = {
            {"t_max", d.t_max},
            {"time_steps", d.time_steps},
            {"local_dim", detail::count_or_auto_json(d.local_dim)},
            {"controls",
             {{"dt", d.controls.dt},
              {"chi_max", d.controls.chi_max},
              {"svd_cutoff", d.controls.svd_cutoff},
              {"stride", d.controls.stride}}},
        };
        if (d.delta) {
            dyn["delta"] = *d.delta;
        }
        out["dynamics"] = dyn;
    }
    return out;
}

inline RunConfig config_from_json(const io::json& j)
{
    using detail::optional_key;
    using io::json;
    detail::reject_unknown_keys(
        j, {"schema_version", "mode", "preset", "variant", "spectral", "chain", "dynamics", "output"}, "");
    RunConfig c;
    const json& version = io::detail::require(j, "schema_version", "");
    if (!version.is_number_integer() || version.get<int>() != config_schema_version) {
        throw ConfigError("schema_version", "unsupported schema version (expected " +
                                                std::to_string(config_schema_version) + ")");
    }
    c.mode = parse_mode(detail::text(io::detail::require(j, "mode", ""), "mode"));
    if (const json* v = optional_key(j, "preset")) {
        c.preset = detail::text(*v, "preset");
    }
    if (const json* v = optional_key(j, "variant")) {
        c.variant = detail::text(*v, "variant");
    }

    const json& sp = io::detail::require(j, "spectral", "");
    detail::reject_unknown_keys(sp, {"family", "parameters", "temperature_K", "hard_cutoff"}, "spectral.");
    const std::string family = detail::text(io::detail::require(sp, "family", "spectral."), "spectral.family");
    c.spectral.family = detail::parse_family(family, io::detail::require(sp, "parameters", "spectral."));
    if (const json* v = optional_key(sp, "temperature_K")) {
        c.spectral.temperature_K = detail::finite_number(*v, "spectral.temperature_K");
        if (c.spectral.temperature_K < 0.0) {
            throw ConfigError("spectral.temperature_K", "must be >= 0");
        }
    }
    c.spectral.hard_cutoff =
        detail::positive(io::detail::require(sp, "hard_cutoff", "spectral."), "spectral.hard_cutoff");

    if (const json* ch = optional_key(j, "chain")) {
        detail::reject_unknown_keys(*ch, {"N", "M"}, "chain.");
        if (const json* v = optional_key(*ch, "N")) {
            c.chain.N = detail::count_or_auto(*v, "chain.N", 1);
        }
        if (const json* v = optional_key(*ch, "M")) {
            c.chain.M = detail::count_or_auto(*v, "chain.M", 1);
        }
    }

    if (const json* dy = optional_key(j, "dynamics")) {
        detail::reject_unknown_keys(*dy, {"t_max", "time_steps", "delta", "local_dim", "controls"}, "dynamics.");
        DynamicsConfig d;
        d.t_max = detail::positive(io::detail::require(*dy, "t_max", "dynamics."), "dynamics.t_max");
        if (const json* v = optional_key(*dy, "time_steps")) {
            d.time_steps = detail::count(*v, "dynamics.time_steps", 1);
        }
        if (const json* v = optional_key(*dy, "delta")) {
            d.delta = detail::finite_number(*v, "dynamics.delta");
        }
        if (const json* v = optional_key(*dy, "local_dim")) {
            d.local_dim = detail::count_or_auto(*v, "dynamics.local_dim", 2);
        }
        if (const json* ct = optional_key(*dy, "controls")) {
            detail::reject_unknown_keys(*ct, {"dt", "chi_max", "svd_cutoff", "stride"}, "dynamics.controls.");
            if (const json* v = optional_key(*ct, "dt")) {
                d.controls.dt = detail::positive(*v, "dynamics.controls.dt");
            }
            if (const json* v = optional_key(*ct, "chi_max")) {
                d.controls.chi_max = detail::count(*v, "dynamics.controls.chi_max", 2);
            }
            if (const json* v = optional_key(*ct, "svd_cutoff")) {
                d.controls.svd_cutoff = detail::positive(*v, "dynamics.controls.svd_cutoff");
                if (d.controls.svd_cutoff > 1e-4) {
                    throw ConfigError("dynamics.controls.svd_cutoff", "must lie in (0, 1e-4]");
                }
            }
            if (const json* v = optional_key(*ct, "stride")) {
                d.controls.stride = detail::count(*v, "dynamics.controls.stride", 1);
            }
        }
        d.controls.t_max = d.t_max;
        c.dynamics = d;
    }

    if (const json* out = optional_key(j, "output")) {
        detail::reject_unknown_keys(*out, {"directory", "formats", "grid_points"}, "output.");
        if (const json* v = optional_key(*out, "directory")) {
            c.output.directory = detail::text(*v, "output.directory");
        }
        if (const json* v = optional_key(*out, "formats")) {
            if (!v->is_array()) {
                throw ConfigError("output.formats", "expected an array of strings");
            }
            c.output.formats.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                const std::string path = "output.formats[" + std::to_string(i) + "]";
                const std::string f = detail::text((*v)[i], path);
                if (f != "csv" && f != "json") {
                    throw ConfigError(path, "unknown format '" + f + "' (expected csv or json)");
                }
                c.output.formats.push_back(f);
            }
        }
        if (const json* v = optional_key(*out, "grid_points")) {
            c.output.grid_points = detail::count(*v, "output.grid_points", 2);
        }
    }
    return c;
}

// Checks that the blocks a mode needs are present.
inline void validate_for_mode(const RunConfig& c)
{
    switch (c.mode) {
    case Mode::coeffs:
        if (c.chain.N == 0 && !c.dynamics) {
            throw ConfigError("chain.N", "\"auto\" needs dynamics.t_max to size the chain");
        }
        break;
    case Mode::single:
        if (!c.dynamics) {
            throw ConfigError("dynamics", "missing block (required in single mode)");
        }
        break;
    case Mode::full:
        if (!c.dynamics) {
            throw ConfigError("dynamics", "missing block (required in full mode)");
        }
        if (!c.dynamics->delta) {
            throw ConfigError("dynamics.delta", "missing key (required in full mode)");
        }
        break;
    case Mode::thermalize_inspect: break;
    }
}

inline RunConfig parse_config(std::string_view text)
{
    io::json j;
    try {
        j = io::json::parse(text);
    } catch (const io::json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    RunConfig c = config_from_json(j);
    validate_for_mode(c);
    return c;
}

inline std::string dump_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

// FNV-1a over the canonical serialization, output directory excluded.
inline std::uint64_t config_hash(const RunConfig& c)
{
    io::json j = to_json(c);
    j["output"].erase("directory");
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash_hex(const RunConfig& c)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(c)));
    return buf;
}

// ---- figure presets ----

inline const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names = {"lorentz-T0",   "lorentz-finiteT", "ohmic-T0",
                                                   "ohmic-finiteT", "full-lorentz",    "full-ohmic"};
    return names;
}

namespace detail {

inline std::string label_number(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

inline RunConfig preset_base(const std::string& name, Mode mode, SpectralFamily family, double temperature,
                             double t_max)
{
    RunConfig c;
    c.mode = mode;
    c.preset = name;
    c.spectral.family = std::move(family);
    c.spectral.temperature_K = temperature;
    c.spectral.hard_cutoff = 1000.0;
    DynamicsConfig d;
    d.t_max = t_max;
    d.controls.t_max = t_max;
    c.dynamics = d;
    return c;
}

} // namespace detail

// Horizon of the full-dynamics presets; the sub-Ohmic T = 300 K variant is shorter because the
// excitation pile-up on the first sites drives the bond dimension past chi_max = 64 later on.
inline constexpr double full_preset_t_max = 0.05;
inline constexpr double full_preset_t_max_subohmic_hot = 0.02;

// Every variant of a named preset, fully populated.
inline std::vector<RunConfig> figure_presets(const std::string& name)
{
    std::vector<RunConfig> out;
    const std::vector<double> gammas = {0.001, 1.0, 10.0};
    const std::vector<double> exponents = {0.5, 1.0, 2.0};
    using detail::label_number;
    auto lorentz = [](double g) { return Lorentzian{60.0, g, 100.0}; };
    auto ohmic = [](double s) { return Ohmic{1.0, s, 100.0}; };

    if (name == "lorentz-T0" || name == "lorentz-finiteT") {
        const std::vector<double> temps = name == "lorentz-T0" ? std::vector<double>{0.0} : std::vector<double>{77.0, 300.0};
        for (double T : temps) {
            for (double g : gammas) {
                RunConfig c = detail::preset_base(name, Mode::single, lorentz(g), T, 0.2);
                c.variant = "gamma" + label_number(g) + "_T" + label_number(T);
                out.push_back(std::move(c));
            }
        }
    } else if (name == "ohmic-T0" || name == "ohmic-finiteT") {
        const double T = name == "ohmic-T0" ? 0.0 : 300.0;
        for (double s : exponents) {
            RunConfig c = detail::preset_base(name, Mode::single, ohmic(s), T, 0.2);
            c.variant = "s" + label_number(s) + "_T" + label_number(T);
            out.push_back(std::move(c));
        }
    } else if (name == "full-lorentz") {
        for (double g : {0.001, 10.0}) {
            for (double T : {0.0, 77.0, 300.0}) {
                RunConfig c = detail::preset_base(name, Mode::full, lorentz(g), T, full_preset_t_max);
                c.dynamics->delta = 70.0;
                c.variant = "gamma" + label_number(g) + "_T" + label_number(T);
                out.push_back(std::move(c));
            }
        }
    } else if (name == "full-ohmic") {
        for (double s : exponents) {
            for (double T : {0.0, 77.0, 300.0}) {
                const double horizon = (s < 1.0 && T >= 300.0) ? full_preset_t_max_subohmic_hot : full_preset_t_max;
                RunConfig c = detail::preset_base(name, Mode::full, ohmic(s), T, horizon);
                c.dynamics->delta = 70.0;
                c.variant = "s" + label_number(s) + "_T" + label_number(T);
                out.push_back(std::move(c));
            }
        }
    } else {
        std::string known;
        for (const auto& n : preset_names()) {
            known += (known.empty() ? "" : ", ") + n;
        }
        throw ConfigError("preset", "unknown preset '" + name + "' (known: " + known + ")");
    }
    return out;
}

} // namespace chainmapper
