// pipeline.hpp - executes a RunConfig: spectral density -> chain -> dynamics -> files
//
// Artifacts are named <mode>_<preset|config>[_<variant>]_<hash>.<kind>, where hash is the
// FNV-1a hash of the canonical config. Every run writes a manifest with the resolved
// parameters (including defaults) and diagnostics. Output bytes depend only on the config.

#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "chainmapper/chainmap.hpp"
#include "chainmapper/config.hpp"
#include "chainmapper/error.hpp"
#include "chainmapper/full_dynamics.hpp"
#include "chainmapper/io.hpp"
#include "chainmapper/single_excitation.hpp"
#include "chainmapper/spectral.hpp"

namespace chainmapper {

inline constexpr const char* version_string = "chainmapper 1.0.0";

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_numerical = 2, exit_io = 3 };

struct RunResult {
    int exit_code = exit_ok;
    std::string message; // error text when exit_code != 0
    std::vector<std::filesystem::path> files;
    std::vector<std::string> summary; // one line per stage
};

inline std::string artifact_stem(const RunConfig& c)
{
    std::string stem = mode_name(c.mode) + "_" + (c.preset.empty() ? std::string("config") : c.preset);
    if (!c.variant.empty()) {
        stem += "_" + c.variant;
    }
    return stem + "_" + config_hash_hex(c);
}

namespace detail {

inline std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

struct Stage {
    RunResult& result;
    io::json& manifest;
    std::filesystem::path dir;
    std::string stem;

    void line(const std::string& s) { result.summary.push_back(s); }

    void write(const std::string& suffix, const std::string& content)
    {
        const auto path = dir / (stem + suffix);
        io::write_atomic(path, content);
        result.files.push_back(path);
    }
};

inline std::size_t resolve_chain_length(const RunConfig& c, const SpectralDensity& bath)
{
    if (c.chain.N > 0) {
        return c.chain.N;
    }
    if (!c.dynamics) {
        throw ConfigError("chain.N", "\"auto\" needs dynamics.t_max to size the chain");
    }
    return lightcone_length(bath.support(), c.dynamics->t_max);
}

inline io::json coefficient_summary(const ChainCoefficients& chain, std::size_t M)
{
    const auto lim = asymptotic_limits(chain.support);
    return io::json{{"N", chain.length()},
                    {"M", M},
                    {"kappa0", chain.kappa0},
                    {"omega_inf", lim.omega_inf},
                    {"kappa_inf", lim.kappa_inf},
                    {"discretization",
                     {{"min_panels", DiscretizationOptions{}.min_panels},
                      {"graded", DiscretizationOptions{}.graded},
                      {"refinement_nodes", refinement_nodes}}},
                    {"lightcone", {{"margin", lightcone_margin}, {"buffer", lightcone_buffer}}}};
}

inline std::string coefficient_table_csv(const ChainCoefficients& c)
{
    std::string out = "n,omega_n,kappa_n\n";
    for (std::size_t n = 0; n < c.length(); ++n) {
        out += std::to_string(n + 1) + "," + io::format_double(c.omegas[n]) + ",";
        out += n < c.kappas.size() ? io::format_double(c.kappas[n]) : std::string();
        out += "\n";
    }
    return out;
}

inline void run_coeffs(const RunConfig& c, Stage& st)
{
    const SpectralDensity bath = c.spectral.thermalized();
    const std::size_t N = resolve_chain_length(c, bath);
    const std::size_t M = c.chain.M > 0 ? c.chain.M : default_node_count(N);
    const ChainCoefficients chain = map_to_chain(bath, N, M);
    st.manifest["resolved"] = coefficient_summary(chain, M);
    st.line("chainmap: N=" + std::to_string(N) + " M=" + std::to_string(M) + " kappa0=" + fmt(chain.kappa0) +
            " omega_N=" + fmt(chain.omegas.back()) +
            (chain.kappas.empty() ? std::string() : " kappa_{N-1}=" + fmt(chain.kappas.back())));
    if (c.output.wants("json")) {
        st.write(".coeffs.json", io::dump_coefficients(chain));
    }
    if (c.output.wants("csv")) {
        st.write(".coeffs.csv", coefficient_table_csv(chain));
    }
}

inline void run_single(const RunConfig& c, Stage& st)
{
    const auto& dyn = *c.dynamics;
    const SpectralDensity bath = c.spectral.thermalized();
    const std::size_t N = resolve_chain_length(c, bath);
    const std::size_t M = c.chain.M > 0 ? c.chain.M : default_node_count(N);
    const ChainCoefficients chain = map_to_chain(bath, N, M);
    st.line("chainmap: N=" + std::to_string(N) + " M=" + std::to_string(M) + " kappa0=" + fmt(chain.kappa0));

    const auto times = uniform_grid(dyn.t_max, dyn.time_steps);
    const auto h = TridiagonalHamiltonian::from_chain(chain);
    const auto traj = propagate(h, site_state(N, 1), times);
    double norm_dev = 0.0;
    for (Eigen::Index i = 0; i < traj.populations.rows(); ++i) {
        norm_dev = std::max(norm_dev, std::abs(traj.populations.row(i).sum() - 1.0));
    }
    const auto front = front_position(traj);
    io::json resolved = coefficient_summary(chain, M);
    resolved["time_points"] = times.size();
    resolved["initial_site"] = 1;
    st.manifest["resolved"] = resolved;
    st.manifest["diagnostics"] = {{"max_population_sum_deviation", norm_dev},
                                  {"truncation_warning", traj.truncation_warning},
                                  {"max_edge_population", traj.max_edge_population},
                                  {"final_front_site", front.back()},
                                  {"front_threshold", 1e-3}};
    st.line("single: steps=" + std::to_string(times.size() - 1) + " p1(t_max)=" +
            fmt(traj.populations(traj.populations.rows() - 1, 0)) + " front=" + std::to_string(front.back()) +
            (traj.truncation_warning ? " WARNING: excitation reached the chain end" : ""));
    if (c.output.wants("csv")) {
        st.write(".csv", io::trajectory_csv(traj));
    }
    if (c.output.wants("json")) {
        st.write(".coeffs.json", io::dump_coefficients(chain));
    }
}

inline void run_full(const RunConfig& c, Stage& st)
{
    const auto& dyn = *c.dynamics;
    const std::size_t d = dyn.local_dim > 0 ? dyn.local_dim : default_local_dim(c.spectral);
    BuildOptions opt;
    opt.length = c.chain.N;
    opt.node_count = c.chain.M;
    const SpinBosonModel model = build_model(c.spectral.bare(), c.spectral.temperature_K, *dyn.delta, dyn.t_max, d, opt);
    const std::size_t M = c.chain.M > 0 ? c.chain.M : default_node_count(model.length);
    st.line("chainmap: L=" + std::to_string(model.length) + " M=" + std::to_string(M) +
            " kappa0=" + fmt(model.chain.kappa0) + " d=" + std::to_string(d));

    EvolutionControls controls = dyn.controls;
    controls.t_max = dyn.t_max;
    const FullDynamicsRecord rec = evolve(model, controls);
    io::json resolved = coefficient_summary(model.chain, M);
    resolved["L"] = model.length;
    resolved["local_dim"] = d;
    resolved["delta"] = model.delta;
    resolved["steps"] = controls.steps();
    resolved["system_state"] = "plus";
    resolved["chain_state"] = "vacuum";
    st.manifest["resolved"] = resolved;
    st.manifest["diagnostics"] = io::truncation_summary(rec);
    std::string line = "full: steps=" + std::to_string(controls.steps()) + " sigma_x(t_max)=" +
                       fmt(rec.sigma_x.back()) + " max_bond=" + std::to_string(rec.max_bond) +
                       " max_discarded=" + fmt(rec.max_discarded);
    for (const auto& w : rec.warnings) {
        line += " WARNING: " + w;
    }
    st.line(line);
    if (c.output.wants("csv")) {
        st.write(".csv", io::full_dynamics_csv(rec));
    }
    if (c.output.wants("json")) {
        st.write(".coeffs.json", io::dump_coefficients(model.chain));
    }
}

inline void run_inspect(const RunConfig& c, Stage& st)
{
    const SpectralDensity bare = c.spectral.bare();
    const SpectralDensity bath = c.spectral.thermalized();
    const Interval sup = bath.support();
    const std::size_t n = c.output.grid_points;
    std::string csv = "omega,J_bare,J_thermal\n";
    for (std::size_t i = 0; i < n; ++i) {
        const double w = sup.lo + sup.width() * static_cast<double>(i) / static_cast<double>(n - 1);
        const double jb = w > 0.0 ? bare(w) : 0.0;
        csv += io::format_double(w) + "," + io::format_double(jb) + "," + io::format_double(bath(w)) + "\n";
    }
    const auto bp = detail::integration_breakpoints(bath, sup.lo, sup.hi);
    const auto mass = quadrature::integrate([&bath](double w) { return bath(w); }, bp, 1e-12, bath.singular_points());
    const double tail = reorganization_tail_ratio(bare, c.spectral.hard_cutoff);
    st.manifest["resolved"] = io::json{{"support", {sup.lo, sup.hi}},
                                       {"kappa0_squared", mass.value},
                                       {"reorganization_tail_ratio", tail},
                                       {"grid_points", n}};
    st.line("thermalize: T=" + fmt(c.spectral.temperature_K) + " support=[" + fmt(sup.lo) + ", " + fmt(sup.hi) +
            "] kappa0^2=" + fmt(mass.value) + " tail_ratio=" + fmt(tail));
    if (c.output.wants("csv")) {
        st.write(".csv", csv);
    }
}

} // namespace detail

// Run one configuration. Errors are converted into exit codes; nothing propagates.
inline RunResult run(const RunConfig& config)
{
    RunResult result;
    io::json manifest = {
        {"version", version_string},
        {"config", to_json(config)},
        {"config_hash", config_hash_hex(config)},
    };
    detail::Stage st{result, manifest, config.output.directory, artifact_stem(config)};
    try {
        validate_for_mode(config);
        try {
            (void)config.spectral.bare();
        } catch (const ParameterError& e) {
            throw ConfigError("spectral", e.what());
        }
        if (config.dynamics) {
            try {
                EvolutionControls ctl = config.dynamics->controls;
                ctl.t_max = config.dynamics->t_max;
                ctl.validate();
            } catch (const ParameterError& e) {
                throw ConfigError("dynamics.controls", e.what());
            }
        }
        switch (config.mode) {
        case Mode::coeffs: detail::run_coeffs(config, st); break;
        case Mode::single: detail::run_single(config, st); break;
        case Mode::full: detail::run_full(config, st); break;
        case Mode::thermalize_inspect: detail::run_inspect(config, st); break;
        }
        st.write(".manifest.json", manifest.dump(2) + "\n");
    } catch (const ConfigError& e) {
        result.exit_code = exit_config;
        result.message = std::string("config error: ") + e.what();
    } catch (const ParameterError& e) {
        result.exit_code = exit_config;
        result.message = std::string("invalid parameter: ") + e.what();
    } catch (const IoError& e) {
        result.exit_code = exit_io;
        result.message = std::string("I/O error: ") + e.what();
    } catch (const std::filesystem::filesystem_error& e) {
        result.exit_code = exit_io;
        result.message = std::string("I/O error: ") + e.what();
    } catch (const DomainError& e) {
        result.exit_code = exit_numerical;
        result.message = std::string("numerical error: ") + e.what();
    } catch (const NumericalError& e) {
        result.exit_code = exit_numerical;
        result.message = std::string("numerical error: ") + e.what();
    }
    return result;
}

// Run independent configurations on up to `jobs` threads. Results keep input order.
inline std::vector<RunResult> run_all(const std::vector<RunConfig>& configs, std::size_t jobs)
{
    std::vector<RunResult> results(configs.size());
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, configs.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            results[i] = run(configs[i]);
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    return results;
}

// Exit code of the first failing run in input order, 0 if all succeeded.
inline int combined_exit_code(const std::vector<RunResult>& results)
{
    int code = exit_ok;
    for (const auto& r : results) {
        if (r.exit_code != exit_ok && code == exit_ok) {
            code = r.exit_code;
        }
    }
    return code;
}

} // namespace chainmapper
