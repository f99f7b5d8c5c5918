// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select criteria by id
// (e.g. `acceptance 1 2 10a`). Exit code is 1 when any selected criterion fails.

#include <chainmapper/chainmap.hpp>
#include <chainmapper/config.hpp>
#include <chainmapper/full_dynamics.hpp>
#include <chainmapper/single_excitation.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

using namespace chainmapper;

namespace {

// tolerances, pinned
constexpr double c1_omega_tol = 5.0;
constexpr double c1_kappa_tol = 2.5;
constexpr double c1_runtime_s = 1.0;
constexpr double c2_tol = 1e-10;
constexpr double c2_runtime_s = 0.1;
constexpr double c3_rel_tol = 1e-8;
constexpr double c4_rel_tol = 0.10;
constexpr double c4_runtime_s = 10.0;
constexpr double c5_tol = 1e-8;
constexpr double c6_rel_tol = 0.10;
constexpr double c7_tol = 1e-10;
constexpr double c8_tol = 1e-3;
// second order: dev(dt -> dt/2) / dev(dt/2 -> dt/4) = 4 up to higher-order terms
constexpr double c9_order_lo = 3.0;
constexpr double c9_order_hi = 5.0;
constexpr double c9_exact_cutoff = 1e-16;
constexpr double c9_chi_tol = 1e-3;
constexpr double c10a_ratio = 2.0;
constexpr double c10b_fraction = 0.99;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string id;
    std::string title;
    std::function<Outcome()> check;
};

class Timer {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double x, int digits = 4)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

SpectralDensity ohmic(double s, double T = 0.0)
{
    return thermalize(SpectralDensity(Ohmic{1.0, s, 100.0}, 1000.0), T);
}

SpectralDensity lorentz(double gamma, double T = 0.0)
{
    return thermalize(SpectralDensity(Lorentzian{60.0, gamma, 100.0}, 1000.0), T);
}

// Chain of light-cone length for t_max, excitation started on site 1.
WavepacketTrajectory single_run(const SpectralDensity& sd, double t_max, std::size_t steps,
                                ChainCoefficients* chain_out = nullptr)
{
    const std::size_t N = lightcone_length(sd.support(), t_max);
    const auto chain = map_to_chain(sd, N);
    if (chain_out) {
        *chain_out = chain;
    }
    return propagate(TridiagonalHamiltonian::from_chain(chain), site_state(N, 1), uniform_grid(t_max, steps));
}

double max_population_sum_deviation(const WavepacketTrajectory& traj)
{
    double dev = 0.0;
    for (Eigen::Index i = 0; i < traj.populations.rows(); ++i) {
        dev = std::max(dev, std::abs(traj.populations.row(i).sum() - 1.0));
    }
    return dev;
}

// Every distinct spectral configuration among the presets.
std::vector<SpectralConfig> preset_measures()
{
    std::vector<SpectralConfig> out;
    for (const auto& name : preset_names()) {
        for (const auto& c : figure_presets(name)) {
            if (std::find(out.begin(), out.end(), c.spectral) == out.end()) {
                out.push_back(c.spectral);
            }
        }
    }
    return out;
}

std::string label(const SpectralConfig& s)
{
    std::ostringstream os;
    if (const auto* o = std::get_if<Ohmic>(&s.family)) {
        os << "ohmic s=" << o->s;
    } else if (const auto* l = std::get_if<Lorentzian>(&s.family)) {
        os << "lorentz gamma=" << l->gamma;
    } else {
        os << "tabulated";
    }
    os << " T=" << s.temperature_K;
    return os.str();
}

Outcome asymptotic_coefficients()
{
    const SpectralDensity sd = ohmic(1.0);
    const Timer timer;
    const auto chain = map_to_chain(sd, 60, 400);
    const double runtime = timer.seconds();
    double dw = 0.0, dk = 0.0;
    for (std::size_t n = 20; n < 60; ++n) {
        dw = std::max(dw, std::abs(chain.omegas[n] - 500.0));
        if (n < 59) {
            dk = std::max(dk, std::abs(chain.kappas[n] - 250.0));
        }
    }
    return {dw < c1_omega_tol && dk < c1_kappa_tol && runtime < c1_runtime_s,
            "max|omega-500|=" + num(dw) + " max|kappa-250|=" + num(dk) + " runtime=" + num(runtime, 3) + "s"};
}

Outcome shifted_legendre()
{
    const SpectralDensity flat(Tabulated{{0.0, 1.0}, {1.0, 1.0}}, 1.0);
    const Timer timer;
    const auto chain = map_to_chain(flat, 10, 400);
    const double runtime = timer.seconds();
    double dw = 0.0, dk = 0.0;
    for (std::size_t n = 0; n < 10; ++n) {
        dw = std::max(dw, std::abs(chain.omegas[n] - 0.5));
    }
    for (std::size_t n = 1; n < 10; ++n) {
        const double nn = static_cast<double>(n);
        dk = std::max(dk, std::abs(chain.kappas[n - 1] - std::sqrt(nn * nn / (4.0 * (4.0 * nn * nn - 1.0)))));
    }
    return {dw < c2_tol && dk < c2_tol && runtime < c2_runtime_s,
            "max|omega-1/2|=" + num(dw) + " max kappa error=" + num(dk) + " runtime=" + num(runtime, 3) + "s"};
}

Outcome kappa0_closed_form()
{
    const auto chain = map_to_chain(ohmic(1.0), 10, 400);
    const double exact = 1e4 / std::numbers::pi * (1.0 - 11.0 * std::exp(-10.0));
    const double rel = std::abs(chain.kappa0 * chain.kappa0 - exact) / exact;
    return {rel < c3_rel_tol, "kappa0^2=" + num(chain.kappa0 * chain.kappa0, 12) + " exact=" + num(exact, 12) +
                                  " rel=" + num(rel)};
}

Outcome lorentzian_decay()
{
    bool ok = true;
    std::string detail;
    for (double g : {1.0, 10.0}) {
        const Timer timer;
        const auto traj = single_run(lorentz(g), 0.2, 400);
        const double rate = fit_decay_rate(traj.times, traj.site_series(1), default_decay_window(g, traj.times));
        const double runtime = timer.seconds();
        ok = ok && std::abs(rate - g) < c4_rel_tol * g && runtime < c4_runtime_s;
        detail += "gamma=" + num(g) + ": fit=" + num(rate) + " (" + num(runtime, 3) + "s) ";
    }
    return {ok, detail};
}

Outcome star_chain_equivalence()
{
    const auto times = uniform_grid(0.2, 400);
    double worst = 0.0;
    std::string worst_label;
    std::size_t count = 0;
    for (const auto& measure : preset_measures()) {
        const auto sd = measure.thermalized();
        const auto m = discretize(sd, 400);
        const std::size_t N = std::min(m.size(), lightcone_length(sd.support(), 0.2));
        const auto chain = recurrence_coefficients(m, N);
        const auto traj = propagate(TridiagonalHamiltonian::from_chain(chain), site_state(N, 1), times);
        const auto star = star_oracle(m, times);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double d = std::abs(traj.populations(static_cast<Eigen::Index>(i), 0) - star[i]);
            if (d > worst) {
                worst = d;
                worst_label = label(measure);
            }
        }
        ++count;
    }
    return {worst < c5_tol, std::to_string(count) + " measures, max|p1 chain - p1 star|=" + num(worst) +
                                (worst_label.empty() ? "" : " (" + worst_label + ")")};
}

Outcome front_speed_doubling()
{
    bool ok = true;
    std::string detail;
    const Interval window{0.05, 0.2};
    for (const bool lor : {false, true}) {
        ChainCoefficients cold_chain;
        const auto cold = single_run(lor ? lorentz(10.0) : ohmic(1.0), 0.2, 400, &cold_chain);
        const auto hot = single_run(lor ? lorentz(10.0, 300.0) : ohmic(1.0, 300.0), 0.2, 400);
        const double v0 = front_speed(cold, window);
        const double v1 = front_speed(hot, window);
        const double target = 2.0 * asymptotic_limits(cold_chain.support).kappa_inf;
        ok = ok && std::abs(v0 - target) < c6_rel_tol * target && std::abs(v1 / v0 - 2.0) < c6_rel_tol * 2.0;
        detail += std::string(lor ? "lorentz" : "ohmic") + ": v(T=0)=" + num(v0) + " vs " + num(target) +
                  ", v(300)/v(0)=" + num(v1 / v0) + " ";
    }
    return {ok, detail};
}

Outcome unitarity()
{
    // every single-excitation preset run plus the runs behind criteria 4 and 6
    double worst = 0.0;
    std::size_t runs = 0;
    bool wrapped = false;
    auto check = [&](const WavepacketTrajectory& traj) {
        wrapped = wrapped || traj.truncation_warning;
        worst = std::max(worst, max_population_sum_deviation(traj));
        ++runs;
    };
    for (const auto& name : preset_names()) {
        for (const auto& c : figure_presets(name)) {
            if (c.mode == Mode::single) {
                check(single_run(c.spectral.thermalized(), c.dynamics->t_max, c.dynamics->time_steps));
            }
        }
    }
    for (double g : {1.0, 10.0}) {
        check(single_run(lorentz(g), 0.2, 400));
        check(single_run(lorentz(g, 300.0), 0.2, 400));
    }
    check(single_run(ohmic(1.0, 300.0), 0.2, 400));
    return {worst < c7_tol && !wrapped, std::to_string(runs) + " runs, max|sum p - 1|=" + num(worst) +
                                            (wrapped ? " (front reached chain end)" : "")};
}

EvolutionControls controls(double t_max, double dt, std::size_t chi, std::size_t stride)
{
    EvolutionControls c;
    c.t_max = t_max;
    c.dt = dt;
    c.chi_max = chi;
    c.stride = stride;
    return c;
}

Outcome independent_boson()
{
    const double t_max = 0.05;
    BuildOptions opt;
    opt.length = 60;
    const Timer timer;
    const auto model = build_model(ohmic(1.0), 0.0, 0.0, t_max, 8, opt);
    const auto rec = evolve(model, controls(t_max, 2e-4, 32, 10));
    const auto coh = rec.coherence();
    auto J = [](double w) { return oracle::ohmic(1.0, 1.0, 100.0, w); };
    double worst = 0.0;
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        worst = std::max(worst, std::abs(coh[i] - oracle::independent_boson_coherence(J, 1000.0, rec.times[i])));
    }
    return {worst < c8_tol, "max||rho_01| - closed form|=" + num(worst) + " over " + std::to_string(rec.times.size()) +
                                " samples, runtime=" + num(timer.seconds(), 3) + "s"};
}

Outcome mps_self_convergence()
{
    // Trotter order: full-ohmic s=1, T=0 with preset controls, but a tight SVD cutoff so the
    // dt differences are not swamped by per-step truncation of the relative cutoff
    bool ok = true;
    std::string detail;
    for (const auto& c : figure_presets("full-ohmic")) {
        if (c.spectral.temperature_K != 0.0) {
            continue;
        }
        const auto& dyn = *c.dynamics;
        const double s = std::get<Ohmic>(c.spectral.family).s;
        const std::size_t d = dyn.local_dim > 0 ? dyn.local_dim : default_local_dim(c.spectral);
        const auto model = build_model(c.spectral.bare(), 0.0, *dyn.delta, dyn.t_max, d);
        EvolutionControls base = dyn.controls;
        base.t_max = dyn.t_max;

        const auto chi = convergence_sweep(model, base, {{1.0, 2.0, 0}});
        const double chi_dev = chi.steps[1].sigma_x_deviation;
        ok = ok && chi_dev < c9_chi_tol;
        detail += "s=" + num(s) + ": 2chi " + num(chi_dev, 3) + " (max bond " +
                  std::to_string(chi.records[0].max_bond) + "/" + std::to_string(base.chi_max) + ")";
        if (s == 1.0) {
            base.svd_cutoff = c9_exact_cutoff;
            const auto dt = convergence_sweep(model, base, {{0.5, 1.0, 0}, {0.5, 1.0, 0}});
            const double halve = dt.steps[1].sigma_x_deviation;
            const double quarter = dt.steps[2].sigma_x_deviation;
            const double ratio = halve / quarter;
            ok = ok && ratio > c9_order_lo && ratio < c9_order_hi;
            detail += ", dt/2 " + num(halve, 3) + " dt/4 " + num(quarter, 3) + " ratio " + num(ratio, 3);
        }
        detail += "; ";
    }
    return {ok, detail};
}

FullDynamicsRecord preset_run(const std::string& preset, const std::string& variant)
{
    for (const auto& c : figure_presets(preset)) {
        if (c.variant != variant) {
            continue;
        }
        const auto& dyn = *c.dynamics;
        const std::size_t d = dyn.local_dim > 0 ? dyn.local_dim : default_local_dim(c.spectral);
        const auto model = build_model(c.spectral.bare(), c.spectral.temperature_K, *dyn.delta, dyn.t_max, d);
        EvolutionControls ctl = dyn.controls;
        ctl.t_max = dyn.t_max;
        return evolve(model, ctl);
    }
    throw ParameterError("no preset variant " + preset + "/" + variant);
}

Outcome subohmic_accumulation()
{
    const auto sub = preset_run("full-ohmic", "s0.5_T300");
    const auto super = preset_run("full-ohmic", "s2_T300");
    auto head = [](const FullDynamicsRecord& r, std::size_t i) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < 3; ++k) {
            s += r.occupations(static_cast<Eigen::Index>(i), k);
        }
        return s;
    };
    // late times: second half of the common horizon
    double min_ratio = 1e300;
    std::size_t j = 0;
    const double horizon = std::min(sub.times.back(), super.times.back());
    for (std::size_t i = 0; i < sub.times.size(); ++i) {
        const double t = sub.times[i];
        if (t < 0.5 * horizon || t > horizon + 1e-12) {
            continue;
        }
        while (j + 1 < super.times.size() && super.times[j] < t - 1e-12) {
            ++j;
        }
        if (std::abs(super.times[j] - t) > 1e-12) {
            continue;
        }
        min_ratio = std::min(min_ratio, head(sub, i) / head(super, j));
    }
    const std::size_t last = sub.times.size() - 1;
    return {min_ratio >= c10a_ratio && !sub.convergence_failure,
            "min ratio over t in [" + num(0.5 * horizon) + ", " + num(horizon) + "]=" + num(min_ratio) +
                ", n1..3 at t_max: " + num(head(sub, last)) + " vs " + num(head(super, super.times.size() - 1)) +
                (sub.convergence_failure ? " (sub-Ohmic run flagged unconverged)" : "")};
}

Outcome narrow_lorentzian_confinement()
{
    bool ok = true;
    std::string detail;
    for (const auto& c : figure_presets("lorentz-finiteT")) {
        if (std::get<Lorentzian>(c.spectral.family).gamma != 0.001) {
            continue;
        }
        const auto traj = single_run(c.spectral.thermalized(), c.dynamics->t_max, c.dynamics->time_steps);
        double worst = 1.0;
        for (double t : traj.times) {
            worst = std::min(worst, localization_fraction(traj, 2, t));
        }
        ok = ok && worst >= c10b_fraction;
        detail += "T=" + num(c.spectral.temperature_K) + ": min(p1+p2)=" + num(worst, 6) + " ";
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> all = {
        {"1", "asymptotic recurrence coefficients (Ohmic N=60)", asymptotic_coefficients},
        {"2", "flat measure gives shifted-Legendre coefficients", shifted_legendre},
        {"3", "kappa0 closed form (Ohmic s=1)", kappa0_closed_form},
        {"4", "Lorentzian decay rate (gamma 1, 10)", lorentzian_decay},
        {"5", "star/chain survival equivalence (preset measures, M=400)", star_chain_equivalence},
        {"6", "front speed 2 kappa_inf and T=300 doubling", front_speed_doubling},
        {"7", "single-excitation unitarity", unitarity},
        {"8", "independent-boson coherence (L=60, d=8, chi=32)", independent_boson},
        {"9", "MPS self-convergence (full-ohmic, T=0)", mps_self_convergence},
        {"10a", "sub-Ohmic accumulation on sites 1-3 (T=300)", subohmic_accumulation},
        {"10b", "gamma=0.001 confinement to sites 1-2 (T=77, 300)", narrow_lorentzian_confinement},
    };
    const std::set<std::string> selected(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& c : all) {
        if (!selected.empty() && !selected.count(c.id)) {
            continue;
        }
        Outcome o;
        const Timer timer;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s [%s] %s: %s[%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id.c_str(), c.title.c_str(),
                    o.detail.c_str(), timer.seconds());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
