// full_dynamics.hpp - spin-boson dynamics on the chain-mapped environment
//
//   H = delta sigma_x + kappa0 A_S (b_1 + b_1^dag) + sum_n w_n b_n^dag b_n
//       + sum_n k_n (b_{n+1}^dag b_n + b_n^dag b_{n+1}),   A_S = (1 + sigma_z) / 2
//
// The system is site 0 of a nearest-neighbor MPS, chain oscillators are sites 1..L with a
// truncated Fock space of dimension d. Time stepping is a symmetric (second-order) Trotter
// product of bond gates applied in a left-to-right then right-to-left sweep.
// Conventions: sigma_z = diag(1, -1), basis index 0 = spin up, |+> = (1, 1) / sqrt(2).

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chainmapper/chainmap.hpp"
#include "chainmapper/error.hpp"
#include "chainmapper/mps.hpp"
#include "chainmapper/spectral.hpp"

namespace chainmapper {

enum class ChainInitialState {
    vacuum,
    // one quantum on site 1 with the system frozen; used to cross-check the single-excitation sector
    single_excitation,
};

struct SpinBosonModel {
    double delta = 70.0;
    ChainCoefficients chain;
    Eigen::Vector2cd system_state = Eigen::Vector2cd::Constant(std::complex<double>(std::numbers::sqrt2 / 2.0, 0.0));
    std::size_t local_dim = 8;
    std::size_t length = 1; // number of chain sites L
    ChainInitialState chain_state = ChainInitialState::vacuum;

    void validate() const
    {
        if (local_dim < 2) {
            throw ParameterError("spin-boson model: local dimension d must be >= 2");
        }
        if (length < 1) {
            throw ParameterError("spin-boson model: chain length L must be >= 1");
        }
        if (chain.length() < length) {
            throw ParameterError("spin-boson model: chain coefficients shorter than L");
        }
        if (!std::isfinite(delta)) {
            throw ParameterError("spin-boson model: delta must be finite");
        }
        if (std::abs(system_state.norm() - 1.0) > 1e-12) {
            throw ParameterError("spin-boson model: system state must be normalized");
        }
    }
};

struct EvolutionControls {
    double dt = 2e-4;
    double t_max = 0.2;
    std::size_t chi_max = 64;
    double svd_cutoff = 1e-10;
    std::size_t stride = 10; // record observables every `stride` steps

    void validate() const
    {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw ParameterError("evolution controls: dt must be > 0");
        }
        if (!(t_max > 0.0) || !std::isfinite(t_max)) {
            throw ParameterError("evolution controls: t_max must be > 0");
        }
        if (chi_max < 2) {
            throw ParameterError("evolution controls: chi_max must be >= 2");
        }
        if (!(svd_cutoff > 0.0 && svd_cutoff <= 1e-4)) {
            throw ParameterError("evolution controls: svd_cutoff must lie in (0, 1e-4]");
        }
        if (stride < 1) {
            throw ParameterError("evolution controls: stride must be >= 1");
        }
    }

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }
};

struct FullDynamicsRecord {
    std::vector<double> times;
    std::vector<double> sigma_x;
    std::vector<double> sigma_y;
    std::vector<double> sigma_z;
    Eigen::MatrixXd occupations; // row i: n_k(times[i]), k = 1..L in columns 0..L-1
    std::vector<double> energy;
    std::vector<double> norm;              // MPS norm before renormalization, per sample
    std::vector<double> system_trace;      // trace of the reduced system state
    std::vector<double> system_min_eigenvalue;

    // truncation log
    std::vector<double> max_discarded_per_step;
    std::size_t max_bond = 1;
    double max_discarded = 0.0;
    double min_norm_before_renormalization = 1.0;
    bool convergence_failure = false;
    std::vector<std::string> warnings;

    // |rho_{up,down}| = |<sigma_x> + i<sigma_y>| / 2
    std::vector<double> coherence() const
    {
        std::vector<double> out(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            out[i] = 0.5 * std::hypot(sigma_x[i], sigma_y[i]);
        }
        return out;
    }

    std::vector<double> occupation_series(std::size_t k) const
    {
        if (k < 1 || static_cast<Eigen::Index>(k) > occupations.cols()) {
            throw ParameterError("occupation_series: site out of range");
        }
        std::vector<double> out(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            out[i] = occupations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k - 1));
        }
        return out;
    }
};

namespace ops {

inline Eigen::MatrixXd sigma_x()
{
    Eigen::MatrixXd m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline Eigen::MatrixXd sigma_z()
{
    Eigen::MatrixXd m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

// (1 + sigma_z) / 2
inline Eigen::MatrixXd up_projector()
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = 1.0;
    return m;
}

inline Eigen::MatrixXd annihilation(std::size_t d)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t n = 1; n < d; ++n) {
        m(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(static_cast<double>(n));
    }
    return m;
}

inline Eigen::MatrixXd number(std::size_t d)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t n = 0; n < d; ++n) {
        m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = static_cast<double>(n);
    }
    return m;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

} // namespace ops

namespace detail {

// Local terms of the Hamiltonian on sites 0..L.
struct ChainTerms {
    std::vector<Eigen::MatrixXd> onsite;                                   // per site
    std::vector<std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>> couplings; // per bond: sum of X (x) Y
    std::vector<std::size_t> dims;
};

inline ChainTerms chain_terms(const SpinBosonModel& model)
{
    const std::size_t L = model.length;
    const std::size_t d = model.local_dim;
    ChainTerms t;
    t.dims.push_back(2);
    t.onsite.push_back(model.delta * ops::sigma_x());
    const Eigen::MatrixXd b = ops::annihilation(d);
    const Eigen::MatrixXd bd = b.transpose();
    const Eigen::MatrixXd n = ops::number(d);
    for (std::size_t k = 1; k <= L; ++k) {
        t.dims.push_back(d);
        t.onsite.push_back(model.chain.omegas[k - 1] * n);
    }
    t.couplings.push_back({{model.chain.kappa0 * ops::up_projector(), b + bd}});
    for (std::size_t k = 1; k < L; ++k) {
        const double kap = model.chain.kappas[k - 1];
        t.couplings.push_back({{kap * bd, b}, {kap * b, bd}});
    }
    return t;
}

// Hermitian bond Hamiltonian for bond i (sites i, i+1); on-site terms are split evenly
// between the two bonds touching a site, edge sites put theirs entirely on their one bond.
inline Eigen::MatrixXd bond_hamiltonian(const ChainTerms& t, std::size_t i)
{
    const std::size_t bonds = t.couplings.size();
    const auto d1 = static_cast<Eigen::Index>(t.dims[i]);
    const auto d2 = static_cast<Eigen::Index>(t.dims[i + 1]);
    const double left_share = (i == 0) ? 1.0 : 0.5;
    const double right_share = (i + 1 == bonds) ? 1.0 : 0.5;
    Eigen::MatrixXd h = left_share * ops::kron(t.onsite[i], Eigen::MatrixXd::Identity(d2, d2)) +
                        right_share * ops::kron(Eigen::MatrixXd::Identity(d1, d1), t.onsite[i + 1]);
    for (const auto& [x, y] : t.couplings[i]) {
        h += ops::kron(x, y);
    }
    return h;
}

inline mps::Gate bond_gate(const Eigen::MatrixXd& h, double tau, std::size_t d1, std::size_t d2)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("bond gate: eigendecomposition failed");
    }
    const Eigen::MatrixXd& v = eig.eigenvectors();
    Eigen::VectorXcd phase(v.cols());
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
        phase(k) = std::exp(std::complex<double>(0.0, -eig.eigenvalues()(k) * tau));
    }
    const Eigen::MatrixXcd vc = v.cast<std::complex<double>>();
    return mps::Gate::from_matrix(vc * phase.asDiagonal() * vc.adjoint(), d1, d2);
}

inline mps::Mps initial_state(const SpinBosonModel& model)
{
    std::vector<Eigen::VectorXcd> local;
    local.push_back(model.system_state);
    for (std::size_t k = 1; k <= model.length; ++k) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(model.local_dim));
        const bool excited = model.chain_state == ChainInitialState::single_excitation && k == 1;
        v(excited ? 1 : 0) = 1.0;
        local.push_back(std::move(v));
    }
    return mps::Mps(local);
}

struct Sample {
    Eigen::Matrix2cd rho;
    std::vector<double> occupations;
    double energy = 0.0;
    double norm = 0.0;
};

inline Sample measure(const mps::Mps& psi, const ChainTerms& terms)
{
    Sample out;
    const auto& s0 = psi.site(0);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            out.rho(a, b) = (s0[static_cast<std::size_t>(a)] * s0[static_cast<std::size_t>(b)].adjoint())(0, 0);
        }
    }
    out.norm = std::sqrt(psi.norm_squared());
    const auto env = psi.left_environments();
    const std::size_t L = psi.size() - 1;
    out.occupations.resize(L);
    const Eigen::MatrixXd n = ops::number(psi.local_dim(1));
    for (std::size_t k = 1; k <= L; ++k) {
        out.occupations[k - 1] = psi.local_expectation(k, n, env[k]).real();
    }
    double e = 0.0;
    for (std::size_t i = 0; i <= L; ++i) {
        e += psi.local_expectation(i, terms.onsite[i], env[i]).real();
    }
    for (std::size_t i = 0; i < L; ++i) {
        for (const auto& [x, y] : terms.couplings[i]) {
            e += psi.pair_expectation(i, x, y, env[i]).real();
        }
    }
    out.energy = e;
    return out;
}

} // namespace detail

struct BuildOptions {
    std::size_t length = 0;     // 0: light-cone length for t_max
    std::size_t node_count = 0; // 0: default for the chain length
};

// Thermalize (T > 0), map to a chain of light-cone length and assemble the model.
inline SpinBosonModel build_model(const SpectralDensity& sd, double temperature_K, double delta, double t_max,
                                  std::size_t local_dim, const BuildOptions& opt = {})
{
    if (!(t_max > 0.0)) {
        throw ParameterError("build_model: t_max must be > 0");
    }
    if (sd.thermal() && sd.temperature_K() != temperature_K) {
        throw ParameterError("build_model: density already thermalized at a different temperature");
    }
    const SpectralDensity bath = sd.thermal() ? sd : thermalize(sd, temperature_K);
    SpinBosonModel model;
    model.delta = delta;
    model.local_dim = local_dim;
    model.length = opt.length > 0 ? opt.length : lightcone_length(bath.support(), t_max);
    model.chain = map_to_chain(bath, model.length, opt.node_count);
    model.validate();
    return model;
}

// Second-order Trotter evolution of |system> (x) chain state, recording observables
// every `stride` steps (and at t = 0).
inline FullDynamicsRecord evolve(const SpinBosonModel& model, const EvolutionControls& controls)
{
    model.validate();
    controls.validate();
    const detail::ChainTerms terms = detail::chain_terms(model);
    const std::size_t bonds = model.length;
    const double dt = controls.dt;

    std::vector<mps::Gate> half_gates;
    for (std::size_t i = 0; i < bonds; ++i) {
        half_gates.push_back(detail::bond_gate(detail::bond_hamiltonian(terms, i), 0.5 * dt, terms.dims[i],
                                               terms.dims[i + 1]));
    }
    const mps::Gate last_full = detail::bond_gate(detail::bond_hamiltonian(terms, bonds - 1), dt,
                                                  terms.dims[bonds - 1], terms.dims[bonds]);
    const mps::TruncationPolicy policy{controls.chi_max, controls.svd_cutoff};

    mps::Mps psi = detail::initial_state(model);
    FullDynamicsRecord rec;
    rec.occupations.resize(0, static_cast<Eigen::Index>(model.length));
    std::vector<std::vector<double>> occ_rows;

    auto record = [&](double t) {
        const auto s = detail::measure(psi, terms);
        rec.times.push_back(t);
        rec.sigma_x.push_back(2.0 * s.rho(0, 1).real());
        rec.sigma_y.push_back(-2.0 * s.rho(0, 1).imag());
        rec.sigma_z.push_back((s.rho(0, 0) - s.rho(1, 1)).real());
        rec.energy.push_back(s.energy);
        rec.norm.push_back(s.norm);
        rec.system_trace.push_back(s.rho.trace().real());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(s.rho);
        rec.system_min_eigenvalue.push_back(eig.eigenvalues().minCoeff());
        occ_rows.push_back(s.occupations);
    };

    auto note = [&](const mps::Truncation& tr, double& step_max) {
        step_max = std::max(step_max, tr.discarded_weight);
        rec.min_norm_before_renormalization = std::min(rec.min_norm_before_renormalization, tr.norm_before);
        if (tr.saturated) {
            rec.convergence_failure = true;
        }
    };

    record(0.0);
    const std::size_t steps = controls.steps();
    for (std::size_t step = 1; step <= steps; ++step) {
        double step_max = 0.0;
        for (std::size_t i = 0; i + 1 < bonds; ++i) {
            note(psi.apply(i, half_gates[i], mps::Direction::right, policy), step_max);
        }
        note(psi.apply(bonds - 1, last_full, mps::Direction::left, policy), step_max);
        for (std::size_t i = bonds - 1; i-- > 0;) {
            note(psi.apply(i, half_gates[i], mps::Direction::left, policy), step_max);
        }
        rec.max_discarded_per_step.push_back(step_max);
        rec.max_discarded = std::max(rec.max_discarded, step_max);
        rec.max_bond = std::max(rec.max_bond, psi.max_bond_dim());
        if (step % controls.stride == 0 || step == steps) {
            record(static_cast<double>(step) * dt);
        }
    }

    rec.occupations.resize(static_cast<Eigen::Index>(occ_rows.size()), static_cast<Eigen::Index>(model.length));
    for (std::size_t i = 0; i < occ_rows.size(); ++i) {
        for (std::size_t k = 0; k < model.length; ++k) {
            rec.occupations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = occ_rows[i][k];
        }
    }
    if (rec.convergence_failure) {
        std::ostringstream msg;
        msg << "bond dimension saturated at chi_max=" << controls.chi_max << " with discarded weight "
            << rec.max_discarded << " > 100 x svd_cutoff";
        rec.warnings.push_back(msg.str());
    }
    return rec;
}

struct Refinement {
    double dt_scale = 1.0;       // multiplies dt
    double chi_scale = 1.0;      // multiplies chi_max
    std::size_t extra_local_dim = 0;
};

struct ConvergenceStep {
    Refinement refinement;
    EvolutionControls controls;
    std::size_t local_dim = 0;
    double sigma_x_deviation = 0.0; // max_t |<sigma_x>| difference to the previous run
    double n1_deviation = 0.0;      // max_t |n_1| difference to the previous run
    bool convergence_failure = false;
};

struct ConvergenceReport {
    std::vector<ConvergenceStep> steps; // first entry is the baseline (deviations zero)
    std::vector<FullDynamicsRecord> records;
};

namespace detail {

// Max |a(t) - b(t)| over the times the two records share.
inline double max_deviation(const std::vector<double>& ta, const std::vector<double>& a,
                            const std::vector<double>& tb, const std::vector<double>& b)
{
    double out = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        while (j < tb.size() && tb[j] < ta[i] - 1e-9 * std::max(1.0, std::abs(ta[i]))) {
            ++j;
        }
        if (j < tb.size() && std::abs(tb[j] - ta[i]) <= 1e-9 * std::max(1.0, std::abs(ta[i]))) {
            out = std::max(out, std::abs(a[i] - b[j]));
        }
    }
    return out;
}

} // namespace detail

// Rerun `evolve` under successively refined controls. Each refinement scales the controls of
// the previous run; strides are rescaled so the sample times stay aligned.
inline ConvergenceReport convergence_sweep(const SpinBosonModel& model, const EvolutionControls& base,
                                           const std::vector<Refinement>& factors)
{
    ConvergenceReport report;
    SpinBosonModel current_model = model;
    EvolutionControls current = base;
    auto run = [&](const Refinement& r) {
        ConvergenceStep step;
        step.refinement = r;
        step.controls = current;
        step.local_dim = current_model.local_dim;
        report.records.push_back(evolve(current_model, current));
        step.convergence_failure = report.records.back().convergence_failure;
        if (report.records.size() > 1) {
            const auto& prev = report.records[report.records.size() - 2];
            const auto& cur = report.records.back();
            step.sigma_x_deviation = detail::max_deviation(prev.times, prev.sigma_x, cur.times, cur.sigma_x);
            step.n1_deviation =
                detail::max_deviation(prev.times, prev.occupation_series(1), cur.times, cur.occupation_series(1));
        }
        report.steps.push_back(step);
    };
    run(Refinement{});
    for (const Refinement& r : factors) {
        if (!(r.dt_scale > 0.0) || !(r.chi_scale > 0.0)) {
            throw ParameterError("convergence_sweep: scale factors must be positive");
        }
        const double old_dt = current.dt;
        current.dt *= r.dt_scale;
        current.stride = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(static_cast<double>(current.stride) * old_dt / current.dt)));
        current.chi_max =
            std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(static_cast<double>(current.chi_max) * r.chi_scale)));
        current_model.local_dim += r.extra_local_dim;
        run(r);
    }
    return report;
}

struct OccupationProfile {
    double time = 0.0; // sample actually used
    std::vector<double> occupations;
    bool exact = true; // false when t was off-grid and the nearest sample was used
};

inline OccupationProfile occupation_profile(const FullDynamicsRecord& rec, double t)
{
    if (rec.times.empty()) {
        throw ParameterError("occupation_profile: empty record");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < rec.times.size(); ++i) {
        if (std::abs(rec.times[i] - t) < std::abs(rec.times[best] - t)) {
            best = i;
        }
    }
    OccupationProfile out;
    out.time = rec.times[best];
    out.exact = std::abs(rec.times[best] - t) <= 1e-9 * std::max(1.0, std::abs(t));
    const auto row = rec.occupations.row(static_cast<Eigen::Index>(best));
    out.occupations.resize(static_cast<std::size_t>(row.size()));
    for (Eigen::Index k = 0; k < row.size(); ++k) {
        out.occupations[static_cast<std::size_t>(k)] = row(k);
    }
    return out;
}

} // namespace chainmapper
