// single_excitation.hpp - one chain quantum with the system decoupled (kappa0 = 0)
//
// In the single-excitation sector the chain Hamiltonian is the symmetric tridiagonal
// matrix (w_n on the diagonal, k_n off it). Evolution uses its full eigendecomposition,
// so every grid time is exact to machine precision.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "chainmapper/chainmap.hpp"
#include "chainmapper/error.hpp"

namespace chainmapper {

struct TridiagonalHamiltonian {
    std::vector<double> diag;    // w_1 .. w_N
    std::vector<double> offdiag; // k_1 .. k_{N-1}

    std::size_t size() const { return diag.size(); }

    static TridiagonalHamiltonian from_chain(const ChainCoefficients& c) { return {c.omegas, c.kappas}; }

    void validate() const
    {
        if (diag.empty()) {
            throw ParameterError("tridiagonal Hamiltonian needs at least one site");
        }
        if (offdiag.size() + 1 != diag.size()) {
            throw ParameterError("tridiagonal Hamiltonian: off-diagonal length must be N - 1");
        }
    }
};

struct WavepacketTrajectory {
    std::vector<double> times;
    Eigen::MatrixXd populations;              // row i: p_x(times[i]), x = 1..N in columns 0..N-1
    std::vector<Eigen::VectorXcd> amplitudes; // only filled when requested
    bool truncation_warning = false;          // population reached the last site
    double max_edge_population = 0.0;

    std::size_t sites() const { return static_cast<std::size_t>(populations.cols()); }

    std::size_t time_index(double t) const
    {
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
                return i;
            }
        }
        std::ostringstream msg;
        msg << "time " << t << " is not on the trajectory grid";
        throw ParameterError(msg.str());
    }

    std::vector<double> site_series(std::size_t site) const
    {
        if (site < 1 || site > sites()) {
            throw ParameterError("site index out of range");
        }
        std::vector<double> out(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            out[i] = populations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(site - 1));
        }
        return out;
    }
};

struct PropagationOptions {
    bool keep_amplitudes = false;
    double edge_threshold = 1e-8;
};

// |site> in an N-site chain, site counted from 1.
inline Eigen::VectorXcd site_state(std::size_t N, std::size_t site)
{
    if (site < 1 || site > N) {
        throw ParameterError("site_state: site index out of range");
    }
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(N));
    v(static_cast<Eigen::Index>(site - 1)) = 1.0;
    return v;
}

// psi(t) = exp(-iHt) psi0 for every t in `times` (negative times allowed).
inline WavepacketTrajectory propagate(const TridiagonalHamiltonian& h, const Eigen::VectorXcd& psi0,
                                      std::span<const double> times, const PropagationOptions& opt = {})
{
    h.validate();
    const auto N = static_cast<Eigen::Index>(h.size());
    if (psi0.size() != N) {
        throw ParameterError("propagate: initial state dimension does not match the chain");
    }
    if (std::abs(psi0.norm() - 1.0) > 1e-10) {
        throw ParameterError("propagate: initial state must be normalized");
    }

    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(h.diag.data(), N);
    Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(h.offdiag.data(), N - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("propagate: tridiagonal eigensolver failed");
    }
    const Eigen::MatrixXd& V = eig.eigenvectors();
    const Eigen::VectorXd& E = eig.eigenvalues();
    const Eigen::VectorXd c_re = V.transpose() * psi0.real();
    const Eigen::VectorXd c_im = V.transpose() * psi0.imag();

    WavepacketTrajectory traj;
    traj.times.assign(times.begin(), times.end());
    const auto T = static_cast<Eigen::Index>(times.size());
    traj.populations.resize(T, N);

    // work in blocks of times so the phase matrices stay small
    constexpr Eigen::Index block = 256;
    for (Eigen::Index t0 = 0; t0 < T; t0 += block) {
        const Eigen::Index nt = std::min(block, T - t0);
        Eigen::MatrixXd ph_re(N, nt);
        Eigen::MatrixXd ph_im(N, nt);
        for (Eigen::Index j = 0; j < nt; ++j) {
            const double t = times[static_cast<std::size_t>(t0 + j)];
            for (Eigen::Index k = 0; k < N; ++k) {
                const double cs = std::cos(E(k) * t);
                const double sn = -std::sin(E(k) * t);
                ph_re(k, j) = cs * c_re(k) - sn * c_im(k);
                ph_im(k, j) = cs * c_im(k) + sn * c_re(k);
            }
        }
        const Eigen::MatrixXd psi_re = V * ph_re;
        const Eigen::MatrixXd psi_im = V * ph_im;
        traj.populations.middleRows(t0, nt) = (psi_re.array().square() + psi_im.array().square()).matrix().transpose();
        if (opt.keep_amplitudes) {
            for (Eigen::Index j = 0; j < nt; ++j) {
                Eigen::VectorXcd psi(N);
                psi.real() = psi_re.col(j);
                psi.imag() = psi_im.col(j);
                traj.amplitudes.push_back(std::move(psi));
            }
        }
    }
    if (T > 0) {
        traj.max_edge_population = traj.populations.col(N - 1).maxCoeff();
        traj.truncation_warning = N > 1 && traj.max_edge_population > opt.edge_threshold;
    }
    return traj;
}

// <psi|H|psi> for the tridiagonal Hamiltonian.
inline double energy(const TridiagonalHamiltonian& h, const Eigen::VectorXcd& psi)
{
    double out = 0.0;
    const auto N = static_cast<Eigen::Index>(h.size());
    for (Eigen::Index k = 0; k < N; ++k) {
        out += h.diag[static_cast<std::size_t>(k)] * std::norm(psi(k));
        if (k + 1 < N) {
            out += 2.0 * h.offdiag[static_cast<std::size_t>(k)] * std::real(std::conj(psi(k)) * psi(k + 1));
        }
    }
    return out;
}

// Survival probability |sum_k (w_k / sum w) exp(-i w_k t)|^2 computed in the star picture.
inline std::vector<double> star_oracle(const DiscretizedMeasure& m, std::span<const double> times)
{
    const double mass = m.total_mass();
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        double re = 0.0;
        double im = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            const double p = m.weights[k] / mass;
            re += p * std::cos(m.nodes[k] * times[i]);
            im -= p * std::sin(m.nodes[k] * times[i]);
        }
        out[i] = re * re + im * im;
    }
    return out;
}

namespace detail {

inline double least_squares_slope(std::span<const double> x, std::span<const double> y)
{
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (!(sxx > 0.0)) {
        throw DomainError("least-squares fit needs at least two distinct abscissae");
    }
    return sxy / sxx;
}

} // namespace detail

// [t_0, t_0 + 3 / (2 gamma_guess)] clipped to the grid.
inline Interval default_decay_window(double gamma_guess, std::span<const double> times)
{
    if (!(gamma_guess > 0.0) || times.empty()) {
        throw ParameterError("default_decay_window: need gamma_guess > 0 and a nonempty grid");
    }
    const double t0 = times.front();
    return {t0, std::min(times.back(), t0 + 1.5 / gamma_guess)};
}

// Least-squares slope of -ln p(t) / 2 over the window: the rate g of p(t) ~ exp(-2 g t).
inline double fit_decay_rate(std::span<const double> times, std::span<const double> series, Interval window)
{
    if (times.size() != series.size()) {
        throw ParameterError("fit_decay_rate: times and series differ in length");
    }
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window.lo || times[i] > window.hi) {
            continue;
        }
        if (!(series[i] > 0.0)) {
            std::ostringstream msg;
            msg << "fit_decay_rate: nonpositive value " << series[i] << " at t=" << times[i];
            throw DomainError(msg.str());
        }
        x.push_back(times[i]);
        y.push_back(-0.5 * std::log(series[i]));
    }
    if (x.size() < 2) {
        throw DomainError("fit_decay_rate: fewer than two samples inside the window");
    }
    return detail::least_squares_slope(x, y);
}

// Largest site x with p_x(t) >= threshold * max_x p_x(t), for every time (sites from 1).
inline std::vector<std::size_t> front_position(const WavepacketTrajectory& traj, double threshold = 1e-3)
{
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ParameterError("front_position: threshold must lie in (0, 1)");
    }
    std::vector<std::size_t> out(traj.times.size(), 0);
    for (Eigen::Index i = 0; i < traj.populations.rows(); ++i) {
        const auto row = traj.populations.row(i);
        const double cut = threshold * row.maxCoeff();
        for (Eigen::Index x = row.size() - 1; x >= 0; --x) {
            if (row(x) >= cut) {
                out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(x + 1);
                break;
            }
        }
    }
    return out;
}

// Front speed in sites per time unit: linear fit of front_position over the window.
inline double front_speed(const WavepacketTrajectory& traj, Interval window, double threshold = 1e-3)
{
    const auto front = front_position(traj, threshold);
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (traj.times[i] >= window.lo && traj.times[i] <= window.hi) {
            x.push_back(traj.times[i]);
            y.push_back(static_cast<double>(front[i]));
        }
    }
    if (x.size() < 2) {
        throw DomainError("front_speed: fewer than two samples inside the window");
    }
    return detail::least_squares_slope(x, y);
}

// Population on the first k sites at time t (t must be a grid time).
inline double localization_fraction(const WavepacketTrajectory& traj, std::size_t k, double t)
{
    if (k == 0) {
        throw ParameterError("localization_fraction: k must be >= 1");
    }
    const auto i = static_cast<Eigen::Index>(traj.time_index(t));
    const auto cols = static_cast<Eigen::Index>(std::min(k, traj.sites()));
    return traj.populations.row(i).head(cols).sum();
}

// Mean spacing between successive local maxima of a sampled series (the beating period).
inline double beating_period(std::span<const double> times, std::span<const double> series)
{
    if (times.size() != series.size()) {
        throw ParameterError("beating_period: times and series differ in length");
    }
    std::vector<double> peaks;
    for (std::size_t i = 1; i + 1 < series.size(); ++i) {
        if (series[i] > series[i - 1] && series[i] >= series[i + 1]) {
            peaks.push_back(times[i]);
        }
    }
    if (peaks.size() < 2) {
        throw DomainError("beating_period: fewer than two maxima in the series");
    }
    return (peaks.back() - peaks.front()) / static_cast<double>(peaks.size() - 1);
}

// Uniform grid t_0, t_0 + dt, ..., t_0 + n dt.
inline std::vector<double> uniform_grid(double t_max, std::size_t steps, double t0 = 0.0)
{
    if (steps == 0) {
        throw ParameterError("uniform_grid: need at least one step");
    }
    std::vector<double> out(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        out[i] = t0 + (t_max - t0) * static_cast<double>(i) / static_cast<double>(steps);
    }
    return out;
}

} // namespace chainmapper
