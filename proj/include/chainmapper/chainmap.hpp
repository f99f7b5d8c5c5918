// chainmap.hpp - spectral density -> discretized measure -> chain coefficients
//
// The star-to-chain mapping is the Lanczos tridiagonalization of diag(w_k) started from
// sqrt(w_k / sum w). Recurrence coefficients of the discretized measure converge to those
// of J(w)dw as the quadrature is refined; the orthogonal polynomials themselves are never
// formed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chainmapper/error.hpp"
#include "chainmapper/quadrature.hpp"
#include "chainmapper/spectral.hpp"

namespace chainmapper {

struct DiscretizedMeasure {
    std::vector<double> nodes;   // ascending, cm^-1
    std::vector<double> weights; // > 0, sum = kappa0^2
    Interval support;

    std::size_t size() const { return nodes.size(); }
    double total_mass() const
    {
        double s = 0.0;
        for (double w : weights) {
            s += w;
        }
        return s;
    }
};

struct ChainMetadata {
    double temperature_K = 0.0;
    double hard_cutoff = 0.0;
    std::size_t node_count = 0;
    std::string family;
    std::map<std::string, double> family_parameters;

    bool operator==(const ChainMetadata&) const = default;
};

struct ChainCoefficients {
    Interval support;
    double kappa0 = 0.0;
    std::vector<double> omegas; // w_1 .. w_N
    std::vector<double> kappas; // k_1 .. k_{N-1}
    ChainMetadata metadata;

    std::size_t length() const { return omegas.size(); }
};

inline bool operator==(const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; }

inline bool operator==(const ChainCoefficients& a, const ChainCoefficients& b)
{
    return a.support == b.support && a.kappa0 == b.kappa0 && a.omegas == b.omegas && a.kappas == b.kappas &&
           a.metadata == b.metadata;
}

struct DiscretizationOptions {
    std::size_t min_panels = 8;
    // Geometric panel refinement around w = 0 and around narrow features.
    bool graded = true;
};

namespace detail {

inline std::vector<double> panel_edges(const SpectralDensity& sd, const DiscretizationOptions& opt)
{
    const Interval sup = sd.support();
    const std::size_t base = std::max<std::size_t>(opt.min_panels, 1);
    const double w0 = sup.width() / static_cast<double>(base);

    std::vector<double> edges;
    for (std::size_t i = 0; i <= base; ++i) {
        edges.push_back(i == base ? sup.hi : sup.lo + static_cast<double>(i) * w0);
    }
    auto add = [&](double x) {
        if (x > sup.lo && x < sup.hi) {
            edges.push_back(x);
        }
    };
    // thermal densities may have a kink or an integrable divergence at 0
    add(0.0);
    if (opt.graded) {
        if (sup.contains(0.0)) {
            double h = w0;
            for (int j = 0; j < 40; ++j) {
                h *= 0.25;
                add(h);
                add(-h);
            }
        }
        for (const Feature& f : sd.features()) {
            add(f.center);
            for (double h = f.width / 8.0; h < w0; h *= 2.0) {
                add(f.center - h);
                add(f.center + h);
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    const double eps = 1e-13 * sup.width();
    std::vector<double> unique_edges;
    for (double x : edges) {
        if (unique_edges.empty() || x - unique_edges.back() > eps) {
            unique_edges.push_back(x);
        }
    }
    unique_edges.back() = sup.hi;
    return unique_edges;
}

} // namespace detail

// Nodes per panel: a base-width panel gets q = ceil(M / base_panels) nodes; narrower
// refinement panels get a width-proportional share, raised to at least
// min(q, refinement_nodes).
inline constexpr std::size_t refinement_nodes = 16;

// Composite Gauss-Legendre sampling of a density over panels with the given edges.
// `base_width` is the width of an unrefined panel; nodes with vanishing weight are dropped.
inline DiscretizedMeasure discretize_function(const std::function<double(double)>& density,
                                              std::span<const double> edges, std::size_t M, double base_width)
{
    if (M < 2) {
        throw ParameterError("discretize: node count must be >= 2");
    }
    if (edges.size() < 2 || !(base_width > 0.0)) {
        throw ParameterError("discretize: need at least one panel of positive width");
    }
    const double span = edges.back() - edges.front();
    const auto base_panels = static_cast<std::size_t>(std::max(1.0, std::round(span / base_width)));
    const std::size_t q = std::max<std::size_t>(1, (M + base_panels - 1) / base_panels);
    std::map<std::size_t, quadrature::Rule> rules;

    DiscretizedMeasure m;
    m.support = {edges.front(), edges.back()};
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p];
        const double b = edges[p + 1];
        const auto share = static_cast<std::size_t>(std::ceil(static_cast<double>(q) * (b - a) / base_width - 1e-9));
        const std::size_t n = std::min(q, std::max(share, refinement_nodes));
        auto [it, inserted] = rules.try_emplace(n);
        if (inserted) {
            it->second = quadrature::gauss_legendre(n);
        }
        const quadrature::Rule& ref = it->second;
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = mid + half * ref.nodes[i];
            const double w = std::max(0.0, density(x)) * half * ref.weights[i];
            if (w > 0.0 && std::isfinite(w)) {
                m.nodes.push_back(x);
                m.weights.push_back(w);
            }
        }
    }
    return m;
}

// Composite Gauss-Legendre discretization of J(w)dw. M is the node budget of the
// max(8, min_panels) equal-width base panels; graded refinement panels around w = 0 and
// around narrow features add their own nodes on top.
inline DiscretizedMeasure discretize(const SpectralDensity& sd, std::size_t M, const DiscretizationOptions& opt = {})
{
    const auto edges = detail::panel_edges(sd, opt);
    const double base_width = sd.support().width() / static_cast<double>(std::max<std::size_t>(opt.min_panels, 1));
    auto m = discretize_function([&sd](double w) { return sd(w); }, edges, M, base_width);
    if (m.size() == 0) {
        throw DomainError("discretize: spectral density vanishes on its support");
    }
    return m;
}

// Lanczos with full reorthogonalization on diag(nodes), started from sqrt(weights / total).
inline ChainCoefficients recurrence_coefficients(const DiscretizedMeasure& m, std::size_t N)
{
    const std::size_t K = m.size();
    if (N == 0) {
        throw ParameterError("recurrence_coefficients: chain length must be >= 1");
    }
    if (N > K) {
        std::ostringstream msg;
        msg << "recurrence_coefficients: chain length " << N << " exceeds node count " << K
            << "; increase the number of quadrature nodes";
        throw ParameterError(msg.str());
    }
    const double mass = m.total_mass();
    if (!(mass > 0.0)) {
        throw DomainError("recurrence_coefficients: measure has no mass");
    }

    const Eigen::Map<const Eigen::VectorXd> x(m.nodes.data(), static_cast<Eigen::Index>(K));
    Eigen::MatrixXd Q(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(N));
    for (std::size_t k = 0; k < K; ++k) {
        Q(static_cast<Eigen::Index>(k), 0) = std::sqrt(m.weights[k] / mass);
    }
    Q.col(0).normalize();

    ChainCoefficients c;
    c.support = m.support;
    c.kappa0 = std::sqrt(mass);
    c.omegas.resize(N);
    c.kappas.resize(N - 1);
    const double scale = std::max(std::abs(m.support.lo), std::abs(m.support.hi));

    Eigen::VectorXd v(static_cast<Eigen::Index>(K));
    for (std::size_t n = 0; n < N; ++n) {
        const auto ni = static_cast<Eigen::Index>(n);
        v = x.cwiseProduct(Q.col(ni));
        const double alpha = Q.col(ni).dot(v);
        c.omegas[n] = alpha;
        if (n + 1 == N) {
            break;
        }
        v -= alpha * Q.col(ni);
        if (n > 0) {
            v -= c.kappas[n - 1] * Q.col(ni - 1);
        }
        // classical Gram-Schmidt against all previous vectors; a second pass only when
        // the first one removed most of v (Kahan's "twice is enough" criterion)
        const auto basis = Q.leftCols(ni + 1);
        const double before = v.norm();
        v -= basis * (basis.transpose() * v);
        if (v.norm() < 0.7071 * before) {
            v -= basis * (basis.transpose() * v);
        }
        const double beta = v.norm();
        if (!(beta > 1e-13 * scale)) {
            std::ostringstream msg;
            msg << "recurrence_coefficients: Lanczos breakdown at step " << n + 1 << " (beta=" << beta
                << "); the measure supports fewer than " << N << " coefficients, increase M";
            throw NumericalError(msg.str());
        }
        c.kappas[n] = beta;
        Q.col(ni + 1) = v / beta;
    }

    const Eigen::MatrixXd gram = Q.transpose() * Q - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(N),
                                                                               static_cast<Eigen::Index>(N));
    const double loss = gram.cwiseAbs().maxCoeff();
    if (loss > 1e-10) {
        std::ostringstream msg;
        msg << "recurrence_coefficients: loss of orthogonality " << loss << " exceeds 1e-10; increase M";
        throw NumericalError(msg.str());
    }
    c.metadata.node_count = K;
    return c;
}

struct AsymptoticCoefficients {
    double omega_inf = 0.0;
    double kappa_inf = 0.0;
};

// Limits of the recurrence coefficients for Szego-class measures on [lo, hi].
inline AsymptoticCoefficients asymptotic_limits(Interval support)
{
    if (!(support.lo < support.hi)) {
        throw ParameterError("asymptotic_limits: support must satisfy lo < hi");
    }
    return {0.5 * (support.hi + support.lo), 0.25 * (support.hi - support.lo)};
}

inline constexpr double lightcone_margin = 1.2;
inline constexpr std::size_t lightcone_buffer = 5;

// Sites reachable from site 1 within t_max: ceil(2 kappa_inf t_max * 1.2) + 5.
inline std::size_t lightcone_length(Interval support, double t_max)
{
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
        throw ParameterError("lightcone_length: t_max must be a finite nonnegative time");
    }
    const double reach = 2.0 * asymptotic_limits(support).kappa_inf * t_max * lightcone_margin;
    // shave rounding noise so that exact products like 120.00000000000001 stay at 120
    const double sites = std::ceil(reach - 1e-9 * std::max(1.0, reach));
    return static_cast<std::size_t>(std::max(0.0, sites)) + lightcone_buffer;
}

namespace detail {

inline std::map<std::string, double> family_parameters(const SpectralFamily& family)
{
    struct Visitor {
        std::map<std::string, double> operator()(const Lorentzian& p) const
        {
            return {{"lambda", p.lambda}, {"gamma", p.gamma}, {"omega0", p.omega0}};
        }
        std::map<std::string, double> operator()(const Ohmic& p) const
        {
            return {{"lambda", p.lambda}, {"s", p.s}, {"omega_c", p.omega_c}};
        }
        std::map<std::string, double> operator()(const Tabulated& t) const
        {
            return {{"points", static_cast<double>(t.omega.size())}};
        }
    };
    return std::visit(Visitor{}, family);
}

} // namespace detail

// Node count used when none is requested.
inline std::size_t default_node_count(std::size_t N) { return std::max<std::size_t>(800, 8 * N); }

// Full pipeline: discretize with M nodes (M >= 4N) and run the recurrence.
inline ChainCoefficients map_to_chain(const SpectralDensity& sd, std::size_t N, std::size_t M = 0,
                                      const DiscretizationOptions& opt = {})
{
    if (M == 0) {
        M = default_node_count(N);
    }
    if (M < 4 * N) {
        std::ostringstream msg;
        msg << "map_to_chain: node count M=" << M << " too small for chain length N=" << N << " (need M >= 4N)";
        throw ParameterError(msg.str());
    }
    ChainCoefficients c = recurrence_coefficients(discretize(sd, M, opt), N);
    c.support = sd.support();
    c.metadata.temperature_K = sd.temperature_K();
    c.metadata.hard_cutoff = sd.hard_cutoff();
    c.metadata.family = family_name(sd.family());
    c.metadata.family_parameters = detail::family_parameters(sd.family());
    return c;
}

} // namespace chainmapper
