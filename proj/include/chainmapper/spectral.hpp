// spectral.hpp - spectral-density families, thermalization and hard-cutoff selection

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "chainmapper/error.hpp"
#include "chainmapper/quadrature.hpp"
#include "chainmapper/units.hpp"

namespace chainmapper {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

// Asymmetric Lorentzian peaked at omega0 with half width gamma (all in cm^-1).
struct Lorentzian {
    double lambda = 60.0;
    double gamma = 10.0;
    double omega0 = 100.0;

    bool operator==(const Lorentzian&) const = default;
};

// Ohmic family lambda^2/pi * w^s / (s! wc^(s-1)) exp(-w/wc); lambda dimensionless.
struct Ohmic {
    double lambda = 1.0;
    double s = 1.0;
    double omega_c = 100.0;

    bool operator==(const Ohmic&) const = default;
};

// Piecewise-linear table on nonnegative frequencies.
struct Tabulated {
    std::vector<double> omega;
    std::vector<double> values;

    bool operator==(const Tabulated&) const = default;
};

using SpectralFamily = std::variant<Lorentzian, Ohmic, Tabulated>;

// A point of the support around which the density varies on a scale `width`.
struct Feature {
    double center = 0.0;
    double width = 0.0;
};

inline std::string family_name(const SpectralFamily& family)
{
    struct Visitor {
        std::string operator()(const Lorentzian&) const { return "lorentzian"; }
        std::string operator()(const Ohmic&) const { return "ohmic"; }
        std::string operator()(const Tabulated&) const { return "tabulated"; }
    };
    return std::visit(Visitor{}, family);
}

namespace detail {

// a / expm1(beta a): the Bose factor times a, analytic through a = 0.
inline double bose_kernel(double a, double beta, double scale)
{
    const double x = beta * a;
    if (a < 1e-6 * scale && x < 1e-3) {
        return (1.0 - 0.5 * x + x * x / 12.0) / beta;
    }
    return a / std::expm1(x);
}

inline double interpolate(const Tabulated& table, double omega)
{
    const auto& xs = table.omega;
    if (omega < xs.front() || omega > xs.back()) {
        return 0.0;
    }
    auto it = std::upper_bound(xs.begin(), xs.end(), omega);
    if (it == xs.end()) {
        return table.values.back();
    }
    const auto i = static_cast<std::size_t>(it - xs.begin());
    const double x0 = xs[i - 1];
    const double x1 = xs[i];
    const double f = (omega - x0) / (x1 - x0);
    return std::max(0.0, (1.0 - f) * table.values[i - 1] + f * table.values[i]);
}

inline void validate(const Lorentzian& p)
{
    if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) {
        throw ParameterError("lorentzian: lambda must be >= 0");
    }
    if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) {
        throw ParameterError("lorentzian: gamma must be > 0");
    }
    if (!(p.omega0 > 0.0) || !std::isfinite(p.omega0)) {
        throw ParameterError("lorentzian: omega0 must be > 0");
    }
}

inline void validate(const Ohmic& p)
{
    if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) {
        throw ParameterError("ohmic: lambda must be >= 0");
    }
    if (!(p.s > 0.0) || !std::isfinite(p.s)) {
        throw ParameterError("ohmic: s must be > 0");
    }
    if (!(p.omega_c > 0.0) || !std::isfinite(p.omega_c)) {
        throw ParameterError("ohmic: omega_c must be > 0");
    }
}

inline void validate(const Tabulated& t)
{
    if (t.omega.size() < 2 || t.omega.size() != t.values.size()) {
        throw ParameterError("tabulated: need at least two (omega, J) pairs of equal length");
    }
    if (t.omega.front() < 0.0) {
        throw ParameterError("tabulated: frequencies must be nonnegative");
    }
    for (std::size_t i = 0; i < t.omega.size(); ++i) {
        if (!std::isfinite(t.omega[i]) || !std::isfinite(t.values[i]) || t.values[i] < 0.0) {
            throw ParameterError("tabulated: entries must be finite with J >= 0");
        }
        if (i > 0 && !(t.omega[i] > t.omega[i - 1])) {
            throw ParameterError("tabulated: frequencies must be strictly increasing");
        }
    }
}

} // namespace detail

class SpectralDensity {
public:
    SpectralDensity(SpectralFamily family, double hard_cutoff, double temperature_K = 0.0)
        : family_(std::move(family)), hard_cutoff_(hard_cutoff), temperature_K_(temperature_K)
    {
        std::visit([](const auto& p) { detail::validate(p); }, family_);
        if (!(hard_cutoff_ > 0.0) || !std::isfinite(hard_cutoff_)) {
            throw ParameterError("hard cutoff must be a positive finite frequency");
        }
        if (!(temperature_K_ >= 0.0) || !std::isfinite(temperature_K_)) {
            throw ParameterError("temperature must be a nonnegative finite value");
        }
        beta_ = units::beta(temperature_K_);
    }

    const SpectralFamily& family() const { return family_; }
    double hard_cutoff() const { return hard_cutoff_; }
    double temperature_K() const { return temperature_K_; }
    bool thermal() const { return temperature_K_ > 0.0; }
    double beta() const { return beta_; }

    // [0, w_hc] at zero temperature, [-w_hc, w_hc] once thermalized.
    Interval support() const
    {
        double hi = hard_cutoff_;
        if (const auto* t = std::get_if<Tabulated>(&family_)) {
            hi = std::min(hi, t->omega.back());
        }
        return thermal() ? Interval{-hi, hi} : Interval{0.0, hi};
    }

    // Characteristic frequency of the family.
    double scale() const
    {
        struct Visitor {
            double operator()(const Lorentzian& p) const { return p.omega0; }
            double operator()(const Ohmic& p) const { return p.omega_c; }
            double operator()(const Tabulated& t) const { return t.omega.back() / 10.0; }
        };
        return std::visit(Visitor{}, family_);
    }

    // Zero-temperature closed form for w >= 0, ignoring the hard cutoff.
    double bare(double omega) const
    {
        if (omega < 0.0) {
            return 0.0;
        }
        struct Visitor {
            double w;
            double operator()(const Lorentzian& p) const
            {
                const double g2 = p.gamma * p.gamma;
                const double num = 4.0 * p.gamma * p.omega0 * w;
                const double den = (g2 + (w + p.omega0) * (w + p.omega0)) * (g2 + (w - p.omega0) * (w - p.omega0));
                return p.lambda * p.lambda / std::numbers::pi * num / den;
            }
            double operator()(const Ohmic& p) const
            {
                return p.lambda * p.lambda / std::numbers::pi * std::pow(w, p.s) /
                       (std::tgamma(p.s + 1.0) * std::pow(p.omega_c, p.s - 1.0)) * std::exp(-w / p.omega_c);
            }
            double operator()(const Tabulated& t) const { return detail::interpolate(t, w); }
        };
        return std::max(0.0, std::visit(Visitor{omega}, family_));
    }

    // J(w)/w for w >= 0, evaluated without division so that w = 0 gives the analytic limit
    // (+infinity for sub-Ohmic densities).
    double bare_over_omega(double omega) const
    {
        struct Visitor {
            double w;
            double operator()(const Lorentzian& p) const
            {
                const double g2 = p.gamma * p.gamma;
                const double den = (g2 + (w + p.omega0) * (w + p.omega0)) * (g2 + (w - p.omega0) * (w - p.omega0));
                return p.lambda * p.lambda / std::numbers::pi * 4.0 * p.gamma * p.omega0 / den;
            }
            double operator()(const Ohmic& p) const
            {
                return p.lambda * p.lambda / std::numbers::pi * std::pow(w, p.s - 1.0) /
                       (std::tgamma(p.s + 1.0) * std::pow(p.omega_c, p.s - 1.0)) * std::exp(-w / p.omega_c);
            }
            double operator()(const Tabulated& t) const
            {
                if (w > 0.0) {
                    return detail::interpolate(t, w) / w;
                }
                if (t.omega.front() > 0.0) {
                    return 0.0;
                }
                if (t.values.front() > 0.0) {
                    return std::numeric_limits<double>::infinity();
                }
                return t.values[1] / t.omega[1];
            }
        };
        if (omega < 0.0) {
            return 0.0;
        }
        return std::max(0.0, std::visit(Visitor{omega}, family_));
    }

    // J(w) on the support (zero outside). Thermal densities follow
    // J_beta(w) = J(|w|) (1 + n(|w|)) for w > 0 and J(|w|) n(|w|) for w < 0.
    double operator()(double omega) const
    {
        const Interval sup = support();
        if (!(omega >= sup.lo && omega <= sup.hi)) {
            return 0.0;
        }
        if (!thermal()) {
            return bare(omega);
        }
        const double a = std::abs(omega);
        if (a == 0.0) {
            return bare_over_omega(0.0) / beta_;
        }
        const double filled = bare_over_omega(a) * detail::bose_kernel(a, beta_, scale());
        return omega > 0.0 ? bare(a) + filled : filled;
    }

    // Narrow structures the discretizer and integrators must resolve.
    std::vector<Feature> features() const
    {
        std::vector<Feature> out;
        if (const auto* p = std::get_if<Lorentzian>(&family_)) {
            out.push_back({p->omega0, p->gamma});
            if (thermal()) {
                out.push_back({-p->omega0, p->gamma});
            }
        }
        return out;
    }

    // Points of the support where J (thermal or not) has an integrable divergence.
    std::vector<double> singular_points() const
    {
        if (thermal() && std::isinf(bare_over_omega(0.0))) {
            return {0.0};
        }
        return {};
    }

private:
    SpectralFamily family_;
    double hard_cutoff_;
    double temperature_K_;
    double beta_;
};

inline double eval(const SpectralDensity& sd, double omega) { return sd(omega); }

// T-TEDOPA transform of a zero-temperature density to temperature T.
inline SpectralDensity thermalize(const SpectralDensity& sd, double temperature_K)
{
    if (!(temperature_K >= 0.0)) {
        throw ParameterError("thermalize: temperature must be >= 0");
    }
    if (sd.thermal()) {
        throw ParameterError("thermalize: input density is already thermalized");
    }
    if (temperature_K == 0.0) {
        return sd;
    }
    return SpectralDensity(sd.family(), sd.hard_cutoff(), temperature_K);
}

// Same density with a different overall coupling lambda (tabulated values scale by ratio^2).
inline SpectralDensity with_lambda(const SpectralDensity& sd, double lambda)
{
    struct Visitor {
        double lambda;
        SpectralFamily operator()(Lorentzian p) const { p.lambda = lambda; return p; }
        SpectralFamily operator()(Ohmic p) const { p.lambda = lambda; return p; }
        SpectralFamily operator()(const Tabulated&) const
        {
            throw ParameterError("tabulated densities carry no lambda parameter");
        }
    };
    return SpectralDensity(std::visit(Visitor{lambda}, sd.family()), sd.hard_cutoff(), sd.temperature_K());
}

namespace detail {

// Breakpoints for adaptive integration of the zero-temperature density on [lo, hi].
inline std::vector<double> integration_breakpoints(const SpectralDensity& sd, double lo, double hi)
{
    std::vector<double> pts{lo, hi};
    for (const Feature& f : sd.features()) {
        for (double k : {-8.0, -1.0, 0.0, 1.0, 8.0}) {
            const double x = f.center + k * f.width;
            if (x > lo && x < hi) {
                pts.push_back(x);
            }
        }
    }
    if (const auto* t = std::get_if<Tabulated>(&sd.family())) {
        for (double x : t->omega) {
            if (x > lo && x < hi) {
                pts.push_back(x);
            }
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

} // namespace detail

// Relative reorganization energy beyond w_hc, using the nominal (uncut) zero-temperature density:
//   int_{w_hc}^inf J(w)/w dw / int_0^inf J(w)/w dw
inline double reorganization_tail_ratio(const SpectralDensity& sd, double omega_hc, double rel_tol = 1e-10)
{
    if (!(omega_hc > 0.0)) {
        throw ParameterError("reorganization_tail_ratio: cutoff must be > 0");
    }
    auto integrand = [&sd](double w) { return sd.bare_over_omega(w); };
    double upper = std::numeric_limits<double>::infinity();
    if (const auto* t = std::get_if<Tabulated>(&sd.family())) {
        upper = t->omega.back();
    }
    std::vector<double> singular;
    if (std::isinf(sd.bare_over_omega(0.0))) {
        singular.push_back(0.0);
    }

    const double split = std::min(omega_hc, upper);
    auto head_pts = detail::integration_breakpoints(sd, 0.0, split);
    const double head = quadrature::integrate(integrand, head_pts, rel_tol, singular).value;
    double tail = 0.0;
    if (omega_hc < upper) {
        std::vector<double> tail_pts;
        if (std::isinf(upper)) {
            // finite stretch through any remaining features, then a semi-infinite piece
            double far = omega_hc;
            for (const Feature& f : sd.features()) {
                far = std::max(far, f.center + 8.0 * f.width);
            }
            tail_pts = detail::integration_breakpoints(sd, omega_hc, far);
            if (far == omega_hc) {
                tail_pts = {omega_hc};
            }
            tail_pts.push_back(upper);
        } else {
            tail_pts = detail::integration_breakpoints(sd, omega_hc, upper);
        }
        tail = quadrature::integrate(integrand, tail_pts, rel_tol).value;
    }
    const double total = head + tail;
    if (!(total > 0.0) || !std::isfinite(total)) {
        std::ostringstream msg;
        msg << "reorganization energy is not a positive finite number (" << total << ")";
        throw DomainError(msg.str());
    }
    return tail / total;
}

// Smallest cutoff on the grid {n * scale : n = 1, 2, ...} whose neglected relative
// reorganization energy is at most `tol`. tol = 1 accepts the first grid point.
inline double choose_hard_cutoff(const SpectralDensity& sd, double tol, int max_multiple = 10000)
{
    if (!(tol > 0.0 && tol <= 1.0)) {
        throw ParameterError("choose_hard_cutoff: tol must lie in (0, 1]");
    }
    const double scale = sd.scale();
    for (int n = 1; n <= max_multiple; ++n) {
        const double candidate = n * scale;
        if (reorganization_tail_ratio(sd, candidate) <= tol) {
            return candidate;
        }
    }
    throw DomainError("choose_hard_cutoff: no cutoff up to " + std::to_string(max_multiple) +
                      " x scale meets the tolerance");
}

} // namespace chainmapper
