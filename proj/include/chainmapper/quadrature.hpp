// quadrature.hpp - Gauss-Legendre rules and adaptive integration with error control

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "chainmapper/error.hpp"

namespace chainmapper::quadrature {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1], nodes ascending.
inline Rule gauss_legendre(std::size_t n)
{
    if (n == 0) {
        throw ParameterError("Gauss-Legendre rule needs at least one node");
    }
    Rule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double nd = static_cast<double>(n);
    // P_n'(x) from the three-term recurrence
    auto legendre = [n, nd](double x, double& derivative) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            const double kd = static_cast<double>(k);
            const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) {
            p0 = 1.0;
        }
        derivative = nd * (x * p1 - p0) / (x * x - 1.0);
        return p1;
    };
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            const double dx = legendre(x, dp) / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        legendre(x, dp);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) {
        rule.nodes[n / 2] = 0.0;
    }
    return rule;
}

// Gauss-Legendre rule mapped affinely onto [a, b].
inline Rule gauss_legendre(std::size_t n, double a, double b)
{
    Rule rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    for (std::size_t i = 0; i < n; ++i) {
        rule.nodes[i] = mid + half * rule.nodes[i];
        rule.weights[i] *= half;
    }
    return rule;
}

struct Integral {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
};

enum class Endpoint { regular, singular };

// Adaptive integral of f over [a, b]; b may be +infinity.
// Singular endpoints are handled by double-exponential quadrature, which never
// evaluates f at the endpoint itself.
template <class F>
Integral integrate_segment(const F& f, double a, double b, double rel_tol,
                           Endpoint left = Endpoint::regular, Endpoint right = Endpoint::regular)
{
    Integral out;
    if (a == b) {
        return out;
    }
    if (std::isinf(b)) {
        boost::math::quadrature::exp_sinh<double> rule;
        out.value = rule.integrate(f, a, b, rel_tol, &out.error, &out.l1);
    } else if (left == Endpoint::singular || right == Endpoint::singular) {
        boost::math::quadrature::tanh_sinh<double> rule;
        out.value = rule.integrate(f, a, b, rel_tol, &out.error, &out.l1);
    } else {
        out.value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 30, rel_tol,
                                                                                &out.error, &out.l1);
    }
    return out;
}

// Sum of adaptive integrals over consecutive breakpoints (sorted ascending, last may be
// +infinity). Points listed in `singular_points` are treated as integrable singularities.
// Throws NumericalError when the accumulated error estimate exceeds 10 * rel_tol * L1.
template <class F>
Integral integrate(const F& f, std::span<const double> breakpoints, double rel_tol,
                   std::span<const double> singular_points = {})
{
    if (breakpoints.size() < 2) {
        throw ParameterError("integrate needs at least two breakpoints");
    }
    auto is_singular = [&](double x) {
        return std::find(singular_points.begin(), singular_points.end(), x) != singular_points.end()
                   ? Endpoint::singular
                   : Endpoint::regular;
    };
    Integral total;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double a = breakpoints[i];
        const double b = breakpoints[i + 1];
        if (!(b >= a)) {
            throw ParameterError("integrate breakpoints must be ascending");
        }
        Integral part = integrate_segment(f, a, b, rel_tol, is_singular(a), is_singular(b));
        total.value += part.value;
        total.error += part.error;
        total.l1 += part.l1;
    }
    if (!std::isfinite(total.value) || total.error > 10.0 * rel_tol * total.l1 + 1e-300) {
        std::ostringstream msg;
        msg << "adaptive quadrature did not converge: value=" << total.value << " error=" << total.error
            << " L1=" << total.l1 << " requested rel_tol=" << rel_tol << " over [" << breakpoints.front()
            << ", " << breakpoints.back() << "]";
        throw NumericalError(msg.str());
    }
    return total;
}

template <class F>
Integral integrate(const F& f, std::initializer_list<double> breakpoints, double rel_tol,
                   std::initializer_list<double> singular_points = {})
{
    const std::vector<double> bp(breakpoints);
    const std::vector<double> sp(singular_points);
    return integrate(f, std::span<const double>(bp), rel_tol, std::span<const double>(sp));
}

} // namespace chainmapper::quadrature
