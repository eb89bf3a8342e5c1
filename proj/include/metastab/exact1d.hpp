#pragma once

#include "metastab/common.hpp"
#include "metastab/potential.hpp"
#include "metastab/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace metastab {

/// One-dimensional committor setting: absorbing boundaries a < b, start
/// point x in between, noise intensity eps.
struct Interval1D {
    double a;
    double b;
    double x;
    double epsilon;
};

namespace detail {

inline void require_1d(const Potential& p, const char* who) {
    if (p.dimension() != 1)
        throw std::invalid_argument(std::string(who) + ": potential must be 1D");
}

}  // namespace detail

/// Probability of exiting through a before b:
///   h(x) = ∫_x^b e^{V/eps} dy / ∫_a^b e^{V/eps} dy.
/// The max of V on [a, b] is factored out before exponentiating.
inline double committor_1d(const Potential& p, const Interval1D& iv) {
    detail::require_1d(p, "committor_1d");
    if (!(iv.epsilon > 0.0)) throw std::invalid_argument("committor_1d: eps must be > 0");
    if (!(iv.a < iv.b)) throw std::invalid_argument("committor_1d: need a < b");
    if (iv.x <= iv.a) return 1.0;
    if (iv.x >= iv.b) return 0.0;
    auto g = [&](double y) { return p.value1d(y) / iv.epsilon; };
    double shift = scan_max(g, iv.a, iv.b);
    double num = integrate_exp_shifted(g, iv.x, iv.b, shift).value;
    double den = integrate_exp_shifted(g, iv.a, iv.b, shift).value;
    if (!(den > 0.0) || !std::isfinite(den))
        throw numerical_error("committor_1d: quadrature overflow or vanishing denominator");
    double h = num / den;
    return std::min(1.0, std::max(0.0, h));
}

namespace detail {

// Truncation point for ∫_z^inf e^{-V/eps}: past the last well, where
// V - min V exceeds 50 eps. The neglected tail mass is O(e^{-50}).
inline double inner_cutoff_1d(const Potential& p, double from, double eps) {
    double step = 0.05 * (1.0 + std::abs(from));
    double y = from;
    double vmin = p.value1d(y);
    double vprev = vmin;
    int safety = 0;
    while (safety++ < 100000) {
        y += step;
        double v = p.value1d(y);
        vmin = std::min(vmin, v);
        bool increasing = v > vprev;
        vprev = v;
        if (increasing && v - vmin > 50.0 * eps) return y;
        if (!std::isfinite(v))
            throw numerical_error("mean_hitting_1d: potential not evaluable on the tail");
    }
    throw numerical_error(
        "mean_hitting_1d: inner integral does not converge (potential not confining)");
}

}  // namespace detail

/// Expected first-hitting time of A = (-inf, a] started at x > a:
///   w = (1/eps) ∫_a^x ∫_z^inf e^{[V(z)-V(y)]/eps} dy dz,
/// by nested adaptive quadrature with the exponent maxima factored out.
/// The inner integral is truncated where V - min V > 50 eps past the last
/// well; the bound on the neglected tail is folded into the error check.
inline double mean_hitting_1d(const Potential& p, double a, double x, double eps) {
    detail::require_1d(p, "mean_hitting_1d");
    if (!(eps > 0.0)) throw std::invalid_argument("mean_hitting_1d: eps must be > 0");
    if (x < a) throw std::invalid_argument("mean_hitting_1d: need x >= a");
    if (x == a) return 0.0;

    const double y_max = detail::inner_cutoff_1d(p, x, eps);
    // shifts: outer peak is max V on [a, x]; inner trough is min V on [a, y_max]
    auto v = [&](double y) { return p.value1d(y); };
    double v_outer_max = scan_max(v, a, x);
    double v_inner_min = -scan_max([&](double y) { return -p.value1d(y); }, a, y_max);

    auto inner = [&](double z) {
        return integrate(
                   [&](double y) { return std::exp(-(p.value1d(y) - v_inner_min) / eps); },
                   z, y_max, 0.0, 1e-10)
            .value;
    };
    auto outer_integrand = [&](double z) {
        return std::exp((p.value1d(z) - v_outer_max) / eps) * inner(z);
    };
    double val = integrate(outer_integrand, a, x, 0.0, 1e-9).value;
    double log_w = std::log(val) + (v_outer_max - v_inner_min) / eps - std::log(eps);
    if (log_w > 700.0)
        throw numerical_error("mean_hitting_1d: result overflows double range");
    return std::exp(log_w);
}

/// Closed-form leading asymptotics of the mean transition time:
///   2 pi / sqrt(|V''(z*)| V''(y*)) * exp([V(z*) - V(y*)]/eps).
inline double kramers_asymptotic_1d(const Potential& p, double y_star, double z_star,
                                    double eps) {
    detail::require_1d(p, "kramers_asymptotic_1d");
    double curv_min = p.hess1d(y_star);
    double curv_saddle = p.hess1d(z_star);
    if (!(curv_min > 0.0) || !(curv_saddle < 0.0))
        throw std::invalid_argument(
            "kramers_asymptotic_1d: need V''(y*) > 0 and V''(z*) < 0");
    return 2.0 * pi / std::sqrt(std::abs(curv_saddle) * curv_min) *
           std::exp((p.value1d(z_star) - p.value1d(y_star)) / eps);
}

/// Capacity of the exact 1D minimizer between {a} and {b}:
///   cap = eps / ∫_a^b e^{V/eps} dy.
/// The eps factor makes cap consistent with the generator
/// eps*Lap - grad V . grad and with the mean-time estimate; the Dirichlet
/// form without it would drop the eps dependence of the prefactor.
inline double capacity_1d(const Potential& p, double a, double b, double eps) {
    detail::require_1d(p, "capacity_1d");
    if (!(a < b)) throw std::invalid_argument("capacity_1d: need a < b");
    if (!(eps > 0.0)) throw std::invalid_argument("capacity_1d: eps must be > 0");
    auto g = [&](double y) { return p.value1d(y) / eps; };
    double shift = scan_max(g, a, b);
    double integral = integrate_exp_shifted(g, a, b, shift).value;
    // cap = eps * e^{-shift} / integral, kept in logs to dodge overflow
    double log_cap = std::log(eps) - shift - std::log(integral);
    return std::exp(log_cap);
}

}  // namespace metastab
