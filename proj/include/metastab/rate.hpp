#pragma once

#include "metastab/common.hpp"
#include "metastab/landscape.hpp"
#include "metastab/quadrature.hpp"
#include "metastab/special.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace metastab {

enum class RateRegime {
    quadratic_1d,
    quadratic_nd,
    pitchfork_pre,
    pitchfork_post,
    degenerate_general,
};

inline const char* to_string(RateRegime r) {
    switch (r) {
        case RateRegime::quadratic_1d: return "quadratic_1d";
        case RateRegime::quadratic_nd: return "quadratic_nd";
        case RateRegime::pitchfork_pre: return "pitchfork_pre";
        case RateRegime::pitchfork_post: return "pitchfork_post";
        case RateRegime::degenerate_general: return "degenerate_general";
    }
    return "?";
}

/// Mean-transition-time prediction: E[tau] ~= prefactor * exp(exponent/eps).
struct KramersPrediction {
    double exponent = 0.0;   // barrier Delta, units of V
    double prefactor = 0.0;  // C(eps), units of time
    RateRegime regime = RateRegime::quadratic_1d;
    double epsilon = 0.0;
    std::string error_order;

    double mean_time() const { return prefactor * std::exp(exponent / epsilon); }
};

/// Transition-rate prefactor and exponent from Hessian spectra at the
/// starting minimum and the relevant saddle:
///   C = 2 pi / |l1(saddle)| * sqrt(|det H(saddle)| / det H(start)).
/// Requires nondegenerate spectra; degenerate inputs are rejected and must
/// go through pitchfork_prefactor / degenerate_capacity instead.
inline KramersPrediction eyring_kramers(const TransitionSpec& spec, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("eyring_kramers: eps must be > 0");
    const auto& s = spec.start;
    const auto& z = spec.saddle;
    if (s.morse_index != 0)
        throw std::invalid_argument("eyring_kramers: start must have index 0");
    if (z.morse_index != 1)
        throw std::invalid_argument("eyring_kramers: saddle must have index 1");
    if (s.degenerate || z.degenerate)
        throw std::invalid_argument(
            "eyring_kramers: degenerate Hessian; use the degenerate branch "
            "(a quadratic prefactor would vanish or diverge)");
    const int d = static_cast<int>(s.eigenvalues.size());
    double log_det_saddle = 0.0, log_det_start = 0.0;
    for (int i = 0; i < d; ++i) {
        log_det_saddle += std::log(std::abs(z.eigenvalues[i]));
        log_det_start += std::log(s.eigenvalues[i]);
    }
    KramersPrediction pred;
    pred.epsilon = eps;
    pred.exponent = z.value - s.value;
    pred.prefactor = 2.0 * pi / std::abs(z.eigenvalues[0]) *
                     std::exp(0.5 * (log_det_saddle - log_det_start));
    pred.regime = (d == 1) ? RateRegime::quadratic_1d : RateRegime::quadratic_nd;
    pred.error_order = (d == 1) ? "O(sqrt(eps))" : "O(sqrt(eps)*|log eps|^(3/2))";
    if (pred.exponent < 0) throw std::invalid_argument("eyring_kramers: negative barrier");
    return pred;
}

/// Saddle data for the pitchfork crossover: lambda1 < 0 is the unstable
/// curvature, lambda2 the soft direction, stable_eigenvalues are
/// lambda_3..lambda_d (all > 0), and C4 > 0 the quartic coefficient of the
/// soft direction.
struct PitchforkSaddle {
    double lambda1;
    double lambda2;
    std::vector<double> stable_eigenvalues;
    double c4;
};

/// Prefactor across the pitchfork bifurcation. For lambda2 >= 0:
///   C = 2 pi sqrt((lambda2 + sqrt(2 eps C4)) l3...ld / (|l1| det H(min)))
///       / Psi_+(lambda2/sqrt(2 eps C4)).
/// For lambda2 < 0 the two post-bifurcation saddles take over; their
/// eigenvalues mu_1..mu_d may be supplied explicitly, otherwise the
/// normal-form values (mu1 = l1, mu2 = 2|l2|, mu_j = l_j) are used, and
/// Psi_- replaces Psi_+.
inline KramersPrediction pitchfork_prefactor(
    const PitchforkSaddle& saddle, double det_hess_min, double eps,
    const std::optional<std::vector<double>>& post_eigenvalues = std::nullopt) {
    if (!(saddle.c4 > 0.0))
        throw std::invalid_argument("pitchfork_prefactor: C4 must be > 0");
    if (!(saddle.lambda1 < 0.0))
        throw std::invalid_argument("pitchfork_prefactor: lambda1 must be < 0");
    if (!(det_hess_min > 0.0))
        throw std::invalid_argument("pitchfork_prefactor: det of the minimum Hessian must be > 0");
    if (!(eps > 0.0)) throw std::invalid_argument("pitchfork_prefactor: eps must be > 0");
    for (double l : saddle.stable_eigenvalues)
        if (!(l > 0.0))
            throw std::invalid_argument("pitchfork_prefactor: stable eigenvalues must be > 0");

    const double s = std::sqrt(2.0 * eps * saddle.c4);
    KramersPrediction pred;
    pred.epsilon = eps;
    pred.error_order = "O(eps^beta*|log eps|^(1+beta))";
    if (saddle.lambda2 >= 0.0) {
        double prod_stable = 1.0;
        for (double l : saddle.stable_eigenvalues) prod_stable *= l;
        double alpha = saddle.lambda2 / s;
        pred.prefactor = 2.0 * pi *
                         std::sqrt((saddle.lambda2 + s) * prod_stable /
                                   (std::abs(saddle.lambda1) * det_hess_min)) /
                         psi_plus(alpha);
        pred.regime = RateRegime::pitchfork_pre;
    } else {
        std::vector<double> mu;
        if (post_eigenvalues) {
            mu = *post_eigenvalues;
        } else {
            mu.push_back(saddle.lambda1);
            mu.push_back(2.0 * std::abs(saddle.lambda2));
            for (double l : saddle.stable_eigenvalues) mu.push_back(l);
        }
        if (mu.size() < 2 || !(mu[0] < 0.0) || !(mu[1] >= 0.0))
            throw std::invalid_argument(
                "pitchfork_prefactor: post-bifurcation eigenvalues must have mu1 < 0 <= mu2");
        double prod_stable = 1.0;
        for (std::size_t j = 2; j < mu.size(); ++j) {
            if (!(mu[j] > 0.0))
                throw std::invalid_argument(
                    "pitchfork_prefactor: inconsistent eigenvalue signs in mu");
            prod_stable *= mu[j];
        }
        double alpha = mu[1] / s;
        pred.prefactor = 2.0 * pi *
                         std::sqrt((mu[1] + s) * prod_stable /
                                   (std::abs(mu[0]) * det_hess_min)) /
                         psi_minus(alpha);
        pred.regime = RateRegime::pitchfork_post;
    }
    return pred;
}

struct DegenerateCapacity {
    double capacity = 0.0;
    double log_capacity = 0.0;  // log of the eps-dependent value, overflow-safe
};

/// Capacity between the wells through a non-quadratic saddle at the
/// origin, from the profile u1 along the unstable direction (positive and
/// growing; the potential falls off as -u1) and the transverse profile u2
/// on the remaining k-1 soft directions:
///
///   cap = eps * [∫ e^{-u2/eps}] / [∫ e^{-u1/eps}] * prod_j sqrt(2 pi eps / lambda_j)
///
/// u2 acts on 1 or 2 variables; the quadrature domains must contain the
/// region where the integrands are non-negligible.
inline DegenerateCapacity degenerate_capacity(
    const std::function<double(double)>& u1, double u1_halfwidth,
    const std::function<double(const Vec&)>& u2, int u2_arity, double u2_halfwidth,
    const std::vector<double>& stable_eigenvalues, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("degenerate_capacity: eps must be > 0");
    if (u2_arity < 1 || u2_arity > 2)
        throw std::invalid_argument("degenerate_capacity: u2 arity must be 1 or 2");
    for (double l : stable_eigenvalues)
        if (!(l > 0.0))
            throw std::invalid_argument("degenerate_capacity: lambda_j must be > 0");

    auto check_tail = [&](double tail, double peak, const char* which) {
        if (!(tail <= 1e-10 * peak))
            throw numerical_error(std::string("degenerate_capacity: ") + which +
                                  " integrand not negligible at the domain edge "
                                  "(non-integrable input?)");
    };

    // denominator: ∫ e^{-u1/eps} over the unstable direction
    auto den_f = [&](double y) { return std::exp(-u1(y) / eps); };
    check_tail(den_f(-u1_halfwidth), 1.0, "u1");
    check_tail(den_f(u1_halfwidth), 1.0, "u1");
    double den = integrate(den_f, -u1_halfwidth, u1_halfwidth, 0.0, 1e-11).value;

    double num;
    if (u2_arity == 1) {
        auto f = [&](double y) { return std::exp(-u2(vec1(y)) / eps); };
        check_tail(f(-u2_halfwidth), 1.0, "u2");
        check_tail(f(u2_halfwidth), 1.0, "u2");
        num = integrate(f, -u2_halfwidth, u2_halfwidth, 0.0, 1e-11).value;
    } else {
        auto inner = [&](double y2) {
            return integrate(
                       [&](double y3) { return std::exp(-u2(vec2(y2, y3)) / eps); },
                       -u2_halfwidth, u2_halfwidth, 0.0, 1e-9)
                .value;
        };
        check_tail(std::exp(-u2(vec2(u2_halfwidth, 0.0)) / eps), 1.0, "u2");
        num = integrate(inner, -u2_halfwidth, u2_halfwidth, 0.0, 1e-9).value;
    }

    DegenerateCapacity out;
    double log_gauss = 0.0;  // empty product = 1 when k = d
    for (double l : stable_eigenvalues) log_gauss += 0.5 * std::log(2.0 * pi * eps / l);
    out.log_capacity = std::log(eps) + std::log(num) - std::log(den) + log_gauss;
    out.capacity = std::exp(out.log_capacity);
    return out;
}

}  // namespace metastab
