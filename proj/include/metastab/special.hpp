#pragma once

#include "metastab/common.hpp"

#include <cmath>
#include <stdexcept>

namespace metastab {

/// Gamma function by the Lanczos approximation (g = 7, 9 terms), with
/// reflection for x < 1/2. Relative accuracy ~1e-13 on (0, 30].
inline double lanczos_gamma(double x) {
    static const double coeff[9] = {
        0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,    12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6,  1.5056327351493116e-7};
    if (x < 0.5) return pi / (std::sin(pi * x) * lanczos_gamma(1.0 - x));
    x -= 1.0;
    double a = coeff[0];
    double t = x + 7.5;
    for (int i = 1; i < 9; ++i) a += coeff[i] / (x + i);
    return std::sqrt(2.0 * pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

/// Γ(1/4), evaluated once through the Lanczos approximation.
inline double gamma_quarter() {
    static const double value = lanczos_gamma(0.25);
    return value;
}

enum class BesselKind { K_quarter, I_quarter, I_minus_quarter };

namespace detail {

// switchover between power-series and asymptotic branches; below it the
// series is summed in long double so the K connection-formula
// cancellation (~e^{2z}) still leaves > 10 significant digits.
constexpr double bessel_switch_z = 10.5;

constexpr long double gamma_3_4 = 1.2254167024651776451290983033628905268512L;
constexpr long double gamma_5_4 = 0.9064024770554770779826712889669423207730L;

inline long double bessel_i_series(int sign_nu, double z) {
    // I_nu(z) = (z/2)^nu / Gamma(1+nu) * sum_m t_m,  t_m = t_{m-1} z^2/(4 m (m+nu))
    const long double nu = sign_nu > 0 ? 0.25L : -0.25L;
    const long double half = 0.5L * static_cast<long double>(z);
    const long double q = sqrtl(sqrtl(half));  // (z/2)^{1/4}
    const long double front =
        (sign_nu > 0 ? q / gamma_5_4 : (1.0L / q) / gamma_3_4);
    long double term = 1.0L, sum = 1.0L;
    const long double z2 = half * half;
    for (int m = 1; m < 400; ++m) {
        term *= z2 / (static_cast<long double>(m) * (static_cast<long double>(m) + nu));
        sum += term;
        if (term < 1e-22L * sum) break;
    }
    return front * sum;
}

inline long double bessel_k_quarter_series(double z) {
    // K_nu = pi/2 (I_{-nu} - I_nu)/sin(nu pi); nu = 1/4 so the factor is pi/sqrt(2)
    const long double diff = bessel_i_series(-1, z) - bessel_i_series(+1, z);
    return 2.2214414690791831235079404950303L * diff;  // pi/sqrt(2)
}

// Asymptotic sums with mu = 4 nu^2 = 1/4, truncated at the smallest term.
// ksum: sum_k a_k/(8z)^k,  alt: sum_k (-1)^k a_k/(8z)^k.
inline void bessel_asymptotic_sums(double z, double& ksum, double& alt) {
    const double mu = 0.25;
    double term = 1.0, s_plus = 1.0, s_alt = 1.0;
    for (int k = 1; k < 60; ++k) {
        double factor = (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * z);
        double next = term * factor;
        if (std::abs(next) >= std::abs(term)) break;  // past optimal truncation
        term = next;
        s_plus += term;
        s_alt += (k % 2 == 0 ? term : -term);
        if (std::abs(term) < 1e-17 * std::abs(s_plus)) break;
    }
    ksum = s_plus;
    alt = s_alt;
}

inline double bessel_k_quarter_scaled_asym(double z) {
    double ksum, alt;
    bessel_asymptotic_sums(z, ksum, alt);
    return std::sqrt(pi / (2.0 * z)) * ksum;
}

// e^{-z} I_{+-1/4}(z) including the leading recessive term
// -sin(nu pi) e^{-2z} ksum / sqrt(2 pi z).
inline double bessel_i_quarter_scaled_asym(int sign_nu, double z) {
    double ksum, alt;
    bessel_asymptotic_sums(z, ksum, alt);
    const double sin_nu_pi = (sign_nu > 0 ? 1.0 : -1.0) * 0.70710678118654752440;
    double rec = (z < 350.0) ? -sin_nu_pi * std::exp(-2.0 * z) * ksum : 0.0;
    return (alt + rec) / std::sqrt(2.0 * pi * z);
}

}  // namespace detail

/// e^{+z} K_{1/4}(z); overflow-free for all z > 0.
inline double bessel_k_quarter_scaled(double z) {
    if (!(z > 0.0)) throw std::invalid_argument("bessel: z must be > 0");
    if (z < detail::bessel_switch_z)
        return static_cast<double>(expl(static_cast<long double>(z)) *
                                   detail::bessel_k_quarter_series(z));
    return detail::bessel_k_quarter_scaled_asym(z);
}

/// e^{-z} I_{+-1/4}(z); overflow-free for all z > 0.
inline double bessel_i_quarter_scaled(BesselKind kind, double z) {
    if (!(z > 0.0)) throw std::invalid_argument("bessel: z must be > 0");
    if (kind == BesselKind::K_quarter)
        throw std::invalid_argument("bessel_i_quarter_scaled: kind must be I");
    int sign_nu = (kind == BesselKind::I_quarter) ? +1 : -1;
    if (z < detail::bessel_switch_z)
        return static_cast<double>(expl(-static_cast<long double>(z)) *
                                   detail::bessel_i_series(sign_nu, z));
    return detail::bessel_i_quarter_scaled_asym(sign_nu, z);
}

/// Modified Bessel functions of order +-1/4. Power series (long double)
/// for z < 10.5, asymptotic expansion beyond; both branches are accurate
/// to ~1e-10 relative at the switchover.
inline double bessel_quarter(BesselKind kind, double z) {
    if (!(z > 0.0)) throw std::invalid_argument("bessel: z must be > 0");
    switch (kind) {
        case BesselKind::K_quarter:
            if (z < detail::bessel_switch_z)
                return static_cast<double>(detail::bessel_k_quarter_series(z));
            return std::exp(-z) * detail::bessel_k_quarter_scaled_asym(z);
        case BesselKind::I_quarter:
        case BesselKind::I_minus_quarter: {
            int s = (kind == BesselKind::I_quarter) ? +1 : -1;
            if (z < detail::bessel_switch_z)
                return static_cast<double>(detail::bessel_i_series(s, z));
            return std::exp(z) * detail::bessel_i_quarter_scaled_asym(s, z);
        }
    }
    throw std::invalid_argument("bessel: unknown kind");
}

/// Psi_+(a) = sqrt(a(1+a)/8pi) e^{a^2/16} K_{1/4}(a^2/16).
/// Limit at a = 0 is Gamma(1/4)/(2^{5/4} sqrt(pi)); tends to 1 as a -> inf.
inline double psi_plus(double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("psi_plus: alpha must be >= 0");
    if (alpha == 0.0)
        return gamma_quarter() / (std::pow(2.0, 1.25) * std::sqrt(pi));
    double z = alpha * alpha / 16.0;
    return std::sqrt(alpha * (1.0 + alpha) / (8.0 * pi)) * bessel_k_quarter_scaled(z);
}

/// Psi_-(a) = sqrt(pi a(1+a)/32) e^{-a^2/64} [I_{-1/4} + I_{1/4}](a^2/64).
/// Same limit as Psi_+ at a = 0; tends to 2 as a -> inf.
inline double psi_minus(double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("psi_minus: alpha must be >= 0");
    if (alpha == 0.0)
        return gamma_quarter() / (std::pow(2.0, 1.25) * std::sqrt(pi));
    double z = alpha * alpha / 64.0;
    double isum = bessel_i_quarter_scaled(BesselKind::I_minus_quarter, z) +
                  bessel_i_quarter_scaled(BesselKind::I_quarter, z);
    return std::sqrt(pi * alpha * (1.0 + alpha) / 32.0) * isum;
}

}  // namespace metastab
