#pragma once

#include "metastab/common.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace metastab {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;  // estimated absolute error
    bool converged = true;
};

namespace detail {

// Gauss(7)/Kronrod(15) pair on [-1, 1].
constexpr double gk_nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kronrod_w[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double gauss_w[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
inline void gk15(const F& f, double a, double b, double& value, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fc = f(c);
    double result_k = kronrod_w[7] * fc;
    double result_g = gauss_w[3] * fc;
    for (int i = 0; i < 7; ++i) {
        double x = h * gk_nodes[i];
        double fsum = f(c - x) + f(c + x);
        result_k += kronrod_w[i] * fsum;
        if (i % 2 == 1) result_g += gauss_w[i / 2] * fsum;
    }
    value = result_k * h;
    err = std::abs((result_k - result_g) * h) * 1.0;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod 15(7) on [a, b]. Bisects the worst interval
/// until the summed error estimate is below max(abs_tol, rel_tol*|I|).
template <typename F>
QuadResult integrate(const F& f, double a, double b, double abs_tol = 1e-12,
                     double rel_tol = 1e-10, int max_intervals = 4000) {
    struct Seg {
        double a, b, value, error;
    };
    if (a == b) return {0.0, 0.0, true};
    std::vector<Seg> segs;
    segs.reserve(64);
    double v, e;
    detail::gk15(f, a, b, v, e);
    segs.push_back({a, b, v, e});
    double total_v = v, total_e = e;
    while (static_cast<int>(segs.size()) < max_intervals) {
        double tol = std::max(abs_tol, rel_tol * std::abs(total_v));
        if (total_e <= tol) break;
        // split the segment with the largest error
        std::size_t worst = 0;
        for (std::size_t i = 1; i < segs.size(); ++i)
            if (segs[i].error > segs[worst].error) worst = i;
        Seg s = segs[worst];
        double m = 0.5 * (s.a + s.b);
        if (m == s.a || m == s.b) break;  // interval exhausted at double precision
        Seg left{s.a, m, 0, 0}, right{m, s.b, 0, 0};
        detail::gk15(f, left.a, left.b, left.value, left.error);
        detail::gk15(f, right.a, right.b, right.value, right.error);
        total_v += left.value + right.value - s.value;
        total_e += left.error + right.error - s.error;
        segs[worst] = left;
        segs.push_back(right);
    }
    bool ok = total_e <= std::max(abs_tol, rel_tol * std::abs(total_v)) * 4.0;
    return {total_v, total_e, ok};
}

/// max of f over [a, b] by dense scan plus golden-section polish.
template <typename F>
double scan_max(const F& f, double a, double b, int n = 2048) {
    double best = f(a), best_x = a;
    for (int i = 1; i <= n; ++i) {
        double x = a + (b - a) * i / n;
        double fx = f(x);
        if (fx > best) {
            best = fx;
            best_x = x;
        }
    }
    // golden-section polish in the bracketing cell
    double lo = std::max(a, best_x - (b - a) / n);
    double hi = std::min(b, best_x + (b - a) / n);
    const double gr = 0.61803398874989484820;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-14 * (1 + std::abs(lo)); ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = f(x1);
        }
    }
    return std::max({best, f1, f2});
}

/// ∫_a^b exp(g(y) - shift) dy. The caller supplies the shift (normally
/// max g) so the integrand stays within double range.
template <typename G>
QuadResult integrate_exp_shifted(const G& g, double a, double b, double shift,
                                 double rel_tol = 1e-10) {
    return integrate([&](double y) { return std::exp(g(y) - shift); }, a, b, 0.0,
                     rel_tol);
}

}  // namespace metastab
