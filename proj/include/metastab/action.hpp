#pragma once

#include "metastab/common.hpp"
#include "metastab/potential.hpp"
#include "metastab/sde.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace metastab {

/// Uniform-step discrete path phi_0..phi_n in R^d.
struct DiscretePath {
    double dt = 0.0;
    std::vector<Vec> points;
    bool endpoints_fixed = true;

    int segments() const { return static_cast<int>(points.size()) - 1; }
    double duration() const { return dt * segments(); }
    void validate() const {
        if (points.size() < 3) throw std::invalid_argument("DiscretePath: need n >= 2");
        if (!(dt > 0.0)) throw std::invalid_argument("DiscretePath: dt must be > 0");
    }
};

/// Drift together with its Jacobian (needed by the action gradient).
struct DriftModel {
    Drift f;
    std::function<Mat(const Vec&)> jacobian;
};

inline DriftModel drift_from_potential(const Potential& p) {
    return {[&p](const Vec& x) { return Vec(-p.gradient(x)); },
            [&p](const Vec& x) { return Mat(-p.hessian(x)); }};
}

inline DriftModel drift_with_fd_jacobian(Drift f) {
    auto jac = [f](const Vec& x) {
        const int d = static_cast<int>(x.size());
        Mat J(d, d);
        Vec xs = x;
        for (int j = 0; j < d; ++j) {
            double h = fd_step(x[j]);
            xs[j] = x[j] + h;
            Vec fp = f(xs);
            xs[j] = x[j] - h;
            Vec fm = f(xs);
            xs[j] = x[j];
            J.col(j) = (fp - fm) / (2.0 * h);
        }
        return J;
    };
    return {std::move(f), std::move(jac)};
}

/// Large-deviation cost of tracking the path against drift f:
///   I = (1/2) sum_i |(phi_{i+1}-phi_i)/dt - f(midpoint_i)|^2 dt,
/// a midpoint discretization, second-order accurate in dt.
inline double rate_functional(const DiscretePath& path, const Drift& f) {
    path.validate();
    double I = 0.0;
    for (int i = 0; i < path.segments(); ++i) {
        Vec mid = 0.5 * (path.points[i] + path.points[i + 1]);
        Vec r = (path.points[i + 1] - path.points[i]) / path.dt - f(mid);
        I += r.squaredNorm();
    }
    return 0.5 * I * path.dt;
}

struct GradientDecomposition {
    double forward = 0.0;   // (1/2)∫|phidot + grad V|^2
    double reversed = 0.0;  // (1/2)∫|phidot - grad V|^2
    double boundary = 0.0;  // 2 [V(end) - V(start)]
    double identity_residual = 0.0;  // forward - reversed - boundary
};

/// Splits the gradient-case action as
///   I = (1/2)∫|phidot - grad V|^2 + 2[V(phi(T)) - V(phi(0))],
/// returning both integrals and the boundary term; the identity holds at
/// the discretization order O(dt^2).
inline GradientDecomposition gradient_decomposition(const DiscretePath& path,
                                                    const Potential& p) {
    path.validate();
    GradientDecomposition out;
    for (int i = 0; i < path.segments(); ++i) {
        Vec mid = 0.5 * (path.points[i] + path.points[i + 1]);
        Vec v = (path.points[i + 1] - path.points[i]) / path.dt;
        Vec g = p.gradient(mid);
        out.forward += (v + g).squaredNorm();
        out.reversed += (v - g).squaredNorm();
    }
    out.forward *= 0.5 * path.dt;
    out.reversed *= 0.5 * path.dt;
    out.boundary = 2.0 * (p.value(path.points.back()) - p.value(path.points.front()));
    out.identity_residual = out.forward - out.reversed - out.boundary;
    return out;
}

struct MinimizeOptions {
    double grad_tol = 1e-8;
    int max_iters = 30000;
    double t_bracket_lo = 5.0;
    double t_bracket_hi = 200.0;
    int t_scan_points = 7;       // log-spaced warm-started pre-scan
    int golden_iters = 12;
};

struct ActionResult {
    DiscretePath path;
    double action = 0.0;
    double duration = 0.0;  // optimal T
    bool converged = false;
    bool t_at_bracket_edge = false;  // optimum at the bracket cap: bias reported
    int iterations = 0;
};

namespace detail {

// gradient of the discrete functional (exact adjoint of the midpoint rule)
inline double action_value_grad(const DriftModel& model, const std::vector<Vec>& pts,
                                double dt, std::vector<Vec>& grad) {
    const int n = static_cast<int>(pts.size()) - 1;
    const int d = static_cast<int>(pts[0].size());
    grad.assign(pts.size(), Vec::Zero(d));
    double I = 0.0;
    Vec r_prev = Vec::Zero(d);
    for (int i = 0; i < n; ++i) {
        Vec mid = 0.5 * (pts[i] + pts[i + 1]);
        Vec r = (pts[i + 1] - pts[i]) / dt - model.f(mid);
        I += r.squaredNorm();
        Mat J = model.jacobian(mid);
        Vec jr = J.transpose() * r;
        // dI/dphi_i += dt * r_i * (-1/dt - J/2);  dI/dphi_{i+1} += dt * r_i * (1/dt - J/2)
        grad[i] += -r - 0.5 * dt * jr;
        grad[i + 1] += r - 0.5 * dt * jr;
        r_prev = r;
    }
    grad.front().setZero();
    grad.back().setZero();
    return 0.5 * I * dt;
}

struct InnerResult {
    double action;
    bool converged;
    int iterations;
};

// Safeguarded Barzilai-Borwein descent, preconditioned by 1/dt, with
// Armijo backtracking. Endpoints stay fixed.
inline InnerResult minimize_fixed_T(const DriftModel& model, std::vector<Vec>& pts,
                                    double dt, const MinimizeOptions& opt) {
    const int d = static_cast<int>(pts[0].size());
    std::vector<Vec> g, g_prev, pts_prev;
    double I = action_value_grad(model, pts, dt, g);
    double step = dt;  // 1/dt preconditioning folded into the initial step
    int it = 0;
    auto grad_norm = [&](const std::vector<Vec>& gr) {
        double s = 0.0;
        for (const auto& v : gr) s += v.squaredNorm();
        return std::sqrt(s);
    };
    for (; it < opt.max_iters; ++it) {
        double gn = grad_norm(g);
        if (gn <= opt.grad_tol) return {I, true, it};
        if (!pts_prev.empty()) {
            double sy = 0.0, ss = 0.0;
            for (std::size_t k = 0; k < pts.size(); ++k) {
                Vec s = pts[k] - pts_prev[k];
                Vec y = g[k] - g_prev[k];
                sy += s.dot(y);
                ss += s.dot(s);
            }
            step = (sy > 1e-300) ? ss / sy : dt;
            step = std::min(step, 1e4 * dt);
        }
        pts_prev = pts;
        g_prev = g;
        double I_old = I;
        double alpha = step;
        for (int bt = 0; bt < 40; ++bt) {
            for (std::size_t k = 1; k + 1 < pts.size(); ++k)
                pts[k] = pts_prev[k] - alpha * g_prev[k];
            I = action_value_grad(model, pts, dt, g);
            if (I <= I_old - 1e-4 * alpha * gn * gn || alpha < 1e-18) break;
            alpha *= 0.5;
        }
        if (I > I_old) {  // no descent possible: restore and stop
            pts = pts_prev;
            g = g_prev;
            I = I_old;
            break;
        }
        if (std::abs(I_old - I) < 1e-16 * (1.0 + std::abs(I)) && it > 10) break;
        (void)d;
    }
    return {I, grad_norm(g) <= opt.grad_tol, it};
}

inline std::vector<Vec> linear_init(const Vec& a, const Vec& b, int n) {
    std::vector<Vec> pts(n + 1);
    for (int i = 0; i <= n; ++i) pts[i] = a + (b - a) * (static_cast<double>(i) / n);
    return pts;
}

}  // namespace detail

/// Minimizes the rate functional over paths from start to end with n
/// segments: safeguarded preconditioned descent at fixed T, with the
/// travel time T optimized over a log bracket (warm-started scan plus
/// golden-section refinement). The infimum over T is typically attained
/// only as T grows, so the bracket cap is reported with the result.
inline ActionResult minimize_action(const DriftModel& model, const Vec& start,
                                    const Vec& end, int n,
                                    const MinimizeOptions& opt = {},
                                    const std::optional<DiscretePath>& init = std::nullopt) {
    if ((start - end).norm() < 1e-14)
        throw std::invalid_argument("minimize_action: endpoints coincide");
    if (n < 2) throw std::invalid_argument("minimize_action: need n >= 2");

    auto eval_T = [&](double T, std::vector<Vec> pts, ActionResult& best) {
        double dt = T / n;
        auto inner = detail::minimize_fixed_T(model, pts, dt, opt);
        if (inner.action < best.action) {
            best.action = inner.action;
            best.duration = T;
            best.path.dt = dt;
            best.path.points = pts;
            best.converged = inner.converged;
        }
        best.iterations += inner.iterations;
        return std::make_pair(inner.action, pts);
    };

    ActionResult best;
    best.action = std::numeric_limits<double>::infinity();
    best.path.endpoints_fixed = true;

    std::vector<Vec> warm =
        init ? init->points : detail::linear_init(start, end, n);
    if (static_cast<int>(warm.size()) != n + 1)
        throw std::invalid_argument("minimize_action: init path has wrong length");

    // ascending log-spaced scan with warm starts
    const double llo = std::log(opt.t_bracket_lo), lhi = std::log(opt.t_bracket_hi);
    std::vector<double> ts, is;
    for (int k = 0; k < opt.t_scan_points; ++k) {
        double T = std::exp(llo + (lhi - llo) * k / (opt.t_scan_points - 1));
        auto [I, pts] = eval_T(T, warm, best);
        warm = pts;
        ts.push_back(T);
        is.push_back(I);
    }
    // golden-section on log T around the scan minimum
    int kmin = static_cast<int>(std::min_element(is.begin(), is.end()) - is.begin());
    double a = std::log(ts[std::max(0, kmin - 1)]);
    double b = std::log(ts[std::min<int>(ts.size() - 1, kmin + 1)]);
    const double gr = 0.61803398874989484820;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = eval_T(std::exp(x1), best.path.points, best).first;
    double f2 = eval_T(std::exp(x2), best.path.points, best).first;
    for (int itg = 0; itg < opt.golden_iters; ++itg) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = eval_T(std::exp(x1), best.path.points, best).first;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = eval_T(std::exp(x2), best.path.points, best).first;
        }
    }
    best.t_at_bracket_edge = best.duration > 0.95 * opt.t_bracket_hi ||
                             best.duration < 1.05 * opt.t_bracket_lo;
    return best;
}

inline ActionResult minimize_action(const Potential& p, const Vec& start, const Vec& end,
                                    int n, const MinimizeOptions& opt = {},
                                    const std::optional<DiscretePath>& init = std::nullopt) {
    return minimize_action(drift_from_potential(p), start, end, n, opt, init);
}

/// Quasipotential for exit from a domain sampled along its boundary:
///   Vbar = 2 [min_boundary V - V(x*)].
inline double quasipotential_exit(const Potential& p, const Vec& x_star,
                                  const std::vector<Vec>& boundary_samples) {
    if (boundary_samples.empty())
        throw std::invalid_argument("quasipotential_exit: no boundary samples");
    double vmin = std::numeric_limits<double>::infinity();
    for (const auto& b : boundary_samples) vmin = std::min(vmin, p.value(b));
    return 2.0 * (vmin - p.value(x_star));
}

}  // namespace metastab
