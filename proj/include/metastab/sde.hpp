#pragma once

#include "metastab/common.hpp"
#include "metastab/potential.hpp"
#include "metastab/quadrature.hpp"
#include "metastab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <variant>
#include <vector>

namespace metastab {

/// Euler-Maruyama ensemble configuration. The step bound
/// dt <= delta^2/(10 eps) keeps the discrete hit detection from stepping
/// across the target ball.
struct SimConfig {
    double epsilon = 0.1;
    double dt = 1e-3;
    double max_time = 1e6;
    Vec target_center;
    double target_radius = 0.1;
    std::uint64_t seed = 0;
    int replicas = 1000;
    int threads = 1;
    double guard_radius = 1e4;  // |x| beyond this aborts the replica

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("SimConfig: eps must be >= 0");
        if (!(max_time > 0.0)) throw std::invalid_argument("SimConfig: max_time must be > 0");
        if (replicas < 1) throw std::invalid_argument("SimConfig: replicas must be >= 1");
        if (target_center.size() > 0) {
            if (!(target_radius > 0.0))
                throw std::invalid_argument("SimConfig: target radius must be > 0");
            if (epsilon > 0.0 && dt > target_radius * target_radius / (10.0 * epsilon))
                throw std::invalid_argument(
                    "SimConfig: dt exceeds delta^2/(10 eps); hits would be missed");
        }
    }
};

struct Trajectory {
    int dim = 0;
    double dt = 0.0;
    int stride = 1;                // states recorded every `stride` steps
    std::vector<double> states;    // row-major (n_recorded x dim), includes x0
    bool aborted = false;          // guard-radius blow-up

    int size() const { return dim == 0 ? 0 : static_cast<int>(states.size()) / dim; }
    Vec state(int i) const {
        Vec v(dim);
        for (int k = 0; k < dim; ++k) v[k] = states[static_cast<std::size_t>(i) * dim + k];
        return v;
    }
};

/// First-hitting-time sample with summary statistics. `ks_distance` is
/// the Kolmogorov-Smirnov distance of samples/mean from the unit
/// exponential law.
struct HittingStats {
    std::vector<double> samples;  // uncensored, sorted ascending
    int censored = 0;
    double mean = 0.0;
    double stderror = 0.0;
    double ks_distance = 0.0;
    double censor_fraction = 0.0;
    bool valid = false;  // censor fraction < 1%
};

using Drift = std::function<Vec(const Vec&)>;

namespace detail {

inline Drift gradient_drift(const Potential& p) {
    return [&p](const Vec& x) { return Vec(-p.gradient(x)); };
}

// one EM step: x <- x + f(x) dt + sqrt(2 eps dt) xi
inline void em_step(const Drift& f, Vec& x, double dt, double noise_scale,
                    GaussianStream& gauss) {
    Vec drift = f(x);
    for (int i = 0; i < x.size(); ++i) x[i] += drift[i] * dt + noise_scale * gauss.next();
}

inline double ks_exponential(const std::vector<double>& sorted_rescaled) {
    const std::size_t n = sorted_rescaled.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double F = 1.0 - std::exp(-sorted_rescaled[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
        d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    }
    return d;
}

}  // namespace detail

/// Integrates dx = -grad V dt + sqrt(2 eps) dW from x0. Bit-identical for
/// identical (seed, inputs).
inline Trajectory simulate_em(const Potential& p, const Vec& x0, const SimConfig& cfg,
                              int record_stride = 1) {
    cfg.validate();
    if (x0.size() != p.dimension())
        throw std::invalid_argument("simulate_em: x0 arity mismatch");
    Trajectory traj;
    traj.dim = p.dimension();
    traj.dt = cfg.dt;
    traj.stride = record_stride;
    GaussianStream gauss(cfg.seed, 0);
    Drift f = detail::gradient_drift(p);
    const double noise_scale = std::sqrt(2.0 * cfg.epsilon * cfg.dt);
    const long steps = static_cast<long>(cfg.max_time / cfg.dt);
    Vec x = x0;
    auto record = [&](const Vec& v) {
        for (int k = 0; k < traj.dim; ++k) traj.states.push_back(v[k]);
    };
    record(x);
    for (long s = 1; s <= steps; ++s) {
        detail::em_step(f, x, cfg.dt, noise_scale, gauss);
        if (x.norm() > cfg.guard_radius) {
            traj.aborted = true;
            break;
        }
        if (s % record_stride == 0) record(x);
    }
    return traj;
}

/// Runs cfg.replicas independent first-hitting simulations of the target
/// ball. Replica k draws from stream (seed, k); replicas may be spread
/// over threads, and the sorted aggregation makes parallel and serial
/// runs produce identical statistics.
inline HittingStats sample_hitting_times(const Potential& p, const Vec& x0,
                                         const SimConfig& cfg) {
    cfg.validate();
    if (cfg.target_center.size() != p.dimension())
        throw std::invalid_argument("sample_hitting_times: target arity mismatch");
    if ((x0 - cfg.target_center).norm() <= 2.0 * cfg.target_radius)
        throw std::invalid_argument(
            "sample_hitting_times: x0 too close to the target ball");

    const double noise_scale = std::sqrt(2.0 * cfg.epsilon * cfg.dt);
    const long max_steps = static_cast<long>(cfg.max_time / cfg.dt);
    Drift f = detail::gradient_drift(p);

    std::vector<double> taus(cfg.replicas, -1.0);  // -1 marks censored
    auto run_range = [&](int begin, int end) {
        for (int r = begin; r < end; ++r) {
            GaussianStream gauss(cfg.seed, static_cast<std::uint64_t>(r));
            Vec x = x0;
            for (long s = 1; s <= max_steps; ++s) {
                detail::em_step(f, x, cfg.dt, noise_scale, gauss);
                if ((x - cfg.target_center).norm() <= cfg.target_radius) {
                    taus[r] = s * cfg.dt;
                    break;
                }
                if (x.norm() > cfg.guard_radius) break;  // aborted counts as censored
            }
        }
    };
    int nthreads = std::max(1, cfg.threads);
    if (nthreads == 1) {
        run_range(0, cfg.replicas);
    } else {
        std::vector<std::thread> pool;
        int chunk = (cfg.replicas + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            int b = t * chunk, e = std::min(cfg.replicas, b + chunk);
            if (b >= e) break;
            pool.emplace_back(run_range, b, e);
        }
        for (auto& th : pool) th.join();
    }

    HittingStats stats;
    for (double t : taus)
        if (t >= 0.0)
            stats.samples.push_back(t);
        else
            ++stats.censored;
    std::sort(stats.samples.begin(), stats.samples.end());
    stats.censor_fraction = static_cast<double>(stats.censored) / cfg.replicas;
    stats.valid = stats.censor_fraction < 0.01;
    if (stats.samples.empty())
        throw numerical_error("sample_hitting_times: all replicas censored");
    const std::size_t n = stats.samples.size();
    double sum = 0.0;
    for (double t : stats.samples) sum += t;
    stats.mean = sum / n;
    double ss = 0.0;
    for (double t : stats.samples) ss += (t - stats.mean) * (t - stats.mean);
    stats.stderror = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    std::vector<double> rescaled(stats.samples);
    for (double& t : rescaled) t /= stats.mean;
    stats.ks_distance = detail::ks_exponential(rescaled);
    return stats;
}

struct HistogramReport {
    std::vector<double> edges;       // bins+1
    std::vector<double> density;     // normalized occupancy per bin
    std::vector<double> reference;   // e^{-V/eps}/Z integrated per bin
    double l1_distance = 0.0;
    bool resolution_warning = false;  // under 10 samples per bin on average
};

/// Long-run occupancy of a single trajectory against the invariant
/// density e^{-V/eps}/Z (Z by quadrature). 1D only; `periodic` wraps the
/// trajectory into [lo, hi] (used with flat potentials).
inline HistogramReport invariant_histogram(const Potential& p, const SimConfig& cfg,
                                           int bins, double lo, double hi,
                                           double burn_in = 100.0,
                                           bool periodic = false) {
    if (p.dimension() != 1)
        throw std::invalid_argument("invariant_histogram: implemented for d = 1");
    if (bins < 2) throw std::invalid_argument("invariant_histogram: bins must be >= 2");
    if (!(lo < hi)) throw std::invalid_argument("invariant_histogram: need lo < hi");
    if (!(cfg.dt > 0.0) || !(cfg.max_time > 0.0))
        throw std::invalid_argument("invariant_histogram: invalid config");

    GaussianStream gauss(cfg.seed, 0);
    const double noise_scale = std::sqrt(2.0 * cfg.epsilon * cfg.dt);
    const long steps = static_cast<long>(cfg.max_time / cfg.dt);
    const long burn_steps = static_cast<long>(burn_in / cfg.dt);
    double x = periodic ? 0.5 * (lo + hi) : -1.0;
    if (!periodic) {
        // start at the global minimum found by scan
        double best = p.value1d(lo), bx = lo;
        for (int i = 1; i <= 1024; ++i) {
            double xx = lo + (hi - lo) * i / 1024.0;
            if (p.value1d(xx) < best) {
                best = p.value1d(xx);
                bx = xx;
            }
        }
        x = bx;
    }
    std::vector<long> counts(bins, 0);
    long kept = 0;
    for (long s = 1; s <= steps; ++s) {
        x += -p.grad1d(x) * cfg.dt + noise_scale * gauss.next();
        if (periodic) {
            double w = hi - lo;
            x -= w * std::floor((x - lo) / w);
        }
        if (s <= burn_steps) continue;
        if (x >= lo && x < hi) {
            int b = static_cast<int>((x - lo) / (hi - lo) * bins);
            b = std::clamp(b, 0, bins - 1);
            ++counts[b];
            ++kept;
        }
    }
    HistogramReport rep;
    rep.resolution_warning = kept < 10L * bins;
    rep.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) rep.edges[b] = lo + (hi - lo) * b / bins;
    rep.density.resize(bins);
    for (int b = 0; b < bins; ++b)
        rep.density[b] = kept > 0 ? static_cast<double>(counts[b]) / kept : 0.0;
    // reference: bin masses of e^{-V/eps}/Z (Z over a generous domain)
    auto g = [&](double y) { return -p.value1d(y) / cfg.epsilon; };
    double zlo = lo - (hi - lo), zhi = hi + (hi - lo);
    double shift = scan_max(g, zlo, zhi);
    double Z = integrate_exp_shifted(g, zlo, zhi, shift).value;
    rep.reference.resize(bins);
    rep.l1_distance = 0.0;
    for (int b = 0; b < bins; ++b) {
        rep.reference[b] =
            integrate_exp_shifted(g, rep.edges[b], rep.edges[b + 1], shift).value / Z;
        rep.l1_distance += std::abs(rep.density[b] - rep.reference[b]);
    }
    return rep;
}

// --- first-exit machinery -------------------------------------------------

struct IntervalDomain {
    double lo, hi;
};
struct DiskDomain {
    Vec center;
    double radius;
};
struct BoxDomain {
    Vec lo, hi;
};
using ExitDomain = std::variant<IntervalDomain, DiskDomain, BoxDomain>;

struct ExitReport {
    std::vector<double> bin_density;   // normalized angular histogram
    std::vector<double> exit_params;   // angle (2D) or endpoint coordinate (1D)
    std::vector<Vec> exit_points;
    double mean_exit_time = 0.0;
    double stderror = 0.0;
    int censored = 0;
};

namespace detail {

inline bool inside(const ExitDomain& dom, const Vec& x) {
    if (const auto* iv = std::get_if<IntervalDomain>(&dom))
        return x[0] > iv->lo && x[0] < iv->hi;
    if (const auto* disk = std::get_if<DiskDomain>(&dom))
        return (x - disk->center).norm() < disk->radius;
    const auto& box = std::get<BoxDomain>(dom);
    for (int i = 0; i < x.size(); ++i)
        if (x[i] <= box.lo[i] || x[i] >= box.hi[i]) return false;
    return true;
}

// Linear interpolation of the boundary crossing between inside point a and
// outside point b.
inline Vec crossing_point(const ExitDomain& dom, const Vec& a, const Vec& b) {
    double t_lo = 0.0, t_hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        double t = 0.5 * (t_lo + t_hi);
        Vec m = a + t * (b - a);
        if (inside(dom, m))
            t_lo = t;
        else
            t_hi = t;
    }
    return a + t_hi * (b - a);
}

inline double exit_parameter(const ExitDomain& dom, const Vec& x) {
    if (std::holds_alternative<IntervalDomain>(dom)) return x[0];
    Vec c;
    if (const auto* disk = std::get_if<DiskDomain>(&dom))
        c = disk->center;
    else {
        const auto& box = std::get<BoxDomain>(dom);
        c = 0.5 * (box.lo + box.hi);
    }
    return std::atan2(x[1] - c[1], x[0] - c[0]);  // angle around the domain center
}

}  // namespace detail

/// First-exit sampling for a general (possibly non-gradient) drift.
/// Exit points are linearly interpolated on the crossing step and binned
/// by angle around the domain center (1D: by endpoint coordinate).
inline ExitReport exit_location_histogram(const Drift& f, const Vec& x0,
                                          const ExitDomain& domain, const SimConfig& cfg,
                                          int bins = 36) {
    if (!(cfg.dt > 0.0) || cfg.replicas < 1)
        throw std::invalid_argument("exit_location_histogram: invalid config");
    if (!detail::inside(domain, x0))
        throw std::invalid_argument("exit_location_histogram: x0 not inside the domain");
    const double noise_scale = std::sqrt(2.0 * cfg.epsilon * cfg.dt);
    const long max_steps = static_cast<long>(cfg.max_time / cfg.dt);

    ExitReport rep;
    std::vector<double> times;
    for (int r = 0; r < cfg.replicas; ++r) {
        GaussianStream gauss(cfg.seed, static_cast<std::uint64_t>(r));
        Vec x = x0;
        bool exited = false;
        for (long s = 1; s <= max_steps; ++s) {
            Vec prev = x;
            detail::em_step(f, x, cfg.dt, noise_scale, gauss);
            if (!detail::inside(domain, x)) {
                Vec hit = detail::crossing_point(domain, prev, x);
                rep.exit_points.push_back(hit);
                rep.exit_params.push_back(detail::exit_parameter(domain, hit));
                times.push_back(s * cfg.dt);
                exited = true;
                break;
            }
        }
        if (!exited) ++rep.censored;
    }
    if (times.empty()) throw numerical_error("exit_location_histogram: all replicas censored");
    double sum = 0.0;
    for (double t : times) sum += t;
    rep.mean_exit_time = sum / times.size();
    double ss = 0.0;
    for (double t : times) ss += (t - rep.mean_exit_time) * (t - rep.mean_exit_time);
    rep.stderror = times.size() > 1
                       ? std::sqrt(ss / (times.size() - 1) / times.size())
                       : 0.0;
    double plo, phi;
    if (std::holds_alternative<IntervalDomain>(domain)) {
        const auto& iv = std::get<IntervalDomain>(domain);
        plo = iv.lo;
        phi = iv.hi;
    } else {
        plo = -pi;
        phi = pi;
    }
    std::vector<long> counts(bins, 0);
    for (double a : rep.exit_params) {
        int b = static_cast<int>((a - plo) / (phi - plo) * bins);
        counts[std::clamp(b, 0, bins - 1)]++;
    }
    rep.bin_density.resize(bins);
    for (int b = 0; b < bins; ++b)
        rep.bin_density[b] = static_cast<double>(counts[b]) / rep.exit_params.size();
    return rep;
}

}  // namespace metastab
