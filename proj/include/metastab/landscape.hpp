#pragma once

#include "metastab/common.hpp"
#include "metastab/potential.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace metastab {

struct CriticalPoint {
    Vec location;
    double value = 0.0;
    Vec eigenvalues;      // Hessian spectrum, ascending
    int morse_index = 0;  // count of negative eigenvalues
    bool degenerate = false;

    bool is_minimum() const { return morse_index == 0 && !degenerate; }
    bool is_saddle() const { return morse_index == 1 && !degenerate; }
};

struct TransitionSpec {
    CriticalPoint start;   // index 0
    CriticalPoint target;  // index 0
    double target_radius = 0.1;
    CriticalPoint saddle;  // index 1
    double communication_height = 0.0;  // H(start, target)
    double barrier = 0.0;               // H - V(start)
};

struct Hierarchy {
    std::vector<CriticalPoint> ordered;     // deepest first
    std::vector<double> level_heights;      // H(x_k, M_{k-1}) for k >= 2
    double theta = 0.0;
};

struct LandscapeOptions {
    double newton_tol = 1e-10;
    double dedupe_tol = 1e-6;
    int max_newton_iters = 200;
    // |eig| < degeneracy_rel * max|eig| flags a degenerate critical point
    double degeneracy_rel = 1e-6;
    int flood_cells_per_axis = 256;
    int scan_points = 65536;  // 1D dense scan resolution (<= 1e-4 spacing on O(1) boxes)
};

namespace detail {

inline CriticalPoint classify(const Potential& p, const Vec& x, double degeneracy_rel) {
    CriticalPoint cp;
    cp.location = x;
    cp.value = p.value(x);
    Eigen::SelfAdjointEigenSolver<Mat> es(p.hessian(x));
    cp.eigenvalues = es.eigenvalues();
    double scale = cp.eigenvalues.cwiseAbs().maxCoeff();
    cp.morse_index = 0;
    cp.degenerate = false;
    for (int i = 0; i < cp.eigenvalues.size(); ++i) {
        if (cp.eigenvalues[i] < 0) ++cp.morse_index;
        if (std::abs(cp.eigenvalues[i]) < degeneracy_rel * scale) cp.degenerate = true;
    }
    return cp;
}

// Newton on grad V = 0 with gradient-descent fallback when the Hessian
// solve is unusable. Returns nullopt on divergence.
inline std::optional<Vec> refine_critical(const Potential& p, Vec x,
                                          const Vec& lo, const Vec& hi,
                                          const LandscapeOptions& opt) {
    const int d = p.dimension();
    double box_diam = (hi - lo).norm();
    for (int it = 0; it < opt.max_newton_iters; ++it) {
        Vec g = p.gradient(x);
        if (g.norm() <= opt.newton_tol) return x;
        Mat H = p.hessian(x);
        Eigen::FullPivLU<Mat> lu(H);
        Vec step;
        if (lu.isInvertible()) {
            step = lu.solve(-g);
        } else {
            step = -g;  // singular Hessian: plain descent step
        }
        double max_step = 0.1 * box_diam + 1e-12;
        if (step.norm() > max_step) step *= max_step / step.norm();
        x += step;
        for (int i = 0; i < d; ++i)
            if (x[i] < lo[i] - 0.5 * (hi[i] - lo[i]) || x[i] > hi[i] + 0.5 * (hi[i] - lo[i]))
                return std::nullopt;  // wandered far out of the box
    }
    Vec g = p.gradient(x);
    if (g.norm() <= 1e3 * opt.newton_tol) return x;
    return std::nullopt;
}

}  // namespace detail

/// Newton refinement of grid seeds over the box [lo, hi]; results are
/// deduplicated, classified by Hessian spectrum, and sorted by location.
/// Seeds that diverge are dropped (an empty result is not an error).
inline std::vector<CriticalPoint> find_critical_points(
    const Potential& p, const Vec& lo, const Vec& hi, int seeds_per_axis,
    const LandscapeOptions& opt = {}) {
    const int d = p.dimension();
    if (lo.size() != d || hi.size() != d)
        throw std::invalid_argument("find_critical_points: box arity mismatch");
    for (int i = 0; i < d; ++i)
        if (!(lo[i] < hi[i]))
            throw std::invalid_argument("find_critical_points: degenerate box");
    if (seeds_per_axis < 2)
        throw std::invalid_argument("find_critical_points: need >= 2 seeds per axis");
    if (d > 3)
        throw std::invalid_argument("find_critical_points: grid seeding supports d <= 3");

    long total = 1;
    for (int i = 0; i < d; ++i) total *= seeds_per_axis;

    std::vector<Vec> found;
    for (long s = 0; s < total; ++s) {
        Vec x(d);
        long rem = s;
        for (int i = 0; i < d; ++i) {
            int k = rem % seeds_per_axis;
            rem /= seeds_per_axis;
            x[i] = lo[i] + (hi[i] - lo[i]) * (k + 0.5) / seeds_per_axis;
        }
        auto refined = detail::refine_critical(p, x, lo, hi, opt);
        if (!refined) continue;
        bool in_box = true;
        for (int i = 0; i < d; ++i)
            if ((*refined)[i] < lo[i] - 1e-9 || (*refined)[i] > hi[i] + 1e-9) in_box = false;
        if (!in_box) continue;
        bool dup = false;
        for (const auto& y : found)
            if ((y - *refined).norm() < opt.dedupe_tol) dup = true;
        if (!dup) found.push_back(*refined);
    }
    std::sort(found.begin(), found.end(), [](const Vec& a, const Vec& b) {
        for (int i = 0; i < a.size(); ++i) {
            if (a[i] < b[i] - 1e-12) return true;
            if (a[i] > b[i] + 1e-12) return false;
        }
        return false;
    });
    std::vector<CriticalPoint> out;
    out.reserve(found.size());
    for (const auto& x : found) out.push_back(detail::classify(p, x, opt.degeneracy_rel));
    return out;
}

struct CommunicationHeight {
    double height = 0.0;
    Vec saddle;
};

namespace detail {

inline CommunicationHeight communication_height_1d(const Potential& p, double a,
                                                   double b,
                                                   const LandscapeOptions& opt) {
    if (a > b) std::swap(a, b);
    // dense scan for the max of V on [a, b]
    int n = opt.scan_points;
    double best = -std::numeric_limits<double>::infinity(), best_x = a;
    for (int i = 0; i <= n; ++i) {
        double x = a + (b - a) * i / n;
        double v = p.value1d(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    // local refinement: Newton on V' = 0 if the max is interior
    double x = best_x;
    if (best_x > a + (b - a) / n && best_x < b - (b - a) / n) {
        for (int it = 0; it < 100; ++it) {
            double g = p.grad1d(x), h = p.hess1d(x);
            if (std::abs(g) < 1e-14 || h >= 0.0) break;
            double step = -g / h;
            double cell = (b - a) / n;
            if (std::abs(step) > cell) step = step > 0 ? cell : -cell;
            x += step;
            if (x <= a || x >= b) {
                x = best_x;
                break;
            }
        }
        if (p.value1d(x) >= best) best_x = x;
    }
    CommunicationHeight ch;
    ch.saddle = vec1(best_x);
    ch.height = std::max(p.value1d(best_x), best);
    return ch;
}

// Union-find over grid cells activated in order of increasing V; the merge
// level of the basins of a and b is the communication height.
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(int i, int j) { parent[find(i)] = find(j); }
};

inline CommunicationHeight communication_height_flood(const Potential& p, const Vec& a,
                                                      const Vec& b,
                                                      const LandscapeOptions& opt) {
    const int d = p.dimension();
    if (d != 2)
        throw std::invalid_argument("communication_height: flooding implemented for d = 2");
    // box: bounding box of {a, b} padded by 50% plus a margin
    Vec lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        lo[i] = std::min(a[i], b[i]);
        hi[i] = std::max(a[i], b[i]);
        double pad = 0.5 * (hi[i] - lo[i]) + 0.5;
        lo[i] -= pad;
        hi[i] += pad;
    }
    const int n = opt.flood_cells_per_axis;
    const int total = n * n;
    auto cell_center = [&](int idx, int axis) {
        int c = (axis == 0) ? idx % n : idx / n;
        return lo[axis] + (hi[axis] - lo[axis]) * (c + 0.5) / n;
    };
    std::vector<double> vals(total);
    for (int idx = 0; idx < total; ++idx)
        vals[idx] = p.value(vec2(cell_center(idx, 0), cell_center(idx, 1)));
    auto cell_of = [&](const Vec& x) {
        int cx = static_cast<int>((x[0] - lo[0]) / (hi[0] - lo[0]) * n);
        int cy = static_cast<int>((x[1] - lo[1]) / (hi[1] - lo[1]) * n);
        cx = std::clamp(cx, 0, n - 1);
        cy = std::clamp(cy, 0, n - 1);
        return cy * n + cx;
    };
    int ca = cell_of(a), cb = cell_of(b);
    if (ca == cb)
        throw std::invalid_argument(
            "communication_height: grid too coarse to separate the basins");
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return vals[i] < vals[j]; });
    std::vector<char> active(total, 0);
    UnionFind uf(total);
    for (int idx : order) {
        active[idx] = 1;
        int cx = idx % n, cy = idx / n;
        const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            int nx = cx + dx[k], ny = cy + dy[k];
            if (nx < 0 || nx >= n || ny < 0 || ny >= n) continue;
            int nidx = ny * n + nx;
            if (active[nidx]) uf.unite(idx, nidx);
        }
        if (uf.find(ca) == uf.find(cb)) {
            double merge_level = vals[idx];
            double va = p.value(a), vb = p.value(b);
            if (merge_level <= std::max(va, vb) + 1e-12 * (1.0 + std::abs(merge_level)))
                throw std::invalid_argument(
                    "communication_height: points share a basin (no barrier)");
            // refine merge cell to the saddle, staying within one cell diameter
            Vec x = vec2(cell_center(idx, 0), cell_center(idx, 1));
            Vec x0 = x;
            double cell_diam = (hi - lo).norm() / n;
            for (int it = 0; it < 60; ++it) {
                Vec g = p.gradient(x);
                if (g.norm() < 1e-12) break;
                Mat H = p.hessian(x);
                Eigen::FullPivLU<Mat> lu(H);
                if (!lu.isInvertible()) break;
                Vec step = lu.solve(-g);
                if (step.norm() > cell_diam) step *= cell_diam / step.norm();
                x += step;
                if ((x - x0).norm() > 2.0 * cell_diam) {
                    x = x0;
                    break;
                }
            }
            CommunicationHeight ch;
            if (p.gradient(x).norm() < 1e-8) {
                ch.saddle = x;
                ch.height = std::max({p.value(x), va, vb});
            } else {
                ch.saddle = x0;
                ch.height = merge_level;
            }
            return ch;
        }
    }
    throw std::invalid_argument(
        "communication_height: basins never merge on the flooding grid");
}

}  // namespace detail

/// Communication height between two (near-)minima: the lowest level at
/// which their sublevel-set basins connect. d=1 uses a dense scan with
/// local refinement; d=2 uses sublevel-set flooding on a grid. The
/// returned height always satisfies H >= max(V(a), V(b)).
inline CommunicationHeight communication_height(const Potential& p, const Vec& a,
                                                const Vec& b,
                                                const LandscapeOptions& opt = {}) {
    if (a.size() != p.dimension() || b.size() != p.dimension())
        throw std::invalid_argument("communication_height: point arity mismatch");
    CommunicationHeight ch;
    if (p.dimension() == 1) {
        if (std::abs(a[0] - b[0]) < 1e-12)
            throw std::invalid_argument("communication_height: coincident endpoints");
        ch = detail::communication_height_1d(p, a[0], b[0], opt);
    } else {
        ch = detail::communication_height_flood(p, a, b, opt);
    }
    ch.height = std::max({ch.height, p.value(a), p.value(b)});
    return ch;
}

/// Orders minima from deepest to shallowest by greedily peeling off the
/// minimum with the smallest exit barrier H(x, M\x) - V(x). The defining
/// inequality is verified (in barrier form) at every level with the given
/// theta; ties within theta raise an error rather than picking arbitrarily.
inline Hierarchy metastable_order(const std::vector<CriticalPoint>& minima,
                                  const Potential& p, double theta,
                                  const LandscapeOptions& opt = {}) {
    if (!(theta > 0.0)) throw std::invalid_argument("metastable_order: theta must be > 0");
    const int n = static_cast<int>(minima.size());
    if (n < 2) throw std::invalid_argument("metastable_order: need >= 2 minima");
    for (const auto& m : minima)
        if (m.morse_index != 0)
            throw std::invalid_argument("metastable_order: inputs must be minima");

    Mat H(n, n);  // pairwise communication heights
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double h = communication_height(p, minima[i].location, minima[j].location, opt)
                           .height;
            H(i, j) = H(j, i) = h;
        }

    auto set_height = [&](int i, const std::vector<int>& members) {
        double h = std::numeric_limits<double>::infinity();
        for (int j : members)
            if (j != i) h = std::min(h, H(i, j));
        return h;
    };

    std::vector<int> remaining(n);
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<int> order_rev;  // shallowest first
    while (remaining.size() > 1) {
        // exit barrier of each remaining minimum to the rest
        std::vector<std::pair<double, int>> barriers;
        for (int i : remaining)
            barriers.emplace_back(set_height(i, remaining) - minima[i].value, i);
        std::sort(barriers.begin(), barriers.end());
        if (barriers.size() >= 2 && barriers[1].first - barriers[0].first < theta)
            throw std::invalid_argument(
                "metastable_order: hierarchy not resolvable at this theta");
        int peel = barriers[0].second;
        order_rev.push_back(peel);
        remaining.erase(std::find(remaining.begin(), remaining.end(), peel));
    }
    order_rev.push_back(remaining[0]);

    Hierarchy hier;
    hier.theta = theta;
    std::vector<int> order(order_rev.rbegin(), order_rev.rend());  // deepest first
    for (int idx : order) hier.ordered.push_back(minima[idx]);

    // verify the defining inequality (barrier form) at every level
    for (int k = 2; k <= n; ++k) {
        std::vector<int> Mk(order.begin(), order.begin() + k);
        std::vector<int> Mkm1(order.begin(), order.begin() + k - 1);
        int xk = order[k - 1];
        double lhs = set_height(xk, Mkm1) - minima[xk].value;
        if (std::find(Mkm1.begin(), Mkm1.end(), xk) == Mkm1.end()) {
            double h_level = std::numeric_limits<double>::infinity();
            for (int j : Mkm1) h_level = std::min(h_level, H(xk, j));
            hier.level_heights.push_back(h_level);
        }
        double rhs = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k - 1; ++i) {
            int xi = order[i];
            rhs = std::min(rhs, set_height(xi, Mk) - minima[xi].value);
        }
        if (!(lhs <= rhs - theta))
            throw std::invalid_argument(
                "metastable_order: hierarchy not resolvable at this theta");
    }
    return hier;
}

/// Builds the (start, saddle, target) transition description, with
/// H from communication_height and barrier = H - V(start).
inline TransitionSpec make_transition(const Potential& p, const CriticalPoint& start,
                                      const CriticalPoint& target, double target_radius,
                                      const LandscapeOptions& opt = {}) {
    TransitionSpec t;
    t.start = start;
    t.target = target;
    t.target_radius = target_radius;
    auto ch = communication_height(p, start.location, target.location, opt);
    t.communication_height = ch.height;
    t.barrier = ch.height - start.value;
    t.saddle = detail::classify(p, ch.saddle, opt.degeneracy_rel);
    if (t.barrier < 0) throw numerical_error("make_transition: negative barrier");
    return t;
}

}  // namespace metastab
