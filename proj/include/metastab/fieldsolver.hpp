#pragma once

#include "metastab/common.hpp"
#include "metastab/potential.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace metastab {

enum class CellLabel : std::uint8_t { interior = 0, in_A = 1, in_B = 2 };

/// Scalar field on a rectangular lattice (d = 1 or 2) with Dirichlet
/// labels. Committor fields carry 1 on A, 0 on B exactly.
struct GridField {
    int dim = 1;
    std::array<double, 2> lo{0, 0}, hi{0, 0};
    std::array<int, 2> n{0, 1};  // nodes per axis; n[1] = 1 when dim = 1
    double spacing = 0.0;
    double epsilon = 0.0;
    std::vector<double> values;
    std::vector<CellLabel> labels;
    double residual = 0.0;

    int size() const { return n[0] * n[1]; }
    int index(int i, int j = 0) const { return j * n[0] + i; }
    double coord(int axis, int k) const { return lo[axis] + spacing * k; }
    Vec node(int i, int j = 0) const {
        if (dim == 1) return vec1(coord(0, i));
        return vec2(coord(0, i), coord(1, j));
    }
};

// --- discrete-walk oracles --------------------------------------------------

namespace detail {

// Thomas solve of a tridiagonal system (diag d, off-diagonals l/u).
inline std::vector<double> tridiag_solve(std::vector<double> l, std::vector<double> d,
                                         std::vector<double> u, std::vector<double> rhs) {
    const int n = static_cast<int>(d.size());
    for (int i = 1; i < n; ++i) {
        double w = l[i] / d[i - 1];
        d[i] -= w * u[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / d[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = (rhs[i] - u[i] * x[i + 1]) / d[i];
    return x;
}

}  // namespace detail

/// P[hit a before b] for the symmetric walk on the integers, started at
/// x: exact tridiagonal solve of the discrete Laplace equation. Equals
/// (b - x)/(b - a).
inline double walk_committor(int a, int b, int x) {
    if (!(a < b)) throw std::invalid_argument("walk_committor: need a < b");
    if (x <= a) return 1.0;
    if (x >= b) return 0.0;
    const int n = b - a - 1;  // interior points a+1..b-1
    std::vector<double> l(n, 1.0), d(n, -2.0), u(n, 1.0), rhs(n, 0.0);
    rhs[0] -= 1.0;  // boundary h(a) = 1
    auto h = detail::tridiag_solve(l, d, u, rhs);
    return h[x - a - 1];
}

/// Mean absorption time of the walk on {0..N} with absorbing ends:
/// solves (1/2) Lap w = -1 exactly; equals x (N - x).
inline double walk_mean_time(int N, int x) {
    if (N < 1) throw std::invalid_argument("walk_mean_time: need N >= 1");
    if (x < 0 || x > N) throw std::invalid_argument("walk_mean_time: x out of range");
    if (x == 0 || x == N) return 0.0;
    const int n = N - 1;
    std::vector<double> l(n, 1.0), d(n, -2.0), u(n, 1.0), rhs(n, -2.0);
    auto w = detail::tridiag_solve(l, d, u, rhs);
    return w[x - 1];
}

// --- continuum committor ----------------------------------------------------

using RegionPredicate = std::function<bool(const Vec&)>;

namespace detail {

struct GridGeometry {
    GridField field;
    std::vector<double> v;       // nodal V
    double v_min = 0.0;
    std::vector<int> unknown_of;  // node -> unknown index, -1 for labeled
    int n_unknowns = 0;
};

inline GridGeometry make_geometry(const Potential& p, const Vec& lo, const Vec& hi,
                                  const RegionPredicate& in_A, const RegionPredicate& in_B,
                                  double eps, double h) {
    const int d = p.dimension();
    if (d != 1 && d != 2)
        throw std::invalid_argument("committor_grid: d must be 1 or 2");
    if (!(h > 0.0)) throw std::invalid_argument("committor_grid: h must be > 0");
    GridGeometry g;
    auto& f = g.field;
    f.dim = d;
    f.spacing = h;
    f.epsilon = eps;
    for (int ax = 0; ax < d; ++ax) {
        f.lo[ax] = lo[ax];
        int n = static_cast<int>(std::round((hi[ax] - lo[ax]) / h)) + 1;
        if (n < 3) throw std::invalid_argument("committor_grid: domain too small for h");
        f.n[ax] = n;
        f.hi[ax] = lo[ax] + h * (n - 1);
    }
    if (d == 1) {
        f.n[1] = 1;
        f.lo[1] = f.hi[1] = 0.0;
    }
    const int total = f.size();
    f.values.assign(total, 0.0);
    f.labels.assign(total, CellLabel::interior);
    g.v.resize(total);
    g.unknown_of.assign(total, -1);
    bool any_A = false, any_B = false;
    for (int j = 0; j < f.n[1]; ++j)
        for (int i = 0; i < f.n[0]; ++i) {
            int idx = f.index(i, j);
            Vec x = f.node(i, j);
            g.v[idx] = p.value(x);
            if (in_A(x)) {
                f.labels[idx] = CellLabel::in_A;
                f.values[idx] = 1.0;
                any_A = true;
            } else if (in_B(x)) {
                f.labels[idx] = CellLabel::in_B;
                f.values[idx] = 0.0;
                any_B = true;
            } else {
                g.unknown_of[idx] = g.n_unknowns++;
            }
        }
    if (!any_A || !any_B)
        throw std::invalid_argument("committor_grid: A or B does not intersect the grid");
    g.v_min = *std::min_element(g.v.begin(), g.v.end());
    return g;
}

}  // namespace detail

/// Committor field h for eps*Lap h - grad V . grad h = 0 with h = 1 on A,
/// 0 on B and no-flux outer boundary. Assembled in the e^{-V/eps}-weighted
/// symmetric (finite-volume) form, which is an M-matrix at every cell
/// Peclet number, and solved by sparse Cholesky. Residual norm is checked
/// against 1e-10.
inline GridField committor_grid(const Potential& p, const Vec& lo, const Vec& hi,
                                const RegionPredicate& in_A, const RegionPredicate& in_B,
                                double eps, double h) {
    if (!(eps > 0.0)) throw std::invalid_argument("committor_grid: eps must be > 0");
    auto g = detail::make_geometry(p, lo, hi, in_A, in_B, eps, h);
    auto& f = g.field;
    const double h2 = h * h;
    auto face_weight = [&](int idx_a, int idx_b) {
        double vf = 0.5 * (g.v[idx_a] + g.v[idx_b]);
        return std::max(std::exp(-(vf - g.v_min) / eps), 1e-290);
    };

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(g.n_unknowns);
    const int nx = f.n[0], ny = f.n[1];
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int idx = f.index(i, j);
            int row = g.unknown_of[idx];
            if (row < 0) continue;
            double diag = 0.0;
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            int nfaces = f.dim == 1 ? 2 : 4;
            for (int k = 0; k < nfaces; ++k) {
                int ii = i + di[k], jj = j + dj[k];
                if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) continue;  // reflecting
                int nidx = f.index(ii, jj);
                double c = eps * face_weight(idx, nidx) / h2;
                diag += c;
                int col = g.unknown_of[nidx];
                if (col >= 0)
                    trips.emplace_back(row, col, -c);
                else if (f.labels[nidx] == CellLabel::in_A)
                    rhs[row] += c;
            }
            trips.emplace_back(row, row, diag);
        }

    Eigen::SparseMatrix<double> A(g.n_unknowns, g.n_unknowns);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw numerical_error("committor_grid: factorization failed");
    Eigen::VectorXd sol = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw numerical_error("committor_grid: solve failed");
    double res = (A * sol - rhs).cwiseAbs().maxCoeff() /
                 std::max(1e-30, rhs.cwiseAbs().maxCoeff());
    if (res > 1e-10) throw numerical_error("committor_grid: residual above 1e-10");
    f.residual = res;
    for (int idx = 0; idx < f.size(); ++idx)
        if (g.unknown_of[idx] >= 0) f.values[idx] = sol[g.unknown_of[idx]];
    return f;
}

/// Raw advection-form assembly of the same Dirichlet problem: central
/// differences for -grad V . grad h, switching to first-order upwinding
/// where the cell Peclet number |V'| h / eps exceeds 2 (central loses the
/// maximum principle there). Kept as a consistency check against the
/// weighted symmetric solve.
inline GridField committor_grid_advective(const Potential& p, const Vec& lo, const Vec& hi,
                                          const RegionPredicate& in_A,
                                          const RegionPredicate& in_B, double eps,
                                          double h) {
    if (!(eps > 0.0)) throw std::invalid_argument("committor_grid_advective: eps > 0");
    auto g = detail::make_geometry(p, lo, hi, in_A, in_B, eps, h);
    auto& f = g.field;
    const int nx = f.n[0], ny = f.n[1];
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(g.n_unknowns);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int idx = f.index(i, j);
            int row = g.unknown_of[idx];
            if (row < 0) continue;
            Vec grad = p.gradient(f.node(i, j));
            double diag = 0.0;
            auto add = [&](int nidx, double coeff) {
                int col = g.unknown_of[nidx];
                if (col >= 0)
                    trips.emplace_back(row, col, coeff);
                else if (f.labels[nidx] == CellLabel::in_A)
                    rhs[row] -= coeff;
            };
            for (int ax = 0; ax < f.dim; ++ax) {
                int ip = ax == 0 ? i + 1 : i, jp = ax == 0 ? j : j + 1;
                int im = ax == 0 ? i - 1 : i, jm = ax == 0 ? j : j - 1;
                bool has_p = ip < nx && jp < ny, has_m = im >= 0 && jm >= 0;
                double b = -grad[ax];  // drift component
                double peclet = std::abs(grad[ax]) * h / eps;
                // diffusion: eps (u_p - 2u + u_m)/h^2 with reflecting ghosts
                double cp = eps / (h * h), cm = eps / (h * h);
                if (!has_p) { cp = 0.0; cm *= 2.0; }
                if (!has_m) { cm = 0.0; cp *= 2.0; }
                double ap = cp, am = cm, ad = -(cp + cm);
                if (peclet <= 2.0) {
                    if (has_p) ap += b / (2.0 * h);
                    if (has_m) am -= b / (2.0 * h);
                } else if (b > 0.0) {
                    if (has_p) { ap += b / h; ad -= b / h; }
                } else {
                    if (has_m) { am -= b / h; ad += b / h; }
                }
                if (has_p) add(f.index(ip, jp), ap);
                if (has_m) add(f.index(im, jm), am);
                diag += ad;
            }
            trips.emplace_back(row, row, diag);
        }
    Eigen::SparseMatrix<double> A(g.n_unknowns, g.n_unknowns);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw numerical_error("committor_grid_advective: factorization failed");
    Eigen::VectorXd sol = solver.solve(rhs);
    for (int idx = 0; idx < f.size(); ++idx)
        if (g.unknown_of[idx] >= 0) f.values[idx] = sol[g.unknown_of[idx]];
    return f;
}

/// Dirichlet-form capacity of a committor field:
///   cap = eps * sum_cells |grad h|^2 e^{-V/eps} h^d
/// with midpoint gradient reconstruction per cell.
inline double capacity_from_field(const GridField& f, const Potential& p) {
    const double h = f.spacing, eps = f.epsilon;
    double cap = 0.0;
    if (f.dim == 1) {
        for (int i = 0; i + 1 < f.n[0]; ++i) {
            double dh = (f.values[f.index(i + 1)] - f.values[f.index(i)]) / h;
            double vmid = 0.5 * (p.value(f.node(i)) + p.value(f.node(i + 1)));
            cap += dh * dh * std::exp(-vmid / eps) * h;
        }
    } else {
        for (int j = 0; j + 1 < f.n[1]; ++j)
            for (int i = 0; i + 1 < f.n[0]; ++i) {
                double f00 = f.values[f.index(i, j)], f10 = f.values[f.index(i + 1, j)];
                double f01 = f.values[f.index(i, j + 1)],
                       f11 = f.values[f.index(i + 1, j + 1)];
                double gx = (f10 + f11 - f00 - f01) / (2.0 * h);
                double gy = (f01 + f11 - f00 - f10) / (2.0 * h);
                double vmid = 0.25 * (p.value(f.node(i, j)) + p.value(f.node(i + 1, j)) +
                                      p.value(f.node(i, j + 1)) +
                                      p.value(f.node(i + 1, j + 1)));
                cap += (gx * gx + gy * gy) * std::exp(-vmid / eps) * h * h;
            }
    }
    return eps * cap;
}

struct MeanTimeEstimate {
    double mean_time = 0.0;          // grid numerator / capacity
    double numerator_grid = 0.0;     // ∫ h e^{-V/eps}
    double numerator_laplace = 0.0;  // (2 pi eps)^{d/2} e^{-V(x*)/eps} / sqrt(det H)
    double mean_time_laplace = 0.0;  // Laplace numerator / capacity
    double capacity = 0.0;
};

/// Potential-theoretic mean-time estimate E[tau] ~ ∫ h_{C,A} e^{-V/eps} / cap
/// from a committor field between a small ball C at the starting minimum
/// and the target set A. Also evaluates the closed Laplace form of the
/// numerator for comparison.
inline MeanTimeEstimate mean_time_potential_theory(const Potential& p, const Vec& x_star,
                                                   const GridField& field) {
    MeanTimeEstimate est;
    const double eps = field.epsilon;
    const double cell = std::pow(field.spacing, field.dim);
    for (int j = 0; j < field.n[1]; ++j)
        for (int i = 0; i < field.n[0]; ++i) {
            int idx = field.index(i, j);
            est.numerator_grid +=
                field.values[idx] * std::exp(-p.value(field.node(i, j)) / eps) * cell;
        }
    est.capacity = capacity_from_field(field, p);
    if (!(est.capacity > 0.0))
        throw numerical_error("mean_time_potential_theory: vanishing capacity "
                              "(C overlapping A?)");
    est.mean_time = est.numerator_grid / est.capacity;
    Mat H = p.hessian(x_star);
    double det = H.determinant();
    if (!(det > 0.0))
        throw std::invalid_argument("mean_time_potential_theory: x* is not a minimum");
    est.numerator_laplace = std::pow(2.0 * pi * eps, 0.5 * p.dimension()) *
                            std::exp(-p.value(x_star) / eps) / std::sqrt(det);
    est.mean_time_laplace = est.numerator_laplace / est.capacity;
    return est;
}

// --- generator spectra --------------------------------------------------------

struct SpectrumReport {
    std::vector<double> generator;    // lowest-|.| eigenvalues of L, ascending |.|
    std::vector<double> schrodinger;  // same for the conjugated operator
    double spacing = 0.0;
    int grid_points = 0;
};

namespace detail {

// Symmetric eigen-pencil (K, M) for the weighted form
// L = eps e^{V/eps} d/dx e^{-V/eps} d/dx with no-flux ends; K is the
// stiffness, M the diagonal e^{-V/eps} mass (both scaled by e^{vmin/eps}).
inline void assemble_weighted_1d(const Potential& p, double eps, double lo, double hi,
                                 int n, Eigen::SparseMatrix<double>& K,
                                 Eigen::VectorXd& M, double& spacing) {
    if (n < 8) throw std::invalid_argument("generator_spectrum_1d: grid too small");
    spacing = (hi - lo) / (n - 1);
    std::vector<double> v(n);
    double vmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        v[i] = p.value1d(lo + spacing * i);
        vmin = std::min(vmin, v[i]);
    }
    M.resize(n);
    for (int i = 0; i < n; ++i) M[i] = std::exp(-(v[i] - vmin) / eps);
    std::vector<Eigen::Triplet<double>> trips;
    const double h2 = spacing * spacing;
    for (int i = 0; i + 1 < n; ++i) {
        double w = std::exp(-(0.5 * (v[i] + v[i + 1]) - vmin) / eps);
        double c = eps * w / h2;
        trips.emplace_back(i, i, c);
        trips.emplace_back(i + 1, i + 1, c);
        trips.emplace_back(i, i + 1, -c);
        trips.emplace_back(i + 1, i, -c);
    }
    K.resize(n, n);
    K.setFromTriplets(trips.begin(), trips.end());
}

// Block inverse subspace iteration for the m smallest eigenvalues of
// K x = lambda M x (K PSD with a constant kernel, M diagonal positive).
inline std::vector<double> smallest_pencil_eigs_iterative(
    const Eigen::SparseMatrix<double>& K, const Eigen::VectorXd& M, int m) {
    const int n = static_cast<int>(M.size());
    const int block = std::min(n, m + 4);
    double kscale = 0.0;
    for (int k = 0; k < K.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it)
            kscale = std::max(kscale, std::abs(it.value()));
    double sigma = 1e-13 * kscale / M.maxCoeff();
    Eigen::SparseMatrix<double> A = K;
    for (int i = 0; i < n; ++i) A.coeffRef(i, i) += sigma * M[i];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw numerical_error("generator_spectrum_1d: shifted factorization failed");
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, block);
    X.col(0).setOnes();
    std::uint64_t s = 0x12345678ULL;
    for (int j = 1; j < block; ++j)
        for (int i = 0; i < n; ++i) {
            s = s * 6364136223846793005ULL + 1442695040888963407ULL;
            X(i, j) = static_cast<double>(s >> 33) / 4294967296.0 - 0.5;
        }
    Eigen::VectorXd prev;
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::MatrixXd Y = solver.solve(M.asDiagonal() * X);
        // M-orthonormalize
        for (int j = 0; j < block; ++j) {
            for (int k = 0; k < j; ++k) {
                double proj = (Y.col(k).cwiseProduct(M)).dot(Y.col(j));
                Y.col(j) -= proj * Y.col(k);
            }
            double nrm = std::sqrt((Y.col(j).cwiseProduct(M)).dot(Y.col(j)));
            Y.col(j) /= std::max(nrm, 1e-300);
        }
        // Rayleigh-Ritz
        Eigen::MatrixXd Kp = Y.transpose() * (K.selfadjointView<Eigen::Lower>() * Y);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Kp);
        X = Y * es.eigenvectors();
        Eigen::VectorXd ev = es.eigenvalues().head(std::min(block, m));
        if (iter > 3 && prev.size() == ev.size() &&
            (ev - prev).cwiseAbs().maxCoeff() <
                1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
            break;
        prev = ev;
    }
    Eigen::MatrixXd Kp = X.transpose() * (K.selfadjointView<Eigen::Lower>() * X);
    Eigen::MatrixXd Mp = X.transpose() * (M.asDiagonal() * X);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Kp, Mp);
    std::vector<double> out;
    for (int i = 0; i < m && i < ges.eigenvalues().size(); ++i)
        out.push_back(ges.eigenvalues()[i]);
    return out;
}

}  // namespace detail

/// Spectrum of the 1D generator on [lo, hi] with reflecting ends: the m
/// eigenvalues of smallest magnitude via the weighted symmetric pencil
/// (dense below 2000 grid points, shift-invert subspace iteration above),
/// together with the spectrum of the conjugated Schrodinger-form operator
/// H = -E^{-1} K E^{-1}, E = diag(e^{-V/2eps}) (an exact similarity
/// transform of the generator, assembled and solved independently).
inline SpectrumReport generator_spectrum_1d(const Potential& p, double eps, double lo,
                                            double hi, int n, int m = 6) {
    if (p.dimension() != 1)
        throw std::invalid_argument("generator_spectrum_1d: potential must be 1D");
    if (!(eps > 0.0)) throw std::invalid_argument("generator_spectrum_1d: eps > 0");
    if (m < 1 || m > n) throw std::invalid_argument("generator_spectrum_1d: bad m");
    Eigen::SparseMatrix<double> K;
    Eigen::VectorXd M;
    SpectrumReport rep;
    rep.grid_points = n;
    detail::assemble_weighted_1d(p, eps, lo, hi, n, K, M, rep.spacing);

    std::vector<double> pencil;  // lambda >= 0 with K x = lambda M x
    if (n <= 2000) {
        Eigen::MatrixXd Kd(K), Md = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) Md(i, i) = M[i];
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Kd, Md);
        if (ges.info() != Eigen::Success)
            throw numerical_error("generator_spectrum_1d: eigensolver failed");
        for (int i = 0; i < m; ++i) pencil.push_back(ges.eigenvalues()[i]);
    } else {
        pencil = detail::smallest_pencil_eigs_iterative(K, M, m);
    }
    for (double l : pencil) rep.generator.push_back(-l);

    // conjugated operator: H = E^{-1} K E^{-1}, solved as a standard
    // symmetric eigenproblem
    Eigen::VectorXd Einv = M.cwiseSqrt().cwiseInverse();
    if (n <= 2000) {
        Eigen::MatrixXd H = Einv.asDiagonal() * Eigen::MatrixXd(K) * Einv.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        if (es.info() != Eigen::Success)
            throw numerical_error("generator_spectrum_1d: conjugated eigensolver failed");
        for (int i = 0; i < m; ++i) rep.schrodinger.push_back(-es.eigenvalues()[i]);
    } else {
        Eigen::SparseMatrix<double> H = K;
        for (int k = 0; k < H.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it)
                it.valueRef() *= Einv[it.row()] * Einv[it.col()];
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
        auto eigs = detail::smallest_pencil_eigs_iterative(H, ones, m);
        for (double l : eigs) rep.schrodinger.push_back(-l);
    }
    return rep;
}

/// Schrodinger potential of the conjugated generator:
///   U(x) = eps V''(x)/2 - |V'(x)|^2/4.
inline std::function<double(double)> schrodinger_potential(const Potential& p, double eps) {
    if (p.dimension() != 1)
        throw std::invalid_argument("schrodinger_potential: potential must be 1D");
    return [&p, eps](double x) {
        double vp = p.grad1d(x), vpp = p.hess1d(x);
        return 0.5 * eps * vpp - 0.25 * vp * vp;
    };
}

}  // namespace metastab
