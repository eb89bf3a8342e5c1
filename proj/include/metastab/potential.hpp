#pragma once

#include "metastab/common.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metastab {

/// Name tag plus a flat list of named real parameters.
struct PotentialParams {
    std::string name;
    std::map<std::string, double> values;

    double get(const std::string& key, double fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
    bool has(const std::string& key) const { return values.count(key) > 0; }
};

/// A smooth scalar field V on R^d with gradient and Hessian access.
/// Analytic derivative maps are used when supplied; otherwise central
/// finite differences of the value map with step cbrt(eps)*(1+|x|).
/// Immutable after construction; concurrent evaluation is safe.
class Potential {
public:
    using ValueFn = std::function<double(const Vec&)>;
    using GradFn = std::function<Vec(const Vec&)>;
    using HessFn = std::function<Mat(const Vec&)>;

    Potential(int dim, ValueFn value)
        : dim_(dim), value_(std::move(value)), analytic_(false) {
        if (dim < 1) throw std::invalid_argument("Potential: dimension must be >= 1");
    }

    Potential(int dim, ValueFn value, GradFn grad, HessFn hess)
        : dim_(dim),
          value_(std::move(value)),
          grad_(std::move(grad)),
          hess_(std::move(hess)),
          analytic_(true) {
        if (dim < 1) throw std::invalid_argument("Potential: dimension must be >= 1");
    }

    int dimension() const { return dim_; }
    bool has_analytic_derivatives() const { return analytic_; }

    double value(const Vec& x) const { return value_(x); }
    double operator()(const Vec& x) const { return value_(x); }

    Vec gradient(const Vec& x) const {
        if (analytic_) return grad_(x);
        Vec g(dim_);
        Vec xp = x, xm = x;
        for (int i = 0; i < dim_; ++i) {
            double h = fd_step(x[i]);
            xp[i] = x[i] + h;
            xm[i] = x[i] - h;
            g[i] = (value_(xp) - value_(xm)) / (2.0 * h);
            xp[i] = x[i];
            xm[i] = x[i];
        }
        return g;
    }

    Mat hessian(const Vec& x) const {
        if (analytic_) return hess_(x);
        Mat H(dim_, dim_);
        Vec xs = x;
        double f0 = value_(x);
        for (int i = 0; i < dim_; ++i) {
            double hi = fd_step(x[i]);
            for (int j = i; j < dim_; ++j) {
                double hj = fd_step(x[j]);
                if (i == j) {
                    xs[i] = x[i] + hi;
                    double fp = value_(xs);
                    xs[i] = x[i] - hi;
                    double fm = value_(xs);
                    xs[i] = x[i];
                    H(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
                } else {
                    xs[i] = x[i] + hi; xs[j] = x[j] + hj;
                    double fpp = value_(xs);
                    xs[j] = x[j] - hj;
                    double fpm = value_(xs);
                    xs[i] = x[i] - hi; xs[j] = x[j] + hj;
                    double fmp = value_(xs);
                    xs[j] = x[j] - hj;
                    double fmm = value_(xs);
                    xs[i] = x[i]; xs[j] = x[j];
                    H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
                }
            }
        }
        return H;
    }

    // 1D conveniences
    double value1d(double x) const { return value_(vec1(x)); }
    double grad1d(double x) const { return gradient(vec1(x))[0]; }
    double hess1d(double x) const { return hessian(vec1(x))(0, 0); }

    const std::string& name() const { return params_.name; }
    const PotentialParams& params() const { return params_; }
    void set_params(PotentialParams p) { params_ = std::move(p); }

private:
    int dim_;
    ValueFn value_;
    GradFn grad_;
    HessFn hess_;
    bool analytic_;
    PotentialParams params_;
};

/// One monomial c * prod_i x_i^{e_i}.
struct Monomial {
    double coeff;
    std::vector<int> exponents;
};

/// Polynomial potential with analytic derivatives; closed under
/// differentiation, so gradients and Hessians are exact.
inline Potential make_polynomial(int dim, std::vector<Monomial> terms) {
    for (const auto& t : terms) {
        if (static_cast<int>(t.exponents.size()) != dim)
            throw std::invalid_argument("make_polynomial: exponent arity mismatch");
        for (int e : t.exponents)
            if (e < 0) throw std::invalid_argument("make_polynomial: negative exponent");
    }
    auto powi = [](double x, int n) {
        double r = 1.0;
        for (int i = 0; i < n; ++i) r *= x;
        return r;
    };
    auto value = [terms, powi, dim](const Vec& x) {
        double s = 0.0;
        for (const auto& t : terms) {
            double m = t.coeff;
            for (int i = 0; i < dim; ++i) m *= powi(x[i], t.exponents[i]);
            s += m;
        }
        return s;
    };
    auto grad = [terms, powi, dim](const Vec& x) {
        Vec g = Vec::Zero(dim);
        for (const auto& t : terms)
            for (int k = 0; k < dim; ++k) {
                if (t.exponents[k] == 0) continue;
                double m = t.coeff * t.exponents[k];
                for (int i = 0; i < dim; ++i)
                    m *= powi(x[i], i == k ? t.exponents[i] - 1 : t.exponents[i]);
                g[k] += m;
            }
        return g;
    };
    auto hess = [terms, powi, dim](const Vec& x) {
        Mat H = Mat::Zero(dim, dim);
        for (const auto& t : terms)
            for (int k = 0; k < dim; ++k)
                for (int l = k; l < dim; ++l) {
                    int ek = t.exponents[k], el = t.exponents[l];
                    double c;
                    if (k == l) {
                        if (ek < 2) continue;
                        c = t.coeff * ek * (ek - 1);
                    } else {
                        if (ek == 0 || el == 0) continue;
                        c = t.coeff * ek * el;
                    }
                    double m = c;
                    for (int i = 0; i < dim; ++i) {
                        int e = t.exponents[i];
                        if (i == k) e -= 1;
                        if (i == l) e -= 1;
                        m *= powi(x[i], e);
                    }
                    H(k, l) += m;
                    if (k != l) H(l, k) += m;
                }
        return H;
    };
    return Potential(dim, value, grad, hess);
}

namespace detail {

// Sixth-degree three-well polynomial,
//   V'(x) = s (x+2)(x+1)(x-1/5)(x-1)(x-11/5),  s = 1/20,
// i.e. V(x) = x^6/120 - x^5/250 - 67 x^4/1000 + 8 x^3/375
//             + 109 x^2/1000 - 11 x/250.
// Critical points are exact: minima at -2, 1/5, 11/5 and saddles at -1, 1.
// Documented values (see threewell1d in the README):
//   V(-2)   = -0.057333333...   (middle-depth well, x*1)
//   V(1/5)  = -0.004377386...   (shallowest well,   x*2)
//   V(11/5) = -0.172911141...   (deepest well,      x*3)
//   V(-1)   =  0.077            (saddle between x*1 and x*2)
//   V(1)    =  0.023666666...   (saddle between x*2 and x*3)
inline std::vector<Monomial> threewell_terms() {
    return {{1.0 / 120.0, {6}}, {-1.0 / 250.0, {5}}, {-67.0 / 1000.0, {4}},
            {8.0 / 375.0, {3}}, {109.0 / 1000.0, {2}}, {-11.0 / 250.0, {1}}};
}

inline Potential parse_custom_polynomial(const PotentialParams& params) {
    int dim = static_cast<int>(params.get("dim", 1));
    if (dim < 1) throw std::invalid_argument("custom_polynomial: dim must be >= 1");
    std::vector<Monomial> terms;
    for (const auto& [key, coeff] : params.values) {
        if (key.rfind("c_", 0) != 0) continue;
        Monomial m;
        m.coeff = coeff;
        std::size_t pos = 2;
        while (pos < key.size()) {
            std::size_t next = key.find('_', pos);
            std::string tok = key.substr(pos, next == std::string::npos ? next : next - pos);
            m.exponents.push_back(std::stoi(tok));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (static_cast<int>(m.exponents.size()) != dim)
            throw std::invalid_argument("custom_polynomial: key '" + key +
                                        "' does not match dim");
        terms.push_back(std::move(m));
    }
    if (terms.empty())
        throw std::invalid_argument("custom_polynomial: no c_<exponents> terms given");
    return make_polynomial(dim, std::move(terms));
}

}  // namespace detail

/// Builtin analytic potentials. Recognized names:
///   quartic1d              scale*(x^4/4 - x^2/2); parameter "scale" (default 1)
///   threewell1d            fixed sixth-degree polynomial with three wells
///   doublewell2d           x^4/4 - x^2/2 + y^2/2
///   pitchfork_normal_form  0.5*lambda1*y1^2 + 0.5*lambda2*y2^2 + C4*y2^4
///                          + 0.5*sum_{j>=3} lambda_j y_j^2
///   custom_polynomial      monomials via keys c_<e1>_<e2>_..., plus "dim"
inline Potential make_builtin(const PotentialParams& params) {
    Potential p = [&]() -> Potential {
        if (params.name == "quartic1d") {
            double s = params.get("scale", 1.0);
            if (!(s > 0.0)) throw std::invalid_argument("quartic1d: scale must be > 0");
            return make_polynomial(1, {{0.25 * s, {4}}, {-0.5 * s, {2}}});
        }
        if (params.name == "threewell1d")
            return make_polynomial(1, detail::threewell_terms());
        if (params.name == "doublewell2d")
            return make_polynomial(
                2, {{0.25, {4, 0}}, {-0.5, {2, 0}}, {0.5, {0, 2}}});
        if (params.name == "pitchfork_normal_form") {
            double l1 = params.get("lambda1", -1.0);
            double l2 = params.get("lambda2", 1.0);
            double c4 = params.get("C4", 1.0);
            int dim = static_cast<int>(params.get("dim", 2));
            if (dim < 2)
                throw std::invalid_argument("pitchfork_normal_form: dim must be >= 2");
            if (!(c4 > 0.0))
                throw std::invalid_argument("pitchfork_normal_form: C4 must be > 0");
            if (!(l1 < 0.0))
                throw std::invalid_argument("pitchfork_normal_form: lambda1 must be < 0");
            std::vector<Monomial> terms;
            auto exps = [dim](int axis, int e) {
                std::vector<int> v(dim, 0);
                v[axis] = e;
                return v;
            };
            terms.push_back({0.5 * l1, exps(0, 2)});
            terms.push_back({0.5 * l2, exps(1, 2)});
            terms.push_back({c4, exps(1, 4)});
            for (int j = 3; j <= dim; ++j) {
                double lj = params.get("lambda" + std::to_string(j), 1.0);
                if (!(lj > 0.0))
                    throw std::invalid_argument("pitchfork_normal_form: lambda_j must be > 0");
                terms.push_back({0.5 * lj, exps(j - 1, 2)});
            }
            return make_polynomial(dim, std::move(terms));
        }
        if (params.name == "custom_polynomial")
            return detail::parse_custom_polynomial(params);
        throw std::invalid_argument("make_builtin: unknown potential '" + params.name + "'");
    }();
    p.set_params(params);
    return p;
}

struct DerivativeReport {
    double gradient_residual = 0.0;  // max |analytic - central difference|
    double hessian_residual = 0.0;
    double gradient_norm = 0.0;
};

/// Compares the potential's gradient/Hessian against central finite
/// differences of the value map at step h.
inline DerivativeReport check_derivatives(const Potential& p, const Vec& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("check_derivatives: h must be > 0");
    const int d = p.dimension();
    DerivativeReport rep;
    Vec g = p.gradient(x);
    Mat H = p.hessian(x);
    rep.gradient_norm = g.norm();
    Vec xs = x;
    for (int i = 0; i < d; ++i) {
        xs[i] = x[i] + h;
        double fp = p.value(xs);
        Vec gp = p.gradient(xs);
        xs[i] = x[i] - h;
        double fm = p.value(xs);
        Vec gm = p.gradient(xs);
        xs[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw numerical_error("check_derivatives: evaluation failed at offset point");
        rep.gradient_residual =
            std::max(rep.gradient_residual, std::abs(g[i] - (fp - fm) / (2.0 * h)));
        for (int j = 0; j < d; ++j)
            rep.hessian_residual = std::max(
                rep.hessian_residual, std::abs(H(i, j) - (gp[j] - gm[j]) / (2.0 * h)));
    }
    return rep;
}

}  // namespace metastab
