#pragma once

#include "metastab/common.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace metastab {

/// Parameters of the cycling exit-location law: period T and Lyapunov
/// exponent lambda of the unstable orbit, Kramers time T_K (taken as an
/// input, measured or fitted -- its prefactor constant is not computed
/// here), angular offset theta0, and noise eps.
struct CyclingParams {
    double period = 1.0;        // T
    double lyapunov = 1.0;      // lambda
    double kramers_time = 1.0;  // T_K
    double theta0 = 0.0;
    double epsilon = 0.1;

    double lambda_T() const { return lyapunov * period; }
    double lambda_TK() const { return lyapunov * kramers_time; }
    void validate() const {
        if (!(period > 0.0) || !(lyapunov > 0.0) || !(kramers_time > 0.0) ||
            !(epsilon > 0.0))
            throw std::invalid_argument("CyclingParams: T, lambda, T_K, eps must be > 0");
    }
};

/// Gumbel kernel A(x) = (1/2) e^{-2x - e^{-2x}/2}; strictly positive with
/// total mass 1/2.
inline double gumbel_kernel(double x) {
    double e = std::exp(-2.0 * x);
    return 0.5 * std::exp(-2.0 * x - 0.5 * e);
}

/// Periodized kernel P(theta) = sum_k A(theta - k lambda_T), exactly
/// periodic by construction (theta is folded first, so shifted arguments
/// sum the identical terms). Terms below 1e-16 of the running sum are
/// dropped on both tails.
inline double periodic_p(double theta, double lambda_T) {
    if (!(lambda_T > 0.0)) throw std::invalid_argument("periodic_p: lambda_T must be > 0");
    double folded = theta - lambda_T * std::floor(theta / lambda_T);
    double sum = gumbel_kernel(folded);
    for (int k = 1; k < 400; ++k) {  // A decays like e^{-2x} rightward
        double term = gumbel_kernel(folded + k * lambda_T);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    for (int k = 1; k < 400; ++k) {  // double-exponentially leftward
        double term = gumbel_kernel(folded - k * lambda_T);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

/// Exit-location density over the unfolded angle theta > theta0:
///   p(theta) = f_tr(theta) e^{-(theta-theta0)/lambda_TK} / lambda_TK
///              * P_{lambda_T}(theta - log(1/eps)).
/// The transient factor is 1 - e^{-(theta-theta0)} clipped at 0 unless an
/// override is installed via `transient`.
inline double exit_density(double theta, const CyclingParams& cp,
                           const std::function<double(double)>* transient = nullptr) {
    cp.validate();
    if (!(theta > cp.theta0))
        throw std::invalid_argument("exit_density: theta must exceed theta0");
    double ft = transient ? (*transient)(theta)
                          : std::max(0.0, 1.0 - std::exp(-(theta - cp.theta0)));
    double envelope = std::exp(-(theta - cp.theta0) / cp.lambda_TK()) / cp.lambda_TK();
    return ft * envelope * periodic_p(theta - std::log(1.0 / cp.epsilon), cp.lambda_T());
}

struct CyclingFit {
    CyclingParams params;
    double scale = 1.0;      // empirical normalization of the density
    double residual = 0.0;   // |model - data| / |data|
    bool good = false;       // residual below 0.25
    int iterations = 0;
};

/// Least-squares fit of (theta0, lambda_T, lambda_TK) to an unfolded
/// angular histogram, by Levenberg-Marquardt with the overall scale
/// profiled out analytically (the law's total mass is not asserted; the
/// fit normalizes empirically). The seed supplies lambda and eps, which
/// stay fixed.
inline CyclingFit fit_cycling(const std::vector<double>& bin_centers,
                              const std::vector<double>& bin_density,
                              const CyclingParams& seed) {
    seed.validate();
    if (bin_centers.size() != bin_density.size())
        throw std::invalid_argument("fit_cycling: centers/density size mismatch");
    int occupied = 0;
    for (double d : bin_density)
        if (d > 0.0) ++occupied;
    if (occupied < 20)
        throw std::invalid_argument("fit_cycling: need >= 20 occupied bins");

    const int m = static_cast<int>(bin_centers.size());
    Vec data(m);
    for (int i = 0; i < m; ++i) data[i] = bin_density[i];
    double data_norm = data.norm();
    if (!(data_norm > 0.0)) throw std::invalid_argument("fit_cycling: empty histogram");

    auto shape = [&](double t0, double lT, double lTK, Vec& out) {
        for (int i = 0; i < m; ++i) {
            double th = bin_centers[i];
            if (th <= t0 || lT <= 0 || lTK <= 0) {
                out[i] = 0.0;
            } else {
                double ft = std::max(0.0, 1.0 - std::exp(-(th - t0)));
                out[i] = ft * std::exp(-(th - t0) / lTK) / lTK *
                         periodic_p(th - std::log(1.0 / seed.epsilon), lT);
            }
        }
    };
    auto residual = [&](const Vec& q, Vec& r, double& scale) {
        Vec mvec(m);
        shape(q[0], q[1], q[2], mvec);
        double mm = mvec.squaredNorm();
        scale = mm > 0 ? mvec.dot(data) / mm : 0.0;
        r = scale * mvec - data;
        return r.squaredNorm();
    };

    Vec q(3);
    q << seed.theta0, seed.lambda_T(), seed.lambda_TK();
    Vec r(m);
    double scale = 1.0;
    double cost = residual(q, r, scale);
    double lm_mu = 1e-3;
    int it = 0;
    for (; it < 400; ++it) {
        // numeric Jacobian of the profiled residual
        Mat J(m, 3);
        for (int j = 0; j < 3; ++j) {
            double h = 1e-6 * (1.0 + std::abs(q[j]));
            Vec qp = q;
            qp[j] += h;
            Vec rp(m);
            double sp;
            residual(qp, rp, sp);
            J.col(j) = (rp - r) / h;
        }
        Mat A = J.transpose() * J;
        Vec g = J.transpose() * r;
        if (g.norm() < 1e-12 * (1.0 + data_norm)) break;
        bool stepped = false;
        for (int tries = 0; tries < 25; ++tries) {
            Mat Areg = A + lm_mu * Mat(A.diagonal().asDiagonal());
            Vec dq = Areg.ldlt().solve(-g);
            Vec qn = q + dq;
            Vec rn(m);
            double sn;
            double cn = residual(qn, rn, sn);
            if (cn < cost) {
                q = qn;
                r = rn;
                cost = cn;
                scale = sn;
                lm_mu = std::max(lm_mu * 0.3, 1e-12);
                stepped = true;
                break;
            }
            lm_mu *= 4.0;
        }
        if (!stepped) break;
    }

    CyclingFit fit;
    fit.params = seed;
    fit.params.theta0 = q[0];
    fit.params.period = q[1] / seed.lyapunov;       // lambda fixed from the seed
    fit.params.kramers_time = q[2] / seed.lyapunov;
    fit.scale = scale;
    fit.residual = std::sqrt(cost) / data_norm;
    fit.good = fit.residual < 0.25;
    fit.iterations = it;
    return fit;
}

}  // namespace metastab
