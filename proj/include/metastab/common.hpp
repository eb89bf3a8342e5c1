#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace metastab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when an algorithm fails for numerical reasons (divergence,
/// overflow, non-convergence), as opposed to invalid arguments.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

inline Vec vec1(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}

inline Vec vec2(double x, double y) {
    Vec v(2);
    v[0] = x;
    v[1] = y;
    return v;
}

constexpr double pi = 3.14159265358979323846264338327950288;

/// Central-difference step: cbrt(machine eps) * (1 + |x|).
inline double fd_step(double x) {
    static const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
    return cbrt_eps * (1.0 + std::abs(x));
}

}  // namespace metastab
