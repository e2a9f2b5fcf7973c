#pragma once

#include <cmath>

#include "multifbsde/autodiff.hpp"

namespace testutil {

inline double rel_l2(const mfbsde::Vector& a, const mfbsde::Vector& b) {
    const double den = std::max(b.norm(), 1e-300);
    return (a - b).norm() / den;
}

inline mfbsde::Matrix row(std::initializer_list<double> v) {
    mfbsde::Matrix m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) m(0, i++) = x;
    return m;
}

inline mfbsde::Vector vec(std::initializer_list<double> v) {
    mfbsde::Vector m(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) m(i++) = x;
    return m;
}

// Kolmogorov-Smirnov statistic of samples against the standard normal CDF.
double ks_normal(std::vector<double> xs);

}  // namespace testutil
