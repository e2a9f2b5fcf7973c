#pragma once

#include <cmath>

namespace testutil {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// E[exp(a |D|)] for D ~ N(mu, s^2), split over the two half-lines.
inline double mean_exp_abs(double a, double mu, double s) {
    const double up = std::exp(a * mu + 0.5 * a * a * s * s) * norm_cdf((mu + a * s * s) / s);
    const double down = std::exp(-a * mu + 0.5 * a * a * s * s) * norm_cdf((-mu + a * s * s) / s);
    return up + down;
}

// Controlled Brownian motion with g = -|x1 - x2|: -r s^2 log E[exp(|D| / (r s^2))], D ~ N(x1 - x2, 2 s^2 (T - t)).
inline double controlled_bm_oracle(double x1, double x2, double r, double sigma, double tau) {
    const double a = 1.0 / (r * sigma * sigma);
    return -std::log(mean_exp_abs(a, x1 - x2, sigma * std::sqrt(2.0 * tau))) / a;
}

// ADR with gamma = 0 and g = -|x1 - x2|: (1 / k) log E[exp(-k |D|)], k = 2 beta / alpha,
// D ~ N(x1 - x2, 4 alpha (T - t)).
inline double adr_oracle(double x1, double x2, double alpha, double beta, double tau) {
    const double k = 2.0 * beta / alpha;
    return std::log(mean_exp_abs(-k, x1 - x2, std::sqrt(4.0 * alpha * tau))) / k;
}

}  // namespace testutil
