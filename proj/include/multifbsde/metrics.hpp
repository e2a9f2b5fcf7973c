#pragma once

#include <string>
#include <utility>
#include <vector>

#include "multifbsde/rollout.hpp"

namespace mfbsde {

/// max_n ((1/M) sum_m |A_n(m)|^2)^(1/2); A[n] is M x dim.
double s2_norm(const std::vector<Matrix>& A);
/// Scalar process stored column-wise (M x (N+1)), e.g. PathBatch::Y.
double s2_norm(const Matrix& columns);

/// (1/N) sum_{n<N} ((1/M) sum_m |A_n(m)|^2)^(1/2) over the N given steps.
double h2_norm(const std::vector<Matrix>& A);
/// (h sum_{n<N} (1/M) sum_m |A_n(m)|^2)^(1/2), the time-integral variant.
double h2_norm_time_weighted(const std::vector<Matrix>& A, double h);

struct ErrorReport {
    double y0_abs_error = 0.0;
    double y0_rel_error = 0.0;
    double x_error = 0.0;  // S2
    double y_error = 0.0;  // S2
    double z_error = 0.0;  // H2 as displayed
    double z_error_time_weighted = 0.0;
    int samples = 0;
    int steps = 0;

    static std::string csv_header();
    std::string csv_row() const;
};

/// Per-sample differences on a shared grid and noise, reduced with the S2 / H2 norms.
/// Throws ParameterError on grid or shape mismatch.
ErrorReport error_report(const PathBatch& approx, const PathBatch& ref, double y0_approx, double y0_ref);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least squares on (log h, log error). Needs two or more points with distinct positive h and positive error.
SlopeFit fit_loglog_slope(std::vector<std::pair<double, double>> points);

}  // namespace mfbsde
