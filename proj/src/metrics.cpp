#include "multifbsde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "multifbsde/errors.hpp"

namespace mfbsde {

namespace {

std::vector<double> step_rms(const std::vector<Matrix>& A) {
    if (A.empty()) throw ParameterError("norm of an empty path batch");
    const Eigen::Index M = A.front().rows();
    const Eigen::Index dim = A.front().cols();
    if (M == 0) throw ParameterError("norm of an empty path batch");
    std::vector<double> out;
    out.reserve(A.size());
    for (const Matrix& a : A) {
        if (a.rows() != M || a.cols() != dim) throw ParameterError("norm: inconsistent step shapes");
        out.push_back(std::sqrt(a.squaredNorm() / static_cast<double>(M)));
    }
    return out;
}

std::vector<Matrix> columns_as_steps(const Matrix& c) {
    std::vector<Matrix> out;
    out.reserve(c.cols());
    for (Eigen::Index n = 0; n < c.cols(); ++n) out.emplace_back(c.col(n));
    return out;
}

}  // namespace

double s2_norm(const std::vector<Matrix>& A) {
    double best = 0.0;
    for (double r : step_rms(A)) best = std::max(best, r);
    return best;
}

double s2_norm(const Matrix& columns) { return s2_norm(columns_as_steps(columns)); }

double h2_norm(const std::vector<Matrix>& A) {
    const auto rms = step_rms(A);
    double sum = 0.0;
    for (double r : rms) sum += r;
    return sum / static_cast<double>(rms.size());
}

double h2_norm_time_weighted(const std::vector<Matrix>& A, double h) {
    if (!(h > 0.0)) throw ParameterError("time step must be positive");
    double sum = 0.0;
    for (double r : step_rms(A)) sum += r * r;
    return std::sqrt(h * sum);
}

std::string ErrorReport::csv_header() {
    return "N,M,y0_abs_error,y0_rel_error,x_error_s2,y_error_s2,z_error_h2,z_error_l2";
}

std::string ErrorReport::csv_row() const {
    std::ostringstream out;
    out << std::setprecision(17) << steps << ',' << samples << ',' << y0_abs_error << ',' << y0_rel_error << ','
        << x_error << ',' << y_error << ',' << z_error << ',' << z_error_time_weighted;
    return out.str();
}

ErrorReport error_report(const PathBatch& approx, const PathBatch& ref, double y0_approx, double y0_ref) {
    if (approx.grid.N != ref.grid.N || std::abs(approx.grid.T - ref.grid.T) > 1e-12)
        throw ParameterError("error_report: grid mismatch");
    if (approx.X.size() != ref.X.size() || approx.Z.size() != ref.Z.size() || approx.Y.rows() != ref.Y.rows() ||
        approx.Y.cols() != ref.Y.cols())
        throw ParameterError("error_report: path shape mismatch");
    std::vector<Matrix> dx, dz;
    for (std::size_t n = 0; n < approx.X.size(); ++n) {
        if (approx.X[n].rows() != ref.X[n].rows() || approx.X[n].cols() != ref.X[n].cols())
            throw ParameterError("error_report: X shape mismatch");
        dx.push_back(approx.X[n] - ref.X[n]);
    }
    for (std::size_t n = 0; n < approx.Z.size(); ++n) {
        if (approx.Z[n].rows() != ref.Z[n].rows() || approx.Z[n].cols() != ref.Z[n].cols())
            throw ParameterError("error_report: Z shape mismatch");
        dz.push_back(approx.Z[n] - ref.Z[n]);
    }
    ErrorReport r;
    r.y0_abs_error = std::abs(y0_approx - y0_ref);
    r.y0_rel_error = y0_ref != 0.0 ? r.y0_abs_error / std::abs(y0_ref) : r.y0_abs_error;
    r.x_error = s2_norm(dx);
    r.y_error = s2_norm(Matrix(approx.Y - ref.Y));
    r.z_error = h2_norm(dz);
    r.z_error_time_weighted = h2_norm_time_weighted(dz, approx.grid.h);
    r.samples = approx.samples();
    r.steps = approx.grid.N;
    return r;
}

SlopeFit fit_loglog_slope(std::vector<std::pair<double, double>> points) {
    // Sorted so that the floating-point sums do not depend on input order.
    std::sort(points.begin(), points.end());
    if (points.size() < 2) throw ParameterError("slope fit needs at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [h, e] = points[i];
        if (!(h > 0.0) || !(e > 0.0) || !std::isfinite(h) || !std::isfinite(e))
            throw ParameterError("slope fit: nonpositive value at point " + std::to_string(i));
        const double lx = std::log(h), ly = std::log(e);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(points.size());
    const double den = n * sxx - sx * sx;
    if (std::abs(den) < 1e-300) throw ParameterError("slope fit: all step sizes coincide");
    SlopeFit fit;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

}  // namespace mfbsde
