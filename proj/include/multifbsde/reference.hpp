#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "multifbsde/model.hpp"
#include "multifbsde/rollout.hpp"
#include "multifbsde/stochastics.hpp"

namespace mfbsde {

/// Default Riccati resolution: 160 * 2^7 backward Euler steps.
inline constexpr int kRiccatiSteps = 160 * 128;

/// v(t, x) = x^T P(t) x + x^T Q(t) + R(t) on an equidistant grid of steps + 1 nodes.
struct RiccatiSolution {
    double T = 0.0;
    int steps = 0;
    std::vector<Matrix> P;
    std::vector<Vector> Q;
    std::vector<double> R;

    double dt() const { return T / steps; }
    double t(int j) const { return j == steps ? T : j * dt(); }
    /// Nearest node at or below t. Throws ParameterError outside [0, T].
    int index_at(double t) const;
};

/// Explicit Euler backward from P(T) = G, Q(T) = 0, R(T) = 0, with P symmetrized after every step.
/// Throws DivergenceError (step = node index) on non-finite entries.
RiccatiSolution solve_riccati(const LqParams& p, int steps = kRiccatiSteps);

/// Max-norm residuals of the three ODEs evaluated with forward differences at the left node.
struct RiccatiResidual {
    double P = 0.0;
    double Q = 0.0;
    double R = 0.0;
};
RiccatiResidual riccati_residual(const LqParams& p, const RiccatiSolution& sol);

double lq_value(double t, const Vector& x, const RiccatiSolution& sol);
/// D_x v(t, x) = 2 P(t) x + Q(t).
Vector lq_gradient(double t, const Vector& x, const RiccatiSolution& sol);

/// X by Euler under the Riccati feedback, Y and Z from the value function along the path.
PathBatch lq_reference_paths(const LqParams& p, const RiccatiSolution& sol, const BrownianBatch& batch,
                             const TimeGrid& grid);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t samples = 0;
};

/// Cost sum_n (<R_x X, X> + <R_u u, u>) h + <G X_N, X_N> under u = -1/2 R_u^-1 B^T (2 P X + Q).
McEstimate lq_feedback_cost(const LqParams& p, const RiccatiSolution& sol, const BrownianBatch& batch,
                            const TimeGrid& grid);

/// scale * log(mean(exp(s_i / scale))) with the largest exponent subtracted first.
double mc_mean_logexp(const std::vector<double>& samples, double scale);

/// Same, plus a delta-method standard error of the log-transformed mean.
McEstimate mc_mean_logexp_estimate(const std::vector<double>& samples, double scale);

/// -r sigma^2 log E[exp(-g(x + sigma sqrt(T - t) xi) / (r sigma^2))].
McEstimate cole_hopf_control_value(double t, const Vector& x, const TerminalFn& g, double r, double sigma, double T,
                                   std::int64_t M, std::uint64_t seed);

/// (alpha / 2 beta) log E[exp((2 beta / alpha) g(x + sqrt(2 alpha (T - t)) xi))]; valid for gamma = 0.
McEstimate cole_hopf_adr_value(double t, const Vector& x, const TerminalFn& g, double alpha, double beta, double T,
                               std::int64_t M, std::uint64_t seed);

/// Plain heat-kernel mean E[g(x + sqrt(2 alpha (T - t)) xi)] with its standard error.
McEstimate heat_kernel_mean(double t, const Vector& x, const TerminalFn& g, double alpha, double T, std::int64_t M,
                            std::uint64_t seed);

struct FdOptions {
    int n_x = 201;
    /// Time steps; 0 picks the smallest count with alpha dt / dx^2 <= 1/8.
    int n_t = 0;
    double half_width = 2.0;
    double T = 0.5;
    /// Sub-cell quadrature points per axis for the terminal data; 1 samples nodes only.
    int cell_samples = 8;
};

/// Transformed field u and back-transformed v = (alpha / 2 beta) log u at t = 0 on [-L, L]^2.
struct GridSolution2D {
    double half_width = 2.0;
    int n_x = 0;
    int n_t = 0;
    double dx = 0.0;
    double dt = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    std::vector<long double> u;  // row-major, index i * n_x + j for (x_i, x_j)
    Matrix v;                    // v(0, x_i, x_j)
    Matrix v_next;               // v(dt, x_i, x_j), kept for residual checks

    double node(int i) const { return -half_width + i * dx; }
    /// Bilinear interpolation of v(0, .). Throws ParameterError outside the domain.
    double value_at(double x1, double x2) const;
};

/// Solves u_t + alpha Lap u - gamma u log u = 0 backward from u(T) = exp((2 beta / alpha) g) with
/// Dirichlet values frozen at the terminal data. Explicit in time, five-point Laplacian.
/// Throws ParameterError if alpha dt / dx^2 > 1/4 and NumericalDomainError if u <= 0 anywhere.
GridSolution2D fd_solve_adr(double alpha, double beta, double gamma, const TerminalFn& g, FdOptions options = {});

/// Finite-difference residual of v_t + alpha Lap v + 2 beta |grad v|^2 - gamma v at interior node (i, j).
double adr_pde_residual(const GridSolution2D& sol, int i, int j);

/// CSV: x1,x2,u,v.
void write_grid_csv(const std::filesystem::path& file, const GridSolution2D& sol);
/// CSV: t,P_11..P_dd,Q_1..Q_d,R, every `stride`-th node plus the terminal one.
void write_riccati_csv(const std::filesystem::path& file, const RiccatiSolution& sol, int stride = 128);

}  // namespace mfbsde
