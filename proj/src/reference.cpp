#include "multifbsde/reference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "multifbsde/errors.hpp"

namespace mfbsde {

namespace {

void require_finite(const Matrix& m, int node, const char* what) {
    if (!m.allFinite()) throw DivergenceError(std::string("riccati: non-finite ") + what + " at node " +
                                                  std::to_string(node),
                                              node);
}

std::ofstream open_csv(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw ParameterError("cannot open " + file.string());
    out << std::setprecision(17);
    return out;
}

// g evaluated on row blocks so that large sample counts keep tapes small.
Vector terminal_in_chunks(const TerminalFn& g, const Matrix& pts) {
    constexpr Eigen::Index kChunk = 1 << 16;
    Vector out(pts.rows());
    for (Eigen::Index first = 0; first < pts.rows(); first += kChunk) {
        const Eigen::Index count = std::min(kChunk, pts.rows() - first);
        out.segment(first, count) = eval_terminal_batch(g, pts.middleRows(first, count));
    }
    return out;
}

Matrix shifted_draws(const Vector& x, double scale, std::int64_t M, std::uint64_t seed) {
    if (M <= 0 || M > std::numeric_limits<int>::max()) throw ParameterError("sample count out of range");
    Matrix pts = standard_normal_matrix(seed, static_cast<int>(M), static_cast<int>(x.size())) * scale;
    pts.rowwise() += x.transpose();
    return pts;
}

}  // namespace

int RiccatiSolution::index_at(double t) const {
    if (!(t >= 0.0 && t <= T)) throw ParameterError("time outside [0, T]");
    if (t == T) return steps;
    const int j = static_cast<int>(std::floor(t / dt() + 1e-9));
    return std::clamp(j, 0, steps);
}

RiccatiSolution solve_riccati(const LqParams& p, int steps) {
    p.validate(false);
    if (steps < 1) throw ParameterError("riccati steps must be positive");
    const int d = p.d();
    RiccatiSolution sol;
    sol.T = p.T;
    sol.steps = steps;
    sol.P.resize(steps + 1);
    sol.Q.resize(steps + 1);
    sol.R.resize(steps + 1);
    const double dt = p.T / steps;
    const Matrix K = p.B * p.R_u.inverse() * p.B.transpose();
    const Vector AC = p.A * p.C;
    const Matrix SS = p.sigma * p.sigma.transpose();

    // P is autonomous, then Q given P, then R given P and Q.
    sol.P[steps] = p.G;
    for (int j = steps; j > 0; --j) {
        const Matrix& P = sol.P[j];
        const Matrix dP = p.A.transpose() * P + P * p.A + P * K * P - p.R_x;
        Matrix next = P - dt * dP;
        next = 0.5 * (next + next.transpose()).eval();
        require_finite(next, j - 1, "P");
        sol.P[j - 1] = std::move(next);
    }
    sol.Q[steps] = Vector::Zero(d);
    for (int j = steps; j > 0; --j) {
        const Matrix& P = sol.P[j];
        const Vector& Q = sol.Q[j];
        const Vector dQ = -2.0 * P * AC + p.A.transpose() * Q + P * K * Q;
        sol.Q[j - 1] = Q - dt * dQ;
        require_finite(sol.Q[j - 1], j - 1, "Q");
    }
    sol.R[steps] = 0.0;
    for (int j = steps; j > 0; --j) {
        const Vector& Q = sol.Q[j];
        const double dR = -(SS * sol.P[j]).trace() - Q.dot(AC) + 0.25 * Q.dot(K * Q);
        sol.R[j - 1] = sol.R[j] - dt * dR;
        if (!std::isfinite(sol.R[j - 1])) throw DivergenceError("riccati: non-finite R", j - 1);
    }
    return sol;
}

RiccatiResidual riccati_residual(const LqParams& p, const RiccatiSolution& sol) {
    const double dt = sol.dt();
    const Matrix K = p.B * p.R_u.inverse() * p.B.transpose();
    const Vector AC = p.A * p.C;
    const Matrix SS = p.sigma * p.sigma.transpose();
    RiccatiResidual res;
    for (int j = 1; j + 1 < sol.steps; ++j) {
        const Matrix& P = sol.P[j];
        const Vector& Q = sol.Q[j];
        const Matrix rP = (sol.P[j + 1] - P) / dt - p.A.transpose() * P - P * p.A - P * K * P + p.R_x;
        const Vector rQ = (sol.Q[j + 1] - Q) / dt + 2.0 * P * AC - p.A.transpose() * Q - P * K * Q;
        const double rR = (sol.R[j + 1] - sol.R[j]) / dt + (SS * P).trace() + Q.dot(AC) - 0.25 * Q.dot(K * Q);
        res.P = std::max(res.P, rP.cwiseAbs().maxCoeff());
        res.Q = std::max(res.Q, rQ.cwiseAbs().maxCoeff());
        res.R = std::max(res.R, std::abs(rR));
    }
    return res;
}

double lq_value(double t, const Vector& x, const RiccatiSolution& sol) {
    const int j = sol.index_at(t);
    if (x.size() != sol.P[j].rows()) throw ParameterError("lq_value: state dimension mismatch");
    return x.dot(sol.P[j] * x) + x.dot(sol.Q[j]) + sol.R[j];
}

Vector lq_gradient(double t, const Vector& x, const RiccatiSolution& sol) {
    const int j = sol.index_at(t);
    if (x.size() != sol.P[j].rows()) throw ParameterError("lq_gradient: state dimension mismatch");
    return 2.0 * sol.P[j] * x + sol.Q[j];
}

namespace {

struct FeedbackPass {
    PathBatch paths;
    Vector cost;
};

FeedbackPass feedback_rollout(const LqParams& p, const RiccatiSolution& sol, const BrownianBatch& batch,
                              const TimeGrid& grid) {
    p.validate();
    const int d = p.d();
    if (batch.num_steps() != grid.N || batch.dim() != p.sigma.cols())
        throw ParameterError("lq reference: batch does not match grid");
    if (std::abs(grid.T - sol.T) > 1e-12) throw ParameterError("lq reference: horizon mismatch");
    const int M = batch.samples();
    const Matrix K = p.B * p.R_u.inverse() * p.B.transpose();
    const Matrix Ru_inv = p.R_u.inverse();
    const Eigen::RowVectorXd AC = (p.A * p.C).transpose();

    FeedbackPass out;
    PathBatch& paths = out.paths;
    paths.grid = grid;
    paths.shift_label = "reference";
    paths.X.resize(grid.N + 1);
    paths.Z.resize(grid.N);
    paths.Y.resize(M, grid.N + 1);
    out.cost = Vector::Zero(M);

    Matrix x = Matrix::Zero(M, d);
    x.rowwise() += p.x0.transpose();
    for (int n = 0; n <= grid.N; ++n) {
        const int j = sol.index_at(grid.t(n));
        const Matrix& P = sol.P[j];
        const Eigen::RowVectorXd Q = sol.Q[j].transpose();
        paths.X[n] = x;
        paths.Y.col(n) = (x * P).cwiseProduct(x).rowwise().sum() + x * Q.transpose() +
                         Vector::Constant(M, sol.R[j]);
        if (n == grid.N) {
            out.cost += (x * p.G).cwiseProduct(x).rowwise().sum();
            break;
        }
        Matrix z = 2.0 * x * P;
        z.rowwise() += Q;
        const Matrix u = -0.5 * z * p.B * Ru_inv;
        out.cost += grid.h * ((x * p.R_x).cwiseProduct(x).rowwise().sum() + (u * p.R_u).cwiseProduct(u).rowwise().sum());
        Matrix drift = -x * p.A.transpose() - 0.5 * z * K;
        drift.rowwise() += AC;
        paths.Z[n] = z;
        x = x + grid.h * drift + batch.steps[n] * p.sigma.transpose();
        for (int m = 0; m < M; ++m)
            if (!x.row(m).allFinite()) throw DivergenceError("lq reference: non-finite state", n + 1, m);
    }
    return out;
}

}  // namespace

PathBatch lq_reference_paths(const LqParams& p, const RiccatiSolution& sol, const BrownianBatch& batch,
                             const TimeGrid& grid) {
    return feedback_rollout(p, sol, batch, grid).paths;
}

McEstimate lq_feedback_cost(const LqParams& p, const RiccatiSolution& sol, const BrownianBatch& batch,
                            const TimeGrid& grid) {
    const Vector cost = feedback_rollout(p, sol, batch, grid).cost;
    const double M = static_cast<double>(cost.size());
    const double mean = cost.mean();
    const double var = (cost.array() - mean).square().sum() / std::max(1.0, M - 1.0);
    return {mean, std::sqrt(var / M), static_cast<std::int64_t>(cost.size())};
}

McEstimate mc_mean_logexp_estimate(const std::vector<double>& samples, double scale) {
    if (samples.empty()) throw ParameterError("mc_mean_logexp: empty sample list");
    if (!std::isfinite(scale) || scale == 0.0) throw ParameterError("mc_mean_logexp: scale must be finite and nonzero");
    double top = -std::numeric_limits<double>::infinity();
    for (double s : samples) {
        if (!std::isfinite(s)) throw NumericalDomainError("mc_mean_logexp: non-finite sample");
        top = std::max(top, s / scale);
    }
    const double M = static_cast<double>(samples.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double s : samples) {
        const double w = std::exp(s / scale - top);
        sum += w;
        sum_sq += w * w;
    }
    const double mean = sum / M;
    const double var = samples.size() > 1 ? std::max(0.0, (sum_sq - M * mean * mean) / (M - 1.0)) : 0.0;
    McEstimate est;
    est.value = scale * (top + std::log(mean));
    est.std_error = std::abs(scale) * std::sqrt(var / M) / mean;
    est.samples = static_cast<std::int64_t>(samples.size());
    return est;
}

double mc_mean_logexp(const std::vector<double>& samples, double scale) {
    return mc_mean_logexp_estimate(samples, scale).value;
}

McEstimate cole_hopf_control_value(double t, const Vector& x, const TerminalFn& g, double r, double sigma, double T,
                                   std::int64_t M, std::uint64_t seed) {
    if (!(r > 0.0) || !(sigma > 0.0)) throw ParameterError("cole-hopf: r and sigma must be positive");
    if (t > T) throw ParameterError("cole-hopf: t after the horizon");
    if (t == T) {
        Matrix pt = x.transpose();
        return {eval_terminal_batch(g, pt)(0), 0.0, 1};
    }
    const Vector vals = terminal_in_chunks(g, shifted_draws(x, sigma * std::sqrt(T - t), M, seed));
    const std::vector<double> s(vals.data(), vals.data() + vals.size());
    return mc_mean_logexp_estimate(s, -r * sigma * sigma);
}

McEstimate cole_hopf_adr_value(double t, const Vector& x, const TerminalFn& g, double alpha, double beta, double T,
                               std::int64_t M, std::uint64_t seed) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ParameterError("cole-hopf: alpha and beta must be positive");
    if (t > T) throw ParameterError("cole-hopf: t after the horizon");
    if (t == T) {
        Matrix pt = x.transpose();
        return {eval_terminal_batch(g, pt)(0), 0.0, 1};
    }
    const Vector vals = terminal_in_chunks(g, shifted_draws(x, std::sqrt(2.0 * alpha * (T - t)), M, seed));
    const std::vector<double> s(vals.data(), vals.data() + vals.size());
    return mc_mean_logexp_estimate(s, alpha / (2.0 * beta));
}

McEstimate heat_kernel_mean(double t, const Vector& x, const TerminalFn& g, double alpha, double T, std::int64_t M,
                            std::uint64_t seed) {
    if (!(alpha > 0.0) || t > T) throw ParameterError("heat kernel: invalid arguments");
    const Vector vals = terminal_in_chunks(g, shifted_draws(x, std::sqrt(2.0 * alpha * (T - t)), M, seed));
    const double mean = vals.mean();
    const double n = static_cast<double>(vals.size());
    const double var = (vals.array() - mean).square().sum() / std::max(1.0, n - 1.0);
    return {mean, std::sqrt(var / n), static_cast<std::int64_t>(vals.size())};
}

double GridSolution2D::value_at(double x1, double x2) const {
    const double lo = -half_width;
    const double s1 = (x1 - lo) / dx;
    const double s2 = (x2 - lo) / dx;
    if (s1 < -1e-9 || s2 < -1e-9 || s1 > n_x - 1 + 1e-9 || s2 > n_x - 1 + 1e-9)
        throw ParameterError("grid lookup outside the domain");
    const int i = std::clamp(static_cast<int>(std::floor(s1 + 1e-9)), 0, n_x - 2);
    const int j = std::clamp(static_cast<int>(std::floor(s2 + 1e-9)), 0, n_x - 2);
    const double a = std::clamp(s1 - i, 0.0, 1.0);
    const double b = std::clamp(s2 - j, 0.0, 1.0);
    return (1 - a) * (1 - b) * v(i, j) + a * (1 - b) * v(i + 1, j) + (1 - a) * b * v(i, j + 1) +
           a * b * v(i + 1, j + 1);
}

GridSolution2D fd_solve_adr(double alpha, double beta, double gamma, const TerminalFn& g, FdOptions opt) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ParameterError("fd: alpha and beta must be positive");
    if (!(gamma >= 0.0)) throw ParameterError("fd: gamma must be nonnegative");
    if (opt.n_x < 33) throw ParameterError("fd: at least 33 nodes per axis required");
    if (!(opt.half_width > 0.0) || !(opt.T > 0.0)) throw ParameterError("fd: domain and horizon must be positive");
    if (opt.cell_samples < 1) throw ParameterError("fd: cell_samples must be positive");

    GridSolution2D sol;
    sol.half_width = opt.half_width;
    sol.n_x = opt.n_x;
    sol.dx = 2.0 * opt.half_width / (opt.n_x - 1);
    sol.alpha = alpha;
    sol.beta = beta;
    sol.gamma = gamma;
    const double dx2 = sol.dx * sol.dx;
    // Automatic steps target alpha dt / dx^2 = 1/8: at the 1/4 limit the highest grid mode along a
    // diagonal is undamped (factor -1), which shows up as node-to-node oscillation in v.
    sol.n_t = opt.n_t > 0 ? opt.n_t : static_cast<int>(std::ceil(alpha * opt.T / (0.125 * dx2) - 1e-9));
    sol.n_t = std::max(sol.n_t, 1);
    sol.dt = opt.T / sol.n_t;
    const double lambda = alpha * sol.dt / dx2;
    if (lambda > 0.25 + 1e-12)
        throw ParameterError("fd: stability bound violated, alpha dt / dx^2 = " + std::to_string(lambda) +
                             " > 1/4; increase n_t");

    const int n = sol.n_x;
    const long double kappa = 2.0L * beta / alpha;

    // Terminal data averaged over each cell with an S x S midpoint rule.
    const int S = opt.cell_samples;
    std::vector<long double> u(static_cast<std::size_t>(n) * n);
    Matrix pts(static_cast<Eigen::Index>(n) * S * S, 2);
    for (int i = 0; i < n; ++i) {
        Eigen::Index r = 0;
        for (int j = 0; j < n; ++j)
            for (int a = 0; a < S; ++a)
                for (int b = 0; b < S; ++b, ++r) {
                    pts(r, 0) = sol.node(i) + ((a + 0.5) / S - 0.5) * sol.dx;
                    pts(r, 1) = sol.node(j) + ((b + 0.5) / S - 0.5) * sol.dx;
                }
        const Vector gv = eval_terminal_batch(g, pts);
        for (int j = 0; j < n; ++j) {
            long double acc = 0.0L;
            for (int q = 0; q < S * S; ++q) acc += std::exp(kappa * static_cast<long double>(gv(j * S * S + q)));
            u[static_cast<std::size_t>(i) * n + j] = acc / (S * S);
        }
    }

    std::vector<long double> next = u;
    std::vector<long double> prev_level;
    const long double lam = lambda;
    const long double rdt = static_cast<long double>(gamma) * sol.dt;
    for (int step = 0; step < sol.n_t; ++step) {
        if (step == sol.n_t - 1) prev_level = u;
        for (int i = 1; i < n - 1; ++i) {
            const std::size_t row = static_cast<std::size_t>(i) * n;
            for (int j = 1; j < n - 1; ++j) {
                const std::size_t c = row + j;
                const long double uc = u[c];
                const long double lap = u[c - n] + u[c + n] + u[c - 1] + u[c + 1] - 4.0L * uc;
                long double val = uc + lam * lap;
                if (rdt != 0.0L) val -= rdt * uc * std::log(uc);
                next[c] = val;
            }
        }
        std::swap(u, next);
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) {
                const long double val = u[static_cast<std::size_t>(i) * n + j];
                if (!(val > 0.0L) || !std::isfinite(static_cast<double>(std::log(val))))
                    throw NumericalDomainError("fd: u left (0, inf) at node (" + std::to_string(i) + ", " +
                                               std::to_string(j) + ") in step " + std::to_string(step));
            }
    }

    auto back = [&](const std::vector<long double>& field) {
        Matrix out(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out(i, j) = static_cast<double>(std::log(field[static_cast<std::size_t>(i) * n + j]) / kappa);
        return out;
    };
    sol.v = back(u);
    sol.v_next = back(prev_level);
    sol.u = std::move(u);
    return sol;
}

double adr_pde_residual(const GridSolution2D& sol, int i, int j) {
    if (i < 1 || j < 1 || i > sol.n_x - 2 || j > sol.n_x - 2) throw ParameterError("residual: node not interior");
    const Matrix& v = sol.v;
    const double h = sol.dx;
    const double vt = (sol.v_next(i, j) - v(i, j)) / sol.dt;
    const double lap = (v(i + 1, j) + v(i - 1, j) + v(i, j + 1) + v(i, j - 1) - 4.0 * v(i, j)) / (h * h);
    const double g1 = (v(i + 1, j) - v(i - 1, j)) / (2.0 * h);
    const double g2 = (v(i, j + 1) - v(i, j - 1)) / (2.0 * h);
    return vt + sol.alpha * lap + 2.0 * sol.beta * (g1 * g1 + g2 * g2) - sol.gamma * v(i, j);
}

void write_grid_csv(const std::filesystem::path& file, const GridSolution2D& sol) {
    auto out = open_csv(file);
    out << "x1,x2,u,v\n";
    for (int i = 0; i < sol.n_x; ++i)
        for (int j = 0; j < sol.n_x; ++j)
            out << sol.node(i) << ',' << sol.node(j) << ',' << std::setprecision(17)
                << sol.u[static_cast<std::size_t>(i) * sol.n_x + j] << ',' << sol.v(i, j) << '\n';
}

void write_riccati_csv(const std::filesystem::path& file, const RiccatiSolution& sol, int stride) {
    if (stride < 1) throw ParameterError("stride must be positive");
    auto out = open_csv(file);
    const int d = static_cast<int>(sol.P.front().rows());
    out << 't';
    for (int a = 1; a <= d; ++a)
        for (int b = 1; b <= d; ++b) out << ",P_" << a << '_' << b;
    for (int a = 1; a <= d; ++a) out << ",Q_" << a;
    out << ",R\n";
    for (int j = 0; j <= sol.steps; ++j) {
        if (j % stride != 0 && j != sol.steps) continue;
        out << sol.t(j);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) out << ',' << sol.P[j](a, b);
        for (int a = 0; a < d; ++a) out << ',' << sol.Q[j](a);
        out << ',' << sol.R[j] << '\n';
    }
}

}  // namespace mfbsde
