#include "multifbsde/rollout.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "multifbsde/errors.hpp"

namespace mfbsde {
namespace {

void check_inputs(const CoefficientSet& c, const BrownianBatch& batch, const TimeGrid& grid) {
    if (batch.num_steps() != grid.N)
        throw ParameterError("rollout: batch has " + std::to_string(batch.num_steps()) + " steps, grid has " +
                             std::to_string(grid.N));
    if (std::abs(batch.h - grid.h) > 1e-12 * grid.h) throw ParameterError("rollout: batch step size differs from grid");
    if (batch.dim() != c.k) throw ParameterError("rollout: increment dimension differs from k");
    if (c.x0.size() != c.d) throw ParameterError("rollout: x0 dimension differs from d");
}

void check_finite(const Matrix& m, int step, const char* what) {
    if (m.allFinite()) return;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (!m.row(i).allFinite())
            throw DivergenceError(std::string("rollout: non-finite ") + what + " at step " + std::to_string(step) +
                                      ", sample " + std::to_string(i),
                                  step, i);
}

struct StepResult {
    NodeId x_next;
    NodeId y_next;
};

// One Euler step shared by the recorded and the detached rollout.
StepResult euler_step(const ShiftedCoefficients& coeffs, Tape& tape, double t, double h, NodeId x, NodeId y, NodeId z,
                      const Matrix& dw) {
    const auto terms = coeffs.terms(tape, t, x, y, z);
    const NodeId noise = coeffs.base().diffuse(tape, t, x, tape.constant(dw));
    const NodeId x_next = tape.add(tape.add(x, tape.scale(terms.drift, h)), noise);
    const NodeId y_next = tape.add(tape.sub(y, tape.scale(terms.driver, h)), tape.inner(z, noise));
    return {x_next, y_next};
}

NodeId initial_state(Tape& tape, const Vector& x0, Eigen::Index samples) {
    return tape.constant(x0.transpose().replicate(samples, 1));
}

NodeId squared_mean(Tape& tape, NodeId residual) { return tape.mean(tape.square(residual)); }

}  // namespace

TimeGrid TimeGrid::make(int steps, double horizon) {
    if (steps < 1) throw ParameterError("TimeGrid: N must be >= 1");
    if (!(horizon > 0.0)) throw ParameterError("TimeGrid: T must be positive");
    return TimeGrid{steps, horizon, horizon / steps};
}

RolloutOutput euler_rollout(const ShiftedCoefficients& coeffs, const BoundNets& nets, NodeId y0_node,
                            const BrownianBatch& batch, const TimeGrid& grid, Tape& tape, RolloutOptions options) {
    const auto& base = coeffs.base();
    check_inputs(base, batch, grid);
    const Eigen::Index samples = batch.samples();

    NodeId x = initial_state(tape, base.x0, samples);
    NodeId y = tape.add(tape.constant(Matrix::Zero(samples, 1)), y0_node);

    RolloutOutput out;
    if (options.keep_paths) {
        out.paths.grid = grid;
        out.paths.shift_label = coeffs.shift().label;
        out.paths.Y.resize(samples, grid.N + 1);
        out.paths.X.push_back(tape.value(x));
        out.paths.Y.col(0) = tape.value(y).col(0);
    }
    for (int n = 0; n < grid.N; ++n) {
        const double t = grid.t(n);
        const NodeId z = nets.apply(n, t, x, tape);
        if (tape.value(z).cols() != base.k) throw GraphError("rollout: network output dimension differs from k");
        const auto next = euler_step(coeffs, tape, t, grid.h, x, y, z, batch.steps[n]);
        check_finite(tape.value(next.x_next), n + 1, "X");
        check_finite(tape.value(next.y_next), n + 1, "Y");
        if (options.keep_paths) {
            out.paths.Z.push_back(tape.value(z));
            out.paths.X.push_back(tape.value(next.x_next));
            out.paths.Y.col(n + 1) = tape.value(next.y_next).col(0);
        }
        x = next.x_next;
        y = next.y_next;
    }
    out.residual = tape.sub(y, base.terminal(tape, x));
    out.loss = squared_mean(tape, out.residual);
    return out;
}

MultiLoss multi_loss(const CoefficientSet& base, const std::vector<DriftShift>& shifts, const BoundNets& nets,
                     NodeId y0_node, const BrownianBatch& batch, const TimeGrid& grid, Tape& tape,
                     RolloutOptions options) {
    if (shifts.empty()) throw ParameterError("multi_loss: at least one shift is required");
    MultiLoss out;
    for (const auto& shift : shifts) {
        out.rollouts.push_back(euler_rollout(shifted(base, shift), nets, y0_node, batch, grid, tape, options));
        const NodeId loss = out.rollouts.back().loss;
        out.total = out.rollouts.size() == 1 ? loss : tape.add(out.total, loss);
    }
    return out;
}

PathBatch detached_rollout(const ShiftedCoefficients& coeffs, const StepNets& nets, double y0,
                           const BrownianBatch& batch, const TimeGrid& grid) {
    const auto& base = coeffs.base();
    check_inputs(base, batch, grid);
    const Eigen::Index samples = batch.samples();

    PathBatch paths;
    paths.grid = grid;
    paths.shift_label = coeffs.shift().label;
    paths.Y.resize(samples, grid.N + 1);
    {
        Tape tape;
        const NodeId x = initial_state(tape, base.x0, samples);
        const NodeId y = tape.add(tape.constant(Matrix::Zero(samples, 1)), tape.scalar(y0));
        paths.X.push_back(tape.value(x));
        paths.Y.col(0) = tape.value(y).col(0);
    }
    Matrix y_col = paths.Y.col(0);
    for (int n = 0; n < grid.N; ++n) {
        Tape tape;
        const double t = grid.t(n);
        const NodeId x = tape.constant(paths.X.back());
        const NodeId y = tape.constant(y_col);
        const NodeId z = tape.constant(step_net_eval(nets, n, t, paths.X.back()));
        const auto next = euler_step(coeffs, tape, t, grid.h, x, y, z, batch.steps[n]);
        check_finite(tape.value(next.x_next), n + 1, "X");
        check_finite(tape.value(next.y_next), n + 1, "Y");
        paths.Z.push_back(tape.value(z));
        paths.X.push_back(tape.value(next.x_next));
        y_col = tape.value(next.y_next);
        paths.Y.col(n + 1) = y_col.col(0);
    }
    return paths;
}

double terminal_mse(const CoefficientSet& base, const PathBatch& paths) {
    Tape tape;
    const NodeId y = tape.constant(paths.Y.col(paths.grid.N));
    const NodeId residual = tape.sub(y, base.terminal(tape, tape.constant(paths.X.back())));
    return tape.value(squared_mean(tape, residual))(0, 0);
}

std::vector<Matrix> forward_euler(const CoefficientSet& coeffs, const BrownianBatch& batch, const TimeGrid& grid) {
    check_inputs(coeffs, batch, grid);
    const Eigen::Index samples = batch.samples();
    std::vector<Matrix> X{coeffs.x0.transpose().replicate(samples, 1)};
    for (int n = 0; n < grid.N; ++n) {
        const double t = grid.t(n);
        Tape tape;
        const NodeId x = tape.constant(X.back());
        const NodeId y = tape.constant(Matrix::Zero(samples, 1));
        const NodeId z = tape.constant(Matrix::Zero(samples, coeffs.k));
        const Matrix& drift = tape.value(coeffs.drift(tape, t, x, y, z));
        Matrix next(samples, coeffs.d);
        for (Eigen::Index m = 0; m < samples; ++m) {
            const Vector xm = X.back().row(m).transpose();
            const Vector noise = coeffs.sigma(t, xm) * batch.steps[n].row(m).transpose();
            next.row(m) = xm.transpose() + drift.row(m) * grid.h + noise.transpose();
        }
        check_finite(next, n + 1, "X");
        X.push_back(std::move(next));
    }
    return X;
}

PathBatch subsample(const PathBatch& fine, int factor) {
    if (factor < 1 || fine.grid.N % factor != 0) throw ParameterError("subsample: factor must divide N");
    PathBatch out;
    out.grid = TimeGrid::make(fine.grid.N / factor, fine.grid.T);
    out.shift_label = fine.shift_label;
    out.Y.resize(fine.Y.rows(), out.grid.N + 1);
    for (int n = 0; n <= out.grid.N; ++n) {
        out.X.push_back(fine.X[n * factor]);
        out.Y.col(n) = fine.Y.col(n * factor);
        if (n < out.grid.N && !fine.Z.empty()) out.Z.push_back(fine.Z[n * factor]);
    }
    return out;
}

void write_paths_csv(const std::filesystem::path& file, const PathBatch& paths, int max_samples) {
    std::ofstream out(file);
    if (!out) throw Error("write_paths_csv: cannot open " + file.string());
    const int d = static_cast<int>(paths.X.front().cols());
    const int k = paths.Z.empty() ? 0 : static_cast<int>(paths.Z.front().cols());
    out << "sample,n,t";
    for (int j = 1; j <= d; ++j) out << ",X_" << j;
    out << ",Y";
    for (int j = 1; j <= k; ++j) out << ",Z_" << j;
    out << '\n' << std::setprecision(17);
    const int samples = max_samples < 0 ? paths.samples() : std::min(max_samples, paths.samples());
    for (int m = 0; m < samples; ++m)
        for (int n = 0; n <= paths.grid.N; ++n) {
            out << m << ',' << n << ',' << paths.grid.t(n);
            for (int j = 0; j < d; ++j) out << ',' << paths.X[n](m, j);
            out << ',' << paths.Y(m, n);
            for (int j = 0; j < k; ++j) {
                out << ',';
                if (n < paths.grid.N) out << paths.Z[n](m, j);
            }
            out << '\n';
        }
}

}  // namespace mfbsde
