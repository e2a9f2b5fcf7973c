#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "multifbsde/autodiff.hpp"
#include "multifbsde/model.hpp"
#include "multifbsde/network.hpp"
#include "multifbsde/stochastics.hpp"

namespace mfbsde {

/// Equidistant grid t_n = n h, h = T / N, with t_N = T exactly.
struct TimeGrid {
    int N = 1;
    double T = 1.0;
    double h = 1.0;

    static TimeGrid make(int steps, double horizon);
    double t(int n) const { return n == N ? T : n * h; }
};

/// Discrete (X, Y, Z) trajectories; X[n] is M x d, Y is M x (N+1), Z[n] is M x k.
struct PathBatch {
    std::vector<Matrix> X;
    Matrix Y;
    std::vector<Matrix> Z;
    TimeGrid grid;
    std::string shift_label;

    int samples() const { return static_cast<int>(Y.rows()); }
};

struct RolloutOutput {
    PathBatch paths;    // empty unless requested
    NodeId residual;    // M x 1: Y_N - g(X_N)
    NodeId loss;        // mean squared residual
};

struct RolloutOptions {
    bool keep_paths = false;
};

/// X_{n+1} = X_n + b^psi h + sigma dW_n,  Y_{n+1} = Y_n - f^psi h + <Z_n, sigma dW_n>,  Z_n = zeta_n(X_n).
/// Throws DivergenceError naming the step and sample of the first non-finite state.
RolloutOutput euler_rollout(const ShiftedCoefficients& coeffs, const BoundNets& nets, NodeId y0_node,
                            const BrownianBatch& batch, const TimeGrid& grid, Tape& tape,
                            RolloutOptions options = {});

struct MultiLoss {
    NodeId total;
    std::vector<RolloutOutput> rollouts;
};

/// Sum of the terminal MSEs of one rollout per shift, all consuming the same increments.
MultiLoss multi_loss(const CoefficientSet& base, const std::vector<DriftShift>& shifts, const BoundNets& nets,
                     NodeId y0_node, const BrownianBatch& batch, const TimeGrid& grid, Tape& tape,
                     RolloutOptions options = {});

/// Same recursion as euler_rollout evaluated one step at a time without keeping a graph.
PathBatch detached_rollout(const ShiftedCoefficients& coeffs, const StepNets& nets, double y0,
                           const BrownianBatch& batch, const TimeGrid& grid);

/// mean((Y_N - g(X_N))^2), evaluated exactly as the tape loss.
double terminal_mse(const CoefficientSet& base, const PathBatch& paths);

/// Forward Euler for dX = b(t, X) dt + sigma(t, X) dW with the problem's drift
/// evaluated at y = 0, z = 0. Used as an independent SDE simulator.
std::vector<Matrix> forward_euler(const CoefficientSet& coeffs, const BrownianBatch& batch, const TimeGrid& grid);

/// Keeps every `factor`-th time level (and the matching Z), giving a path batch on the coarse grid.
PathBatch subsample(const PathBatch& fine, int factor);

/// CSV with header sample,n,t,X_1..X_d,Y,Z_1..Z_k; Z fields are empty at n = N.
void write_paths_csv(const std::filesystem::path& file, const PathBatch& paths, int max_samples = -1);

}  // namespace mfbsde
