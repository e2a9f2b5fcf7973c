#pragma once

#include "multifbsde/network.hpp"
#include "multifbsde/reference.hpp"
#include "multifbsde/rollout.hpp"

namespace testutil {

// Step networks that reproduce z = 2 P(t_n) x + Q(t_n) exactly: one hidden ReLU layer
// holding (x, -x), so x = relu(x) - relu(-x).
inline mfbsde::StepNets riccati_step_nets(const mfbsde::RiccatiSolution& sol, const mfbsde::TimeGrid& grid,
                                          double y0) {
    using namespace mfbsde;
    const int d = static_cast<int>(sol.P.front().rows());
    StepNets nets = make_step_nets(d, d, grid.N, {2 * d}, 1);
    for (int n = 0; n < grid.N; ++n) {
        const int j = sol.index_at(grid.t(n));
        const Matrix L = 2.0 * sol.P[j];
        MlpParams& p = nets.nets[n];
        p.layers[0].weight.resize(2 * d, d);
        p.layers[0].weight << Matrix::Identity(d, d), -Matrix::Identity(d, d);
        p.layers[0].bias = Matrix::Zero(1, 2 * d);
        p.layers[1].weight.resize(d, 2 * d);
        p.layers[1].weight << L, -L;
        p.layers[1].bias = sol.Q[j].transpose();
    }
    nets.y0 = y0;
    return nets;
}

}  // namespace testutil
