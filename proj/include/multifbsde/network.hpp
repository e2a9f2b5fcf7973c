#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "multifbsde/autodiff.hpp"
#include "multifbsde/stochastics.hpp"

namespace mfbsde {

struct MlpArch {
    int input_dim = 1;
    int output_dim = 1;
    std::vector<int> hidden_widths{20, 20, 20};

    /// Throws ParameterError when a width is < 1.
    void validate() const;
    int param_count() const;
};

enum class InitScheme { he_normal, uniform_scaled };

struct DenseLayer {
    Matrix weight;  // out x in
    Matrix bias;    // 1 x out
};

struct MlpParams {
    MlpArch arch;
    std::vector<DenseLayer> layers;

    int param_count() const { return arch.param_count(); }
};

/// He-normal draws N(0, 2 / fan_in); uniform-scaled draws U(-s, s) with
/// s = sqrt(6 / fan_in), the same variance. Biases start at zero.
MlpParams init_mlp(const MlpArch& arch, const RngStream& rng, InitScheme scheme = InitScheme::he_normal);

/// Parameter leaves of one network on one tape.
struct MlpNodes {
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;
};

MlpNodes bind_mlp(const MlpParams& params, Tape& tape, bool trainable = true);

/// Affine-ReLU-...-affine on a batch `x` (rows = samples).
NodeId mlp_apply(const MlpNodes& nodes, NodeId x, Tape& tape);
NodeId mlp_apply(const MlpParams& params, NodeId x, Tape& tape);

/// Value-only evaluation, bit-identical to the tape path.
Matrix mlp_eval(const MlpParams& params, const Matrix& x);

/// The Markov maps zeta_0..zeta_{N-1} and the initial value y0.
///
/// With `time_input` a single network takes (t, x) and is shared by all steps;
/// otherwise there is one network per step.
struct StepNets {
    std::vector<MlpParams> nets;
    int steps = 0;
    bool time_input = false;
    double y0 = 0.0;
    bool y0_trainable = true;

    const MlpParams& net(int n) const { return nets[time_input ? 0 : static_cast<std::size_t>(n)]; }
    int state_dim() const;
};

StepNets make_step_nets(int state_dim, int z_dim, int steps, const std::vector<int>& hidden, std::uint64_t seed,
                        InitScheme scheme = InitScheme::he_normal, bool time_input = false);

/// Binds all networks of a StepNets on a tape and evaluates zeta_n(x).
class BoundNets {
public:
    BoundNets(const StepNets& nets, Tape& tape, bool trainable = true);

    NodeId apply(int n, double t, NodeId x, Tape& tape) const;
    const std::vector<MlpNodes>& nodes() const { return nodes_; }

private:
    const StepNets* nets_;
    std::vector<MlpNodes> nodes_;
};

/// zeta_n(x) without a tape.
Matrix step_net_eval(const StepNets& nets, int n, double t, const Matrix& x);

/// Flat layout: for each network, for each layer, weights (row-major) then bias;
/// y0 last when trainable.
int flat_size(const StepNets& nets);
Vector flatten_params(const StepNets& nets);
void unflatten_params(const Vector& flat, StepNets& nets);
/// Gathers a GradMap into the flat layout of `flatten_params`.
Vector flatten_gradient(const StepNets& nets, const BoundNets& bound, std::optional<NodeId> y0_node,
                        const GradMap& grads);

/// Writes `<prefix>.ckpt.json` (architecture header) and `<prefix>.ckpt.bin`
/// (little-endian float64 parameters in flat order, y0 always included last).
void save_checkpoint(const std::filesystem::path& prefix, const StepNets& nets);
StepNets load_checkpoint(const std::filesystem::path& prefix);

}  // namespace mfbsde
