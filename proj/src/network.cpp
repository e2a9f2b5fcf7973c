#include "multifbsde/network.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "multifbsde/errors.hpp"

namespace mfbsde {
namespace {

std::vector<int> layer_dims(const MlpArch& arch) {
    std::vector<int> dims;
    dims.push_back(arch.input_dim);
    dims.insert(dims.end(), arch.hidden_widths.begin(), arch.hidden_widths.end());
    dims.push_back(arch.output_dim);
    return dims;
}

// Input row (t, x) for time-augmented networks.
Matrix with_time(double t, const Matrix& x) {
    Matrix out(x.rows(), x.cols() + 1);
    out.col(0).setConstant(t);
    out.rightCols(x.cols()) = x;
    return out;
}

}  // namespace

void MlpArch::validate() const {
    if (input_dim < 1 || output_dim < 1) throw ParameterError("MlpArch: input and output dimensions must be >= 1");
    for (int w : hidden_widths)
        if (w < 1) throw ParameterError("MlpArch: hidden widths must be >= 1");
}

int MlpArch::param_count() const {
    const auto dims = layer_dims(*this);
    int count = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) count += dims[i] * dims[i + 1] + dims[i + 1];
    return count;
}

MlpParams init_mlp(const MlpArch& arch, const RngStream& rng, InitScheme scheme) {
    arch.validate();
    MlpParams params;
    params.arch = arch;
    const auto dims = layer_dims(arch);
    std::uint64_t counter = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        DenseLayer layer{Matrix(fan_out, fan_in), Matrix::Zero(1, fan_out)};
        const double std_dev = std::sqrt(2.0 / fan_in);
        const double bound = std::sqrt(6.0 / fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) {
                layer.weight(i, j) = scheme == InitScheme::he_normal
                                         ? std_dev * rng.normal(counter)
                                         : bound * (2.0 * rng.uniform(counter) - 1.0);
                ++counter;
            }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

MlpNodes bind_mlp(const MlpParams& params, Tape& tape, bool trainable) {
    MlpNodes nodes;
    for (const auto& layer : params.layers) {
        nodes.weights.push_back(tape.parameter(layer.weight, trainable));
        nodes.biases.push_back(tape.parameter(layer.bias, trainable));
    }
    return nodes;
}

NodeId mlp_apply(const MlpNodes& nodes, NodeId x, Tape& tape) {
    const std::size_t depth = nodes.weights.size();
    NodeId h = x;
    for (std::size_t l = 0; l < depth; ++l) {
        h = tape.affine(h, nodes.weights[l], nodes.biases[l]);
        if (l + 1 < depth) h = tape.relu(h);
    }
    return h;
}

NodeId mlp_apply(const MlpParams& params, NodeId x, Tape& tape) { return mlp_apply(bind_mlp(params, tape), x, tape); }

Matrix mlp_eval(const MlpParams& params, const Matrix& x) {
    if (x.cols() != params.arch.input_dim) throw GraphError("mlp_eval: input dimension mismatch");
    Matrix h = x;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        Matrix next = h * params.layers[l].weight.transpose();
        next.rowwise() += params.layers[l].bias.row(0);
        if (l + 1 < params.layers.size()) next = next.cwiseMax(0.0);
        h = std::move(next);
    }
    return h;
}

int StepNets::state_dim() const { return nets.front().arch.input_dim - (time_input ? 1 : 0); }

StepNets make_step_nets(int state_dim, int z_dim, int steps, const std::vector<int>& hidden, std::uint64_t seed,
                        InitScheme scheme, bool time_input) {
    if (steps < 1) throw ParameterError("make_step_nets: steps must be >= 1");
    StepNets out;
    out.steps = steps;
    out.time_input = time_input;
    const MlpArch arch{state_dim + (time_input ? 1 : 0), z_dim, hidden};
    const int count = time_input ? 1 : steps;
    for (int n = 0; n < count; ++n) out.nets.push_back(init_mlp(arch, RngStream(seed, static_cast<std::uint64_t>(n)), scheme));
    return out;
}

BoundNets::BoundNets(const StepNets& nets, Tape& tape, bool trainable) : nets_(&nets) {
    for (const auto& net : nets.nets) nodes_.push_back(bind_mlp(net, tape, trainable));
}

NodeId BoundNets::apply(int n, double t, NodeId x, Tape& tape) const {
    const auto& nodes = nodes_[nets_->time_input ? 0 : static_cast<std::size_t>(n)];
    if (!nets_->time_input) return mlp_apply(nodes, x, tape);
    const auto d = tape.value(x).cols();
    Matrix embed = Matrix::Zero(d + 1, d);
    embed.bottomRows(d).setIdentity();
    Matrix time_row = Matrix::Zero(1, d + 1);
    time_row(0, 0) = t;
    const NodeId augmented = tape.add(tape.matvec(tape.constant(std::move(embed)), x), tape.constant(std::move(time_row)));
    return mlp_apply(nodes, augmented, tape);
}

Matrix step_net_eval(const StepNets& nets, int n, double t, const Matrix& x) {
    return nets.time_input ? mlp_eval(nets.net(n), with_time(t, x)) : mlp_eval(nets.net(n), x);
}

int flat_size(const StepNets& nets) {
    int count = 0;
    for (const auto& net : nets.nets) count += net.param_count();
    return count + (nets.y0_trainable ? 1 : 0);
}

Vector flatten_params(const StepNets& nets) {
    Vector flat(flat_size(nets));
    Eigen::Index pos = 0;
    for (const auto& net : nets.nets)
        for (const auto& layer : net.layers) {
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
                for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) flat(pos++) = layer.weight(i, j);
            for (Eigen::Index j = 0; j < layer.bias.cols(); ++j) flat(pos++) = layer.bias(0, j);
        }
    if (nets.y0_trainable) flat(pos++) = nets.y0;
    return flat;
}

void unflatten_params(const Vector& flat, StepNets& nets) {
    if (flat.size() != flat_size(nets))
        throw ParameterError("unflatten_params: expected " + std::to_string(flat_size(nets)) + " values, got " +
                             std::to_string(flat.size()));
    Eigen::Index pos = 0;
    for (auto& net : nets.nets)
        for (auto& layer : net.layers) {
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
                for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = flat(pos++);
            for (Eigen::Index j = 0; j < layer.bias.cols(); ++j) layer.bias(0, j) = flat(pos++);
        }
    if (nets.y0_trainable) nets.y0 = flat(pos++);
}

Vector flatten_gradient(const StepNets& nets, const BoundNets& bound, std::optional<NodeId> y0_node,
                        const GradMap& grads) {
    Vector flat(flat_size(nets));
    Eigen::Index pos = 0;
    for (const auto& nodes : bound.nodes())
        for (std::size_t l = 0; l < nodes.weights.size(); ++l) {
            const Matrix& gw = grads.at(nodes.weights[l]);
            const Matrix& gb = grads.at(nodes.biases[l]);
            for (Eigen::Index i = 0; i < gw.rows(); ++i)
                for (Eigen::Index j = 0; j < gw.cols(); ++j) flat(pos++) = gw(i, j);
            for (Eigen::Index j = 0; j < gb.cols(); ++j) flat(pos++) = gb(0, j);
        }
    if (nets.y0_trainable) {
        if (!y0_node) throw GraphError("flatten_gradient: trainable y0 without a y0 node");
        flat(pos++) = grads.at(*y0_node)(0, 0);
    }
    return flat;
}

void save_checkpoint(const std::filesystem::path& prefix, const StepNets& nets) {
    const auto& arch = nets.nets.front().arch;
    nlohmann::json header = {
        {"format", "multifbsde-stepnets"},
        {"version", 1},
        {"input_dim", arch.input_dim},
        {"output_dim", arch.output_dim},
        {"hidden_widths", arch.hidden_widths},
        {"steps", nets.steps},
        {"networks", nets.nets.size()},
        {"time_input", nets.time_input},
        {"y0_trainable", nets.y0_trainable},
        {"layout", "per network, per layer: weight row-major (out x in), bias; then y0"},
    };
    StepNets copy = nets;
    copy.y0_trainable = true;
    const Vector flat = flatten_params(copy);
    header["values"] = flat.size();

    std::ofstream json(prefix.string() + ".ckpt.json");
    if (!json) throw Error("save_checkpoint: cannot open " + prefix.string() + ".ckpt.json");
    json << header.dump(2) << '\n';

    std::ofstream bin(prefix.string() + ".ckpt.bin", std::ios::binary);
    if (!bin) throw Error("save_checkpoint: cannot open " + prefix.string() + ".ckpt.bin");
    bin.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

StepNets load_checkpoint(const std::filesystem::path& prefix) {
    std::ifstream json(prefix.string() + ".ckpt.json");
    if (!json) throw Error("load_checkpoint: cannot open " + prefix.string() + ".ckpt.json");
    const auto header = nlohmann::json::parse(json);
    if (header.at("format") != "multifbsde-stepnets") throw Error("load_checkpoint: unknown format");

    const MlpArch arch{header.at("input_dim").get<int>(), header.at("output_dim").get<int>(),
                       header.at("hidden_widths").get<std::vector<int>>()};
    arch.validate();
    StepNets nets;
    nets.steps = header.at("steps").get<int>();
    nets.time_input = header.at("time_input").get<bool>();
    const auto count = header.at("networks").get<std::size_t>();
    nets.nets.assign(count, MlpParams{arch, {}});
    for (auto& net : nets.nets) net = init_mlp(arch, RngStream(0, 0));
    nets.y0_trainable = true;

    Vector flat(flat_size(nets));
    if (header.at("values").get<Eigen::Index>() != flat.size())
        throw Error("load_checkpoint: header value count does not match architecture");
    std::ifstream bin(prefix.string() + ".ckpt.bin", std::ios::binary);
    if (!bin) throw Error("load_checkpoint: cannot open " + prefix.string() + ".ckpt.bin");
    bin.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (bin.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(double)))
        throw Error("load_checkpoint: truncated parameter file");
    unflatten_params(flat, nets);
    nets.y0_trainable = header.at("y0_trainable").get<bool>();
    return nets;
}

}  // namespace mfbsde
