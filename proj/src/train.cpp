#include "multifbsde/train.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <thread>

#include "multifbsde/errors.hpp"

namespace mfbsde {
namespace {

constexpr std::uint64_t kTrainDataTag = 1;
constexpr std::uint64_t kInitTag = 2;
constexpr std::uint64_t kEvalTag = 3;

struct ShardResult {
    double loss = 0.0;
    Vector grad;
    std::exception_ptr error;
};

ShardResult shard_objective(const CoefficientSet& problem, const std::vector<DriftShift>& shifts,
                            const StepNets& nets, const BrownianBatch& shard, const TimeGrid& grid) {
    Tape tape;
    const BoundNets bound(nets, tape, true);
    const NodeId y0 = tape.parameter(Matrix::Constant(1, 1, nets.y0), nets.y0_trainable);
    const auto objective = multi_loss(problem, shifts, bound, y0, shard, grid, tape);
    const GradMap grads = tape.backward(objective.total);
    return {tape.value(objective.total)(0, 0),
            flatten_gradient(nets, bound, nets.y0_trainable ? std::optional<NodeId>(y0) : std::nullopt, grads),
            nullptr};
}

std::vector<DriftShift> objective_shifts(TrainMode mode, const std::vector<DriftShift>& shifts) {
    if (mode == TrainMode::phase1) {
        if (shifts.empty()) throw ConfigError("train: phase1 needs at least one shift");
        return shifts;
    }
    return {zero_shift()};
}

// y0 minimizing the objective for fixed networks when Y_N is affine in y0
// (exact for drifts independent of y and drivers affine in y).
double fit_initial_y0(const CoefficientSet& problem, const std::vector<DriftShift>& shifts, const StepNets& nets,
                      const BrownianBatch& batch, const TimeGrid& grid) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& shift : shifts) {
        const auto coeffs = shifted(problem, shift);
        const auto at0 = detached_rollout(coeffs, nets, 0.0, batch, grid);
        const auto at1 = detached_rollout(coeffs, nets, 1.0, batch, grid);
        const Vector g0 = eval_terminal_batch(problem.terminal, at0.X.back());
        const Vector g1 = eval_terminal_batch(problem.terminal, at1.X.back());
        const Vector r0 = at0.Y.col(grid.N) - g0;
        const Vector slope = (at1.Y.col(grid.N) - g1) - r0;
        num += r0.dot(slope);
        den += slope.squaredNorm();
    }
    if (!(den > 0.0)) return 0.0;
    return -num / den;
}

}  // namespace

void adam_step(AdamState& s, Vector& theta, const Vector& grad, double lr) {
    if (theta.size() != grad.size() || s.m.size() != theta.size() || s.v.size() != theta.size())
        throw ParameterError("adam_step: length mismatch");
    ++s.step;
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    theta.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::deep_fbsde: return "deep-fbsde";
        case TrainMode::phase1: return "phase1";
        case TrainMode::phase2: return "phase2";
    }
    return "unknown";
}

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "deep-fbsde") return TrainMode::deep_fbsde;
    if (name == "phase1") return TrainMode::phase1;
    if (name == "phase2") return TrainMode::phase2;
    throw ConfigError("unknown training mode '" + name + "'");
}

void TrainConfig::validate() const {
    if (samples < 1 || batch_size < 1 || epochs < 1 || steps < 1)
        throw ConfigError("train: samples, batch_size, epochs and steps must be positive");
    if (samples % batch_size != 0) throw ConfigError("train: samples must be divisible by batch_size");
    if (shard_size < 1 || threads < 1 || eval_samples < 1)
        throw ConfigError("train: shard_size, threads and eval_samples must be positive");
    if (!(lr > 0.0) || !(y0_lr_scale >= 0.0)) throw ConfigError("train: learning rates must be positive");
    for (int w : hidden)
        if (w < 1) throw ConfigError("train: hidden widths must be positive");
    if (mode == TrainMode::phase2 && !y0_fixed) throw ConfigError("train: phase2 requires y0_fixed");
    if (mode != TrainMode::phase2 && y0_fixed) throw ConfigError("train: y0_fixed is only allowed in phase2");
}

TrainConfig desk_profile(TrainConfig base) {
    base.samples = 1 << 16;
    base.batch_size = 1 << 10;
    base.epochs = 4;
    return base;
}

double lr_schedule(long iteration, const TrainConfig& cfg) {
    if (cfg.schedule == LrSchedule::constant) return cfg.lr;
    const long epoch = iteration / std::max(1, cfg.iterations_per_epoch());
    const long decayed = std::max(0L, epoch - cfg.lr_hold_epochs);
    return cfg.lr * std::exp(-cfg.lr_decay * static_cast<double>(decayed));
}

LossAndGradient objective_gradient(const CoefficientSet& problem, const std::vector<DriftShift>& shifts,
                                   const StepNets& nets, const BrownianBatch& batch, const TimeGrid& grid,
                                   int shard_size, int threads) {
    const int rows = batch.samples();
    const int shards = (rows + shard_size - 1) / shard_size;
    std::vector<ShardResult> results(static_cast<std::size_t>(shards));
    auto run = [&](int s) {
        try {
            const int first = s * shard_size;
            const int count = std::min(shard_size, rows - first);
            results[s] = shard_objective(problem, shifts, nets, shards == 1 ? batch : batch.slice(first, count), grid);
        } catch (...) {
            results[s].error = std::current_exception();
        }
    };
    const int workers = std::min(threads, shards);
    if (workers <= 1) {
        for (int s = 0; s < shards; ++s) run(s);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int s = w; s < shards; s += workers) run(s);
            });
        for (auto& t : pool) t.join();
    }

    LossAndGradient out;
    out.grad = Vector::Zero(flat_size(nets));
    for (int s = 0; s < shards; ++s) {
        if (results[s].error) std::rethrow_exception(results[s].error);
        const double weight = static_cast<double>(std::min(shard_size, rows - s * shard_size)) / rows;
        out.loss += weight * results[s].loss;
        out.grad += weight * results[s].grad;
    }
    return out;
}

double evaluate_objective(const CoefficientSet& problem, const std::vector<DriftShift>& shifts, const StepNets& nets,
                          const BrownianBatch& batch, const TimeGrid& grid) {
    double total = 0.0;
    for (const auto& shift : shifts)
        total += terminal_mse(problem, detached_rollout(shifted(problem, shift), nets, nets.y0, batch, grid));
    return total;
}

TrainResult train(const CoefficientSet& problem, const std::vector<DriftShift>& shifts, const TrainConfig& cfg,
                  const StepNets* warm_start) {
    cfg.validate();
    const auto objective = objective_shifts(cfg.mode, shifts);
    const TimeGrid grid = TimeGrid::make(cfg.steps, problem.T);
    const BrownianBatch data =
        sample_brownian_batch(derive_seed(cfg.seed, kTrainDataTag), cfg.samples, cfg.steps, problem.k, grid.h);
    const BrownianBatch held_out =
        sample_brownian_batch(derive_seed(cfg.seed, kEvalTag), cfg.eval_samples, cfg.steps, problem.k, grid.h);

    TrainResult result;
    const bool warm = warm_start != nullptr && !(cfg.mode == TrainMode::phase2 && cfg.phase2_fresh_init);
    if (warm) {
        if (warm_start->steps != cfg.steps) throw ConfigError("train: warm start has a different number of steps");
        result.nets = *warm_start;
    } else {
        result.nets = make_step_nets(problem.d, problem.k, cfg.steps, cfg.hidden, derive_seed(cfg.seed, kInitTag),
                                     cfg.init, cfg.time_input);
    }
    StepNets& nets = result.nets;
    if (cfg.mode == TrainMode::phase2) {
        nets.y0 = *cfg.y0_fixed;
        nets.y0_trainable = false;
    } else if (cfg.pin_y0) {
        if (!cfg.y0_init) throw ConfigError("train: pin_y0 requires y0_init");
        nets.y0 = *cfg.y0_init;
        nets.y0_trainable = false;
    } else {
        nets.y0_trainable = true;
        nets.y0 = cfg.y0_init ? *cfg.y0_init
                              : fit_initial_y0(problem, objective, nets,
                                               data.slice(0, std::min(cfg.batch_size, cfg.samples)), grid);
    }

    Vector theta = flatten_params(nets);
    AdamState adam(theta.size());
    const auto start = std::chrono::steady_clock::now();
    const int per_epoch = cfg.iterations_per_epoch();
    long iteration = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch)
        for (int b = 0; b < per_epoch; ++b, ++iteration) {
            const BrownianBatch batch = data.slice(b * cfg.batch_size, cfg.batch_size);
            LossAndGradient lg;
            try {
                lg = objective_gradient(problem, objective, nets, batch, grid, cfg.shard_size, cfg.threads);
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " (iteration " + std::to_string(iteration) + ")",
                                      e.step(), e.sample());
            }
            if (!std::isfinite(lg.loss) || !lg.grad.allFinite())
                throw DivergenceError("train: non-finite loss or gradient at iteration " + std::to_string(iteration));
            const double lr = lr_schedule(iteration, cfg);
            const double y0_evaluated = nets.y0;
            if (nets.y0_trainable && cfg.y0_lr_scale != 1.0) {
                // Adam is invariant to gradient scale, so the y0 rate is applied to its step instead.
                const double y0_before = theta(theta.size() - 1);
                adam_step(adam, theta, lg.grad, lr);
                theta(theta.size() - 1) = y0_before + cfg.y0_lr_scale * (theta(theta.size() - 1) - y0_before);
            } else {
                adam_step(adam, theta, lg.grad, lr);
            }
            unflatten_params(theta, nets);
            result.history.loss.push_back(lg.loss);
            result.history.y0.push_back(y0_evaluated);
            result.history.lr.push_back(lr);
            result.history.seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }

    result.y0 = nets.y0;
    result.eval_loss = evaluate_objective(problem, objective, nets, held_out, grid);
    result.eval_terminal_mse = evaluate_objective(problem, {zero_shift()}, nets, held_out, grid);
    return result;
}

std::vector<LandscapePoint> mse_landscape(const CoefficientSet& problem, const std::vector<DriftShift>& shifts,
                                          const std::vector<double>& y0_grid, const TrainConfig& cfg) {
    if (y0_grid.empty()) throw ConfigError("mse_landscape: empty y0 grid");
    if (shifts.empty()) throw ConfigError("mse_landscape: at least one shift is required");
    std::vector<LandscapePoint> out;
    for (double y0 : y0_grid) {
        TrainConfig point = cfg;
        point.mode = TrainMode::phase1;
        point.y0_fixed.reset();
        point.y0_init = y0;
        point.pin_y0 = true;
        const auto result = train(problem, shifts, point);
        out.push_back({y0, result.eval_loss});
    }
    return out;
}

void write_history_csv(const std::filesystem::path& file, const TrainHistory& history) {
    std::ofstream out(file);
    if (!out) throw Error("write_history_csv: cannot open " + file.string());
    out << "iteration,loss,y0,lr\n" << std::setprecision(17);
    for (std::size_t i = 0; i < history.size(); ++i)
        out << i << ',' << history.loss[i] << ',' << history.y0[i] << ',' << history.lr[i] << '\n';
}

}  // namespace mfbsde
