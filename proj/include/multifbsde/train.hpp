#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "multifbsde/model.hpp"
#include "multifbsde/network.hpp"
#include "multifbsde/rollout.hpp"

namespace mfbsde {

struct AdamState {
    Vector m;
    Vector v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(Eigen::Index size = 0) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

/// One bias-corrected Adam update of `theta` in place.
void adam_step(AdamState& state, Vector& theta, const Vector& grad, double lr);

enum class TrainMode {
    deep_fbsde,  // single system, y0 trained jointly
    phase1,      // sum over the shift preset, y0 trained jointly
    phase2,      // single system, y0 pinned
};

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

enum class LrSchedule { exp_decay, constant };

struct TrainConfig {
    int samples = 1 << 20;      // training realizations, generated once
    int batch_size = 1 << 12;
    int epochs = 10;
    int steps = 40;             // N
    std::vector<int> hidden{20, 20, 20};
    bool time_input = false;
    InitScheme init = InitScheme::he_normal;

    double lr = 1e-2;
    LrSchedule schedule = LrSchedule::exp_decay;
    int lr_hold_epochs = 3;     // epochs 0..hold run at lr; later epochs decay by lr_decay each
    double lr_decay = 0.5;      // per-epoch factor exp(-lr_decay)
    double y0_lr_scale = 1.0;   // learning-rate multiplier for y0

    std::uint64_t seed = 1;
    std::optional<double> y0_init;  // unset: least-squares fit for the initial networks
    TrainMode mode = TrainMode::deep_fbsde;
    std::optional<double> y0_fixed;  // required by phase2
    bool phase2_fresh_init = false;
    bool pin_y0 = false;  // keep y0 at y0_init in any mode (landscape scans)

    int shard_size = 256;       // rows per tape; fixed so results do not depend on threads
    int threads = 1;
    int eval_samples = 1 << 12;  // held-out batch for the final report

    int iterations_per_epoch() const { return samples / batch_size; }
    int total_iterations() const { return epochs * iterations_per_epoch(); }
    /// Throws ConfigError.
    void validate() const;
};

/// The `--desk` budget: 2^16 samples, batches of 2^10, 4 epochs.
TrainConfig desk_profile(TrainConfig base);

/// lr * exp(-lr_decay * max(0, epoch - lr_hold_epochs)), or lr for the constant schedule.
double lr_schedule(long iteration, const TrainConfig& cfg);

struct TrainHistory {
    std::vector<double> loss;
    std::vector<double> y0;
    std::vector<double> lr;
    std::vector<double> seconds;

    std::size_t size() const { return loss.size(); }
};

struct TrainResult {
    StepNets nets;
    double y0 = 0.0;
    TrainHistory history;
    double eval_loss = 0.0;        // objective of the mode on held-out data
    double eval_terminal_mse = 0.0;  // unshifted system only
};

/// Trains per `cfg.mode`. Phase I uses `shifts`; the other modes use the zero shift.
/// `warm_start` seeds the networks (Phase II default when provided).
TrainResult train(const CoefficientSet& problem, const std::vector<DriftShift>& shifts, const TrainConfig& cfg,
                  const StepNets* warm_start = nullptr);

/// Loss and flat gradient of the mode objective on one batch, reduced over fixed shards.
struct LossAndGradient {
    double loss = 0.0;
    Vector grad;
};
LossAndGradient objective_gradient(const CoefficientSet& problem, const std::vector<DriftShift>& shifts,
                                   const StepNets& nets, const BrownianBatch& batch, const TimeGrid& grid,
                                   int shard_size, int threads);

/// Held-out objective: sum over `shifts` of the terminal MSE of detached rollouts.
double evaluate_objective(const CoefficientSet& problem, const std::vector<DriftShift>& shifts, const StepNets& nets,
                          const BrownianBatch& batch, const TimeGrid& grid);

struct LandscapePoint {
    double y0;
    double mse;
};

/// y0 -> trained MSE with y0 pinned, for the objective given by `shifts`
/// (a single zero shift reproduces the deep FBSDE landscape).
std::vector<LandscapePoint> mse_landscape(const CoefficientSet& problem, const std::vector<DriftShift>& shifts,
                                          const std::vector<double>& y0_grid, const TrainConfig& cfg);

/// CSV with header iteration,loss,y0,lr.
void write_history_csv(const std::filesystem::path& file, const TrainHistory& history);

}  // namespace mfbsde
