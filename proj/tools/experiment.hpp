#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multifbsde/model.hpp"
#include "multifbsde/reference.hpp"
#include "multifbsde/train.hpp"

namespace mfbsde::cli {

using nlohmann::json;

enum class ExperimentKind { train, landscape, converge, beta_sweep, reference, plot };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct ProblemSpec {
    std::string id = "lq";  // lq | controlled-bm | adr
    std::optional<double> T;
    std::optional<std::vector<double>> x0;
    std::optional<double> r;      // controlled-bm
    std::optional<double> sigma;  // controlled-bm
    std::optional<double> alpha;  // adr
    double beta = 0.6;            // adr
    double gamma = 0.0;           // adr
};

struct LandscapeSpec {
    std::vector<double> y0_grid;
    std::string objective = "deep-fbsde";  // deep-fbsde | phase1
    int samples = 1 << 16;
    int epochs = 2;
};

struct ConvergeSpec {
    std::vector<int> steps{20, 40, 60, 80};
    int eval_samples = 1 << 12;
};

struct BetaSweepSpec {
    std::vector<double> betas{0.00125, 0.25, 1.0, 5.0};
    double gamma = 1.0;
    double tolerance = 0.1;
};

struct ReferenceSpec {
    std::int64_t mc_samples = 1 << 20;
    int feedback_samples = 1 << 14;  // LQ feedback-cost check at N = 160
    int riccati_steps = kRiccatiSteps;
    FdOptions fd;
};

struct PlotSpec {
    std::string input;
    std::string output;
    std::string x;
    std::vector<std::string> y;
    bool log_x = false;
    bool log_y = false;
    std::string style = "line";  // line | scatter
    std::string title;
};

/// Thresholds applied by `--check`.
struct CheckSpec {
    double y0_rel_tol = 0.05;
    double argmin_tol = 1.0;
    double y0_slope_min = 0.6;
    double x_slope_lo = 0.7, x_slope_hi = 1.3;
    double y_slope_lo = 0.3, y_slope_hi = 0.7;
};

struct ExperimentConfig {
    std::optional<ExperimentKind> experiment;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    ProblemSpec problem;
    std::string shifts = "K1";
    std::string mode = "deep-fbsde";  // deep-fbsde | phase1 | phase2 | phase1+phase2
    TrainConfig train;
    LandscapeSpec landscape;
    ConvergeSpec converge;
    BetaSweepSpec beta_sweep;
    ReferenceSpec reference;
    PlotSpec plot;
    CheckSpec check;
};

/// Strict parse: unknown keys and wrong types raise ConfigError naming the key path.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& file);
/// Full echo including defaults; parse_config(to_json(c)) reproduces c.
json to_json(const ExperimentConfig& cfg);

ProblemParams problem_params(const ProblemSpec& spec);

/// TrainConfig with the experiment seed applied.
TrainConfig effective_train_config(const ExperimentConfig& cfg);

struct RunOutcome {
    json summary;
    bool check_passed = true;
    std::vector<std::string> check_messages;
    std::vector<std::filesystem::path> outputs;
};

/// Runs one experiment, writing its files and summary.json into cfg.output_dir.
RunOutcome run_experiment(const ExperimentConfig& cfg, ExperimentKind kind);

/// Reference Y0 for the problem at x0: Riccati, Cole-Hopf Monte Carlo or finite differences.
struct ReferenceValue {
    double value = 0.0;
    double std_error = 0.0;
    std::string method;
};
ReferenceValue reference_y0(const ExperimentConfig& cfg, const ProblemParams& params);

/// Build identifier baked in at configure time.
std::string build_id();

// Plotting.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Throws ConfigError if missing.
    std::size_t column(const std::string& name) const;
};

/// Numeric CSV; non-numeric cells read as NaN.
CsvTable read_csv(const std::filesystem::path& file);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct SvgOptions {
    bool log_x = false;
    bool log_y = false;
    bool scatter = false;
    std::string title;
    std::string x_label;
    std::string y_label;
};

/// One polyline (or marker group) per series with axes and legend. Throws ConfigError on
/// nonpositive values in a log axis, naming the series and row.
std::string render_svg(const std::vector<Series>& series, const SvgOptions& options);

void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace mfbsde::cli
