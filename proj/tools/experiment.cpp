#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "multifbsde/errors.hpp"
#include "multifbsde/metrics.hpp"
#include "multifbsde/rollout.hpp"
#include "multifbsde/stochastics.hpp"

#ifndef MULTIFBSDE_BUILD_ID
#define MULTIFBSDE_BUILD_ID "unknown"
#endif

namespace mfbsde::cli {
namespace {

constexpr std::uint64_t kPathEvalTag = 101;
constexpr std::uint64_t kReferenceMcTag = 102;
constexpr std::uint64_t kFeedbackTag = 103;

// Strict JSON helpers.

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& item : j.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known) throw ConfigError("config: unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
    }
}

std::string path_of(const std::string& where, const char* key) {
    return where.empty() ? std::string(key) : where + "." + key;
}

template <class T>
void read(const json& j, const char* key, const std::string& where, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + path_of(where, key) + "' has the wrong type");
    }
}

template <class T>
void read(const json& j, const char* key, const std::string& where, std::optional<T>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    T value{};
    read(j, key, where, value);
    out = value;
}

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::string init_name(InitScheme s) { return s == InitScheme::he_normal ? "he-normal" : "uniform-scaled"; }

InitScheme init_from(const std::string& s) {
    if (s == "he-normal") return InitScheme::he_normal;
    if (s == "uniform-scaled") return InitScheme::uniform_scaled;
    throw ConfigError("config: unknown init scheme '" + s + "'");
}

std::string schedule_name(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "exp-decay"; }

LrSchedule schedule_from(const std::string& s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "exp-decay") return LrSchedule::exp_decay;
    throw ConfigError("config: unknown schedule '" + s + "'");
}

void parse_train(const json& j, TrainConfig& t) {
    const std::string w = "train";
    check_keys(j, {"samples", "batch_size", "epochs", "steps", "hidden", "time_input", "init", "lr", "schedule",
                   "lr_hold_epochs", "lr_decay", "y0_lr_scale", "y0_init", "y0_fixed", "phase2_fresh_init",
                   "shard_size", "threads", "eval_samples"},
               w);
    read(j, "samples", w, t.samples);
    read(j, "batch_size", w, t.batch_size);
    read(j, "epochs", w, t.epochs);
    read(j, "steps", w, t.steps);
    read(j, "hidden", w, t.hidden);
    read(j, "time_input", w, t.time_input);
    std::string s = init_name(t.init);
    read(j, "init", w, s);
    t.init = init_from(s);
    read(j, "lr", w, t.lr);
    s = schedule_name(t.schedule);
    read(j, "schedule", w, s);
    t.schedule = schedule_from(s);
    read(j, "lr_hold_epochs", w, t.lr_hold_epochs);
    read(j, "lr_decay", w, t.lr_decay);
    read(j, "y0_lr_scale", w, t.y0_lr_scale);
    read(j, "y0_init", w, t.y0_init);
    read(j, "y0_fixed", w, t.y0_fixed);
    read(j, "phase2_fresh_init", w, t.phase2_fresh_init);
    read(j, "shard_size", w, t.shard_size);
    read(j, "threads", w, t.threads);
    read(j, "eval_samples", w, t.eval_samples);
}

json train_json(const TrainConfig& t) {
    return {{"samples", t.samples},
            {"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"steps", t.steps},
            {"hidden", t.hidden},
            {"time_input", t.time_input},
            {"init", init_name(t.init)},
            {"lr", t.lr},
            {"schedule", schedule_name(t.schedule)},
            {"lr_hold_epochs", t.lr_hold_epochs},
            {"lr_decay", t.lr_decay},
            {"y0_lr_scale", t.y0_lr_scale},
            {"y0_init", opt(t.y0_init)},
            {"y0_fixed", opt(t.y0_fixed)},
            {"phase2_fresh_init", t.phase2_fresh_init},
            {"shard_size", t.shard_size},
            {"threads", t.threads},
            {"eval_samples", t.eval_samples}};
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

std::ofstream open_out(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error("cannot open " + file.string() + " for writing");
    out << std::setprecision(17);
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json report_json(const ErrorReport& r) {
    return {{"y0_abs_error", r.y0_abs_error}, {"y0_rel_error", r.y0_rel_error},
            {"x_error_s2", r.x_error},        {"y_error_s2", r.y_error},
            {"z_error_h2", r.z_error},        {"z_error_l2", r.z_error_time_weighted},
            {"samples", r.samples},           {"steps", r.steps}};
}

json history_json(const TrainResult& r) {
    double seconds = r.history.seconds.empty() ? 0.0 : r.history.seconds.back();
    return {{"iterations", r.history.size()},
            {"final_loss", r.history.size() ? r.history.loss.back() : 0.0},
            {"eval_loss", r.eval_loss},
            {"eval_terminal_mse", r.eval_terminal_mse},
            {"y0", r.y0},
            {"seconds", seconds}};
}

bool is_lq(const ProblemParams& p) { return std::holds_alternative<LqParams>(p); }

void require(bool ok, const std::string& message, RunOutcome& out) {
    if (!ok) {
        out.check_passed = false;
        out.check_messages.push_back(message);
    }
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

struct Context {
    const ExperimentConfig& cfg;
    std::filesystem::path dir;
    RunOutcome out;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    std::filesystem::path file(const std::string& name) {
        auto p = dir / name;
        out.outputs.push_back(p);
        return p;
    }
};

// Trains per mode string; returns the final result and fills the summary.
TrainResult run_mode(const CoefficientSet& problem, const ProblemParams& params, const std::string& mode,
                     const TrainConfig& base, Context* ctx, const std::string& prefix = "") {
    const auto shifts = mode == "deep-fbsde" ? std::vector<DriftShift>{zero_shift()}
                                             : shift_preset(params, ctx ? ctx->cfg.shifts : "K1");
    auto record = [&](const std::string& name, const TrainResult& r) {
        if (!ctx) return;
        write_history_csv(ctx->file(prefix + name), r.history);
        ctx->out.summary["runs"][prefix + name.substr(0, name.size() - 4)] = history_json(r);
    };
    if (mode == "deep-fbsde" || mode == "phase1" || mode == "phase2") {
        TrainConfig t = base;
        t.mode = train_mode_from_string(mode);
        if (t.mode != TrainMode::phase2) t.y0_fixed.reset();
        auto r = train(problem, shifts, t);
        record(mode == "phase2" ? "history_phase2.csv" : (mode == "phase1" ? "history_phase1.csv" : "history.csv"),
               r);
        return r;
    }
    if (mode == "phase1+phase2") {
        TrainConfig p1 = base;
        p1.mode = TrainMode::phase1;
        p1.y0_fixed.reset();
        const auto first = train(problem, shifts, p1);
        record("history_phase1.csv", first);
        TrainConfig p2 = base;
        p2.mode = TrainMode::phase2;
        p2.y0_fixed = first.y0;
        p2.y0_init.reset();
        auto second = train(problem, shifts, p2, &first.nets);
        record("history_phase2.csv", second);
        return second;
    }
    throw ConfigError("config: unknown mode '" + mode + "'");
}

// Reference X on a grid refined to a common multiple of N and 160, read off at the coarse nodes.
constexpr long kReferenceSteps = 160;

struct LqComparison {
    PathBatch approx;
    PathBatch ref;
};

LqComparison compare_lq(const LqParams& p, const RiccatiSolution& sol, const CoefficientSet& problem,
                        const StepNets& nets, double y0, int samples, std::uint64_t seed) {
    const int N = nets.steps;
    const int fine = static_cast<int>(std::lcm(static_cast<long>(N), kReferenceSteps));
    const auto batch = sample_brownian_batch(derive_seed(seed, kPathEvalTag), samples, fine, problem.k, p.T / fine);
    const auto ref = lq_reference_paths(p, sol, batch, TimeGrid::make(fine, p.T));
    return {detached_rollout(shifted(problem, zero_shift()), nets, y0, coarsen(batch, fine / N),
                             TimeGrid::make(N, p.T)),
            subsample(ref, fine / N)};
}

// Runners.

void run_train(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto params = problem_params(cfg.problem);
    const auto problem = make_problem(params);
    const TrainConfig base = effective_train_config(cfg);
    const auto result = run_mode(problem, params, cfg.mode, base, &ctx);
    save_checkpoint(ctx.dir / "checkpoint", result.nets);
    ctx.out.outputs.push_back(ctx.dir / "checkpoint");

    const auto ref = reference_y0(cfg, params);
    auto& s = ctx.out.summary;
    s["y0_star"] = result.y0;
    s["final_loss"] = result.history.size() ? result.history.loss.back() : 0.0;
    s["eval_loss"] = result.eval_loss;
    s["reference"] = {{"value", ref.value}, {"std_error", ref.std_error}, {"method", ref.method}};
    const double rel = std::abs(result.y0 - ref.value) / std::abs(ref.value);
    s["y0_rel_error"] = rel;
    if (is_lq(params)) {
        const auto& p = std::get<LqParams>(params);
        const auto sol = solve_riccati(p, cfg.reference.riccati_steps);
        const auto cmp = compare_lq(p, sol, problem, result.nets, result.y0, base.eval_samples, cfg.seed);
        s["error_report"] = report_json(error_report(cmp.approx, cmp.ref, result.y0, ref.value));
    }
    require(rel < cfg.check.y0_rel_tol,
            "y0* = " + fmt(result.y0) + " is " + fmt(100 * rel) + "% from the reference " + fmt(ref.value), ctx.out);
}

void run_landscape(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& spec = cfg.landscape;
    if (spec.y0_grid.empty()) throw ConfigError("config: 'landscape.y0_grid' must not be empty");
    const auto params = problem_params(cfg.problem);
    const auto problem = make_problem(params);
    TrainConfig t = effective_train_config(cfg);
    t.samples = spec.samples;
    t.epochs = spec.epochs;
    t.batch_size = std::min(t.batch_size, t.samples);
    std::vector<DriftShift> shifts;
    if (spec.objective == "deep-fbsde")
        shifts = {zero_shift()};
    else if (spec.objective == "phase1")
        shifts = shift_preset(params, cfg.shifts);
    else
        throw ConfigError("config: unknown landscape objective '" + spec.objective + "'");
    const auto points = mse_landscape(problem, shifts, spec.y0_grid, t);

    auto csv = open_out(ctx.file("landscape.csv"));
    csv << "y0,mse\n";
    Series series{spec.objective == "deep-fbsde" ? "deep FBSDE" : "multi-FBSDE " + cfg.shifts, {}, {}};
    const LandscapePoint* best = &points.front();
    for (const auto& p : points) {
        csv << p.y0 << ',' << p.mse << '\n';
        series.x.push_back(p.y0);
        series.y.push_back(p.mse);
        if (p.mse < best->mse) best = &p;
    }
    csv.close();
    SvgOptions o;
    o.log_y = std::all_of(series.y.begin(), series.y.end(), [](double v) { return v > 0; });
    o.title = "MSE landscape";
    o.x_label = "y0";
    o.y_label = "MSE";
    write_text(ctx.file("landscape.svg"), render_svg({series}, o));

    const auto ref = reference_y0(cfg, params);
    auto& s = ctx.out.summary;
    s["argmin_y0"] = best->y0;
    s["min_mse"] = best->mse;
    s["reference"] = {{"value", ref.value}, {"std_error", ref.std_error}, {"method", ref.method}};
    require(std::abs(best->y0 - ref.value) <= cfg.check.argmin_tol,
            "landscape argmin " + fmt(best->y0) + " is farther than " + fmt(cfg.check.argmin_tol) +
                " from the reference " + fmt(ref.value),
            ctx.out);
}

void run_converge(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto params = problem_params(cfg.problem);
    if (!is_lq(params)) throw ConfigError("config: converge requires problem.id = lq");
    const auto& p = std::get<LqParams>(params);
    const auto problem = make_problem(params);
    const auto& Ns = cfg.converge.steps;
    if (Ns.size() < 2) throw ConfigError("config: 'converge.steps' needs at least two values");
    long fine_steps = kReferenceSteps;
    for (int n : Ns) {
        if (n < 1) throw ConfigError("config: 'converge.steps' entries must be positive");
        fine_steps = std::lcm(fine_steps, static_cast<long>(n));
    }
    if (fine_steps > 4000) throw ConfigError("config: 'converge.steps' has too large a common multiple");
    const auto sol = solve_riccati(p, cfg.reference.riccati_steps);
    const double v0 = lq_value(0.0, p.x0, sol);
    const auto fine = sample_brownian_batch(derive_seed(cfg.seed, kPathEvalTag), cfg.converge.eval_samples,
                                            static_cast<int>(fine_steps), problem.k, p.T / fine_steps);
    const auto fine_ref = lq_reference_paths(p, sol, fine, TimeGrid::make(static_cast<int>(fine_steps), p.T));

    auto csv = open_out(ctx.file("converge.csv"));
    csv << ErrorReport::csv_header() << ",y0_star\n";
    std::vector<std::pair<double, double>> e_y0, e_x, e_y, e_z, e_zl2;
    std::vector<ErrorReport> reports;
    json rows = json::array();
    for (int N : Ns) {
        TrainConfig t = effective_train_config(cfg);
        t.steps = N;
        const auto shifts = shift_preset(params, cfg.shifts);
        TrainConfig p1 = t;
        p1.mode = TrainMode::phase1;
        p1.y0_fixed.reset();
        const auto first = train(problem, shifts, p1);
        TrainConfig p2 = t;
        p2.mode = TrainMode::phase2;
        p2.y0_fixed = first.y0;
        p2.y0_init.reset();
        const auto second = train(problem, shifts, p2, &first.nets);

        const TimeGrid grid = TimeGrid::make(N, p.T);
        const auto batch = coarsen(fine, static_cast<int>(fine_steps / N));
        const auto ref = subsample(fine_ref, static_cast<int>(fine_steps / N));
        const auto approx = detached_rollout(shifted(problem, zero_shift()), second.nets, first.y0, batch, grid);
        const auto r = error_report(approx, ref, first.y0, v0);
        csv << r.csv_row() << ',' << first.y0 << '\n';
        const double h = p.T / N;
        e_y0.emplace_back(h, r.y0_abs_error);
        e_x.emplace_back(h, r.x_error);
        e_y.emplace_back(h, r.y_error);
        e_z.emplace_back(h, r.z_error);
        e_zl2.emplace_back(h, r.z_error_time_weighted);
        reports.push_back(r);
        json row = report_json(r);
        row["N"] = N;
        row["y0_star"] = first.y0;
        rows.push_back(row);
    }
    csv.close();

    auto slopes = open_out(ctx.file("slopes.csv"));
    slopes << "quantity,slope,intercept\n";
    json slope_json;
    auto fit = [&](const char* name, const std::vector<std::pair<double, double>>& pts) {
        const bool positive = std::all_of(pts.begin(), pts.end(), [](const auto& q) { return q.second > 0; });
        const double slope = positive ? fit_loglog_slope(pts).slope : std::numeric_limits<double>::quiet_NaN();
        const double icpt = positive ? fit_loglog_slope(pts).intercept : std::numeric_limits<double>::quiet_NaN();
        slopes << name << ',' << slope << ',' << icpt << '\n';
        slope_json[name] = positive ? json(slope) : json(nullptr);
        return slope;
    };
    const double sy0 = fit("y0", e_y0);
    const double sx = fit("x_s2", e_x);
    const double sy = fit("y_s2", e_y);
    fit("z_h2", e_z);
    fit("z_l2", e_zl2);
    slopes.close();

    std::vector<Series> series = {{"|y0 - Y0|", {}, {}}, {"X (S2)", {}, {}}, {"Y (S2)", {}, {}}, {"Z (H2)", {}, {}}};
    bool loggable = true;
    for (std::size_t i = 0; i < Ns.size(); ++i) {
        const double vals[4] = {reports[i].y0_abs_error, reports[i].x_error, reports[i].y_error, reports[i].z_error};
        for (int k = 0; k < 4; ++k) {
            series[k].x.push_back(p.T / Ns[i]);
            series[k].y.push_back(vals[k]);
            loggable = loggable && vals[k] > 0;
        }
    }
    SvgOptions o;
    o.log_x = o.log_y = loggable;
    o.title = "Errors against the Riccati reference";
    o.x_label = "h";
    o.y_label = "error";
    write_text(ctx.file("converge.svg"), render_svg(series, o));

    auto& s = ctx.out.summary;
    s["reference"] = {{"value", v0}, {"std_error", 0.0}, {"method", "riccati"}};
    s["rows"] = rows;
    s["slopes"] = slope_json;

    // Checks in increasing N.
    std::vector<std::size_t> order(Ns.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return Ns[a] < Ns[b]; });
    bool y0_dec = true, z_dec = true;
    for (std::size_t i = 1; i < order.size(); ++i) {
        y0_dec = y0_dec && reports[order[i]].y0_abs_error < reports[order[i - 1]].y0_abs_error;
        z_dec = z_dec && reports[order[i]].z_error < reports[order[i - 1]].z_error;
    }
    const auto& c = cfg.check;
    require(y0_dec, "y0 error is not strictly decreasing in N", ctx.out);
    require(sy0 >= c.y0_slope_min, "y0 error slope " + fmt(sy0) + " below " + fmt(c.y0_slope_min), ctx.out);
    require(sx >= c.x_slope_lo && sx <= c.x_slope_hi, "X error slope " + fmt(sx) + " outside range", ctx.out);
    require(sy >= c.y_slope_lo && sy <= c.y_slope_hi, "Y error slope " + fmt(sy) + " outside range", ctx.out);
    require(z_dec, "Z error is not strictly decreasing in N", ctx.out);
}

void run_beta_sweep(Context& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.problem.id != "adr") throw ConfigError("config: beta-sweep requires problem.id = adr");
    const auto& spec = cfg.beta_sweep;
    if (spec.betas.empty()) throw ConfigError("config: 'beta_sweep.betas' must not be empty");
    auto csv = open_out(ctx.file("beta_sweep.csv"));
    csv << "beta,fd_value,deep_fbsde_y0,deep_fbsde_rel_error,deep_fbsde_accurate,multi_fbsde_y0,"
           "multi_fbsde_rel_error,multi_fbsde_accurate\n";
    Series fd_s{"finite differences", {}, {}}, deep_s{"deep FBSDE", {}, {}}, multi_s{"multi-FBSDE", {}, {}};
    json rows = json::array();
    bool all_multi = true;
    for (double beta : spec.betas) {
        ProblemSpec ps = cfg.problem;
        ps.beta = beta;
        ps.gamma = spec.gamma;
        const auto params = problem_params(ps);
        const auto& a = std::get<AdrParams>(params);
        const auto problem = make_problem(params);
        FdOptions fo = cfg.reference.fd;
        fo.T = a.T;
        const double fd = fd_solve_adr(a.alpha, beta, spec.gamma, a.g, fo).value_at(a.x0(0), a.x0(1));

        TrainConfig t = effective_train_config(cfg);
        t.mode = TrainMode::deep_fbsde;
        t.y0_fixed.reset();
        const double deep = train(problem, {zero_shift()}, t).y0;
        t.mode = TrainMode::phase1;
        const double multi = train(problem, shift_preset(params, cfg.shifts), t).y0;
        const double e_deep = std::abs(deep - fd) / std::abs(fd);
        const double e_multi = std::abs(multi - fd) / std::abs(fd);
        const bool ok_deep = e_deep <= spec.tolerance, ok_multi = e_multi <= spec.tolerance;
        all_multi = all_multi && ok_multi;
        csv << beta << ',' << fd << ',' << deep << ',' << e_deep << ',' << ok_deep << ',' << multi << ',' << e_multi
            << ',' << ok_multi << '\n';
        for (auto* s : {&fd_s, &deep_s, &multi_s}) s->x.push_back(beta);
        fd_s.y.push_back(fd);
        deep_s.y.push_back(deep);
        multi_s.y.push_back(multi);
        rows.push_back({{"beta", beta},
                        {"fd_value", fd},
                        {"deep_fbsde_y0", deep},
                        {"deep_fbsde_rel_error", e_deep},
                        {"multi_fbsde_y0", multi},
                        {"multi_fbsde_rel_error", e_multi}});
        require(ok_multi, "multi-FBSDE error " + fmt(100 * e_multi) + "% at beta " + fmt(beta), ctx.out);
    }
    csv.close();
    SvgOptions o;
    o.log_x = std::all_of(spec.betas.begin(), spec.betas.end(), [](double b) { return b > 0; });
    o.scatter = false;
    o.title = "Initial value against beta";
    o.x_label = "beta";
    o.y_label = "y0";
    write_text(ctx.file("beta_sweep.svg"), render_svg({fd_s, deep_s, multi_s}, o));
    ctx.out.summary["rows"] = rows;
    ctx.out.summary["multi_fbsde_all_accurate"] = all_multi;
}

void run_reference(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto params = problem_params(cfg.problem);
    auto csv = open_out(ctx.file("reference.csv"));
    csv << "quantity,method,value,std_error\n";
    json rows = json::array();
    auto emit = [&](const std::string& q, const std::string& m, double v, double se) {
        csv << q << ',' << m << ',' << v << ',' << se << '\n';
        rows.push_back({{"quantity", q}, {"method", m}, {"value", v}, {"std_error", se}});
    };
    if (const auto* p = std::get_if<LqParams>(&params)) {
        const auto sol = solve_riccati(*p, cfg.reference.riccati_steps);
        const double v0 = lq_value(0.0, p->x0, sol);
        emit("y0", "riccati", v0, 0.0);
        const auto res = riccati_residual(*p, sol);
        emit("riccati_residual_P", "riccati", res.P, 0.0);
        emit("riccati_residual_Q", "riccati", res.Q, 0.0);
        emit("riccati_residual_R", "riccati", res.R, 0.0);
        const int N = 160;
        const auto grid = TimeGrid::make(N, p->T);
        const auto batch = sample_brownian_batch(derive_seed(cfg.seed, kFeedbackTag), cfg.reference.feedback_samples,
                                                 N, p->d(), grid.h);
        const auto cost = lq_feedback_cost(*p, sol, batch, grid);
        emit("y0", "feedback-monte-carlo", cost.value, cost.std_error);
        csv.close();
        write_riccati_csv(ctx.file("riccati.csv"), sol);
        require(std::abs(cost.value - v0) <= 3 * cost.std_error,
                "feedback cost " + fmt(cost.value) + " is more than 3 standard errors from " + fmt(v0), ctx.out);
    } else if (const auto* c = std::get_if<ControlledBmParams>(&params)) {
        const auto mc = cole_hopf_control_value(0.0, c->x0, c->g, c->r, c->sigma, c->T, cfg.reference.mc_samples,
                                                derive_seed(cfg.seed, kReferenceMcTag));
        emit("y0", "cole-hopf-monte-carlo", mc.value, mc.std_error);
        require(std::isfinite(mc.std_error) && mc.std_error > 0, "Monte Carlo standard error is degenerate", ctx.out);
    } else {
        const auto& a = std::get<AdrParams>(params);
        if (a.x0.size() != 2) throw ConfigError("config: the finite-difference reference needs a 2-D x0");
        FdOptions fo = cfg.reference.fd;
        fo.T = a.T;
        const auto grid = fd_solve_adr(a.alpha, a.beta, a.gamma, a.g, fo);
        const double fd = grid.value_at(a.x0(0), a.x0(1));
        emit("y0", "finite-differences", fd, 0.0);
        if (a.gamma == 0.0) {
            const auto mc = cole_hopf_adr_value(0.0, a.x0, a.g, a.alpha, a.beta, a.T, cfg.reference.mc_samples,
                                                derive_seed(cfg.seed, kReferenceMcTag));
            emit("y0", "cole-hopf-monte-carlo", mc.value, mc.std_error);
            require(std::abs(fd - mc.value) <= std::max(0.01 * std::abs(fd), 3 * mc.std_error),
                    "finite differences " + fmt(fd) + " and Monte Carlo " + fmt(mc.value) + " disagree", ctx.out);
        }
        csv.close();
        write_grid_csv(ctx.file("grid.csv"), grid);
    }
    ctx.out.summary["rows"] = rows;
}

void run_plot(Context& ctx) {
    const auto& spec = ctx.cfg.plot;
    if (spec.input.empty() || spec.output.empty() || spec.x.empty() || spec.y.empty())
        throw ConfigError("config: plot needs 'plot.input', 'plot.output', 'plot.x' and 'plot.y'");
    if (spec.style != "line" && spec.style != "scatter")
        throw ConfigError("config: unknown plot style '" + spec.style + "'");
    const auto table = read_csv(spec.input);
    const std::size_t xc = table.column(spec.x);
    std::vector<Series> series;
    for (const auto& name : spec.y) {
        const std::size_t yc = table.column(name);
        Series s{name, {}, {}};
        for (const auto& row : table.rows) {
            s.x.push_back(row[xc]);
            s.y.push_back(row[yc]);
        }
        series.push_back(std::move(s));
    }
    SvgOptions o;
    o.log_x = spec.log_x;
    o.log_y = spec.log_y;
    o.scatter = spec.style == "scatter";
    o.title = spec.title;
    o.x_label = spec.x;
    o.y_label = spec.y.size() == 1 ? spec.y.front() : "";
    std::filesystem::path target = spec.output;
    if (target.is_relative()) target = ctx.dir / target;
    write_text(target, render_svg(series, o));
    ctx.out.outputs.push_back(target);
}

// SVG helpers.

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string tick_label(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Axis {
    bool log = false;
    double lo = 0, hi = 1;
    double map(double v) const { return log ? std::log10(v) : v; }
    double unit(double v) const { return (map(v) - lo) / (hi - lo); }
};

Axis make_axis(const std::vector<Series>& series, bool log, bool use_x) {
    Axis a;
    a.log = log;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : series)
        for (double v : use_x ? s.x : s.y)
            if (std::isfinite(v)) {
                lo = std::min(lo, a.map(v));
                hi = std::max(hi, a.map(v));
            }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
        const double pad = std::max(1e-6, std::abs(lo) * 0.05);
        lo -= pad;
        hi += pad;
    }
    if (log) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
        if (hi == lo) hi = lo + 1;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

std::vector<double> ticks(const Axis& a) {
    std::vector<double> out;
    if (a.log) {
        const int step = std::max(1, static_cast<int>(std::ceil((a.hi - a.lo) / 8)));
        for (int e = static_cast<int>(a.lo); e <= static_cast<int>(a.hi); e += step) out.push_back(std::pow(10.0, e));
        return out;
    }
    const double raw = (a.hi - a.lo) / 5;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-9 * step; v += step)
        out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return out;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::train: return "train";
        case ExperimentKind::landscape: return "landscape";
        case ExperimentKind::converge: return "converge";
        case ExperimentKind::beta_sweep: return "beta-sweep";
        case ExperimentKind::reference: return "reference";
        case ExperimentKind::plot: return "plot";
    }
    return "train";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    for (auto k : {ExperimentKind::train, ExperimentKind::landscape, ExperimentKind::converge,
                   ExperimentKind::beta_sweep, ExperimentKind::reference, ExperimentKind::plot})
        if (to_string(k) == name) return k;
    throw ConfigError("config: unknown experiment '" + name + "'");
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    check_keys(j, {"experiment", "seed", "output_dir", "problem", "shifts", "mode", "train", "landscape", "converge",
                   "beta_sweep", "reference", "plot", "check"},
               "");
    if (j.contains("experiment")) {
        std::string e;
        read(j, "experiment", "", e);
        c.experiment = experiment_kind_from_string(e);
    }
    read(j, "seed", "", c.seed);
    read(j, "output_dir", "", c.output_dir);
    read(j, "shifts", "", c.shifts);
    read(j, "mode", "", c.mode);
    if (c.mode != "deep-fbsde" && c.mode != "phase1" && c.mode != "phase2" && c.mode != "phase1+phase2")
        throw ConfigError("config: unknown mode '" + c.mode + "'");
    if (j.contains("problem")) {
        const auto& p = j.at("problem");
        const std::string w = "problem";
        check_keys(p, {"id", "T", "x0", "r", "sigma", "alpha", "beta", "gamma"}, w);
        read(p, "id", w, c.problem.id);
        read(p, "T", w, c.problem.T);
        read(p, "x0", w, c.problem.x0);
        read(p, "r", w, c.problem.r);
        read(p, "sigma", w, c.problem.sigma);
        read(p, "alpha", w, c.problem.alpha);
        read(p, "beta", w, c.problem.beta);
        read(p, "gamma", w, c.problem.gamma);
    }
    if (j.contains("train")) parse_train(j.at("train"), c.train);
    if (j.contains("landscape")) {
        const auto& l = j.at("landscape");
        const std::string w = "landscape";
        check_keys(l, {"y0_grid", "objective", "samples", "epochs"}, w);
        read(l, "y0_grid", w, c.landscape.y0_grid);
        read(l, "objective", w, c.landscape.objective);
        read(l, "samples", w, c.landscape.samples);
        read(l, "epochs", w, c.landscape.epochs);
    }
    if (j.contains("converge")) {
        const auto& v = j.at("converge");
        check_keys(v, {"steps", "eval_samples"}, "converge");
        read(v, "steps", "converge", c.converge.steps);
        read(v, "eval_samples", "converge", c.converge.eval_samples);
    }
    if (j.contains("beta_sweep")) {
        const auto& b = j.at("beta_sweep");
        check_keys(b, {"betas", "gamma", "tolerance"}, "beta_sweep");
        read(b, "betas", "beta_sweep", c.beta_sweep.betas);
        read(b, "gamma", "beta_sweep", c.beta_sweep.gamma);
        read(b, "tolerance", "beta_sweep", c.beta_sweep.tolerance);
    }
    if (j.contains("reference")) {
        const auto& r = j.at("reference");
        const std::string w = "reference";
        check_keys(r, {"mc_samples", "feedback_samples", "riccati_steps", "fd"}, w);
        read(r, "mc_samples", w, c.reference.mc_samples);
        read(r, "feedback_samples", w, c.reference.feedback_samples);
        read(r, "riccati_steps", w, c.reference.riccati_steps);
        if (r.contains("fd")) {
            const auto& f = r.at("fd");
            const std::string wf = "reference.fd";
            check_keys(f, {"n_x", "n_t", "half_width", "cell_samples"}, wf);
            read(f, "n_x", wf, c.reference.fd.n_x);
            read(f, "n_t", wf, c.reference.fd.n_t);
            read(f, "half_width", wf, c.reference.fd.half_width);
            read(f, "cell_samples", wf, c.reference.fd.cell_samples);
        }
    }
    if (j.contains("plot")) {
        const auto& p = j.at("plot");
        const std::string w = "plot";
        check_keys(p, {"input", "output", "x", "y", "log_x", "log_y", "style", "title"}, w);
        read(p, "input", w, c.plot.input);
        read(p, "output", w, c.plot.output);
        read(p, "x", w, c.plot.x);
        if (p.contains("y") && p.at("y").is_string())
            c.plot.y = {p.at("y").get<std::string>()};
        else
            read(p, "y", w, c.plot.y);
        read(p, "log_x", w, c.plot.log_x);
        read(p, "log_y", w, c.plot.log_y);
        read(p, "style", w, c.plot.style);
        read(p, "title", w, c.plot.title);
    }
    if (j.contains("check")) {
        const auto& k = j.at("check");
        const std::string w = "check";
        check_keys(k, {"y0_rel_tol", "argmin_tol", "y0_slope_min", "x_slope_lo", "x_slope_hi", "y_slope_lo",
                       "y_slope_hi"},
                   w);
        read(k, "y0_rel_tol", w, c.check.y0_rel_tol);
        read(k, "argmin_tol", w, c.check.argmin_tol);
        read(k, "y0_slope_min", w, c.check.y0_slope_min);
        read(k, "x_slope_lo", w, c.check.x_slope_lo);
        read(k, "x_slope_hi", w, c.check.x_slope_hi);
        read(k, "y_slope_lo", w, c.check.y_slope_lo);
        read(k, "y_slope_hi", w, c.check.y_slope_hi);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config: cannot read " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + file.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    const auto& p = c.problem;
    const auto& f = c.reference.fd;
    json j = {
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"problem",
         {{"id", p.id},
          {"T", opt(p.T)},
          {"x0", opt(p.x0)},
          {"r", opt(p.r)},
          {"sigma", opt(p.sigma)},
          {"alpha", opt(p.alpha)},
          {"beta", p.beta},
          {"gamma", p.gamma}}},
        {"shifts", c.shifts},
        {"mode", c.mode},
        {"train", train_json(c.train)},
        {"landscape",
         {{"y0_grid", c.landscape.y0_grid},
          {"objective", c.landscape.objective},
          {"samples", c.landscape.samples},
          {"epochs", c.landscape.epochs}}},
        {"converge", {{"steps", c.converge.steps}, {"eval_samples", c.converge.eval_samples}}},
        {"beta_sweep",
         {{"betas", c.beta_sweep.betas}, {"gamma", c.beta_sweep.gamma}, {"tolerance", c.beta_sweep.tolerance}}},
        {"reference",
         {{"mc_samples", c.reference.mc_samples},
          {"feedback_samples", c.reference.feedback_samples},
          {"riccati_steps", c.reference.riccati_steps},
          {"fd",
           {{"n_x", f.n_x}, {"n_t", f.n_t}, {"half_width", f.half_width}, {"cell_samples", f.cell_samples}}}}},
        {"plot",
         {{"input", c.plot.input},
          {"output", c.plot.output},
          {"x", c.plot.x},
          {"y", c.plot.y},
          {"log_x", c.plot.log_x},
          {"log_y", c.plot.log_y},
          {"style", c.plot.style},
          {"title", c.plot.title}}},
        {"check",
         {{"y0_rel_tol", c.check.y0_rel_tol},
          {"argmin_tol", c.check.argmin_tol},
          {"y0_slope_min", c.check.y0_slope_min},
          {"x_slope_lo", c.check.x_slope_lo},
          {"x_slope_hi", c.check.x_slope_hi},
          {"y_slope_lo", c.check.y_slope_lo},
          {"y_slope_hi", c.check.y_slope_hi}}}};
    if (c.experiment) j["experiment"] = to_string(*c.experiment);
    return j;
}

ProblemParams problem_params(const ProblemSpec& spec) {
    auto apply_common = [&](auto& p) {
        if (spec.T) p.T = *spec.T;
        if (spec.x0) p.x0 = to_vector(*spec.x0);
    };
    if (spec.id == "lq") {
        auto p = default_lq_params();
        apply_common(p);
        if (p.x0.size() != p.A.rows()) throw ConfigError("config: 'problem.x0' must have 6 entries for lq");
        return p;
    }
    if (spec.id == "controlled-bm") {
        auto p = default_controlled_bm_params();
        apply_common(p);
        if (spec.r) p.r = *spec.r;
        if (spec.sigma) p.sigma = *spec.sigma;
        p.d = static_cast<int>(p.x0.size());
        if (p.d < 2) throw ConfigError("config: 'problem.x0' needs at least two entries");
        if (!(p.r > 0) || !(p.sigma > 0)) throw ConfigError("config: 'problem.r' and 'problem.sigma' must be positive");
        p.g = abs_gap_terminal(p.d);
        return p;
    }
    if (spec.id == "adr") {
        auto p = default_adr_params(spec.beta, spec.gamma);
        apply_common(p);
        if (spec.alpha) p.alpha = *spec.alpha;
        if (p.x0.size() < 2) throw ConfigError("config: 'problem.x0' needs at least two entries");
        if (!(p.alpha > 0) || !(p.beta > 0)) throw ConfigError("config: 'problem.alpha' and 'problem.beta' must be positive");
        p.g = abs_gap_terminal(static_cast<int>(p.x0.size()));
        return p;
    }
    throw ConfigError("config: unknown problem id '" + spec.id + "'");
}

TrainConfig effective_train_config(const ExperimentConfig& cfg) {
    TrainConfig t = cfg.train;
    t.seed = cfg.seed;
    return t;
}

ReferenceValue reference_y0(const ExperimentConfig& cfg, const ProblemParams& params) {
    if (const auto* p = std::get_if<LqParams>(&params))
        return {lq_value(0.0, p->x0, solve_riccati(*p, cfg.reference.riccati_steps)), 0.0, "riccati"};
    if (const auto* c = std::get_if<ControlledBmParams>(&params)) {
        const auto mc = cole_hopf_control_value(0.0, c->x0, c->g, c->r, c->sigma, c->T, cfg.reference.mc_samples,
                                                derive_seed(cfg.seed, kReferenceMcTag));
        return {mc.value, mc.std_error, "cole-hopf-monte-carlo"};
    }
    const auto& a = std::get<AdrParams>(params);
    if (a.x0.size() != 2) throw ConfigError("config: the finite-difference reference needs a 2-D x0");
    FdOptions fo = cfg.reference.fd;
    fo.T = a.T;
    return {fd_solve_adr(a.alpha, a.beta, a.gamma, a.g, fo).value_at(a.x0(0), a.x0(1)), 0.0, "finite-differences"};
}

std::string build_id() { return MULTIFBSDE_BUILD_ID; }

RunOutcome run_experiment(const ExperimentConfig& cfg, ExperimentKind kind) {
    Context ctx{cfg, cfg.output_dir, {}};
    std::filesystem::create_directories(ctx.dir);
    auto& s = ctx.out.summary;
    s["experiment"] = to_string(kind);
    s["config"] = to_json(cfg);
    s["seed"] = cfg.seed;
    s["build_id"] = build_id();
    switch (kind) {
        case ExperimentKind::train: run_train(ctx); break;
        case ExperimentKind::landscape: run_landscape(ctx); break;
        case ExperimentKind::converge: run_converge(ctx); break;
        case ExperimentKind::beta_sweep: run_beta_sweep(ctx); break;
        case ExperimentKind::reference: run_reference(ctx); break;
        case ExperimentKind::plot: run_plot(ctx); break;
    }
    s["seconds"] = seconds_since(ctx.start);
    s["check"] = {{"passed", ctx.out.check_passed}, {"messages", ctx.out.check_messages}};
    json outputs = json::array();
    for (const auto& o : ctx.out.outputs) outputs.push_back(o.string());
    s["outputs"] = outputs;
    write_text(ctx.dir / "summary.json", s.dump(2) + "\n");
    return std::move(ctx.out);
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError("plot: column '" + name + "' not found");
}

CsvTable read_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("plot: cannot read " + file.string());
    CsvTable t;
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::stringstream ss(l);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!l.empty() && l.back() == ',') cells.emplace_back();
        return cells;
    };
    if (!std::getline(in, line)) throw ConfigError("plot: " + file.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split(line);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line)) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            row.push_back(end != cell.c_str() && *end == '\0' ? v : std::numeric_limits<double>::quiet_NaN());
        }
        row.resize(t.header.size(), std::numeric_limits<double>::quiet_NaN());
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string render_svg(const std::vector<Series>& series, const SvgOptions& o) {
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ConfigError("plot: series '" + s.label + "' has mismatched lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (o.log_x && std::isfinite(s.x[i]) && s.x[i] <= 0)
                throw ConfigError("plot: log x axis needs positive values; series '" + s.label + "' row " +
                                  std::to_string(i + 1) + " has " + tick_label(s.x[i]));
            if (o.log_y && std::isfinite(s.y[i]) && s.y[i] <= 0)
                throw ConfigError("plot: log y axis needs positive values; series '" + s.label + "' row " +
                                  std::to_string(i + 1) + " has " + tick_label(s.y[i]));
        }
    }
    const double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    const Axis ax = make_axis(series, o.log_x, true);
    const Axis ay = make_axis(series, o.log_y, false);
    auto px = [&](double v) { return left + ax.unit(v) * pw; };
    auto py = [&](double v) { return top + (1 - ay.unit(v)) * ph; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(W, 0) << "\" height=\""
      << num(H, 0) << "\" viewBox=\"0 0 " << num(W, 0) << ' ' << num(H, 0) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(W, 0) << "\" height=\"" << num(H, 0) << "\" fill=\"white\"/>\n";
    if (!o.title.empty())
        s << "<text x=\"" << num(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
          << xml_escape(o.title) << "</text>\n";
    s << "<g stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(left + pw) << "\" y2=\""
      << num(top + ph) << "\"/>\n"
      << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
      << num(top + ph) << "\"/>\n";
    for (double v : ticks(ax))
        s << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(px(v)) << "\" y2=\""
          << num(top + ph + 5) << "\"/>\n";
    for (double v : ticks(ay))
        s << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(left) << "\" y2=\""
          << num(py(v)) << "\"/>\n";
    s << "</g>\n<g font-size=\"11\">\n";
    for (double v : ticks(ax))
        s << "<text x=\"" << num(px(v)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">"
          << tick_label(v) << "</text>\n";
    for (double v : ticks(ay))
        s << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">"
          << tick_label(v) << "</text>\n";
    if (!o.x_label.empty())
        s << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 10) << "\" text-anchor=\"middle\">"
          << xml_escape(o.x_label) << "</text>\n";
    if (!o.y_label.empty())
        s << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
          << num(top + ph / 2) << ")\">" << xml_escape(o.y_label) << "</text>\n";
    s << "</g>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& sr = series[k];
        const char* color = colors[k % 6];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < sr.x.size(); ++i)
            if (std::isfinite(sr.x[i]) && std::isfinite(sr.y[i])) pts.emplace_back(px(sr.x[i]), py(sr.y[i]));
        if (o.scatter) {
            s << "<g fill=\"" << color << "\">\n";
            for (const auto& [x, y] : pts) s << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3\"/>\n";
            s << "</g>\n";
        } else {
            s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < pts.size(); ++i)
                s << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
            s << "\"/>\n";
        }
        const double ly = top + 10 + 16 * static_cast<double>(k);
        s << "<rect x=\"" << num(left + pw - 150) << "\" y=\"" << num(ly - 4) << "\" width=\"14\" height=\"3\" fill=\""
          << color << "\"/>\n"
          << "<text x=\"" << num(left + pw - 130) << "\" y=\"" << num(ly) << "\" font-size=\"11\">"
          << xml_escape(sr.label) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot open " + file.string() + " for writing");
    out << text;
}

}  // namespace mfbsde::cli
