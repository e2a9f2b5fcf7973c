#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "multifbsde/errors.hpp"
#include "multifbsde/train.hpp"
#include "test_util.hpp"

using namespace mfbsde;

namespace {

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.samples = 256;
    cfg.batch_size = 64;
    cfg.epochs = 2;
    cfg.steps = 4;
    cfg.hidden = {6};
    cfg.eval_samples = 128;
    cfg.shard_size = 32;
    return cfg;
}

}  // namespace

TEST_CASE("adam update rule") {
    AdamState s(1);
    Vector th = Vector::Constant(1, 2.0);
    adam_step(s, th, Vector::Zero(1), 0.1);
    CHECK(th(0) == 2.0);

    AdamState s1(1);
    Vector t1 = Vector::Zero(1);
    adam_step(s1, t1, Vector::Ones(1), 0.1);
    CHECK(t1(0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    const double after_one = t1(0);
    adam_step(s1, t1, Vector::Ones(1), 0.1);
    CHECK(t1(0) < after_one);
    CHECK(s1.step == 2);
    CHECK((s1.v.array() >= 0).all());
    CHECK_THROWS_AS(adam_step(s1, t1, Vector::Ones(2), 0.1), ParameterError);
}

TEST_CASE("learning rate schedule") {
    TrainConfig cfg;  // 2^8 iterations per epoch
    const long ipe = cfg.iterations_per_epoch();
    CHECK(lr_schedule(0, cfg) == 1e-2);
    CHECK(lr_schedule(ipe - 1, cfg) == 1e-2);
    CHECK(lr_schedule(3 * ipe, cfg) == 1e-2);
    CHECK(lr_schedule(4 * ipe, cfg) == doctest::Approx(1e-2 * std::exp(-0.5)));
    CHECK(lr_schedule(6 * ipe, cfg) == doctest::Approx(1e-2 * std::exp(-1.5)));
    cfg.schedule = LrSchedule::constant;
    CHECK(lr_schedule(9 * ipe, cfg) == 1e-2);
}

TEST_CASE("configuration pre-flight") {
    auto cfg = small_config();
    cfg.batch_size = 100;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.mode = TrainMode::phase2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.y0_fixed = 1.0;
    CHECK_NOTHROW(cfg.validate());
    cfg.mode = TrainMode::deep_fbsde;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(train_mode_from_string("phase1") == TrainMode::phase1);
    CHECK(to_string(TrainMode::deep_fbsde) == "deep-fbsde");
    CHECK_THROWS_AS(train_mode_from_string("phase3"), ConfigError);
    const auto desk = desk_profile(TrainConfig{});
    CHECK(desk.samples == (1 << 16));
    CHECK(desk.batch_size == (1 << 10));
    CHECK(desk.epochs == 4);
}

TEST_CASE("frozen toy drives y0 to zero") {
    const auto c = frozen_problem(1, 1, 1.0);
    TrainConfig cfg = small_config();
    cfg.samples = 64;
    cfg.batch_size = 64;
    cfg.epochs = 200;
    cfg.y0_init = 0.5;
    cfg.lr = 1e-2;
    cfg.schedule = LrSchedule::constant;
    const auto r = train(c, {zero_shift()}, cfg);
    CHECK(r.history.size() == 200);
    CHECK(std::abs(r.y0) < 1e-3);
    // Loss equals y0^2 exactly on this problem.
    for (std::size_t i = 0; i < r.history.size(); ++i)
        CHECK(r.history.loss[i] == doctest::Approx(r.history.y0[i] * r.history.y0[i]).epsilon(1e-12));
}

TEST_CASE("frozen toy loss does not increase across 50-iteration windows") {
    const auto c = frozen_problem(1, 1, 1.0);
    TrainConfig cfg = small_config();
    cfg.samples = 64;
    cfg.batch_size = 64;
    cfg.epochs = 400;
    cfg.y0_init = 0.5;
    const auto r = train(c, {zero_shift()}, cfg);
    for (std::size_t i = 100; i + 50 < r.history.size(); ++i) CHECK(r.history.loss[i + 50] <= r.history.loss[i]);
}

TEST_CASE("training is deterministic and thread independent") {
    const ProblemParams pp = default_adr_params(0.6, 1.0);
    const auto c = make_problem(pp);
    auto cfg = small_config();
    cfg.mode = TrainMode::phase1;
    const auto a = train(c, shift_preset(pp, "K2"), cfg);
    const auto b = train(c, shift_preset(pp, "K2"), cfg);
    CHECK(a.history.loss == b.history.loss);
    CHECK(a.history.y0 == b.history.y0);
    cfg.threads = 3;
    const auto t = train(c, shift_preset(pp, "K2"), cfg);
    CHECK(t.history.loss == a.history.loss);
    CHECK(flatten_params(t.nets) == flatten_params(a.nets));
}

TEST_CASE("K1 phase1 equals deep FBSDE bit for bit") {
    const ProblemParams pp = default_controlled_bm_params();
    const auto c = make_problem(pp);
    auto cfg = small_config();
    cfg.mode = TrainMode::deep_fbsde;
    const auto a = train(c, shift_preset(pp, "K2"), cfg);
    cfg.mode = TrainMode::phase1;
    const auto b = train(c, shift_preset(pp, "K1"), cfg);
    CHECK(a.history.loss == b.history.loss);
    CHECK(a.y0 == b.y0);
}

TEST_CASE("phase2 never mutates y0 and warm starts") {
    const ProblemParams pp = default_controlled_bm_params();
    const auto c = make_problem(pp);
    auto cfg = small_config();
    cfg.mode = TrainMode::phase1;
    const auto p1 = train(c, shift_preset(pp, "K2"), cfg);
    cfg.mode = TrainMode::phase2;
    cfg.y0_fixed = 0.1234567890123;
    const auto p2 = train(c, {}, cfg, &p1.nets);
    CHECK(p2.y0 == 0.1234567890123);
    for (double y : p2.history.y0) CHECK(y == 0.1234567890123);
    CHECK(flat_size(p2.nets) == flat_size(p1.nets) - 1);
}

TEST_CASE("gradient of the sharded objective matches finite differences") {
    const ProblemParams pp = default_adr_params(0.6, 1.0);
    const auto c = make_problem(pp);
    auto nets = make_step_nets(2, 2, 3, {4}, 8);
    nets.y0 = -0.1;
    const auto grid = TimeGrid::make(3, c.T);
    const auto batch = sample_brownian_batch(4, 12, 3, 2, grid.h);
    const auto shifts = shift_preset(pp, "K2");
    const auto lg = objective_gradient(c, shifts, nets, batch, grid, 5, 1);
    auto f = [&](const Vector& th) {
        StepNets n = nets;
        unflatten_params(th, n);
        return objective_gradient(c, shifts, n, batch, grid, 5, 1).loss;
    };
    const Vector fd = finite_difference_gradient(f, flatten_params(nets), 1e-6);
    CHECK(testutil::rel_l2(lg.grad, fd) < 1e-5);
    CHECK(lg.loss == doctest::Approx(evaluate_objective(c, shifts, nets, batch, grid)).epsilon(1e-12));
}

TEST_CASE("landscape of the frozen toy is y0 squared") {
    const auto c = frozen_problem(1, 1, 1.0);
    auto cfg = small_config();
    const auto pts = mse_landscape(c, {zero_shift()}, {-2.0, -0.5, 0.0, 1.0, 3.0}, cfg);
    REQUIRE(pts.size() == 5);
    for (const auto& p : pts) CHECK(p.mse == doctest::Approx(p.y0 * p.y0).epsilon(1e-14));
    CHECK_THROWS_AS(mse_landscape(c, {zero_shift()}, {}, cfg), ConfigError);
}

TEST_CASE("history CSV layout") {
    TrainHistory h;
    h.loss = {2.0, 1.0};
    h.y0 = {0.5, 0.25};
    h.lr = {0.01, 0.01};
    h.seconds = {0.1, 0.2};
    const auto file = std::filesystem::temp_directory_path() / "mfbsde_hist.csv";
    write_history_csv(file, h);
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    CHECK(line == "iteration,loss,y0,lr");
    std::getline(in, line);
    CHECK(line.rfind("0,2,0.5,", 0) == 0);
    std::filesystem::remove(file);
}
