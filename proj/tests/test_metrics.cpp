#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lq_support.hpp"
#include "multifbsde/errors.hpp"
#include "multifbsde/metrics.hpp"
#include "multifbsde/train.hpp"
#include "test_util.hpp"

using namespace mfbsde;

namespace {

std::vector<Matrix> random_process(std::uint64_t seed, int steps, int M, int dim) {
    std::vector<Matrix> out;
    for (int n = 0; n < steps; ++n) out.push_back(standard_normal_matrix(seed * 100 + n, M, dim));
    return out;
}

std::vector<Matrix> scaled(std::vector<Matrix> a, double s) {
    for (auto& m : a) m *= s;
    return a;
}

std::vector<Matrix> sum(std::vector<Matrix> a, const std::vector<Matrix>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

}  // namespace

TEST_CASE("S2 norm") {
    std::vector<Matrix> c(4, Matrix::Constant(5, 1, -2.0));
    CHECK(s2_norm(c) == doctest::Approx(2.0));
    std::vector<Matrix> one = {testutil::row({3, 4}), testutil::row({0, 0})};
    CHECK(s2_norm(one) == doctest::Approx(5.0));
    const auto a = random_process(1, 5, 8, 3);
    CHECK(s2_norm(scaled(a, -2.5)) == doctest::Approx(2.5 * s2_norm(a)).epsilon(1e-14));
    CHECK_THROWS_AS(s2_norm(std::vector<Matrix>{}), ParameterError);
}

TEST_CASE("H2 norm as displayed") {
    std::vector<Matrix> c(3, Matrix::Constant(4, 2, 0.5));
    CHECK(h2_norm(c) == doctest::Approx(std::sqrt(0.5)));
    std::vector<Matrix> two = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 3.0)};
    CHECK(h2_norm(two) == doctest::Approx(2.0));
    CHECK(h2_norm_time_weighted(two, 0.5) == doctest::Approx(std::sqrt(0.5 * 10.0)));
    const auto a = random_process(2, 5, 8, 3);
    CHECK(h2_norm(scaled(a, 3.0)) == doctest::Approx(3.0 * h2_norm(a)).epsilon(1e-14));
    CHECK_THROWS_AS(h2_norm(std::vector<Matrix>{}), ParameterError);
    std::vector<Matrix> ragged = {Matrix::Zero(2, 1), Matrix::Zero(3, 1)};
    CHECK_THROWS_AS(h2_norm(ragged), ParameterError);
}

TEST_CASE("norm triangle inequality on random inputs") {
    for (std::uint64_t s = 1; s <= 10; ++s) {
        const auto a = random_process(s, 6, 10, 2);
        const auto b = random_process(s + 50, 6, 10, 2);
        CHECK(s2_norm(sum(a, b)) <= s2_norm(a) + s2_norm(b) + 1e-12);
        CHECK(h2_norm(sum(a, b)) <= h2_norm(a) + h2_norm(b) + 1e-12);
    }
}

TEST_CASE("error report") {
    const auto p = default_lq_params();
    const auto sol = solve_riccati(p, 20 * 128);
    const auto grid = TimeGrid::make(20, p.T);
    const auto batch = sample_brownian_batch(4, 64, 20, 6, grid.h);
    const auto ref = lq_reference_paths(p, sol, batch, grid);
    const auto zero = error_report(ref, ref, 1.0, 1.0);
    CHECK(zero.x_error == 0.0);
    CHECK(zero.y_error == 0.0);
    CHECK(zero.z_error == 0.0);
    CHECK(zero.y0_abs_error == 0.0);
    auto shifted_y = ref;
    shifted_y.Y.array() += 1.0;
    const auto r = error_report(shifted_y, ref, 9.0, 8.0);
    CHECK(r.y_error == doctest::Approx(1.0));
    CHECK(r.x_error == 0.0);
    CHECK(r.z_error == 0.0);
    CHECK(r.y0_rel_error == doctest::Approx(0.125));
    const auto swapped = error_report(ref, shifted_y, 8.0, 9.0);
    CHECK(swapped.y_error == r.y_error);
    CHECK(swapped.y0_abs_error == r.y0_abs_error);
    auto other = ref;
    other.grid = TimeGrid::make(10, p.T);
    CHECK_THROWS_AS(error_report(other, ref, 0, 0), ParameterError);
    CHECK(ErrorReport::csv_header().rfind("N,M,", 0) == 0);
}

TEST_CASE("trained networks beat untrained ones against the reference") {
    const ProblemParams pp = default_lq_params();
    const auto p = std::get<LqParams>(pp);
    const auto c = make_problem(pp);
    const auto sol = solve_riccati(p);
    const double v0 = lq_value(0.0, p.x0, sol);
    TrainConfig cfg;
    cfg.samples = 1 << 12;
    cfg.batch_size = 1 << 9;
    cfg.epochs = 8;
    cfg.steps = 10;
    cfg.mode = TrainMode::phase2;
    cfg.y0_fixed = v0;
    const auto trained = train(c, {}, cfg);
    const auto grid = TimeGrid::make(10, p.T);
    const auto batch = sample_brownian_batch(77, 512, 10, 6, grid.h);
    const auto ref = lq_reference_paths(p, sol, batch, grid);
    const auto good = detached_rollout(shifted(c, zero_shift()), trained.nets, v0, batch, grid);
    auto fresh = make_step_nets(6, 6, 10, cfg.hidden, 12345);
    const auto bad = detached_rollout(shifted(c, zero_shift()), fresh, v0, batch, grid);
    const auto rg = error_report(good, ref, v0, v0);
    const auto rb = error_report(bad, ref, v0, v0);
    CHECK(std::isfinite(rg.x_error));
    CHECK(std::isfinite(rg.z_error));
    CHECK(rg.y_error < rb.y_error);
}

TEST_CASE("log-log slope fit") {
    std::vector<std::pair<double, double>> lin, half;
    for (double h : {0.1, 0.05, 0.025, 0.0125}) {
        lin.emplace_back(h, 3.0 * h);
        half.emplace_back(h, 2.0 * std::sqrt(h));
    }
    CHECK(std::abs(fit_loglog_slope(lin).slope - 1.0) < 1e-12);
    CHECK(std::abs(fit_loglog_slope(half).slope - 0.5) < 1e-12);
    auto shuffled = lin;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[0], shuffled[2]);
    CHECK(fit_loglog_slope(shuffled).slope == fit_loglog_slope(lin).slope);
    CHECK(fit_loglog_slope(shuffled).intercept == fit_loglog_slope(lin).intercept);
    CHECK_THROWS_AS(fit_loglog_slope({{0.1, 1.0}}), ParameterError);
    CHECK_THROWS_AS(fit_loglog_slope({{0.1, 1.0}, {0.2, 0.0}}), ParameterError);
}
