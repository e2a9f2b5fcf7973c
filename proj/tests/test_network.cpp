#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "multifbsde/errors.hpp"
#include "multifbsde/network.hpp"
#include "test_util.hpp"

using namespace mfbsde;

TEST_CASE("architecture parameter count") {
    MlpArch arch{2, 2, {20, 20, 20}};
    CHECK(arch.param_count() == 942);
    MlpArch bad{2, 2, {20, 0}};
    CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("initialization is seeded and scaled") {
    MlpArch arch{2, 2, {20, 20, 20}};
    const auto a = init_mlp(arch, RngStream(3, 0));
    const auto b = init_mlp(arch, RngStream(3, 0));
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].weight == b.layers[l].weight);
        CHECK(a.layers[l].bias.isZero());
    }
    MlpArch wide{2, 1, {1 << 11}};
    const auto w = init_mlp(wide, RngStream(4, 0));
    const Matrix& W = w.layers[0].weight;  // 2^12 entries, fan_in 2
    const double mean = W.mean();
    const double sd = std::sqrt((W.array() - mean).square().sum() / (W.size() - 1));
    CHECK(sd >= 0.9);
    CHECK(sd <= 1.1);
    const auto u = init_mlp(wide, RngStream(4, 0), InitScheme::uniform_scaled);
    CHECK(u.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(3.0));
}

TEST_CASE("mlp hand evaluations") {
    MlpArch arch{1, 1, {2}};
    MlpParams p = init_mlp(arch, RngStream(1, 0));
    p.layers[0].weight = (Matrix(2, 1) << 1, -1).finished();
    p.layers[0].bias = Matrix::Zero(1, 2);
    p.layers[1].weight = (Matrix(1, 2) << 1, 1).finished();
    p.layers[1].bias = Matrix::Zero(1, 1);
    CHECK(mlp_eval(p, Matrix::Constant(1, 1, 0.5))(0, 0) == 0.5);

    MlpParams zero = init_mlp(MlpArch{3, 2, {4, 4}}, RngStream(2, 0));
    for (auto& l : zero.layers) l.weight.setZero();
    zero.layers.back().bias = testutil::row({1.5, -2});
    const Matrix out = mlp_eval(zero, standard_normal_matrix(5, 7, 3));
    for (int i = 0; i < 7; ++i) CHECK(out.row(i) == testutil::row({1.5, -2}));
}

TEST_CASE("tape and value paths agree bit for bit") {
    MlpParams p = init_mlp(MlpArch{3, 2, {8, 8}}, RngStream(9, 0));
    const Matrix x = standard_normal_matrix(1, 5, 3);
    Tape t;
    const NodeId out = mlp_apply(p, t.constant(x), t);
    CHECK(t.value(out) == mlp_eval(p, x));
}

TEST_CASE("gradient of squared output matches finite differences") {
    MlpParams p = init_mlp(MlpArch{2, 2, {6, 6}}, RngStream(11, 0));
    const Matrix x = standard_normal_matrix(12, 4, 2);
    StepNets nets;
    nets.nets = {p};
    nets.steps = 1;
    nets.y0_trainable = false;
    auto loss_of = [&](const Vector& th) {
        StepNets c = nets;
        unflatten_params(th, c);
        const Matrix o = mlp_eval(c.nets[0], x);
        return o.squaredNorm();
    };
    Tape t;
    BoundNets bound(nets, t);
    const NodeId o = bound.apply(0, 0.0, t.constant(x), t);
    const auto grads = t.backward(t.sum(t.square(o)));
    const Vector g = flatten_gradient(nets, bound, std::nullopt, grads);
    const Vector fd = finite_difference_gradient(loss_of, flatten_params(nets), 1e-6);
    CHECK(testutil::rel_l2(g, fd) < 1e-4);
}

TEST_CASE("output is homogeneous in the final weights and piecewise linear in x") {
    MlpParams p = init_mlp(MlpArch{2, 3, {10, 10}}, RngStream(13, 0));
    const Matrix x = standard_normal_matrix(14, 6, 2);
    MlpParams q = p;
    q.layers.back().weight *= 2.5;
    CHECK((mlp_eval(q, x) - 2.5 * mlp_eval(p, x)).cwiseAbs().maxCoeff() < 1e-12);

    const Matrix x0 = standard_normal_matrix(15, 1, 2);
    const Matrix dir = testutil::row({0.6, -0.8});
    auto slope = [&](double eps) { return ((mlp_eval(p, x0 + eps * dir) - mlp_eval(p, x0)) / eps).eval(); };
    CHECK((slope(1e-6) - slope(2e-6)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("flatten round trip and layout sizes") {
    auto nets = make_step_nets(3, 2, 4, {5, 5}, 21);
    const int per = MlpArch{3, 2, {5, 5}}.param_count();
    CHECK(flat_size(nets) == 4 * per + 1);
    Vector flat = flatten_params(nets);
    flat.array() += 0.25;
    StepNets copy = nets;
    unflatten_params(flat, copy);
    CHECK(flatten_params(copy) == flat);
    nets.y0_trainable = false;
    CHECK(flat_size(nets) == 4 * per);
    CHECK_THROWS_AS(unflatten_params(Vector::Zero(3), copy), ParameterError);

    auto shared = make_step_nets(3, 2, 4, {5, 5}, 21, InitScheme::he_normal, true);
    CHECK(shared.nets.size() == 1);
    CHECK(flat_size(shared) == MlpArch{4, 2, {5, 5}}.param_count() + 1);
}

TEST_CASE("checkpoint round trip") {
    auto nets = make_step_nets(2, 2, 3, {4}, 5);
    nets.y0 = 1.25;
    const auto dir = std::filesystem::temp_directory_path() / "mfbsde_ckpt_test";
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "net", nets);
    const auto back = load_checkpoint(dir / "net");
    CHECK(back.y0 == 1.25);
    CHECK(back.steps == 3);
    CHECK(flatten_params(back) == flatten_params(nets));
    std::filesystem::remove_all(dir);
}
