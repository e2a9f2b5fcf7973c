#include "multifbsde/model.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

#include "multifbsde/errors.hpp"

namespace mfbsde {
namespace {

Matrix row(const Vector& v) { return v.transpose(); }

NodeId batch_zeros(Tape& tape, NodeId like, Eigen::Index cols) {
    return tape.constant(Matrix::Zero(tape.value(like).rows(), cols));
}

// psi(t, x, y, z) = s * A (C - xi(x)), xi acting coordinate-wise.
StateFn scaled_b1(const LqParams& p, double s, std::function<NodeId(Tape&, NodeId)> xi) {
    const Matrix w = -s * p.A;
    const Matrix bias = s * row(p.A * p.C);
    return [w, bias, xi = std::move(xi)](Tape& tape, double, NodeId x, NodeId, NodeId) {
        const NodeId arg = xi ? xi(tape, x) : x;
        return tape.affine(arg, tape.constant(w), tape.constant(bias));
    };
}

StateFn scaled_z(double s) {
    return [s](Tape& tape, double, NodeId, NodeId, NodeId z) { return tape.scale(z, s); };
}

std::function<NodeId(Tape&, NodeId)> xi_map(const std::string& id) {
    if (id == "x") return {};
    if (id == "neg-sin") return [](Tape& t, NodeId x) { return t.scale(t.sin(x), -1.0); };
    if (id == "x-cos") return [](Tape& t, NodeId x) { return t.mul(x, t.cos(x)); };
    if (id == "one-minus-exp")
        return [](Tape& t, NodeId x) {
            const NodeId e = t.exp(t.clamp(x, -1.0, 1.0));
            return t.sub(t.scalar(1.0), e);
        };
    throw ConfigError("shift_preset: unknown xi map '" + id + "'");
}

Vector scalar_or_vector(const Matrix& m) { return m.row(0).transpose(); }

struct PointTape {
    Tape tape;
    NodeId x, y, z;
    PointTape(const Vector& xv, double yv, const Vector& zv)
        : x(tape.constant(row(xv))), y(tape.scalar(yv)), z(tape.constant(row(zv))) {}
};

DiffusionFn constant_diffusion(const Matrix& sigma) {
    return [sigma](Tape& tape, double, NodeId, NodeId dw) { return tape.matvec(tape.constant(sigma), dw); };
}

}  // namespace

DriftShift zero_shift() {
    DriftShift s;
    s.label = "zero";
    s.zero = true;
    s.psi = [](Tape& tape, double, NodeId x, NodeId, NodeId) { return batch_zeros(tape, x, tape.value(x).cols()); };
    return s;
}

ShiftedCoefficients::ShiftedCoefficients(CoefficientSet base, DriftShift shift)
    : base_(std::move(base)), shift_(std::move(shift)) {}

ShiftedCoefficients::Terms ShiftedCoefficients::terms(Tape& tape, double t, NodeId x, NodeId y, NodeId z) const {
    const NodeId b = base_.drift(tape, t, x, y, z);
    const NodeId f = base_.driver(tape, t, x, y, z);
    if (shift_.zero) return {b, f};
    const NodeId psi = shift_.psi(tape, t, x, y, z);
    if (tape.value(psi).cols() != base_.d) throw GraphError("shifted: shift output dimension differs from d");
    return {tape.sub(b, psi), tape.add(f, tape.inner(z, psi))};
}

ShiftedCoefficients shifted(CoefficientSet base, DriftShift shift) {
    if (!shift.psi) throw ParameterError("shifted: empty shift");
    ShiftedCoefficients out(std::move(base), std::move(shift));
    if (!out.shift().zero) {
        const auto& b = out.base();
        const Vector psi = eval_shift(out.shift(), 0.0, b.x0, 0.0, Vector::Zero(b.k));
        if (psi.size() != b.d) throw GraphError("shifted: shift output dimension differs from d");
    }
    return out;
}

Vector eval_drift(const CoefficientSet& c, double t, const Vector& x, double y, const Vector& z) {
    PointTape p(x, y, z);
    return scalar_or_vector(p.tape.value(c.drift(p.tape, t, p.x, p.y, p.z)));
}

double eval_driver(const CoefficientSet& c, double t, const Vector& x, double y, const Vector& z) {
    PointTape p(x, y, z);
    return p.tape.value(c.driver(p.tape, t, p.x, p.y, p.z))(0, 0);
}

double eval_terminal(const CoefficientSet& c, const Vector& x) {
    Tape tape;
    return tape.value(c.terminal(tape, tape.constant(row(x))))(0, 0);
}

Vector eval_terminal_batch(const TerminalFn& g, const Matrix& x) {
    Tape tape;
    return tape.value(g(tape, tape.constant(x))).col(0);
}

Vector eval_terms_drift(const ShiftedCoefficients& c, double t, const Vector& x, double y, const Vector& z) {
    PointTape p(x, y, z);
    return scalar_or_vector(p.tape.value(c.terms(p.tape, t, p.x, p.y, p.z).drift));
}

double eval_terms_driver(const ShiftedCoefficients& c, double t, const Vector& x, double y, const Vector& z) {
    PointTape p(x, y, z);
    return p.tape.value(c.terms(p.tape, t, p.x, p.y, p.z).driver)(0, 0);
}

Vector eval_shift(const DriftShift& s, double t, const Vector& x, double y, const Vector& z) {
    PointTape p(x, y, z);
    return scalar_or_vector(p.tape.value(s.psi(p.tape, t, p.x, p.y, p.z)));
}

TerminalFn abs_gap_terminal(int d) {
    if (d < 2) throw ParameterError("abs_gap_terminal: needs d >= 2");
    Matrix w = Matrix::Zero(1, d);
    w(0, 0) = 1.0;
    w(0, 1) = -1.0;
    return [w](Tape& tape, NodeId x) { return tape.scale(tape.abs(tape.matvec(tape.constant(w), x)), -1.0); };
}

TerminalFn constant_terminal(double c) {
    return [c](Tape& tape, NodeId x) { return tape.constant(Matrix::Constant(tape.value(x).rows(), 1, c)); };
}

void LqParams::validate(bool require_full_rank) const {
    const auto n = A.rows();
    const auto l = B.cols();
    if (A.cols() != n || B.rows() != n || C.size() != n || sigma.rows() != n || sigma.cols() != n ||
        R_x.rows() != n || R_x.cols() != n || G.rows() != n || G.cols() != n || R_u.rows() != l ||
        R_u.cols() != l || x0.size() != n)
        throw ParameterError("LqParams: inconsistent dimensions");
    if (!(T > 0.0)) throw ParameterError("LqParams: horizon must be positive");
    auto symmetric = [](const Matrix& m) { return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()); };
    if (!symmetric(R_x) || !symmetric(R_u) || !symmetric(G)) throw ParameterError("LqParams: R_x, R_u and G must be symmetric");
    auto min_eig = [](const Matrix& m) { return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff(); };
    if (min_eig(R_x) < -1e-12 || min_eig(G) < -1e-12) throw ParameterError("LqParams: R_x and G must be positive semidefinite");
    if (!(min_eig(R_u) > 0.0)) throw ParameterError("LqParams: R_u must be positive definite");
    if (require_full_rank && Eigen::ColPivHouseholderQR<Matrix>(B).rank() != l) throw ParameterError("LqParams: B must have full column rank");
}

LqParams default_lq_params() {
    LqParams p;
    p.A = Vector((Vector(6) << 1, 2, 3, 1, 2, 3).finished()).asDiagonal();
    p.B = (Matrix(6, 2) << 1, -1, 1, 1, 0.5, 1, 1, -1, 0, -1, 0, 1).finished();
    p.C = (Vector(6) << -0.2, -0.1, 0.0, 0.0, 0.1, 0.2).finished();
    p.sigma = Vector((Vector(6) << 0.2, 1, 0.2, 1, 0.2, 1).finished()).asDiagonal();
    p.R_x = Vector((Vector(6) << 25, 1, 25, 1, 25, 1).finished()).asDiagonal();
    p.R_u = Matrix::Identity(2, 2);
    p.G = Vector((Vector(6) << 1, 25, 1, 25, 1, 25).finished()).asDiagonal();
    p.x0 = Vector::Constant(6, 0.1);
    p.T = 0.5;
    return p;
}

ControlledBmParams default_controlled_bm_params() {
    ControlledBmParams p;
    p.d = 2;
    p.r = 1.0;
    p.sigma = 0.25;
    p.x0 = (Vector(2) << -0.1, 0.1).finished();
    p.T = 0.5;
    p.g = abs_gap_terminal(2);
    return p;
}

AdrParams default_adr_params(double beta, double gamma) {
    AdrParams p;
    p.alpha = 0.0315;
    p.beta = beta;
    p.gamma = gamma;
    p.x0 = (Vector(2) << -0.1, 0.1).finished();
    p.T = 0.5;
    p.g = abs_gap_terminal(2);
    return p;
}

CoefficientSet lq_problem(const LqParams& p) {
    p.validate();
    const Eigen::LLT<Matrix> ru(p.R_u);
    if (ru.info() != Eigen::Success) throw ParameterError("lq_problem: R_u is not invertible");
    const Matrix ru_inv = ru.solve(Matrix::Identity(p.R_u.rows(), p.R_u.cols()));
    const Matrix neg_a = -p.A;
    const Matrix ac = row(p.A * p.C);
    const Matrix coupling = 0.5 * p.B * ru_inv * p.B.transpose();
    const Matrix bt = p.B.transpose();
    const Matrix quarter_ru_inv = 0.25 * ru_inv;

    CoefficientSet c;
    c.name = "lq";
    c.d = p.d();
    c.k = static_cast<int>(p.sigma.cols());
    c.T = p.T;
    c.x0 = p.x0;
    c.drift = [neg_a, ac, coupling](Tape& tape, double, NodeId x, NodeId, NodeId z) {
        const NodeId mean_reversion = tape.affine(x, tape.constant(neg_a), tape.constant(ac));
        return tape.sub(mean_reversion, tape.matvec(tape.constant(coupling), z));
    };
    c.diffuse = constant_diffusion(p.sigma);
    c.sigma = [s = p.sigma](double, const Vector&) { return s; };
    c.driver = [rx = p.R_x, bt, quarter_ru_inv](Tape& tape, double, NodeId x, NodeId, NodeId z) {
        const NodeId state_cost = tape.inner(tape.matvec(tape.constant(rx), x), x);
        const NodeId btz = tape.matvec(tape.constant(bt), z);
        const NodeId control_cost = tape.inner(tape.matvec(tape.constant(quarter_ru_inv), btz), btz);
        return tape.add(state_cost, control_cost);
    };
    c.terminal = [g = p.G](Tape& tape, NodeId x) { return tape.inner(tape.matvec(tape.constant(g), x), x); };
    return c;
}

CoefficientSet controlled_bm_problem(const ControlledBmParams& p) {
    if (!(p.r > 0.0)) throw ParameterError("controlled_bm_problem: r must be positive");
    if (!(p.sigma > 0.0)) throw ParameterError("controlled_bm_problem: sigma must be positive");
    if (p.x0.size() != p.d) throw ParameterError("controlled_bm_problem: x0 dimension differs from d");
    const Matrix sigma = p.sigma * Matrix::Identity(p.d, p.d);

    CoefficientSet c;
    c.name = "controlled-bm";
    c.d = p.d;
    c.k = p.d;
    c.T = p.T;
    c.x0 = p.x0;
    c.drift = [r = p.r](Tape& tape, double, NodeId, NodeId, NodeId z) { return tape.scale(z, -1.0 / r); };
    c.diffuse = constant_diffusion(sigma);
    c.sigma = [sigma](double, const Vector&) { return sigma; };
    c.driver = [r = p.r](Tape& tape, double, NodeId, NodeId, NodeId z) {
        return tape.scale(tape.inner(z, z), 1.0 / (2.0 * r));
    };
    c.terminal = p.g ? p.g : abs_gap_terminal(p.d);
    return c;
}

CoefficientSet adr_problem(const AdrParams& p) {
    if (!(p.alpha > 0.0)) throw ParameterError("adr_problem: alpha must be positive");
    if (!(p.beta > 0.0)) throw ParameterError("adr_problem: beta must be positive");
    const int d = static_cast<int>(p.x0.size());
    if (d < 1) throw ParameterError("adr_problem: empty x0");
    const Matrix sigma = std::sqrt(2.0 * p.alpha) * Matrix::Identity(d, d);

    CoefficientSet c;
    c.name = "adr";
    c.d = d;
    c.k = d;
    c.T = p.T;
    c.x0 = p.x0;
    c.drift = [beta = p.beta](Tape& tape, double, NodeId, NodeId, NodeId z) { return tape.scale(z, beta); };
    c.diffuse = constant_diffusion(sigma);
    c.sigma = [sigma](double, const Vector&) { return sigma; };
    c.driver = [beta = p.beta, gamma = p.gamma](Tape& tape, double, NodeId, NodeId y, NodeId z) {
        const NodeId quad = tape.scale(tape.inner(z, z), beta);
        if (gamma == 0.0) return quad;
        return tape.sub(quad, tape.scale(y, gamma));
    };
    c.terminal = p.g ? p.g : abs_gap_terminal(d);
    return c;
}

CoefficientSet frozen_problem(int d, int k, double T, TerminalFn g) {
    if (d < 1 || k < 1) throw ParameterError("frozen_problem: dimensions must be >= 1");
    CoefficientSet c;
    c.name = "frozen";
    c.d = d;
    c.k = k;
    c.T = T;
    c.x0 = Vector::Zero(d);
    c.drift = [d](Tape& tape, double, NodeId x, NodeId, NodeId) { return batch_zeros(tape, x, d); };
    c.diffuse = [d](Tape& tape, double, NodeId x, NodeId) { return batch_zeros(tape, x, d); };
    c.sigma = [d, k](double, const Vector&) { return Matrix::Zero(d, k).eval(); };
    c.driver = [](Tape& tape, double, NodeId x, NodeId, NodeId) { return batch_zeros(tape, x, 1); };
    c.terminal = g ? std::move(g) : constant_terminal(0.0);
    return c;
}

CoefficientSet make_problem(const ProblemParams& params) {
    return std::visit(
        [](const auto& p) -> CoefficientSet {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, LqParams>) return lq_problem(p);
            else if constexpr (std::is_same_v<P, ControlledBmParams>) return controlled_bm_problem(p);
            else return adr_problem(p);
        },
        params);
}

std::vector<DriftShift> shift_preset(const ProblemParams& params, const std::string& preset_id) {
    std::vector<DriftShift> out{zero_shift()};
    if (preset_id == "K1") return out;

    if (const auto* lq = std::get_if<LqParams>(&params)) {
        auto b1 = [&](double s, const std::string& label, std::function<NodeId(Tape&, NodeId)> xi = {}) {
            return DriftShift{label, scaled_b1(*lq, s, std::move(xi)), false};
        };
        if (preset_id == "K2") return {zero_shift(), b1(1.0, "b1")};
        if (preset_id == "K3") return {zero_shift(), b1(1.0, "b1"), b1(-1.0, "neg-b1")};
        if (preset_id == "K4") return {zero_shift(), b1(1.0, "b1"), b1(-1.0, "neg-b1"), b1(-0.5, "neg-half-b1")};
        if (preset_id.rfind("xi-", 0) == 0) {
            const std::string xi_id = preset_id.substr(3);
            const auto xi = xi_map(xi_id);
            return {b1(1.0, "b1-xi-" + xi_id, xi), b1(-1.0, "neg-b1-xi-" + xi_id, xi), zero_shift()};
        }
    } else if (const auto* cbm = std::get_if<ControlledBmParams>(&params)) {
        if (preset_id == "K2") return {zero_shift(), DriftShift{"neg-z-over-r", scaled_z(-1.0 / cbm->r), false}};
    } else if (const auto* adr = std::get_if<AdrParams>(&params)) {
        if (preset_id == "K2") return {zero_shift(), DriftShift{"neg-half-beta-z", scaled_z(-0.5 * adr->beta), false}};
    }
    throw ConfigError("shift_preset: unknown preset '" + preset_id + "' for this problem");
}

}  // namespace mfbsde
