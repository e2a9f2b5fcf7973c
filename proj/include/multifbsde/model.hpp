#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "multifbsde/autodiff.hpp"

namespace mfbsde {

/// Coefficient maps recorded on a tape. Batched arguments have one row per
/// sample: x is M x d, y is M x 1, z is M x k.
using StateFn = std::function<NodeId(Tape&, double t, NodeId x, NodeId y, NodeId z)>;
/// sigma(t, x) applied to an increment dW (M x k), giving M x d.
using DiffusionFn = std::function<NodeId(Tape&, double t, NodeId x, NodeId dw)>;
using TerminalFn = std::function<NodeId(Tape&, NodeId x)>;

struct CoefficientSet {
    std::string name;
    int d = 1;
    int k = 1;
    double T = 1.0;
    Vector x0;
    StateFn drift;      // b, M x d
    DiffusionFn diffuse;
    std::function<Matrix(double t, const Vector& x)> sigma;  // d x k
    StateFn driver;     // f, M x 1
    TerminalFn terminal;  // g, M x 1
};

struct DriftShift {
    std::string label;
    StateFn psi;  // M x d
    /// Identically zero: rollouts skip the shift entirely.
    bool zero = false;
};

DriftShift zero_shift();

/// drift = b - psi, driver = f + <z, psi>.
class ShiftedCoefficients {
public:
    ShiftedCoefficients(CoefficientSet base, DriftShift shift);

    const CoefficientSet& base() const { return base_; }
    const DriftShift& shift() const { return shift_; }

    struct Terms {
        NodeId drift;
        NodeId driver;
    };
    /// Evaluates psi once and returns both shifted terms.
    Terms terms(Tape& tape, double t, NodeId x, NodeId y, NodeId z) const;

private:
    CoefficientSet base_;
    DriftShift shift_;
};

ShiftedCoefficients shifted(CoefficientSet base, DriftShift shift);

// Pointwise evaluation helpers (one-row tapes).
Vector eval_drift(const CoefficientSet& c, double t, const Vector& x, double y, const Vector& z);
double eval_driver(const CoefficientSet& c, double t, const Vector& x, double y, const Vector& z);
double eval_terminal(const CoefficientSet& c, const Vector& x);
Vector eval_terms_drift(const ShiftedCoefficients& c, double t, const Vector& x, double y, const Vector& z);
double eval_terms_driver(const ShiftedCoefficients& c, double t, const Vector& x, double y, const Vector& z);
Vector eval_shift(const DriftShift& s, double t, const Vector& x, double y, const Vector& z);
/// g on a batch of states (rows).
Vector eval_terminal_batch(const TerminalFn& g, const Matrix& x);

/// g(x) = -|x_1 - x_2|.
TerminalFn abs_gap_terminal(int d);
TerminalFn constant_terminal(double c);

struct LqParams {
    Matrix A;      // d x d
    Matrix B;      // d x l
    Vector C;      // d
    Matrix sigma;  // d x d
    Matrix R_x;    // d x d
    Matrix R_u;    // l x l
    Matrix G;      // d x d
    Vector x0;
    double T = 0.5;

    int d() const { return static_cast<int>(A.rows()); }
    /// Throws ParameterError on inconsistent shapes, asymmetric or indefinite weights, or (when
    /// required) rank-deficient B. The Riccati system itself is well posed for any B.
    void validate(bool require_full_rank = true) const;
};

/// The six-dimensional benchmark: A = diag(1,2,3,1,2,3), C = (-0.2,-0.1,0,0,0.1,0.2), T = 0.5.
LqParams default_lq_params();

struct ControlledBmParams {
    int d = 2;
    double r = 1.0;
    double sigma = 0.25;
    Vector x0;
    double T = 0.5;
    TerminalFn g;  // defaults to -|x_1 - x_2|
};

ControlledBmParams default_controlled_bm_params();

struct AdrParams {
    double alpha = 0.0315;
    double beta = 0.6;
    double gamma = 0.0;
    Vector x0;
    double T = 0.5;
    TerminalFn g;  // defaults to -|x_1 - x_2|
};

AdrParams default_adr_params(double beta, double gamma);

/// b = A(C - x) - 1/2 B R_u^-1 B^T z, f = <R_x x, x> + 1/4 <R_u^-1 B^T z, B^T z>, g = <Gx, x>.
CoefficientSet lq_problem(const LqParams& p);
/// b = -z/r, sigma = sigma I, f = |z|^2 / (2r).
CoefficientSet controlled_bm_problem(const ControlledBmParams& p);
/// b = beta z, sigma = sqrt(2 alpha) I, f = beta |z|^2 - gamma y.
CoefficientSet adr_problem(const AdrParams& p);

/// A problem whose coefficients are all zero (g = 0 unless given).
CoefficientSet frozen_problem(int d, int k, double T, TerminalFn g = {});

using ProblemParams = std::variant<LqParams, ControlledBmParams, AdrParams>;

CoefficientSet make_problem(const ProblemParams& params);

/// Named shift families.
///   LQ:  K1 = (0), K2 = (0, b1), K3 = (0, b1, -b1), K4 = (0, b1, -b1, -b1/2) with b1(x) = A(C - x);
///        xi-x, xi-neg-sin, xi-x-cos, xi-one-minus-exp = (b1 o xi, -b1 o xi, 0).
///   controlled BM: K1 = (0), K2 = (0, -z/r).
///   ADR: K1 = (0), K2 = (0, -(beta/2) z).
std::vector<DriftShift> shift_preset(const ProblemParams& params, const std::string& preset_id);

}  // namespace mfbsde
