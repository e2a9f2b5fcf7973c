#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mfbsde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using NodeId = int;

/// Closed set of primitives the tape understands.
///
/// Node values are matrices. Batched quantities are `rows = batch`, so a vector
/// per sample is one row and a scalar per sample is a single column. Weight
/// matrices are stored `out x in` and applied as `x * W^T`.
enum class OpKind {
    constant,
    parameter,
    add,       // elementwise with row/column/scalar broadcasting
    subtract,  // elementwise with row/column/scalar broadcasting
    multiply,  // elementwise with row/column/scalar broadcasting
    scale,     // a * payload.a
    matvec,    // x * W^T,  parents (W, x)
    inner,     // row-wise dot product -> rows x 1
    affine,    // x * W^T + b,  parents (x, W, b), b is 1 x out
    relu,
    abs,
    square,
    sum,       // sum of all entries -> 1 x 1
    sin,
    cos,
    exp,
    clamp,     // clamp to [payload.a, payload.b]
};

struct OpPayload {
    double a = 0.0;
    double b = 0.0;
};

struct Node {
    OpKind op = OpKind::constant;
    std::array<NodeId, 3> parents{-1, -1, -1};
    int num_parents = 0;
    OpPayload payload;
    Matrix value;
    bool requires_grad = false;
};

/// Gradients of a scalar loss with respect to the trainable parameter nodes.
class GradMap {
public:
    const Matrix& at(NodeId id) const;
    bool contains(NodeId id) const { return grads_.count(id) != 0; }
    std::size_t size() const { return grads_.size(); }
    const std::map<NodeId, Matrix>& entries() const { return grads_; }

private:
    friend class Tape;
    std::map<NodeId, Matrix> grads_;
};

/// Append-only record of a computation with eagerly evaluated forward values.
/// Parents always precede children, so reverse insertion order is a valid
/// reverse topological order.
class Tape {
public:
    Tape() = default;

    NodeId constant(Matrix value);
    NodeId scalar(double value);
    /// Non-trainable parameters behave like constants and are absent from the GradMap.
    NodeId parameter(Matrix value, bool trainable = true);

    /// Validates shapes and appends a node; throws GraphError on mismatch.
    NodeId record(OpKind op, std::initializer_list<NodeId> parents, OpPayload payload = {});

    NodeId add(NodeId a, NodeId b) { return record(OpKind::add, {a, b}); }
    NodeId sub(NodeId a, NodeId b) { return record(OpKind::subtract, {a, b}); }
    NodeId mul(NodeId a, NodeId b) { return record(OpKind::multiply, {a, b}); }
    NodeId scale(NodeId a, double s) { return record(OpKind::scale, {a}, {s, 0.0}); }
    NodeId matvec(NodeId w, NodeId x) { return record(OpKind::matvec, {w, x}); }
    NodeId inner(NodeId a, NodeId b) { return record(OpKind::inner, {a, b}); }
    NodeId affine(NodeId x, NodeId w, NodeId b) { return record(OpKind::affine, {x, w, b}); }
    NodeId relu(NodeId a) { return record(OpKind::relu, {a}); }
    NodeId abs(NodeId a) { return record(OpKind::abs, {a}); }
    NodeId square(NodeId a) { return record(OpKind::square, {a}); }
    NodeId sum(NodeId a) { return record(OpKind::sum, {a}); }
    NodeId mean(NodeId a);
    NodeId sin(NodeId a) { return record(OpKind::sin, {a}); }
    NodeId cos(NodeId a) { return record(OpKind::cos, {a}); }
    NodeId exp(NodeId a) { return record(OpKind::exp, {a}); }
    NodeId clamp(NodeId a, double lo, double hi) { return record(OpKind::clamp, {a}, {lo, hi}); }

    const Matrix& value(NodeId id) const;
    const Node& node(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }
    bool requires_grad(NodeId id) const { return node(id).requires_grad; }

    /// Reverse sweep from a 1 x 1 node. ReLU'(0) = 0 and |.|'(0) = 0.
    GradMap backward(NodeId loss) const;

private:
    void check(NodeId id) const;

    std::vector<Node> nodes_;
};

/// Central differences (f(theta + eps e_i) - f(theta - eps e_i)) / (2 eps).
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& theta, double eps);

}  // namespace mfbsde
