#include "multifbsde/autodiff.hpp"

#include <cmath>
#include <string>

#include "multifbsde/errors.hpp"

namespace mfbsde {
namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

int arity(OpKind op) {
    switch (op) {
        case OpKind::constant:
        case OpKind::parameter: return 0;
        case OpKind::add:
        case OpKind::subtract:
        case OpKind::multiply:
        case OpKind::matvec:
        case OpKind::inner: return 2;
        case OpKind::affine: return 3;
        default: return 1;
    }
}

bool broadcastable(Eigen::Index a, Eigen::Index b) { return a == b || a == 1 || b == 1; }

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() == rows && m.cols() == cols) return m;
    if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(rows, cols, m(0, 0));
    if (m.rows() == 1) return m.replicate(rows, 1);
    return m.replicate(1, cols);
}

// Sums a broadcast adjoint back down to the parent's shape.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
    if (g.rows() == rows && g.cols() == cols) return g;
    if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
    if (rows == 1) return g.colwise().sum();
    return g.rowwise().sum();
}

void accumulate(Matrix& slot, const Matrix& contribution) {
    if (slot.size() == 0)
        slot = contribution;
    else
        slot += contribution;
}

}  // namespace

const Matrix& GradMap::at(NodeId id) const {
    const auto it = grads_.find(id);
    if (it == grads_.end()) throw GraphError("GradMap: node " + std::to_string(id) + " is not a trainable parameter");
    return it->second;
}

NodeId Tape::constant(Matrix value) {
    Node n;
    n.op = OpKind::constant;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

NodeId Tape::parameter(Matrix value, bool trainable) {
    Node n;
    n.op = OpKind::parameter;
    n.value = std::move(value);
    n.requires_grad = trainable;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::mean(NodeId a) {
    const double count = static_cast<double>(value(a).size());
    return scale(sum(a), 1.0 / count);
}

void Tape::check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw GraphError("tape: unknown node id " + std::to_string(id));
}

const Node& Tape::node(NodeId id) const {
    check(id);
    return nodes_[static_cast<std::size_t>(id)];
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }

NodeId Tape::record(OpKind op, std::initializer_list<NodeId> parents, OpPayload payload) {
    if (op == OpKind::constant || op == OpKind::parameter)
        throw GraphError("record: leaves are created with constant() or parameter()");
    if (static_cast<int>(parents.size()) != arity(op)) throw GraphError("record: wrong number of parents");

    Node n;
    n.op = op;
    n.payload = payload;
    for (NodeId p : parents) {
        check(p);
        n.parents[n.num_parents++] = p;
        n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    }

    const Matrix& a = nodes_[n.parents[0]].value;
    switch (op) {
        case OpKind::add:
        case OpKind::subtract:
        case OpKind::multiply: {
            const Matrix& b = nodes_[n.parents[1]].value;
            if (!broadcastable(a.rows(), b.rows()) || !broadcastable(a.cols(), b.cols()))
                throw GraphError("record: cannot broadcast " + shape(a) + " with " + shape(b));
            const auto rows = std::max(a.rows(), b.rows());
            const auto cols = std::max(a.cols(), b.cols());
            if (a.rows() == rows && a.cols() == cols && b.rows() == rows && b.cols() == cols) {
                if (op == OpKind::add) n.value = a + b;
                else if (op == OpKind::subtract) n.value = a - b;
                else n.value = a.cwiseProduct(b);
            } else {
                const Matrix ea = expand(a, rows, cols);
                const Matrix eb = expand(b, rows, cols);
                if (op == OpKind::add) n.value = ea + eb;
                else if (op == OpKind::subtract) n.value = ea - eb;
                else n.value = ea.cwiseProduct(eb);
            }
            break;
        }
        case OpKind::scale: n.value = payload.a * a; break;
        case OpKind::matvec: {
            const Matrix& x = nodes_[n.parents[1]].value;
            if (a.cols() != x.cols())
                throw GraphError("record: matvec with W " + shape(a) + " and x " + shape(x));
            n.value = x * a.transpose();
            break;
        }
        case OpKind::inner: {
            const Matrix& b = nodes_[n.parents[1]].value;
            if (a.rows() != b.rows() || a.cols() != b.cols())
                throw GraphError("record: inner product of " + shape(a) + " and " + shape(b));
            n.value = a.cwiseProduct(b).rowwise().sum();
            break;
        }
        case OpKind::affine: {
            const Matrix& w = nodes_[n.parents[1]].value;
            const Matrix& b = nodes_[n.parents[2]].value;
            if (a.cols() != w.cols() || b.rows() != 1 || b.cols() != w.rows())
                throw GraphError("record: affine with x " + shape(a) + ", W " + shape(w) + ", b " + shape(b));
            n.value = a * w.transpose();
            n.value.rowwise() += b.row(0);
            break;
        }
        case OpKind::relu: n.value = a.cwiseMax(0.0); break;
        case OpKind::abs: n.value = a.cwiseAbs(); break;
        case OpKind::square: n.value = a.array().square().matrix(); break;
        case OpKind::sum: n.value = Matrix::Constant(1, 1, a.sum()); break;
        case OpKind::sin: n.value = a.array().sin().matrix(); break;
        case OpKind::cos: n.value = a.array().cos().matrix(); break;
        case OpKind::exp: n.value = a.array().exp().matrix(); break;
        case OpKind::clamp:
            if (!(payload.a <= payload.b)) throw GraphError("record: clamp with empty interval");
            n.value = a.cwiseMax(payload.a).cwiseMin(payload.b);
            break;
        default: throw GraphError("record: unsupported op");
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

GradMap Tape::backward(NodeId loss) const {
    check(loss);
    if (nodes_[loss].value.rows() != 1 || nodes_[loss].value.cols() != 1)
        throw GraphError("backward: loss node must be scalar, got " + shape(nodes_[loss].value));

    std::vector<Matrix> adj(static_cast<std::size_t>(loss) + 1);
    adj[loss] = Matrix::Ones(1, 1);
    GradMap out;

    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (!n.requires_grad || adj[id].size() == 0) {
            if (n.op == OpKind::parameter && n.requires_grad)
                out.grads_[id] = Matrix::Zero(n.value.rows(), n.value.cols());
            continue;
        }
        const Matrix& g = adj[id];
        auto push = [&](int slot, const Matrix& contribution) {
            const NodeId p = n.parents[slot];
            if (nodes_[p].requires_grad) accumulate(adj[p], contribution);
        };
        auto wants = [&](int slot) { return nodes_[n.parents[slot]].requires_grad; };
        const Matrix& a = n.num_parents > 0 ? nodes_[n.parents[0]].value : n.value;

        switch (n.op) {
            case OpKind::parameter: out.grads_[id] = g; break;
            case OpKind::constant: break;
            case OpKind::add:
            case OpKind::subtract:
            case OpKind::multiply: {
                const Matrix& b = nodes_[n.parents[1]].value;
                if (n.op == OpKind::multiply) {
                    if (wants(0)) push(0, reduce_to(g.cwiseProduct(expand(b, g.rows(), g.cols())), a.rows(), a.cols()));
                    if (wants(1)) push(1, reduce_to(g.cwiseProduct(expand(a, g.rows(), g.cols())), b.rows(), b.cols()));
                } else {
                    if (wants(0)) push(0, reduce_to(g, a.rows(), a.cols()));
                    if (wants(1)) {
                        Matrix gb = reduce_to(g, b.rows(), b.cols());
                        if (n.op == OpKind::subtract) gb = -gb;
                        push(1, gb);
                    }
                }
                break;
            }
            case OpKind::scale: push(0, n.payload.a * g); break;
            case OpKind::matvec: {
                const Matrix& x = nodes_[n.parents[1]].value;
                if (wants(0)) push(0, g.transpose() * x);
                if (wants(1)) push(1, g * a);
                break;
            }
            case OpKind::inner: {
                const Matrix& b = nodes_[n.parents[1]].value;
                if (wants(0)) push(0, (b.array().colwise() * g.col(0).array()).matrix());
                if (wants(1)) push(1, (a.array().colwise() * g.col(0).array()).matrix());
                break;
            }
            case OpKind::affine: {
                const Matrix& w = nodes_[n.parents[1]].value;
                if (wants(0)) push(0, g * w);
                if (wants(1)) push(1, g.transpose() * a);
                if (wants(2)) push(2, g.colwise().sum());
                break;
            }
            case OpKind::relu: push(0, (a.array() > 0.0).select(g.array(), 0.0).matrix()); break;
            case OpKind::abs:
                push(0, (a.array() > 0.0).select(g.array(), (a.array() < 0.0).select(-g.array(), 0.0)).matrix());
                break;
            case OpKind::square: push(0, 2.0 * a.cwiseProduct(g)); break;
            case OpKind::sum: push(0, Matrix::Constant(a.rows(), a.cols(), g(0, 0))); break;
            case OpKind::sin: push(0, a.array().cos().matrix().cwiseProduct(g)); break;
            case OpKind::cos: push(0, (-a.array().sin()).matrix().cwiseProduct(g)); break;
            case OpKind::exp: push(0, n.value.cwiseProduct(g)); break;
            case OpKind::clamp:
                push(0, ((a.array() > n.payload.a) && (a.array() < n.payload.b)).select(g.array(), 0.0).matrix());
                break;
        }
    }
    return out;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& theta, double eps) {
    if (!(eps > 0.0)) throw ParameterError("finite_difference_gradient: eps must be positive");
    Vector grad(theta.size());
    Vector probe = theta;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        probe(i) = theta(i) + eps;
        const double up = f(probe);
        probe(i) = theta(i) - eps;
        const double down = f(probe);
        probe(i) = theta(i);
        if (!std::isfinite(up) || !std::isfinite(down))
            throw DivergenceError("finite_difference_gradient: non-finite function value at coordinate " +
                                  std::to_string(i));
        grad(i) = (up - down) / (2.0 * eps);
    }
    return grad;
}

}  // namespace mfbsde
