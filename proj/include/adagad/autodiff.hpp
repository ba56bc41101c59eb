#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "adagad/common.hpp"
#include "adagad/graph.hpp"

namespace adagad::ad {

// Reverse-mode automatic differentiation over dense Eigen matrices. Each op
// builds a Node whose backward closure scatters the incoming gradient to its
// parents; backward() replays the recorded graph in reverse topological
// order. Rank <= 2 is all the pipeline needs, so a scalar is just a 1x1.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Matrix value;
    Matrix grad;  // lazily allocated, same shape as value
    bool requires_grad = false;
    std::string op;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    Matrix& grad_ref() {
        if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
        return grad;
    }
    void zero_grad() { grad.resize(0, 0); }
    double scalar() const { return value(0, 0); }
};

inline Var make_node(Matrix value, std::string op, std::vector<Var> parents,
                     std::function<void(Node&)> backward_fn) {
    if (!value.allFinite())
        throw RuntimeFailure("non-finite value produced by op '" + op + "'");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = std::move(op);
    for (const auto& p : parents) n->requires_grad |= p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

inline Var constant(Matrix m) {
    auto n = std::make_shared<Node>();
    n->value = std::move(m);
    n->op = "const";
    return n;
}

inline Var parameter(Matrix m) {
    auto n = std::make_shared<Node>();
    if (!m.allFinite()) throw RuntimeFailure("non-finite parameter value");
    n->value = std::move(m);
    n->requires_grad = true;
    n->op = "param";
    return n;
}

/// Accumulate gradients of `loss` into every reachable node requiring them.
inline void backward(const Var& loss) {
    require(loss->value.size() == 1, "backward expects a scalar loss");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    // iterative DFS; post-order gives a topological order
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->grad_ref()(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
    }
}

// ---- elementwise and linear ops ----------------------------------------

inline Var add(const Var& a, const Var& b) {
    return make_node(a->value + b->value, "add", {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad_ref() += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->grad_ref() += n.grad;
    });
}

inline Var sub(const Var& a, const Var& b) {
    return make_node(a->value - b->value, "sub", {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad_ref() += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->grad_ref() -= n.grad;
    });
}

inline Var mul(const Var& a, const Var& b) {
    return make_node(a->value.cwiseProduct(b->value), "mul", {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(n.parents[1]->value);
        if (n.parents[1]->requires_grad)
            n.parents[1]->grad_ref() += n.grad.cwiseProduct(n.parents[0]->value);
    });
}

inline Var div(const Var& a, const Var& b) {
    return make_node(a->value.cwiseQuotient(b->value), "div", {a, b}, [](Node& n) {
        const Matrix inv_b = n.parents[1]->value.cwiseInverse();
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(inv_b);
        if (n.parents[1]->requires_grad)
            n.parents[1]->grad_ref() -=
                n.grad.cwiseProduct(n.value).cwiseProduct(inv_b);
    });
}

inline Var scale(const Var& a, double c) {
    return make_node(a->value * c, "scale", {a}, [c](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad_ref() += n.grad * c;
    });
}

inline Var matmul(const Var& a, const Var& b) {
    require(a->value.cols() == b->value.rows(), "matmul shape mismatch");
    return make_node(a->value * b->value, "matmul", {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad * n.parents[1]->value.transpose();
        if (n.parents[1]->requires_grad)
            n.parents[1]->grad_ref() += n.parents[0]->value.transpose() * n.grad;
    });
}

/// Sparse-dense product S * H with a constant symmetric sparse matrix
/// (normalized adjacency, closed adjacency). Symmetry makes the backward
/// pass another multiply by S itself. S is captured by reference and must
/// outlive the tape.
inline Var spmm_sym(const Eigen::SparseMatrix<double>& s, const Var& h) {
    require(s.cols() == h->value.rows(), "spmm shape mismatch");
    return make_node(s * h->value, "spmm", {h}, [&s](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad_ref() += s * n.grad;
    });
}

/// Gram matrix Z Z^T, the structure decoder's pre-activation.
inline Var gram(const Var& z) {
    return make_node(z->value * z->value.transpose(), "gram", {z}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() +=
                (n.grad + n.grad.transpose()) * n.parents[0]->value;
    });
}

// ---- activations --------------------------------------------------------

inline Var relu(const Var& a) {
    return make_node(a->value.cwiseMax(0.0), "relu", {a}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() +=
                n.grad.cwiseProduct((n.parents[0]->value.array() > 0.0).cast<double>().matrix());
    });
}

inline Var leaky_relu(const Var& a, double slope) {
    Matrix out = a->value.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    return make_node(std::move(out), "leaky_relu", {a}, [slope](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(n.parents[0]->value.unaryExpr(
                [slope](double v) { return v > 0.0 ? 1.0 : slope; }));
    });
}

inline Var sigmoid(const Var& a) {
    Matrix out = a->value.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    return make_node(std::move(out), "sigmoid", {a}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(
                n.value.cwiseProduct((Matrix::Ones(n.value.rows(), n.value.cols()) - n.value)));
    });
}

inline Var exp_(const Var& a) {
    return make_node(a->value.array().exp().matrix(), "exp", {a}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(n.value);
    });
}

inline Var log_(const Var& a) {
    return make_node(a->value.array().log().matrix(), "log", {a}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(n.parents[0]->value.cwiseInverse());
    });
}

/// Elementwise x^p for a fixed exponent; inputs must be strictly positive.
inline Var pow_(const Var& a, double p) {
    Matrix out = a->value.unaryExpr([p](double v) { return std::pow(v, p); });
    return make_node(std::move(out), "pow", {a}, [p](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(
                n.value.cwiseQuotient(n.parents[0]->value) * p);
    });
}

/// max(x, floor); gradient passes through only where x > floor.
inline Var clamp_min(const Var& a, double floor) {
    return make_node(a->value.cwiseMax(floor), "clamp_min", {a}, [floor](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(
                (n.parents[0]->value.array() > floor).cast<double>().matrix());
    });
}

/// Elementwise multiply by a constant matrix (dropout masks).
inline Var mask(const Var& a, const Matrix& m) {
    return make_node(a->value.cwiseProduct(m), "mask", {a}, [m](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += n.grad.cwiseProduct(m);
    });
}

/// Broadcast-add a 1 x f bias row to every row of a.
inline Var add_bias(const Var& a, const Var& b) {
    require(b->value.rows() == 1 && b->value.cols() == a->value.cols(),
            "bias must be a 1 x cols row");
    return make_node(a->value.rowwise() + b->value.row(0), "add_bias", {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->grad_ref() += n.grad;
        if (n.parents[1]->requires_grad)
            n.parents[1]->grad_ref() += n.grad.colwise().sum();
    });
}

// ---- reductions ---------------------------------------------------------

inline Var sum(const Var& a) {
    Matrix out(1, 1);
    out(0, 0) = a->value.sum();
    return make_node(std::move(out), "sum", {a}, [](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref().array() += n.grad(0, 0);
    });
}

/// ||a - target||_F^2 against a constant target.
inline Var squared_error(const Var& a, Matrix target) {
    require(a->value.rows() == target.rows() && a->value.cols() == target.cols(),
            "squared_error shape mismatch");
    Matrix out(1, 1);
    out(0, 0) = (a->value - target).squaredNorm();
    auto t = std::make_shared<Matrix>(std::move(target));
    return make_node(std::move(out), "squared_error", {a}, [t](Node& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->grad_ref() += 2.0 * n.grad(0, 0) * (n.parents[0]->value - *t);
    });
}

/// Fused ||sigmoid(z zᵀ) - target||_F^2. Equivalent to
namespace detail {
// cache-resident row-block size for the n×n sigmoid-gram kernels
inline constexpr int kGramBlock = 64;
}  // namespace detail

using SparseTarget = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace detail {

// subtract the sparse target's rows [i0, i0+b) from the dense block d,
// whose row 0 corresponds to global row i0
inline void subtract_target_rows(Matrix& d, const SparseTarget& target, int i0, int b) {
    for (int i = 0; i < b; ++i)
        for (SparseTarget::InnerIterator it(target, i0 + i); it; ++it)
            d(i, it.col()) -= it.value();
}

}  // namespace detail

/// squared_error(sigmoid(gram(z)), target), evaluated in row blocks so no
/// n×n matrix is ever materialized. Because the upstream gradient of a
/// scalar loss is a single factor, the full parameter gradient is computed
/// during the forward pass into an n×h buffer.
inline Var sigmoid_gram_error(const Var& z, const SparseTarget& target) {
    require(z->value.rows() == target.rows() && target.rows() == target.cols(),
            "sigmoid_gram_error shape mismatch");
    const Matrix& Z = z->value;
    const int n = static_cast<int>(Z.rows());
    auto grad = std::make_shared<Matrix>(Matrix::Zero(n, Z.cols()));
    double loss = 0.0;
    Matrix s, d;
    for (int i0 = 0; i0 < n; i0 += detail::kGramBlock) {
        const int b = std::min(detail::kGramBlock, n - i0);
        s.noalias() = Z.middleRows(i0, b) * Z.transpose();
        s = s.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        d = s;  // reconstruction residual sigma - A
        detail::subtract_target_rows(d, target, i0, b);
        loss += d.squaredNorm();
        // d loss / d gram entry = 2 (sigma - A) sigma (1 - sigma)
        d = (2.0 * d.array() * s.array() * (1.0 - s.array())).matrix();
        grad->middleRows(i0, b).noalias() += d * Z;
        grad->noalias() += d.transpose() * Z.middleRows(i0, b);
    }
    Matrix out(1, 1);
    out(0, 0) = loss;
    return make_node(std::move(out), "sigmoid_gram_error", {z}, [grad](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        n.parents[0]->grad_ref() += n.grad(0, 0) * *grad;
    });
}

inline Var sigmoid_gram_error(const Var& z, const Matrix& target) {
    return sigmoid_gram_error(z, SparseTarget(target.sparseView()));
}

/// Per-row L2 distance ||sigmoid(z zᵀ)_i - target_i||_2 as an n×1 column,
/// again in row blocks. The backward pass recomputes the sigmoid blocks
/// instead of retaining them; only the sparse target is kept alive.
inline Var sigmoid_gram_row_error(const Var& z, SparseTarget target) {
    require(z->value.rows() == target.rows() && target.rows() == target.cols(),
            "sigmoid_gram_row_error shape mismatch");
    const Matrix& Z = z->value;
    const int n = static_cast<int>(Z.rows());
    auto t = std::make_shared<SparseTarget>(std::move(target));
    Matrix out(n, 1);
    {
        Matrix s;
        for (int i0 = 0; i0 < n; i0 += detail::kGramBlock) {
            const int b = std::min(detail::kGramBlock, n - i0);
            s.noalias() = Z.middleRows(i0, b) * Z.transpose();
            s = s.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
            detail::subtract_target_rows(s, *t, i0, b);
            out.middleRows(i0, b) = s.rowwise().norm();
        }
    }
    return make_node(std::move(out), "sigmoid_gram_row_error", {z}, [t](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        const Matrix& Z = n.parents[0]->value;
        Matrix& gr = n.parents[0]->grad_ref();
        const int nn = static_cast<int>(Z.rows());
        Matrix s, w;
        for (int i0 = 0; i0 < nn; i0 += detail::kGramBlock) {
            const int b = std::min(detail::kGramBlock, nn - i0);
            s.noalias() = Z.middleRows(i0, b) * Z.transpose();
            s = s.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
            w = s;
            detail::subtract_target_rows(w, *t, i0, b);
            // w = (sigma - A) sigma (1 - sigma), then each row scaled by
            // g_i / r_i (subgradient 0 at a zero-distance row)
            w = (w.array() * s.array() * (1.0 - s.array())).matrix();
            for (int i = 0; i < b; ++i) {
                const double r = n.value(i0 + i, 0);
                w.row(i) *= r > 0.0 ? n.grad(i0 + i, 0) / r : 0.0;
            }
            gr.middleRows(i0, b).noalias() += w * Z;
            gr.noalias() += w.transpose() * Z.middleRows(i0, b);
        }
    });
}

inline Var sigmoid_gram_row_error(const Var& z, const Matrix& target) {
    return sigmoid_gram_row_error(z, SparseTarget(target.sparseView()));
}

/// Per-row L2 distance ||target_i - a_i||_2 as an n x 1 column. The gradient
/// at a zero-distance row is taken as 0 (a subgradient of the norm).
inline Var row_l2_error(const Var& a, Matrix target) {
    require(a->value.rows() == target.rows() && a->value.cols() == target.cols(),
            "row_l2_error shape mismatch");
    Matrix out(a->value.rows(), 1);
    for (int i = 0; i < a->value.rows(); ++i)
        out(i, 0) = (a->value.row(i) - target.row(i)).norm();
    auto t = std::make_shared<Matrix>(std::move(target));
    return make_node(std::move(out), "row_l2_error", {a}, [t](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Matrix& g = n.parents[0]->grad_ref();
        for (int i = 0; i < n.value.rows(); ++i) {
            const double r = n.value(i, 0);
            if (r > 0.0)
                g.row(i) += (n.grad(i, 0) / r) *
                            (n.parents[0]->value.row(i) - t->row(i));
        }
    });
}

}  // namespace adagad::ad
