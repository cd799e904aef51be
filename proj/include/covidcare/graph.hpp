#pragma once

// Reverse-mode differentiation over the fixed op set the model needs.
// Forward values are computed eagerly as ops are appended, so node ids are
// already a topological order; backward walks them in reverse. Tensors are
// immutable once created; a graph instance is single-threaded, independent
// graphs may run concurrently.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "covidcare/error.hpp"
#include "covidcare/kernels.hpp"
#include "covidcare/tensor.hpp"

namespace covidcare {

enum class OpKind {
    leaf,
    matmul,
    add,
    elementwise_mul,
    sigmoid,
    tanh,
    softmax_rows,
    concat,
    scale,
    log,
    sum,
    transpose,
    slice,
};

inline const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::elementwise_mul: return "elementwise-mul";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::tanh: return "tanh";
        case OpKind::softmax_rows: return "softmax-rows";
        case OpKind::concat: return "concat";
        case OpKind::scale: return "scale";
        case OpKind::log: return "log";
        case OpKind::sum: return "sum";
        case OpKind::transpose: return "transpose";
        case OpKind::slice: return "slice";
    }
    return "?";
}

using NodeId = int;

template <class T>
class GraphT {
  public:
    using Tensor = TensorT<T>;

    struct Node {
        OpKind op = OpKind::leaf;
        std::array<NodeId, 2> in{-1, -1};
        std::vector<NodeId> many_in;  // concat only
        Tensor value;
        Tensor grad;  // sized lazily during backward
        T coeff{};    // scale
        std::size_t row0 = 0, row1 = 0;  // slice
        bool needs_grad = false;
        bool grad_ready = false;
    };

    NodeId leaf(Tensor value, bool requires_grad) {
        Node n;
        n.op = OpKind::leaf;
        n.value = std::move(value);
        n.needs_grad = requires_grad;
        return push(std::move(n));
    }

    NodeId constant(Tensor value) { return leaf(std::move(value), false); }
    NodeId param(Tensor value) { return leaf(std::move(value), true); }

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.cols() != B.rows())
            throw Error("matmul: inner dimensions differ: " + A.shape_str() + " vs " +
                        B.shape_str());
        Node n = binary(OpKind::matmul, a, b);
        n.value = Tensor(A.rows(), B.cols());
        kern::matmul(A.v.data(), B.v.data(), n.value.v.data(), A.rows(), A.cols(), B.cols());
        return push(std::move(n));
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (!A.same_shape(B))
            throw Error("add: shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
        Node n = binary(OpKind::add, a, b);
        n.value = Tensor(A.rows(), A.cols());
        kern::add(A.v.data(), B.v.data(), n.value.v.data(), A.size());
        return push(std::move(n));
    }

    NodeId elementwise_mul(NodeId a, NodeId b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (!A.same_shape(B))
            throw Error("elementwise-mul: shape mismatch: " + A.shape_str() + " vs " +
                        B.shape_str());
        Node n = binary(OpKind::elementwise_mul, a, b);
        n.value = Tensor(A.rows(), A.cols());
        kern::mul(A.v.data(), B.v.data(), n.value.v.data(), A.size());
        return push(std::move(n));
    }

    NodeId sigmoid(NodeId a) {
        Node n = unary(OpKind::sigmoid, a);
        const Tensor& A = value(a);
        n.value = Tensor(A.rows(), A.cols());
        kern::sigmoid(A.v.data(), n.value.v.data(), A.size());
        return push(std::move(n));
    }

    NodeId tanh(NodeId a) {
        Node n = unary(OpKind::tanh, a);
        const Tensor& A = value(a);
        n.value = Tensor(A.rows(), A.cols());
        kern::tanh(A.v.data(), n.value.v.data(), A.size());
        return push(std::move(n));
    }

    NodeId softmax_rows(NodeId a) {
        Node n = unary(OpKind::softmax_rows, a);
        const Tensor& A = value(a);
        n.value = Tensor(A.rows(), A.cols());
        kern::softmax_rows(A.v.data(), n.value.v.data(), A.rows(), A.cols());
        return push(std::move(n));
    }

    NodeId concat_cols(std::span<const NodeId> parts) {
        if (parts.empty()) throw Error("concat: no inputs");
        const std::size_t rows = value(parts[0]).rows();
        std::size_t cols = 0;
        for (NodeId id : parts) {
            const Tensor& P = value(id);
            if (P.rows() != rows)
                throw Error("concat: row mismatch: " + value(parts[0]).shape_str() + " vs " +
                            P.shape_str());
            cols += P.cols();
        }
        Node n;
        n.op = OpKind::concat;
        n.many_in.assign(parts.begin(), parts.end());
        n.value = Tensor(rows, cols);
        std::size_t off = 0;
        for (NodeId id : parts) {
            const Tensor& P = value(id);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < P.cols(); ++c)
                    n.value.at(r, off + c) = P.at(r, c);
            off += P.cols();
            n.needs_grad = n.needs_grad || node(id).needs_grad;
        }
        return push(std::move(n));
    }

    NodeId scale(NodeId a, T c) {
        Node n = unary(OpKind::scale, a);
        n.coeff = c;
        const Tensor& A = value(a);
        n.value = Tensor(A.rows(), A.cols());
        for (std::size_t i = 0; i < A.size(); ++i) n.value.v[i] = c * A.v[i];
        return push(std::move(n));
    }

    // log(max(x, 1e-12)); gradient is 1/x above the floor and 0 below it.
    NodeId log(NodeId a) {
        Node n = unary(OpKind::log, a);
        const Tensor& A = value(a);
        n.value = Tensor(A.rows(), A.cols());
        kern::log_clamped(A.v.data(), n.value.v.data(), A.size());
        return push(std::move(n));
    }

    NodeId sum(NodeId a) {
        Node n = unary(OpKind::sum, a);
        n.value = Tensor::scalar(kern::sum(value(a).v.data(), value(a).size()));
        return push(std::move(n));
    }

    NodeId transpose(NodeId a) {
        Node n = unary(OpKind::transpose, a);
        const Tensor& A = value(a);
        n.value = Tensor(A.cols(), A.rows());
        kern::transpose(A.v.data(), n.value.v.data(), A.rows(), A.cols());
        return push(std::move(n));
    }

    NodeId slice_rows(NodeId a, std::size_t r0, std::size_t r1) {
        const Tensor& A = value(a);
        if (r0 >= r1 || r1 > A.rows())
            throw Error("slice: rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                        ") out of range for " + A.shape_str());
        Node n = unary(OpKind::slice, a);
        n.row0 = r0;
        n.row1 = r1;
        n.value = Tensor(r1 - r0, A.cols());
        const std::size_t c = A.cols();
        std::copy(A.v.begin() + r0 * c, A.v.begin() + r1 * c, n.value.v.begin());
        return push(std::move(n));
    }

    void backward(NodeId loss) {
        Node& ls = node(loss);
        if (ls.value.size() != 1) throw Error("backward: loss node is not scalar");
        for (Node& n : nodes_) {
            n.grad_ready = false;
        }
        ensure_grad(ls);
        ls.grad.v[0] = T(1);
        for (NodeId id = loss; id >= 0; --id) {
            Node& n = node(id);
            if (!n.grad_ready || !n.needs_grad) continue;
            accumulate_inputs(n);
        }
        // Parameters never touched by the loss keep an all-zero slot.
        for (Node& n : nodes_) {
            if (n.needs_grad && !n.grad_ready) ensure_grad(n);
        }
    }

    const Tensor& value(NodeId id) const { return node(id).value; }
    const Tensor& grad(NodeId id) const {
        const Node& n = node(id);
        if (!n.needs_grad) throw Error("grad: node does not track gradients");
        if (n.grad.size() != n.value.size())
            throw Error("grad: backward has not populated this node");
        return n.grad;
    }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    std::vector<Node> nodes_;

    Node& node(NodeId id) {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw Error("graph: bad node id " + std::to_string(id));
        return nodes_[static_cast<std::size_t>(id)];
    }
    const Node& node(NodeId id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw Error("graph: bad node id " + std::to_string(id));
        return nodes_[static_cast<std::size_t>(id)];
    }

    Node unary(OpKind op, NodeId a) {
        Node n;
        n.op = op;
        n.in[0] = a;
        n.needs_grad = node(a).needs_grad;
        return n;
    }

    Node binary(OpKind op, NodeId a, NodeId b) {
        Node n;
        n.op = op;
        n.in[0] = a;
        n.in[1] = b;
        n.needs_grad = node(a).needs_grad || node(b).needs_grad;
        return n;
    }

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    void ensure_grad(Node& n) {
        if (!n.grad_ready) {
            n.grad.shape = n.value.shape;
            n.grad.v.assign(n.value.size(), T{});
            n.grad_ready = true;
        }
    }

    Tensor& input_grad(NodeId id) {
        Node& n = node(id);
        ensure_grad(n);
        return n.grad;
    }

    bool wants(NodeId id) const { return id >= 0 && node(id).needs_grad; }

    void accumulate_inputs(Node& n) {
        const Tensor& g = n.grad;
        switch (n.op) {
            case OpKind::leaf:
                break;
            case OpKind::matmul: {
                const Tensor& A = node(n.in[0]).value;
                const Tensor& B = node(n.in[1]).value;
                if (wants(n.in[0])) {
                    // dA += g . B^T
                    Tensor& da = input_grad(n.in[0]);
                    kern::matmul_nt_acc(g.v.data(), B.v.data(), da.v.data(), g.rows(), g.cols(),
                                        B.rows());
                }
                if (wants(n.in[1])) {
                    // dB += A^T . g
                    Tensor& db = input_grad(n.in[1]);
                    kern::matmul_tn_acc(A.v.data(), g.v.data(), db.v.data(), A.rows(), A.cols(),
                                        g.cols());
                }
                break;
            }
            case OpKind::add:
                for (int s = 0; s < 2; ++s) {
                    if (!wants(n.in[s])) continue;
                    Tensor& d = input_grad(n.in[s]);
                    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] += g.v[i];
                }
                break;
            case OpKind::elementwise_mul:
                for (int s = 0; s < 2; ++s) {
                    if (!wants(n.in[s])) continue;
                    const Tensor& other = node(n.in[1 - s]).value;
                    Tensor& d = input_grad(n.in[s]);
                    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] += g.v[i] * other.v[i];
                }
                break;
            case OpKind::sigmoid:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    for (std::size_t i = 0; i < d.size(); ++i) {
                        const T s = n.value.v[i];
                        d.v[i] += g.v[i] * s * (T(1) - s);
                    }
                }
                break;
            case OpKind::tanh:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    for (std::size_t i = 0; i < d.size(); ++i) {
                        const T t = n.value.v[i];
                        d.v[i] += g.v[i] * (T(1) - t * t);
                    }
                }
                break;
            case OpKind::softmax_rows:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    const std::size_t rows = n.value.rows(), cols = n.value.cols();
                    for (std::size_t r = 0; r < rows; ++r) {
                        const T* p = n.value.v.data() + r * cols;
                        const T* gp = g.v.data() + r * cols;
                        T dot{};
                        for (std::size_t j = 0; j < cols; ++j) dot += gp[j] * p[j];
                        T* dp = d.v.data() + r * cols;
                        for (std::size_t j = 0; j < cols; ++j) dp[j] += p[j] * (gp[j] - dot);
                    }
                }
                break;
            case OpKind::concat: {
                std::size_t off = 0;
                const std::size_t rows = n.value.rows(), cols = n.value.cols();
                for (NodeId id : n.many_in) {
                    const std::size_t pc = node(id).value.cols();
                    if (wants(id)) {
                        Tensor& d = input_grad(id);
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < pc; ++c)
                                d.at(r, c) += g.v[r * cols + off + c];
                    }
                    off += pc;
                }
                break;
            }
            case OpKind::scale:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] += n.coeff * g.v[i];
                }
                break;
            case OpKind::log:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    const Tensor& A = node(n.in[0]).value;
                    const T floor = static_cast<T>(kern::kLogFloor);
                    for (std::size_t i = 0; i < d.size(); ++i)
                        if (A.v[i] > floor) d.v[i] += g.v[i] / A.v[i];
                }
                break;
            case OpKind::sum:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] += g.v[0];
                }
                break;
            case OpKind::transpose:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    const std::size_t rows = d.rows(), cols = d.cols();
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < cols; ++j) d.at(i, j) += g.at(j, i);
                }
                break;
            case OpKind::slice:
                if (wants(n.in[0])) {
                    Tensor& d = input_grad(n.in[0]);
                    const std::size_t cols = d.cols();
                    for (std::size_t r = n.row0; r < n.row1; ++r)
                        for (std::size_t c = 0; c < cols; ++c)
                            d.at(r, c) += g.at(r - n.row0, c);
                }
                break;
        }
    }
};

using Graph = GraphT<double>;

}  // namespace covidcare
