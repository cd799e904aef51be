#pragma once

// Prediction loss (cross-entropy in binary and 12-class form), the
// distillation imitation loss KL(softmax(s_hat) || softmax(s_tea)), and
// their unweighted composition. Host-side functions compute values on
// doubles; the *_node builders append the differentiable version to a graph.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covidcare/dataset.hpp"
#include "covidcare/graph.hpp"
#include "covidcare/model.hpp"

namespace covidcare {

struct LossValue {
    double total = 0.0;
    std::map<std::string, double> components;  // "pred", optional "emb"
};

LossValue compose(double pred_loss, std::optional<double> emb_loss);

// Single-sample cross-entropy. Multiclass: pred holds 12 probabilities,
// label is the class index. Binary: pred holds one probability, label is
// 0/1. Probabilities are clamped at 1e-12 before the log.
double cross_entropy(std::span<const double> pred, int label, TaskKind task);

// KL(P || Q) with entries clamped at 1e-12; requires both near the simplex.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// L_emb = KL(softmax(s_hat_tea) || softmax(s_tea)).
double distillation_loss(std::span<const double> s_hat_tea, std::span<const double> s_tea);

std::vector<double> softmax(std::span<const double> x);

// ---- graph builders ----

// Per-record prediction loss node (unscaled; callers divide by the batch size).
template <class T>
NodeId pred_loss_node(GraphT<T>& g, const ForwardResult<T>& fwd, int label, TaskKind task) {
    if (task == TaskKind::multiclass12) {
        if (label < 0 || label >= 12)
            throw Error("loss: label " + std::to_string(label) + " outside [0,12)");
        NodeId p_true = g.slice_rows(fwd.probs, static_cast<std::size_t>(label),
                                     static_cast<std::size_t>(label) + 1);
        return g.scale(g.log(p_true), T(-1));
    }
    if (label != 0 && label != 1)
        throw Error("loss: binary label must be 0 or 1, got " + std::to_string(label));
    NodeId p = fwd.probs;  // 1 x 1
    NodeId one_minus_p = g.add(g.constant(TensorT<T>(1, 1, T(1))), g.scale(p, T(-1)));
    NodeId ll = g.add(g.scale(g.log(p), static_cast<T>(label)),
                      g.scale(g.log(one_minus_p), static_cast<T>(1 - label)));
    return g.scale(ll, T(-1));
}

// Distillation loss node; the teacher side enters as a constant, so
// gradients flow only through s_hat (and from there into W_stu and the
// student). `reverse` swaps the KL direction for ablation runs.
template <class T>
NodeId distill_loss_node(GraphT<T>& g, NodeId s_hat, std::span<const double> s_tea,
                         bool reverse = false) {
    const std::size_t n = g.value(s_hat).size();
    if (n != s_tea.size())
        throw Error("distill: student projection length " + std::to_string(n) +
                    " vs teacher representation length " + std::to_string(s_tea.size()));
    std::vector<double> q = softmax(s_tea);
    TensorT<T> q_t(1, n), logq_t(1, n);
    for (std::size_t i = 0; i < n; ++i) {
        q_t.v[i] = static_cast<T>(q[i]);
        logq_t.v[i] = static_cast<T>(std::log(std::max(q[i], kern::kLogFloor)));
    }
    NodeId p = g.softmax_rows(g.transpose(s_hat));  // 1 x n
    NodeId logp = g.log(p);
    NodeId logq = g.constant(std::move(logq_t));
    if (!reverse) {
        // sum p * (log p - log q)
        return g.sum(g.elementwise_mul(p, g.add(logp, g.scale(logq, T(-1)))));
    }
    // sum q * (log q - log p)
    NodeId qc = g.constant(std::move(q_t));
    return g.sum(g.elementwise_mul(qc, g.add(logq, g.scale(logp, T(-1)))));
}

}  // namespace covidcare
