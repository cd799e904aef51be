#pragma once

// CovidCare network: per-feature GRU channel bank, multi-head self-attention
// across features, additive attention pooling, prediction head. One set of
// parameter structures serves the teacher (all source features), student
// (shared features + distillation projection), target (shared + private
// target features), and the ablation architectures.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "covidcare/dataset.hpp"
#include "covidcare/graph.hpp"
#include "covidcare/schema.hpp"
#include "covidcare/tensor.hpp"

namespace covidcare {

enum class ModelRole { teacher, student, target };
enum class ModelArch { covidcare, mc_gru, single_gru };

struct ModelHyper {
    int hidden = 16;
    int heads = 4;
    int key_dim = 4;
    int teacher_hidden = 16;  // width of the imitated teacher representation
};

// Gate rows are packed [update | reset | candidate].
template <class T>
struct GruChannelT {
    TensorT<T> w_in;   // 3h x input_width (1 per-feature, N for single_gru)
    TensorT<T> w_hid;  // 3h x h
    TensorT<T> bias;   // 3h x 1
};

template <class T>
struct AttentionParamsT {
    std::vector<TensorT<T>> w_query, w_key, w_value;  // per head: h x dk
    TensorT<T> w_out;                                 // (heads*dk) x h
};

template <class T>
struct PoolingParamsT {
    TensorT<T> score_w;  // h x h
    TensorT<T> score_b;  // h x 1
    TensorT<T> score_u;  // h x 1
};

template <class T>
struct HeadParamsT {
    TensorT<T> w;  // h x C
    TensorT<T> b;  // C x 1
    std::optional<TensorT<T>> w_distill;  // h x teacher_hidden; student role only
};

template <class T>
struct ModelParamsT {
    FeatureSchema schema;
    ModelRole role = ModelRole::target;
    ModelArch arch = ModelArch::covidcare;
    TaskKind task = TaskKind::multiclass12;
    ModelHyper hyper;
    std::vector<GruChannelT<T>> gru;
    std::optional<AttentionParamsT<T>> attn;
    std::optional<PoolingParamsT<T>> pool;
    HeadParamsT<T> head;
};

using ModelParams = ModelParamsT<double>;

// Visits every learnable tensor in a fixed order (the order used for Adam
// state, gradient accumulation, checkpoints, and graph binding).
template <class T, class F>
void for_each_param(ModelParamsT<T>& p, F&& f) {
    for (std::size_t i = 0; i < p.gru.size(); ++i) {
        const std::string base = "gru." + std::to_string(i);
        f(base + ".w_in", p.gru[i].w_in);
        f(base + ".w_hid", p.gru[i].w_hid);
        f(base + ".bias", p.gru[i].bias);
    }
    if (p.attn) {
        for (std::size_t j = 0; j < p.attn->w_query.size(); ++j) {
            const std::string base = "attn.head" + std::to_string(j);
            f(base + ".w_q", p.attn->w_query[j]);
            f(base + ".w_k", p.attn->w_key[j]);
            f(base + ".w_v", p.attn->w_value[j]);
        }
        f("attn.w_out", p.attn->w_out);
    }
    if (p.pool) {
        f("pool.w", p.pool->score_w);
        f("pool.b", p.pool->score_b);
        f("pool.u", p.pool->score_u);
    }
    f("head.w", p.head.w);
    f("head.b", p.head.b);
    if (p.head.w_distill) f("head.w_distill", *p.head.w_distill);
}

template <class T, class F>
void for_each_param(const ModelParamsT<T>& p, F&& f) {
    for_each_param(const_cast<ModelParamsT<T>&>(p),
                   [&f](const std::string& name, TensorT<T>& t) {
                       f(name, static_cast<const TensorT<T>&>(t));
                   });
}

template <class U, class T>
ModelParamsT<U> cast_params(const ModelParamsT<T>& p) {
    ModelParamsT<U> out;
    out.schema = p.schema;
    out.role = p.role;
    out.arch = p.arch;
    out.task = p.task;
    out.hyper = p.hyper;
    for (const auto& ch : p.gru)
        out.gru.push_back({tensor_cast<U>(ch.w_in), tensor_cast<U>(ch.w_hid),
                           tensor_cast<U>(ch.bias)});
    if (p.attn) {
        AttentionParamsT<U> a;
        for (const auto& t : p.attn->w_query) a.w_query.push_back(tensor_cast<U>(t));
        for (const auto& t : p.attn->w_key) a.w_key.push_back(tensor_cast<U>(t));
        for (const auto& t : p.attn->w_value) a.w_value.push_back(tensor_cast<U>(t));
        a.w_out = tensor_cast<U>(p.attn->w_out);
        out.attn = std::move(a);
    }
    if (p.pool)
        out.pool = PoolingParamsT<U>{tensor_cast<U>(p.pool->score_w),
                                     tensor_cast<U>(p.pool->score_b),
                                     tensor_cast<U>(p.pool->score_u)};
    out.head.w = tensor_cast<U>(p.head.w);
    out.head.b = tensor_cast<U>(p.head.b);
    if (p.head.w_distill) out.head.w_distill = tensor_cast<U>(*p.head.w_distill);
    return out;
}

// Fresh model with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights and zero
// biases; draw order is fixed by construction.
ModelParams make_model(const FeatureSchema& schema, ModelRole role, ModelArch arch, TaskKind task,
                       const ModelHyper& hyper, std::uint64_t seed);

std::size_t parameter_count(const ModelParams& p);

// ---- Forward pass (graph construction) ----

template <class T>
struct ForwardResult {
    NodeId feat_embed = -1;   // F: N x h
    NodeId interacted = -1;   // F*: N x h (== feat_embed without attention)
    NodeId pooled = -1;       // s: h x 1
    NodeId alpha = -1;        // N x 1 pooling weights (-1 for single_gru)
    NodeId logits = -1;       // C x 1
    NodeId probs = -1;        // C x 1 (softmax) or 1 x 1 (sigmoid)
    NodeId distill = -1;      // teacher_hidden x 1 (student role only)
    std::vector<NodeId> attn_maps;  // per-head A_i, N x N
    std::unordered_map<std::string, NodeId> bound;  // param name -> leaf id
    std::vector<NodeId> param_ids;                  // in for_each_param order
};

namespace detail {

template <class T>
struct GateSlices {
    NodeId w_in_z, w_in_r, w_in_c;
    NodeId w_hid_z, w_hid_r, w_hid_c;
    NodeId b_z, b_r, b_c;
};

template <class T>
GateSlices<T> slice_gates(GraphT<T>& g, NodeId w_in, NodeId w_hid, NodeId bias, std::size_t h) {
    GateSlices<T> s;
    s.w_in_z = g.slice_rows(w_in, 0, h);
    s.w_in_r = g.slice_rows(w_in, h, 2 * h);
    s.w_in_c = g.slice_rows(w_in, 2 * h, 3 * h);
    s.w_hid_z = g.slice_rows(w_hid, 0, h);
    s.w_hid_r = g.slice_rows(w_hid, h, 2 * h);
    s.w_hid_c = g.slice_rows(w_hid, 2 * h, 3 * h);
    s.b_z = g.slice_rows(bias, 0, h);
    s.b_r = g.slice_rows(bias, h, 2 * h);
    s.b_c = g.slice_rows(bias, 2 * h, 3 * h);
    return s;
}

// One GRU step: h' = (1-z) c + z h, candidate uses the reset-gated state.
template <class T>
NodeId gru_step(GraphT<T>& g, const GateSlices<T>& w, NodeId x, NodeId h) {
    NodeId z = g.sigmoid(g.add(g.add(g.matmul(w.w_in_z, x), g.matmul(w.w_hid_z, h)), w.b_z));
    NodeId r = g.sigmoid(g.add(g.add(g.matmul(w.w_in_r, x), g.matmul(w.w_hid_r, h)), w.b_r));
    NodeId c = g.tanh(g.add(
        g.add(g.matmul(w.w_in_c, x), g.matmul(w.w_hid_c, g.elementwise_mul(r, h))), w.b_c));
    return g.add(c, g.elementwise_mul(z, g.add(h, g.scale(c, T(-1)))));
}

}  // namespace detail

// Runs encode -> attend -> pool -> predict for one imputed, normalized
// record, binding every parameter as a gradient-tracking leaf.
template <class T>
ForwardResult<T> build_forward(GraphT<T>& g, const ModelParamsT<T>& params,
                               const PatientRecord& rec) {
    const std::size_t n = params.schema.size();
    if (rec.n_features != n)
        throw Error("forward: record has " + std::to_string(rec.n_features) +
                    " features, schema expects " + std::to_string(n));
    const auto h = static_cast<std::size_t>(params.hyper.hidden);

    ForwardResult<T> out;
    for_each_param(params, [&](const std::string& name, const TensorT<T>& t) {
        NodeId id = g.param(t);
        out.bound.emplace(name, id);
        out.param_ids.push_back(id);
    });
    auto bound = [&out](const std::string& name) { return out.bound.at(name); };

    // Feature-extracting layer.
    const std::size_t n_channels = params.arch == ModelArch::single_gru ? 1 : n;
    std::vector<NodeId> finals;
    for (std::size_t i = 0; i < n_channels; ++i) {
        const std::string base = "gru." + std::to_string(i);
        auto gates = detail::slice_gates(g, bound(base + ".w_in"), bound(base + ".w_hid"),
                                         bound(base + ".bias"), h);
        NodeId hidden = g.constant(TensorT<T>(h, 1));
        for (std::size_t t = 0; t < rec.n_steps; ++t) {
            TensorT<T> x = params.arch == ModelArch::single_gru ? TensorT<T>(n, 1)
                                                                : TensorT<T>(1, 1);
            if (params.arch == ModelArch::single_gru) {
                for (std::size_t f = 0; f < n; ++f) x.v[f] = static_cast<T>(rec.value_at(f, t));
            } else {
                x.v[0] = static_cast<T>(rec.value_at(i, t));
            }
            hidden = detail::gru_step(g, gates, g.constant(std::move(x)), hidden);
        }
        finals.push_back(hidden);
    }

    if (params.arch == ModelArch::single_gru) {
        out.pooled = finals[0];
    } else {
        out.feat_embed = g.transpose(g.concat_cols(finals));  // N x h

        NodeId fstar = out.feat_embed;
        if (params.arch == ModelArch::covidcare) {
            const auto m = static_cast<std::size_t>(params.hyper.heads);
            const auto dk = static_cast<std::size_t>(params.hyper.key_dim);
            std::vector<NodeId> heads;
            for (std::size_t j = 0; j < m; ++j) {
                const std::string base = "attn.head" + std::to_string(j);
                NodeId q = g.matmul(out.feat_embed, bound(base + ".w_q"));
                NodeId k = g.matmul(out.feat_embed, bound(base + ".w_k"));
                NodeId v = g.matmul(out.feat_embed, bound(base + ".w_v"));
                NodeId scores =
                    g.scale(g.matmul(q, g.transpose(k)), T(1) / static_cast<T>(std::sqrt(double(dk))));
                NodeId a = g.softmax_rows(scores);
                out.attn_maps.push_back(a);
                heads.push_back(g.matmul(a, v));
            }
            fstar = g.matmul(g.concat_cols(heads), bound("attn.w_out"));
        }
        out.interacted = fstar;

        // Additive attention pooling: score_i = u^T tanh(W f*_i + b).
        NodeId ones = g.constant(TensorT<T>(1, n, T(1)));
        NodeId scored = g.tanh(g.add(g.matmul(bound("pool.w"), g.transpose(fstar)),
                                     g.matmul(bound("pool.b"), ones)));  // h x N
        NodeId score_row = g.matmul(g.transpose(bound("pool.u")), scored);  // 1 x N
        NodeId alpha_row = g.softmax_rows(score_row);
        out.alpha = g.transpose(alpha_row);  // N x 1
        out.pooled = g.matmul(g.transpose(fstar), out.alpha);  // h x 1
    }

    out.logits = g.add(g.matmul(g.transpose(bound("head.w")), out.pooled), bound("head.b"));
    if (params.task == TaskKind::multiclass12)
        out.probs = g.transpose(g.softmax_rows(g.transpose(out.logits)));
    else
        out.probs = g.sigmoid(out.logits);

    if (params.head.w_distill) {
        if (params.role != ModelRole::student)
            throw Error("forward: distillation projection on non-student role");
        out.distill = g.matmul(g.transpose(bound("head.w_distill")), out.pooled);
    }
    return out;
}

// Plain-value forward for evaluation paths: returns class probabilities
// (C entries, or one entry for binary) and optionally the pooling weights.
template <class T>
std::vector<double> forward_probs(const ModelParamsT<T>& params, const PatientRecord& rec,
                                  std::vector<double>* alpha_out = nullptr) {
    GraphT<T> g;
    ForwardResult<T> f = build_forward(g, params, rec);
    std::vector<double> probs;
    for (T x : g.value(f.probs).v) probs.push_back(static_cast<double>(x));
    if (alpha_out) {
        alpha_out->clear();
        if (f.alpha >= 0)
            for (T x : g.value(f.alpha).v) alpha_out->push_back(static_cast<double>(x));
    }
    return probs;
}

}  // namespace covidcare
