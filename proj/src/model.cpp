#include "covidcare/model.hpp"

#include "covidcare/rng.hpp"

namespace covidcare {

namespace {

Tensor uniform_init(Rng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(rows, cols);
    for (double& x : t.v) x = uniform(rng, -bound, bound);
    return t;
}

}  // namespace

ModelParams make_model(const FeatureSchema& schema, ModelRole role, ModelArch arch, TaskKind task,
                       const ModelHyper& hyper, std::uint64_t seed) {
    if (schema.size() == 0) throw Error("model: empty schema");
    if (hyper.hidden < 1) throw Error("model: hidden size must be >= 1");
    if (arch == ModelArch::covidcare && (hyper.heads < 1 || hyper.key_dim < 1))
        throw Error("model: attention needs heads >= 1 and key_dim >= 1");

    Rng rng = make_rng(seed, "model-init");
    const auto h = static_cast<std::size_t>(hyper.hidden);
    const std::size_t n = schema.size();
    const int classes = class_count(task);

    ModelParams p;
    p.schema = schema;
    p.role = role;
    p.arch = arch;
    p.task = task;
    p.hyper = hyper;

    const std::size_t n_channels = arch == ModelArch::single_gru ? 1 : n;
    const std::size_t in_width = arch == ModelArch::single_gru ? n : 1;
    for (std::size_t i = 0; i < n_channels; ++i) {
        GruChannelT<double> ch;
        ch.w_in = uniform_init(rng, 3 * h, in_width, in_width);
        ch.w_hid = uniform_init(rng, 3 * h, h, h);
        ch.bias = Tensor(3 * h, 1);
        p.gru.push_back(std::move(ch));
    }

    if (arch == ModelArch::covidcare) {
        AttentionParamsT<double> attn;
        const auto m = static_cast<std::size_t>(hyper.heads);
        const auto dk = static_cast<std::size_t>(hyper.key_dim);
        for (std::size_t j = 0; j < m; ++j) {
            attn.w_query.push_back(uniform_init(rng, h, dk, h));
            attn.w_key.push_back(uniform_init(rng, h, dk, h));
            attn.w_value.push_back(uniform_init(rng, h, dk, h));
        }
        attn.w_out = uniform_init(rng, m * dk, h, m * dk);
        p.attn = std::move(attn);
    }

    if (arch != ModelArch::single_gru) {
        PoolingParamsT<double> pool;
        pool.score_w = uniform_init(rng, h, h, h);
        pool.score_b = Tensor(h, 1);
        pool.score_u = uniform_init(rng, h, 1, h);
        p.pool = std::move(pool);
    }

    p.head.w = uniform_init(rng, h, static_cast<std::size_t>(classes), h);
    p.head.b = Tensor(static_cast<std::size_t>(classes), 1);
    if (role == ModelRole::student) {
        const auto ht = static_cast<std::size_t>(hyper.teacher_hidden);
        p.head.w_distill = uniform_init(rng, h, ht, h);
    }
    return p;
}

std::size_t parameter_count(const ModelParams& p) {
    std::size_t count = 0;
    for_each_param(p, [&count](const std::string&, const Tensor& t) { count += t.size(); });
    return count;
}

}  // namespace covidcare
