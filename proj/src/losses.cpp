#include "covidcare/losses.hpp"

#include <algorithm>
#include <cmath>

namespace covidcare {

namespace {
constexpr double kClamp = 1e-12;
}

LossValue compose(double pred_loss, std::optional<double> emb_loss) {
    LossValue out;
    out.components["pred"] = pred_loss;
    out.total = pred_loss;
    if (emb_loss) {
        out.components["emb"] = *emb_loss;
        out.total += *emb_loss;
    }
    return out;
}

double cross_entropy(std::span<const double> pred, int label, TaskKind task) {
    if (task == TaskKind::multiclass12) {
        if (pred.size() != 12)
            throw Error("cross-entropy: expected 12 probabilities, got " +
                        std::to_string(pred.size()));
        if (label < 0 || label >= 12)
            throw Error("cross-entropy: label " + std::to_string(label) + " outside [0,12)");
        return -std::log(std::max(pred[static_cast<std::size_t>(label)], kClamp));
    }
    if (pred.size() != 1) throw Error("cross-entropy: binary task expects one probability");
    if (label != 0 && label != 1)
        throw Error("cross-entropy: binary label must be 0 or 1, got " + std::to_string(label));
    const double p = pred[0];
    return -(label * std::log(std::max(p, kClamp)) +
             (1 - label) * std::log(std::max(1.0 - p, kClamp)));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw Error("kl: length mismatch " + std::to_string(p.size()) + " vs " +
                    std::to_string(q.size()));
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6)
        throw Error("kl: inputs are not probability vectors");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::max(p[i], kClamp);
        const double qi = std::max(q[i], kClamp);
        kl += pi * std::log(pi / qi);
    }
    return kl;
}

std::vector<double> softmax(std::span<const double> x) {
    if (x.empty()) throw Error("softmax: empty input");
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    std::vector<double> y(x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - mx);
        z += y[i];
    }
    for (double& v : y) v /= z;
    return y;
}

double distillation_loss(std::span<const double> s_hat_tea, std::span<const double> s_tea) {
    if (s_hat_tea.size() != s_tea.size())
        throw Error("distill: length mismatch " + std::to_string(s_hat_tea.size()) + " vs " +
                    std::to_string(s_tea.size()));
    return kl_divergence(softmax(s_hat_tea), softmax(s_tea));
}

}  // namespace covidcare
