#include "covidcare/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covidcare/error.hpp"
#include "covidcare/rng.hpp"

namespace covidcare {

namespace {

struct Loadings {
    // One loading vector per feature; empty vector means a pure-noise channel.
    std::vector<std::vector<double>> per_feature;
    std::vector<double> noise_level;  // per feature
    std::vector<double> risk_weight;
};

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = gaussian(rng);
            norm += x * x;
        }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

// Draws loadings for one schema: `shared` entries first (passed in so source
// and target agree), then private channels, half latent-driven, half noise.
Loadings assemble_loadings(const SynthConfig& cfg, Rng& rng,
                           const std::vector<std::vector<double>>& shared,
                           std::size_t total_features) {
    Loadings out;
    out.per_feature = shared;
    out.noise_level.assign(shared.size(), cfg.shared_noise);
    if (cfg.planted_feature >= 0)
        out.noise_level[static_cast<std::size_t>(cfg.planted_feature)] = 0.05;

    const std::size_t n_priv = total_features - shared.size();
    const std::size_t n_latent_priv = std::min(
        n_priv, static_cast<std::size_t>(
                    std::lround(cfg.private_latent_fraction * static_cast<double>(n_priv))));
    for (std::size_t j = 0; j < n_priv; ++j) {
        if (j < n_latent_priv) {
            auto v = unit_vector(rng, cfg.latent_dim);
            if (cfg.planted_feature >= 0) v[0] = 0.0;  // keep the planted channel exclusive
            out.per_feature.push_back(std::move(v));
            out.noise_level.push_back(cfg.private_noise);
        } else {
            out.per_feature.emplace_back();  // pure noise
            out.noise_level.push_back(1.0);
        }
    }
    return out;
}

int days_from_severity(double severity) {
    const int d = static_cast<int>(std::floor(13.0 * std::exp(-0.9 * severity)));
    return std::clamp(d, 0, 15);
}

PatientRecord generate_patient(const SynthConfig& cfg, const Loadings& load, Rng& rng,
                               const std::string& id, bool target_task, double* risk_out) {
    const std::size_t n = load.per_feature.size();
    const std::size_t t_steps =
        static_cast<std::size_t>(cfg.t_min) +
        static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(cfg.t_max - cfg.t_min + 1));

    // Latent random walk and its time mean.
    std::vector<std::vector<double>> z(t_steps, std::vector<double>(cfg.latent_dim));
    std::vector<double> zbar(cfg.latent_dim, 0.0);
    for (std::size_t d = 0; d < cfg.latent_dim; ++d) z[0][d] = gaussian(rng);
    for (std::size_t t = 1; t < t_steps; ++t)
        for (std::size_t d = 0; d < cfg.latent_dim; ++d)
            z[t][d] = z[t - 1][d] + gaussian(rng, 0.0, cfg.latent_step);
    for (std::size_t t = 0; t < t_steps; ++t)
        for (std::size_t d = 0; d < cfg.latent_dim; ++d) zbar[d] += z[t][d] / double(t_steps);

    double risk = 0.0;
    for (std::size_t d = 0; d < cfg.latent_dim; ++d) risk += load.risk_weight[d] * zbar[d];
    risk *= cfg.risk_gain;
    if (risk_out) *risk_out = risk;

    PatientRecord rec;
    rec.patient_id = id;
    rec.n_features = n;
    rec.n_steps = t_steps;
    rec.values.assign(n * t_steps, 0.0);
    rec.mask.assign(n * t_steps, 0);

    for (std::size_t f = 0; f < n; ++f) {
        const auto& a = load.per_feature[f];
        for (std::size_t t = 0; t < t_steps; ++t) {
            double v;
            if (a.empty()) {
                v = gaussian(rng);
            } else {
                v = 0.0;
                for (std::size_t d = 0; d < cfg.latent_dim; ++d) v += a[d] * z[t][d];
                v += gaussian(rng, 0.0, load.noise_level[f]);
            }
            rec.values[f * t_steps + t] = v;
        }
    }
    for (std::size_t f = 0; f < n; ++f) {
        bool any = false;
        for (std::size_t t = 0; t < t_steps; ++t) {
            const bool obs = uniform(rng, 0.0, 1.0) < cfg.obs_prob;
            rec.mask[f * t_steps + t] = obs;
            any = any || obs;
        }
        if (!any) rec.mask[f * t_steps + rng() % t_steps] = 1;
    }

    const double outcome_noise = target_task ? cfg.label_noise : cfg.label_noise_src;
    const bool adverse = risk + gaussian(rng, 0.0, outcome_noise) > 0.0;
    rec.outcome = adverse ? Outcome::adverse : Outcome::discharged;
    if (target_task) {
        const double severity = std::abs(risk + gaussian(rng, 0.0, cfg.label_noise));
        rec.days_to_outcome = days_from_severity(severity);
    } else {
        rec.days_to_outcome = 0;
    }
    return rec;
}

std::string feature_name(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%02zu", prefix, i + 1);
    return buf;
}

void validate(const SynthConfig& cfg) {
    if (cfg.n_shared > std::min(cfg.n_src, cfg.n_tar))
        throw Error("synth: n_shared exceeds min(n_src, n_tar)");
    if (cfg.n_src == 0 || cfg.n_tar == 0) throw Error("synth: feature counts must be positive");
    if (cfg.patients_src == 0 || cfg.patients_tar == 0)
        throw Error("synth: patient counts must be positive");
    if (cfg.t_min < 1 || cfg.t_min > cfg.t_max) throw Error("synth: need 1 <= t_min <= t_max");
    if (cfg.latent_dim == 0) throw Error("synth: latent_dim must be positive");
    if (cfg.obs_prob <= 0.0 || cfg.obs_prob > 1.0) throw Error("synth: obs_prob outside (0,1]");
    if (cfg.private_latent_fraction < 0.0 || cfg.private_latent_fraction > 1.0)
        throw Error("synth: private_latent_fraction outside [0,1]");
    if (cfg.planted_feature >= 0 &&
        static_cast<std::size_t>(cfg.planted_feature) >= cfg.n_shared)
        throw Error("synth: planted_feature outside shared range");
}

}  // namespace

SynthResult synthesize(const SynthConfig& cfg, std::uint64_t seed) {
    validate(cfg);

    Rng rng_load = make_rng(seed, "loadings");
    std::vector<double> risk_weight;
    std::vector<std::vector<double>> shared_loadings;
    if (cfg.planted_feature >= 0) {
        risk_weight.assign(cfg.latent_dim, 0.0);
        risk_weight[0] = 1.0;
        for (std::size_t j = 0; j < cfg.n_shared; ++j) {
            if (static_cast<int>(j) == cfg.planted_feature) {
                std::vector<double> v(cfg.latent_dim, 0.0);
                v[0] = 1.2;
                shared_loadings.push_back(std::move(v));
            } else {
                auto v = unit_vector(rng_load, cfg.latent_dim);
                v[0] = 0.0;
                shared_loadings.push_back(std::move(v));
            }
        }
    } else {
        risk_weight = unit_vector(rng_load, cfg.latent_dim);
        for (std::size_t j = 0; j < cfg.n_shared; ++j)
            shared_loadings.push_back(unit_vector(rng_load, cfg.latent_dim));
    }

    Rng rng_src_load = make_rng(seed, "loadings/src");
    Rng rng_tar_load = make_rng(seed, "loadings/tar");
    Loadings src_load = assemble_loadings(cfg, rng_src_load, shared_loadings, cfg.n_src);
    Loadings tar_load = assemble_loadings(cfg, rng_tar_load, shared_loadings, cfg.n_tar);
    src_load.risk_weight = risk_weight;
    tar_load.risk_weight = risk_weight;

    SynthResult out;
    out.source.task = TaskKind::binary;
    out.target.task = TaskKind::multiclass12;
    for (std::size_t j = 0; j < cfg.n_src; ++j) {
        const char* prefix = j < cfg.n_shared ? "shared" : "src_priv";
        const std::size_t local = j < cfg.n_shared ? j : j - cfg.n_shared;
        out.source.schema.add(feature_name(prefix, local),
                              j % 3 == 0 ? FeatureKind::vital : FeatureKind::lab);
    }
    for (std::size_t j = 0; j < cfg.n_tar; ++j) {
        const char* prefix = j < cfg.n_shared ? "shared" : "tgt_priv";
        const std::size_t local = j < cfg.n_shared ? j : j - cfg.n_shared;
        out.target.schema.add(feature_name(prefix, local),
                              j % 3 == 0 ? FeatureKind::vital : FeatureKind::lab);
    }

    out.risk_source.resize(cfg.patients_src);
    out.source.records.reserve(cfg.patients_src);
    for (std::size_t i = 0; i < cfg.patients_src; ++i) {
        Rng rng = make_rng(seed, "patient/src", i);
        char id[32];
        std::snprintf(id, sizeof id, "S%04zu", i);
        out.source.records.push_back(
            generate_patient(cfg, src_load, rng, id, false, &out.risk_source[i]));
    }
    out.risk_target.resize(cfg.patients_tar);
    out.target.records.reserve(cfg.patients_tar);
    for (std::size_t i = 0; i < cfg.patients_tar; ++i) {
        Rng rng = make_rng(seed, "patient/tar", i);
        char id[32];
        std::snprintf(id, sizeof id, "T%04zu", i);
        out.target.records.push_back(
            generate_patient(cfg, tar_load, rng, id, true, &out.risk_target[i]));
    }

    out.map = build_shared_map(out.source.schema, out.target.schema);
    if (out.map.pairs.size() != cfg.n_shared) throw Error("synth: shared map size mismatch");
    return out;
}

}  // namespace covidcare
