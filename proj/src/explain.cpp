#include "covidcare/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "covidcare/error.hpp"

namespace covidcare {

namespace {

PatientRecord prep(const PatientRecord& rec, const NormStats& stats) {
    PatientRecord out = impute(rec);
    for (std::size_t f = 0; f < out.n_features; ++f)
        for (std::size_t t = 0; t < out.n_steps; ++t)
            out.values[f * out.n_steps + t] =
                (out.values[f * out.n_steps + t] - stats.mean[f]) / stats.stddev[f];
    return out;
}

}  // namespace

CohortFn outcome_cohorts() {
    return [](const PatientRecord& rec) {
        return std::string(rec.outcome == Outcome::adverse ? "adverse" : "discharged");
    };
}

CohortFn label_cohorts(TaskKind task) {
    return [task](const PatientRecord& rec) {
        return "class_" + std::to_string(record_label(rec, task));
    };
}

ImportanceTable collect_importance(const ModelParams& params, const NormStats& norm,
                                   const Dataset& raw, const CohortFn& cohort_fn) {
    if (raw.schema.size() != params.schema.size())
        throw Error("explain: dataset schema does not match the model");
    if (params.arch == ModelArch::single_gru)
        throw Error("explain: the single-GRU baseline has no pooling weights");
    const std::size_t n = params.schema.size();

    std::vector<std::vector<double>> alphas(raw.records.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(raw.records.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        std::vector<double> alpha;
        forward_probs(params, prep(raw.records[i], norm), &alpha);
        alphas[i] = std::move(alpha);
    }

    std::map<std::string, std::pair<std::vector<double>, std::size_t>> per_cohort;
    for (std::size_t i = 0; i < raw.records.size(); ++i) {
        double total = 0.0;
        for (double a : alphas[i]) total += a;
        if (std::abs(total - 1.0) > 1e-6)
            throw Error("explain: pooling weights of record " + raw.records[i].patient_id +
                        " do not sum to 1");
        auto& [sums, count] = per_cohort[cohort_fn(raw.records[i])];
        if (sums.empty()) sums.assign(n, 0.0);
        for (std::size_t f = 0; f < n; ++f) sums[f] += alphas[i][f];
        ++count;
    }

    ImportanceTable table;
    for (const auto& [cohort, payload] : per_cohort) table.cohorts.push_back(cohort);
    for (std::size_t f = 0; f < n; ++f) {
        for (const auto& [cohort, payload] : per_cohort) {
            ImportanceRow row;
            row.feature = params.schema.at(f).name;
            row.cohort = cohort;
            row.count = payload.second;
            row.mean_weight = payload.first[f] / static_cast<double>(payload.second);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

std::vector<std::pair<std::string, std::vector<double>>> collect_raw_alpha(
    const ModelParams& params, const NormStats& norm, const Dataset& raw) {
    std::vector<std::pair<std::string, std::vector<double>>> out(raw.records.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(raw.records.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        std::vector<double> alpha;
        forward_probs(params, prep(raw.records[i], norm), &alpha);
        out[i] = {raw.records[i].patient_id, std::move(alpha)};
    }
    return out;
}

std::vector<FeatureGap> rank_differential(const ImportanceTable& table) {
    if (table.cohorts.size() < 2)
        throw Error("rank differential: need at least 2 cohorts, have " +
                    std::to_string(table.cohorts.size()));
    std::map<std::string, std::vector<double>> weights_by_feature;
    std::vector<std::string> feature_order;
    for (const ImportanceRow& row : table.rows) {
        auto [it, inserted] = weights_by_feature.try_emplace(row.feature);
        if (inserted) feature_order.push_back(row.feature);
        it->second.push_back(row.mean_weight);
    }
    std::vector<FeatureGap> out;
    for (const std::string& f : feature_order) {
        const auto& ws = weights_by_feature[f];
        const auto [lo, hi] = std::minmax_element(ws.begin(), ws.end());
        out.push_back(FeatureGap{f, *hi - *lo});
    }
    std::sort(out.begin(), out.end(), [](const FeatureGap& a, const FeatureGap& b) {
        if (a.gap != b.gap) return a.gap > b.gap;
        return a.feature < b.feature;
    });
    return out;
}

std::string importance_to_csv(const ImportanceTable& table) {
    std::ostringstream out;
    out << "feature,cohort,mean_weight,count\n";
    char buf[64];
    for (const ImportanceRow& row : table.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", row.mean_weight);
        out << row.feature << ',' << row.cohort << ',' << buf << ',' << row.count << "\n";
    }
    return out.str();
}

}  // namespace covidcare
