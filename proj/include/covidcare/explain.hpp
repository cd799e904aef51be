#pragma once

// Feature importance from the pooling attention weights, averaged per
// cohort: which biomarkers the model leans on for discharged vs adverse
// patients.

#include <functional>
#include <string>
#include <vector>

#include "covidcare/dataset.hpp"
#include "covidcare/model.hpp"

namespace covidcare {

struct ImportanceRow {
    std::string feature;
    std::string cohort;
    double mean_weight = 0.0;
    std::size_t count = 0;
};

struct ImportanceTable {
    std::vector<ImportanceRow> rows;  // |features| x |cohorts|, feature-major
    std::vector<std::string> cohorts;
};

using CohortFn = std::function<std::string(const PatientRecord&)>;

// Default cohorts: outcome, "discharged" vs "adverse".
CohortFn outcome_cohorts();
// Cohorts by task label ("class_0".."class_11" or "class_0"/"class_1").
CohortFn label_cohorts(TaskKind task);

// Forwards every record (imputed + normalized with the model's stored
// stats), captures the pooling weights, and averages them per
// (feature, cohort).
ImportanceTable collect_importance(const ModelParams& params, const NormStats& norm,
                                   const Dataset& raw, const CohortFn& cohort_fn);

// Per-record pooling weight dump for attention_raw.json.
std::vector<std::pair<std::string, std::vector<double>>> collect_raw_alpha(
    const ModelParams& params, const NormStats& norm, const Dataset& raw);

struct FeatureGap {
    std::string feature;
    double gap = 0.0;  // max pairwise |mean weight| difference across cohorts
};

// Features ordered by descending cohort gap; ties broken by feature name.
std::vector<FeatureGap> rank_differential(const ImportanceTable& table);

std::string importance_to_csv(const ImportanceTable& table);

}  // namespace covidcare
