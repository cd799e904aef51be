#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covidcare/schema.hpp"

namespace covidcare {

enum class Outcome { discharged, adverse };
enum class TaskKind { multiclass12, binary };

inline int class_count(TaskKind t) { return t == TaskKind::multiclass12 ? 12 : 1; }
inline int num_label_values(TaskKind t) { return t == TaskKind::multiclass12 ? 12 : 2; }

struct PatientRecord {
    std::string patient_id;
    std::size_t n_features = 0;
    std::size_t n_steps = 0;
    std::vector<double> values;   // n_features x n_steps, row-major
    std::vector<std::uint8_t> mask;  // 1 = observed
    Outcome outcome = Outcome::discharged;
    int days_to_outcome = 0;

    double value_at(std::size_t f, std::size_t t) const { return values[f * n_steps + t]; }
    bool observed(std::size_t f, std::size_t t) const { return mask[f * n_steps + t] != 0; }
};

struct Dataset {
    FeatureSchema schema;
    std::vector<PatientRecord> records;
    TaskKind task = TaskKind::multiclass12;
    std::size_t dropped_records = 0;  // records removed for an all-missing feature
};

struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-6
};

// EMR CSV (long format): patient_id,timestep,feature,value,outcome,days_to_outcome.
// One row per observed cell. Records whose every cell of some feature is
// missing are dropped and counted in Dataset::dropped_records.
// predict_at, when set, truncates each record to its first predict_at timesteps.
Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                 TaskKind task = TaskKind::multiclass12,
                 std::optional<std::size_t> predict_at = std::nullopt);

// Scans the file for the feature set, in first-appearance order.
FeatureSchema schema_from_csv(const std::string& path);

void write_csv(const std::string& path, const Dataset& ds);

// Forward fill; cells before the first observation take that first observed
// value. Every feature needs at least one observation.
PatientRecord impute(const PatientRecord& rec);
Dataset impute_all(const Dataset& ds);

// Per-feature mean/std over every cell of the (imputed) training records.
// Population std, floored at 1e-6.
NormStats compute_norm_stats(const Dataset& train);
Dataset apply_normalization(const Dataset& ds, const NormStats& stats);
Dataset undo_normalization(const Dataset& ds, const NormStats& stats);
// Spec-shaped convenience: stats from `train`, applied to `apply_to`.
std::pair<Dataset, NormStats> normalize(const Dataset& train, const Dataset& apply_to);

// 12-class length-of-stay label: buckets <=1, <=2, <=3, <=5, <=10, >10 days;
// classes 0-5 discharge, 6-11 adverse.
int derive_los_label(Outcome outcome, int remaining_days);

// Task label for one record.
int record_label(const PatientRecord& rec, TaskKind task);

// Stratified k-fold: deterministic per seed; validation sets partition the
// record set.
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> kfold(
    const Dataset& ds, std::size_t k, std::uint64_t seed);

// Restriction of `ds` to the source-side features of `map` (in source order):
// the student's view. Also returns, per kept feature, its index in the
// original schema.
Dataset shared_view(const Dataset& ds, const std::vector<std::size_t>& feature_indices);

}  // namespace covidcare
