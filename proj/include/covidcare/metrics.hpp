#pragma once

#include <string>
#include <vector>

#include "covidcare/dataset.hpp"

namespace covidcare {

// Rank-based AUROC (Mann-Whitney, ties counted half). Needs at least one
// positive and one negative.
double auroc_binary(const std::vector<double>& scores, const std::vector<bool>& labels);

// Average precision: sum over descending-threshold steps of
// (recall increment) x (precision at that threshold). Needs a positive.
double auprc(const std::vector<double>& scores, const std::vector<bool>& labels);

// Max over thresholds of min(precision, sensitivity).
double min_se_pplus(const std::vector<double>& scores, const std::vector<bool>& labels);

struct MulticlassMetrics {
    double auprc = 0.0;        // micro, over the flattened indicator matrix
    double auroc_micro = 0.0;
    double auroc_macro = 0.0;  // unweighted mean over classes present
    double min_se_pplus = 0.0; // micro
    std::vector<int> skipped_classes;  // absent from labels (or one-class)
};

// probabilities: one 12-entry row per sample.
MulticlassMetrics multiclass_report(const std::vector<std::vector<double>>& probabilities,
                                    const std::vector<int>& labels);

struct BinaryMetrics {
    double auprc = 0.0;
    double auroc = 0.0;
    double min_se_pplus = 0.0;
};

BinaryMetrics binary_report(const std::vector<double>& scores, const std::vector<bool>& labels);

// Per-task metric bundle with per-fold breakdown.
struct EvalReport {
    TaskKind task = TaskKind::multiclass12;
    std::vector<std::string> metric_names;           // fixed order per task
    std::vector<std::vector<double>> per_fold;       // [metric][fold]
    std::vector<int> skipped_macro_classes;          // union across folds

    void add_fold(const MulticlassMetrics& m);
    void add_fold(const BinaryMetrics& m);
    double mean(std::size_t metric) const;
    double stddev(std::size_t metric) const;  // population std across folds
    std::string to_json() const;
    std::string to_csv() const;
    std::string table_row() const;  // Table-3 style "mean (std)" cells
};

// "0.3252 (0.0457)"
std::string format_mean_std(double mean, double stddev);

}  // namespace covidcare
