#include "covidcare/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "covidcare/error.hpp"

namespace covidcare {

namespace {

void check_sizes(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw Error("metrics: scores/labels length mismatch");
    if (scores.empty()) throw Error("metrics: empty input");
}

std::size_t count_pos(const std::vector<bool>& labels) {
    std::size_t n = 0;
    for (bool b : labels)
        if (b) ++n;
    return n;
}

// Indices sorted by descending score, plus the distinct-score group bounds.
std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

double auroc_binary(const std::vector<double>& scores, const std::vector<bool>& labels) {
    check_sizes(scores, labels);
    const std::size_t pos = count_pos(labels);
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0)
        throw Error("auroc: need at least one positive and one negative label");

    // Average ranks over ties, then the Mann-Whitney statistic.
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg_rank;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (labels[k]) rank_sum += rank[k];
    const double u = rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auprc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    check_sizes(scores, labels);
    const std::size_t total_pos = count_pos(labels);
    if (total_pos == 0) throw Error("auprc: no positive labels");

    auto idx = order_desc(scores);
    double ap = 0.0;
    std::size_t tp = 0, predicted = 0;
    double prev_recall = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        // Consume a whole group of tied scores before measuring.
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            ++predicted;
            if (labels[idx[k]]) ++tp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    return ap;
}

double min_se_pplus(const std::vector<double>& scores, const std::vector<bool>& labels) {
    check_sizes(scores, labels);
    const std::size_t total_pos = count_pos(labels);
    if (total_pos == 0) throw Error("min(Se,P+): no positive labels");

    auto idx = order_desc(scores);
    double best = 0.0;
    std::size_t tp = 0, predicted = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            ++predicted;
            if (labels[idx[k]]) ++tp;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        best = std::max(best, std::min(precision, recall));
        i = j + 1;
    }
    return best;
}

MulticlassMetrics multiclass_report(const std::vector<std::vector<double>>& probabilities,
                                    const std::vector<int>& labels) {
    if (probabilities.size() != labels.size())
        throw Error("metrics: rows/labels length mismatch");
    if (probabilities.empty()) throw Error("metrics: empty input");
    const std::size_t classes = 12;

    // Flattened one-vs-rest indicator matrix for micro metrics.
    std::vector<double> flat_scores;
    std::vector<bool> flat_labels;
    flat_scores.reserve(probabilities.size() * classes);
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i].size() != classes)
            throw Error("metrics: probability row is not 12-wide");
        for (std::size_t c = 0; c < classes; ++c) {
            flat_scores.push_back(probabilities[i][c]);
            flat_labels.push_back(labels[i] == static_cast<int>(c));
        }
    }

    MulticlassMetrics out;
    out.auroc_micro = auroc_binary(flat_scores, flat_labels);
    out.auprc = auprc(flat_scores, flat_labels);
    out.min_se_pplus = min_se_pplus(flat_scores, flat_labels);

    double macro_sum = 0.0;
    std::size_t macro_n = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t pos = 0;
        for (int l : labels)
            if (l == static_cast<int>(c)) ++pos;
        if (pos == 0 || pos == labels.size()) {
            out.skipped_classes.push_back(static_cast<int>(c));
            continue;
        }
        std::vector<double> s;
        std::vector<bool> y;
        s.reserve(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            s.push_back(probabilities[i][c]);
            y.push_back(labels[i] == static_cast<int>(c));
        }
        macro_sum += auroc_binary(s, y);
        ++macro_n;
    }
    if (macro_n == 0) throw Error("metrics: no class with both positives and negatives");
    out.auroc_macro = macro_sum / static_cast<double>(macro_n);
    return out;
}

BinaryMetrics binary_report(const std::vector<double>& scores, const std::vector<bool>& labels) {
    BinaryMetrics out;
    out.auroc = auroc_binary(scores, labels);
    out.auprc = auprc(scores, labels);
    out.min_se_pplus = min_se_pplus(scores, labels);
    return out;
}

void EvalReport::add_fold(const MulticlassMetrics& m) {
    task = TaskKind::multiclass12;
    if (metric_names.empty()) {
        metric_names = {"auprc", "auroc_macro", "auroc_micro", "min_se_pplus"};
        per_fold.assign(metric_names.size(), {});
    }
    per_fold[0].push_back(m.auprc);
    per_fold[1].push_back(m.auroc_macro);
    per_fold[2].push_back(m.auroc_micro);
    per_fold[3].push_back(m.min_se_pplus);
    for (int c : m.skipped_classes)
        if (std::find(skipped_macro_classes.begin(), skipped_macro_classes.end(), c) ==
            skipped_macro_classes.end())
            skipped_macro_classes.push_back(c);
    std::sort(skipped_macro_classes.begin(), skipped_macro_classes.end());
}

void EvalReport::add_fold(const BinaryMetrics& m) {
    task = TaskKind::binary;
    if (metric_names.empty()) {
        metric_names = {"auprc", "auroc", "min_se_pplus"};
        per_fold.assign(metric_names.size(), {});
    }
    per_fold[0].push_back(m.auprc);
    per_fold[1].push_back(m.auroc);
    per_fold[2].push_back(m.min_se_pplus);
}

double EvalReport::mean(std::size_t metric) const {
    const auto& xs = per_fold.at(metric);
    if (xs.empty()) throw Error("report: no folds");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double EvalReport::stddev(std::size_t metric) const {
    const auto& xs = per_fold.at(metric);
    const double m = mean(metric);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

std::string EvalReport::to_json() const {
    nlohmann::json doc;
    doc["task"] = task == TaskKind::multiclass12 ? "multiclass-12" : "binary";
    doc["folds"] = per_fold.empty() ? 0 : per_fold[0].size();
    for (std::size_t i = 0; i < metric_names.size(); ++i) {
        doc["metrics"][metric_names[i]] = {
            {"mean", mean(i)}, {"std", stddev(i)}, {"per_fold", per_fold[i]}};
    }
    if (task == TaskKind::multiclass12) doc["skipped_macro_classes"] = skipped_macro_classes;
    return doc.dump(1) + "\n";
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "metric,mean,std";
    const std::size_t folds = per_fold.empty() ? 0 : per_fold[0].size();
    for (std::size_t f = 0; f < folds; ++f) out << ",fold_" << (f + 1);
    out << "\n";
    char buf[64];
    for (std::size_t i = 0; i < metric_names.size(); ++i) {
        out << metric_names[i];
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", mean(i), stddev(i));
        out << buf;
        for (double x : per_fold[i]) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

std::string EvalReport::table_row() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < metric_names.size(); ++i) {
        if (i) out << "  ";
        out << metric_names[i] << " " << format_mean_std(mean(i), stddev(i));
    }
    return out.str();
}

std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f (%.4f)", mean, stddev);
    return buf;
}

}  // namespace covidcare
