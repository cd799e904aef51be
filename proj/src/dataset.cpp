#include "covidcare/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "covidcare/error.hpp"
#include "covidcare/rng.hpp"

namespace covidcare {

namespace {

constexpr double kSentinel = -1e300;  // never read after imputation
constexpr double kStdFloor = 1e-6;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

Outcome parse_outcome(const std::string& s, std::size_t lineno) {
    if (s == "discharged") return Outcome::discharged;
    if (s == "adverse") return Outcome::adverse;
    throw Error("csv: line " + std::to_string(lineno) + ": outcome must be discharged|adverse, got '" +
                s + "'");
}

double parse_number(const std::string& s, std::size_t lineno, const char* what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error("csv: line " + std::to_string(lineno) + ": non-numeric " + what + " '" + s +
                    "'");
    }
}

struct RawCell {
    double timestep;  // ordering key only; fractional stamps are fine
    std::size_t feature;
    double value;
};

struct RawPatient {
    std::string id;
    std::vector<RawCell> cells;
    Outcome outcome = Outcome::discharged;
    int days = 0;
    std::size_t order = 0;  // first-appearance order
};

}  // namespace

FeatureSchema schema_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("csv: empty file " + path);
    FeatureSchema schema;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = split_csv_line(line);
        if (cols.size() != 6)
            throw Error("csv: line " + std::to_string(lineno) + ": expected 6 columns");
        if (!schema.contains(cols[2])) schema.add(cols[2]);
    }
    return schema;
}

Dataset load_csv(const std::string& path, const FeatureSchema& schema, TaskKind task,
                 std::optional<std::size_t> predict_at) {
    std::ifstream in(path);
    if (!in) throw Error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("csv: empty file " + path);
    {
        auto header = split_csv_line(line);
        const std::vector<std::string> expect = {"patient_id", "timestep",  "feature",
                                                 "value",      "outcome",   "days_to_outcome"};
        if (header != expect)
            throw Error("csv: bad header in " + path +
                        " (want patient_id,timestep,feature,value,outcome,days_to_outcome)");
    }

    std::map<std::string, RawPatient> patients;
    std::vector<std::string> unknown_features;
    std::size_t lineno = 1, order = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = split_csv_line(line);
        if (cols.size() != 6)
            throw Error("csv: line " + std::to_string(lineno) + ": expected 6 columns, got " +
                        std::to_string(cols.size()));
        const std::size_t fidx = schema.find(cols[2]);
        if (fidx == FeatureSchema::kNotFound) {
            std::string canon = FeatureSchema::canonical(cols[2]);
            if (std::find(unknown_features.begin(), unknown_features.end(), canon) ==
                unknown_features.end())
                unknown_features.push_back(canon);
            continue;  // keep scanning so the error can list every offender
        }
        auto [it, inserted] = patients.try_emplace(cols[0]);
        RawPatient& p = it->second;
        if (inserted) {
            p.id = cols[0];
            p.order = order++;
        }
        RawCell cell;
        cell.timestep = parse_number(cols[1], lineno, "timestep");
        cell.feature = fidx;
        cell.value = parse_number(cols[3], lineno, "value");
        p.cells.push_back(cell);
        p.outcome = parse_outcome(cols[4], lineno);
        const double days = parse_number(cols[5], lineno, "days_to_outcome");
        if (days < 0) throw Error("csv: line " + std::to_string(lineno) + ": negative days_to_outcome");
        p.days = static_cast<int>(days);
    }
    if (!unknown_features.empty()) {
        std::string msg = "csv: unknown feature(s) not in schema:";
        for (const auto& f : unknown_features) msg += " '" + f + "'";
        throw Error(msg);
    }

    std::vector<const RawPatient*> ordered;
    ordered.reserve(patients.size());
    for (const auto& [id, p] : patients) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(),
              [](const RawPatient* a, const RawPatient* b) { return a->order < b->order; });

    Dataset ds;
    ds.schema = schema;
    ds.task = task;
    const std::size_t n = schema.size();
    for (const RawPatient* p : ordered) {
        std::vector<double> steps;
        for (const RawCell& c : p->cells) steps.push_back(c.timestep);
        std::sort(steps.begin(), steps.end());
        steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
        std::size_t t_full = steps.size();
        std::size_t t_keep = predict_at ? std::min(*predict_at, t_full) : t_full;
        if (t_keep == 0) continue;

        PatientRecord rec;
        rec.patient_id = p->id;
        rec.n_features = n;
        rec.n_steps = t_keep;
        rec.values.assign(n * t_keep, kSentinel);
        rec.mask.assign(n * t_keep, 0);
        rec.outcome = p->outcome;
        rec.days_to_outcome = p->days;
        for (const RawCell& c : p->cells) {
            const auto pos = std::lower_bound(steps.begin(), steps.end(), c.timestep);
            const std::size_t t = static_cast<std::size_t>(pos - steps.begin());
            if (t >= t_keep) continue;  // truncated by predict_at
            rec.values[c.feature * t_keep + t] = c.value;
            rec.mask[c.feature * t_keep + t] = 1;
        }
        bool has_empty_feature = false;
        for (std::size_t f = 0; f < n && !has_empty_feature; ++f) {
            bool any = false;
            for (std::size_t t = 0; t < t_keep; ++t) any = any || rec.mask[f * t_keep + t];
            has_empty_feature = !any;
        }
        if (has_empty_feature) {
            ++ds.dropped_records;
            continue;
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void write_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error("csv: cannot write " + path);
    out << "patient_id,timestep,feature,value,outcome,days_to_outcome\n";
    char buf[64];
    for (const PatientRecord& rec : ds.records) {
        const char* outcome = rec.outcome == Outcome::adverse ? "adverse" : "discharged";
        for (std::size_t f = 0; f < rec.n_features; ++f) {
            for (std::size_t t = 0; t < rec.n_steps; ++t) {
                if (!rec.observed(f, t)) continue;
                std::snprintf(buf, sizeof buf, "%.17g", rec.value_at(f, t));
                out << rec.patient_id << ',' << t << ',' << ds.schema.at(f).name << ',' << buf
                    << ',' << outcome << ',' << rec.days_to_outcome << '\n';
            }
        }
    }
}

PatientRecord impute(const PatientRecord& rec) {
    PatientRecord out = rec;
    for (std::size_t f = 0; f < rec.n_features; ++f) {
        const std::size_t base = f * rec.n_steps;
        std::size_t first_obs = rec.n_steps;
        for (std::size_t t = 0; t < rec.n_steps; ++t) {
            if (rec.mask[base + t]) {
                first_obs = t;
                break;
            }
        }
        if (first_obs == rec.n_steps)
            throw Error("impute: feature '" + std::to_string(f) +
                        "' has no observations (record " + rec.patient_id + ")");
        double carry = rec.values[base + first_obs];
        for (std::size_t t = 0; t < rec.n_steps; ++t) {
            if (rec.mask[base + t]) carry = rec.values[base + t];
            out.values[base + t] = carry;
            out.mask[base + t] = 1;
        }
    }
    return out;
}

Dataset impute_all(const Dataset& ds) {
    Dataset out;
    out.schema = ds.schema;
    out.task = ds.task;
    out.dropped_records = ds.dropped_records;
    out.records.reserve(ds.records.size());
    for (const PatientRecord& rec : ds.records) out.records.push_back(impute(rec));
    return out;
}

NormStats compute_norm_stats(const Dataset& train) {
    const std::size_t n = train.schema.size();
    NormStats stats;
    stats.mean.assign(n, 0.0);
    stats.stddev.assign(n, 1.0);
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (const PatientRecord& rec : train.records) {
        for (std::size_t f = 0; f < n; ++f) {
            for (std::size_t t = 0; t < rec.n_steps; ++t) {
                const double v = rec.value_at(f, t);
                sum[f] += v;
                sumsq[f] += v * v;
                ++count[f];
            }
        }
    }
    for (std::size_t f = 0; f < n; ++f) {
        if (count[f] == 0) continue;
        const double m = sum[f] / static_cast<double>(count[f]);
        const double var = std::max(0.0, sumsq[f] / static_cast<double>(count[f]) - m * m);
        stats.mean[f] = m;
        stats.stddev[f] = std::max(std::sqrt(var), kStdFloor);
    }
    return stats;
}

Dataset apply_normalization(const Dataset& ds, const NormStats& stats) {
    if (stats.mean.size() != ds.schema.size())
        throw Error("normalize: stats cover " + std::to_string(stats.mean.size()) +
                    " features, dataset has " + std::to_string(ds.schema.size()));
    Dataset out = ds;
    for (PatientRecord& rec : out.records)
        for (std::size_t f = 0; f < rec.n_features; ++f)
            for (std::size_t t = 0; t < rec.n_steps; ++t)
                rec.values[f * rec.n_steps + t] =
                    (rec.values[f * rec.n_steps + t] - stats.mean[f]) / stats.stddev[f];
    return out;
}

Dataset undo_normalization(const Dataset& ds, const NormStats& stats) {
    Dataset out = ds;
    for (PatientRecord& rec : out.records)
        for (std::size_t f = 0; f < rec.n_features; ++f)
            for (std::size_t t = 0; t < rec.n_steps; ++t)
                rec.values[f * rec.n_steps + t] =
                    rec.values[f * rec.n_steps + t] * stats.stddev[f] + stats.mean[f];
    return out;
}

std::pair<Dataset, NormStats> normalize(const Dataset& train, const Dataset& apply_to) {
    NormStats stats = compute_norm_stats(train);
    return {apply_normalization(apply_to, stats), stats};
}

int derive_los_label(Outcome outcome, int remaining_days) {
    if (remaining_days < 0) throw Error("label: negative remaining days");
    int bucket;
    if (remaining_days <= 1) bucket = 0;
    else if (remaining_days <= 2) bucket = 1;
    else if (remaining_days <= 3) bucket = 2;
    else if (remaining_days <= 5) bucket = 3;
    else if (remaining_days <= 10) bucket = 4;
    else bucket = 5;
    return outcome == Outcome::discharged ? bucket : 6 + bucket;
}

int record_label(const PatientRecord& rec, TaskKind task) {
    if (task == TaskKind::multiclass12) return derive_los_label(rec.outcome, rec.days_to_outcome);
    return rec.outcome == Outcome::adverse ? 1 : 0;
}

std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> kfold(
    const Dataset& ds, std::size_t k, std::uint64_t seed) {
    const std::size_t n = ds.records.size();
    if (k < 2) throw Error("kfold: k must be >= 2");
    if (k > n)
        throw Error("kfold: k=" + std::to_string(k) + " exceeds record count " +
                    std::to_string(n));

    // Stratify: group indices by label, shuffle each group, deal round-robin.
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < n; ++i) by_label[record_label(ds.records[i], ds.task)].push_back(i);

    std::vector<std::vector<std::size_t>> fold_members(k);
    Rng rng = make_rng(seed, "kfold");
    std::size_t next_fold = 0;
    for (auto& [label, idxs] : by_label) {
        std::shuffle(idxs.begin(), idxs.end(), rng);
        for (std::size_t i : idxs) {
            fold_members[next_fold % k].push_back(i);
            ++next_fold;
        }
    }

    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> val = fold_members[f];
        std::sort(val.begin(), val.end());
        std::vector<std::size_t> train;
        train.reserve(n - val.size());
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            train.insert(train.end(), fold_members[g].begin(), fold_members[g].end());
        }
        std::sort(train.begin(), train.end());
        folds.emplace_back(std::move(train), std::move(val));
    }
    return folds;
}

Dataset shared_view(const Dataset& ds, const std::vector<std::size_t>& feature_indices) {
    Dataset out;
    out.task = ds.task;
    out.dropped_records = ds.dropped_records;
    for (std::size_t f : feature_indices) {
        if (f >= ds.schema.size()) throw Error("shared view: feature index out of range");
        out.schema.add(ds.schema.at(f).name, ds.schema.at(f).kind);
    }
    out.records.reserve(ds.records.size());
    for (const PatientRecord& rec : ds.records) {
        PatientRecord r;
        r.patient_id = rec.patient_id;
        r.n_features = feature_indices.size();
        r.n_steps = rec.n_steps;
        r.outcome = rec.outcome;
        r.days_to_outcome = rec.days_to_outcome;
        r.values.resize(r.n_features * r.n_steps);
        r.mask.resize(r.n_features * r.n_steps);
        for (std::size_t fi = 0; fi < feature_indices.size(); ++fi) {
            const std::size_t f = feature_indices[fi];
            std::copy(rec.values.begin() + f * rec.n_steps,
                      rec.values.begin() + (f + 1) * rec.n_steps,
                      r.values.begin() + fi * r.n_steps);
            std::copy(rec.mask.begin() + f * rec.n_steps, rec.mask.begin() + (f + 1) * rec.n_steps,
                      r.mask.begin() + fi * r.n_steps);
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace covidcare
