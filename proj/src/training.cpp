#include "covidcare/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "covidcare/losses.hpp"
#include "covidcare/rng.hpp"

namespace covidcare {

void TrainPlan::validate() const {
    if (batch_size < 1) throw Error("plan: batch_size must be >= 1");
    if (patience < 1) throw Error("plan: patience must be >= 1");
    if (learning_rate <= 0.0) throw Error("plan: learning rate must be positive");
    if (max_epochs < 1) throw Error("plan: max_epochs must be >= 1");
    if (precision != 32 && precision != 64) throw Error("plan: precision must be 32 or 64");
    if (val_fraction <= 0.0 || val_fraction > 0.5)
        throw Error("plan: val_fraction outside (0, 0.5]");
    if (distill_weight < 0.0) throw Error("plan: distill_weight must be >= 0");
}

namespace {

PatientRecord normalize_record(const PatientRecord& rec, const NormStats& stats) {
    PatientRecord out = rec;
    for (std::size_t f = 0; f < rec.n_features; ++f)
        for (std::size_t t = 0; t < rec.n_steps; ++t)
            out.values[f * rec.n_steps + t] =
                (rec.values[f * rec.n_steps + t] - stats.mean[f]) / stats.stddev[f];
    return out;
}

struct RecordLossValue {
    double pred = 0.0;
    double emb = 0.0;
};

template <class T>
RecordLossValue record_loss_values(const ModelParamsT<T>& model, const PatientRecord& rec,
                                   TaskKind task, const std::vector<double>* s_tea,
                                   const TrainPlan& plan) {
    GraphT<T> g;
    ForwardResult<T> fwd = build_forward(g, model, rec);
    RecordLossValue out;
    NodeId pred = pred_loss_node(g, fwd, record_label(rec, task), task);
    out.pred = static_cast<double>(g.value(pred).v[0]);
    if (s_tea) {
        NodeId emb = distill_loss_node(g, fwd.distill, *s_tea, plan.reverse_kl);
        out.emb = plan.distill_weight * static_cast<double>(g.value(emb).v[0]);
    }
    return out;
}

// Core phase loop. `s_tea`, when present, is aligned with raw.records and
// adds the distillation term; `frozen_mask` (flat-parameter order) pins
// tensors out of the optimizer entirely.
template <class T>
PhaseResult run_phase(const ModelParams& init, const Dataset& raw, const TrainPlan& plan,
                      const std::string& tag, const std::vector<std::vector<double>>* s_tea,
                      const std::vector<bool>* frozen_mask) {
    plan.validate();
    if (raw.records.empty()) throw Error("training: empty dataset (" + tag + " phase)");
    if (init.task != raw.task)
        throw Error("training: model head for task '" + task_name(init.task) +
                    "' does not match dataset task '" + task_name(raw.task) + "'");
    if (s_tea && s_tea->size() != raw.records.size())
        throw Error("training: teacher representations misaligned with dataset");

    const auto t_start = std::chrono::steady_clock::now();
    Dataset imputed = impute_all(raw);

    const std::size_t n = imputed.records.size();
    const std::size_t k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(1.0 / plan.val_fraction)), 2, n);
    if (n < 2) throw Error("training: need at least 2 records for a validation split");
    auto folds = kfold(imputed, k, derive_seed(plan.seed, tag + "/split"));
    std::vector<std::size_t> train_idx = folds[0].first;
    const std::vector<std::size_t> val_idx = folds[0].second;

    Dataset train_only;
    train_only.schema = imputed.schema;
    train_only.task = imputed.task;
    for (std::size_t i : train_idx) train_only.records.push_back(imputed.records[i]);
    const NormStats stats = compute_norm_stats(train_only);
    const Dataset data = apply_normalization(imputed, stats);

    ModelParamsT<T> model = cast_params<T>(init);
    std::vector<TensorT<T>*> all_tensors;
    for_each_param(model, [&all_tensors](const std::string&, TensorT<T>& t) {
        all_tensors.push_back(&t);
    });
    if (frozen_mask && frozen_mask->size() != all_tensors.size())
        throw Error("training: frozen mask size mismatch");

    // The optimizer sees only trainable tensors.
    std::vector<TensorT<T>*> trainable;
    std::vector<int> trainable_pos(all_tensors.size(), -1);
    for (std::size_t j = 0; j < all_tensors.size(); ++j) {
        if (frozen_mask && (*frozen_mask)[j]) continue;
        trainable_pos[j] = static_cast<int>(trainable.size());
        trainable.push_back(all_tensors[j]);
    }

    AdamStateT<T> state;
    std::vector<TensorT<T>> grads;
    for (TensorT<T>* p : trainable) grads.push_back(TensorT<T>(p->rows(), p->cols()));

    PhaseResult result;
    result.norm = stats;
    result.params = init;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;

    for (int epoch = 1; epoch <= plan.max_epochs; ++epoch) {
        Rng shuffle_rng = make_rng(plan.seed, tag + "/shuffle", static_cast<std::uint64_t>(epoch));
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);

        double epoch_pred = 0.0, epoch_emb = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(plan.batch_size)) {
            const std::size_t stop =
                std::min(train_idx.size(), start + static_cast<std::size_t>(plan.batch_size));
            const T inv_batch = T(1) / static_cast<T>(stop - start);
            for (TensorT<T>& gacc : grads) std::fill(gacc.v.begin(), gacc.v.end(), T{});

            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t idx = train_idx[b];
                const PatientRecord& rec = data.records[idx];
                GraphT<T> g;
                ForwardResult<T> fwd = build_forward(g, model, rec);
                NodeId pred = pred_loss_node(g, fwd, record_label(rec, raw.task), raw.task);
                NodeId loss = pred;
                if (s_tea) {
                    NodeId emb = distill_loss_node(g, fwd.distill, (*s_tea)[idx], plan.reverse_kl);
                    epoch_emb += plan.distill_weight * static_cast<double>(g.value(emb).v[0]);
                    if (plan.distill_weight != 1.0)
                        emb = g.scale(emb, static_cast<T>(plan.distill_weight));
                    loss = g.add(pred, emb);
                }
                epoch_pred += static_cast<double>(g.value(pred).v[0]);
                g.backward(g.scale(loss, inv_batch));
                for (std::size_t j = 0; j < all_tensors.size(); ++j) {
                    const int pos = trainable_pos[j];
                    if (pos < 0) continue;
                    const TensorT<T>& gr = g.grad(fwd.param_ids[j]);
                    TensorT<T>& acc = grads[static_cast<std::size_t>(pos)];
                    for (std::size_t i = 0; i < acc.size(); ++i) acc.v[i] += gr.v[i];
                }
            }

            if (plan.grad_clip > 0.0) {
                double norm_sq = 0.0;
                for (const TensorT<T>& gacc : grads)
                    for (T x : gacc.v) norm_sq += double(x) * double(x);
                const double norm = std::sqrt(norm_sq);
                if (norm > plan.grad_clip) {
                    const T scale = static_cast<T>(plan.grad_clip / norm);
                    for (TensorT<T>& gacc : grads)
                        for (T& x : gacc.v) x *= scale;
                }
            }
            adam_step(trainable, grads, state, plan);
        }

        const double n_train = static_cast<double>(train_idx.size());
        result.train_pred_curve.push_back(epoch_pred / n_train);
        if (s_tea) result.train_emb_curve.push_back(epoch_emb / n_train);
        result.train_curve.push_back((epoch_pred + epoch_emb) / n_train);

        double val_total = 0.0;
        for (std::size_t idx : val_idx) {
            RecordLossValue lv = record_loss_values(model, data.records[idx], raw.task,
                                                    s_tea ? &(*s_tea)[idx] : nullptr, plan);
            val_total += lv.pred + lv.emb;
        }
        const double val_loss = val_total / static_cast<double>(val_idx.size());
        result.val_curve.push_back(val_loss);
        result.stopped_epoch = epoch;

        if (val_loss < best_val) {
            best_val = val_loss;
            result.params = cast_params<double>(model);
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
        }
        if (epochs_without_improvement >= plan.patience) break;
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

PhaseResult run_phase_dispatch(const ModelParams& init, const Dataset& raw, const TrainPlan& plan,
                               const std::string& tag,
                               const std::vector<std::vector<double>>* s_tea,
                               const std::vector<bool>* frozen_mask) {
    if (plan.precision == 32) return run_phase<float>(init, raw, plan, tag, s_tea, frozen_mask);
    return run_phase<double>(init, raw, plan, tag, s_tea, frozen_mask);
}

}  // namespace

PhaseResult train_teacher(const Dataset& source, const ModelHyper& hyper, const TrainPlan& plan) {
    ModelParams init = make_model(source.schema, ModelRole::teacher, ModelArch::covidcare,
                                  source.task, hyper, derive_seed(plan.seed, "teacher-init"));
    return run_phase_dispatch(init, source, plan, "teacher", nullptr, nullptr);
}

std::vector<std::vector<double>> model_representations(const ModelParams& params,
                                                       const NormStats& norm, const Dataset& raw) {
    std::vector<std::vector<double>> out(raw.records.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(raw.records.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        PatientRecord rec = normalize_record(impute(raw.records[i]), norm);
        Graph g;
        ForwardResult<double> fwd = build_forward(g, params, rec);
        out[i] = g.value(fwd.pooled).v;
    }
    return out;
}

PhaseResult train_student(const Dataset& source_shared, const Dataset& source_full,
                          const ModelParams& teacher, const NormStats& teacher_norm,
                          const ModelHyper& hyper, const TrainPlan& plan) {
    if (source_shared.records.size() != source_full.records.size())
        throw Error("student: shared and full views hold different patient counts");
    for (std::size_t i = 0; i < source_shared.records.size(); ++i)
        if (source_shared.records[i].patient_id != source_full.records[i].patient_id)
            throw Error("student: patient sets of the shared and full views are misaligned at #" +
                        std::to_string(i));
    const std::vector<std::vector<double>> s_tea =
        model_representations(teacher, teacher_norm, source_full);

    ModelHyper student_hyper = hyper;
    student_hyper.teacher_hidden = teacher.hyper.hidden;
    ModelParams init =
        make_model(source_shared.schema, ModelRole::student, ModelArch::covidcare,
                   source_shared.task, student_hyper, derive_seed(plan.seed, "student-init"));
    return run_phase_dispatch(init, source_shared, plan, "student", &s_tea, nullptr);
}

PhaseResult train_student_no_distill(const Dataset& source_shared, const ModelHyper& hyper,
                                     const TrainPlan& plan) {
    ModelParams init =
        make_model(source_shared.schema, ModelRole::student, ModelArch::covidcare,
                   source_shared.task, hyper, derive_seed(plan.seed, "student-init"));
    return run_phase_dispatch(init, source_shared, plan, "student", nullptr, nullptr);
}

ModelParams transfer_shared_grus(const ModelParams& from, const ModelParams& to_init,
                                 const SharedFeatureMap& map) {
    if (from.hyper.hidden != to_init.hyper.hidden)
        throw Error("transfer: hidden-size mismatch (" + std::to_string(from.hyper.hidden) +
                    " vs " + std::to_string(to_init.hyper.hidden) + ")");
    if (from.arch == ModelArch::single_gru || to_init.arch == ModelArch::single_gru)
        throw Error("transfer: single-GRU architectures have no per-feature channels");
    std::set<std::size_t> seen_from, seen_to;
    ModelParams out = to_init;
    for (const auto& [src_i, tgt_j] : map.pairs) {
        if (src_i >= from.gru.size() || tgt_j >= out.gru.size())
            throw Error("transfer: map references unknown feature (pair " +
                        std::to_string(src_i) + " -> " + std::to_string(tgt_j) + ")");
        if (!seen_from.insert(src_i).second || !seen_to.insert(tgt_j).second)
            throw Error("transfer: map is not injective");
        out.gru[tgt_j] = from.gru[src_i];
    }
    return out;
}

PhaseResult train_model(const Dataset& data, const ModelParams& init, const TrainPlan& plan,
                        const std::string& phase_tag,
                        const std::vector<std::size_t>& frozen_channels) {
    std::vector<bool>* mask_ptr = nullptr;
    std::vector<bool> mask;
    if (!frozen_channels.empty()) {
        std::set<std::string> prefixes;
        for (std::size_t c : frozen_channels) prefixes.insert("gru." + std::to_string(c) + ".");
        for_each_param(init, [&](const std::string& name, const Tensor&) {
            bool frozen = false;
            for (const auto& p : prefixes) frozen = frozen || name.rfind(p, 0) == 0;
            mask.push_back(frozen);
        });
        mask_ptr = &mask;
    }
    return run_phase_dispatch(init, data, plan, phase_tag, nullptr, mask_ptr);
}

PhaseResult finetune_target(const Dataset& target, const ModelParams& params,
                            const TrainPlan& plan,
                            const std::vector<std::size_t>& frozen_channels) {
    return train_model(target, params, plan, "target", frozen_channels);
}

PipelineResult run_pipeline(const Dataset& source, const Dataset& target,
                            const SharedFeatureMap& map, const ModelHyper& hyper,
                            const TrainPlan& plan, const PipelineOptions& opts) {
    PipelineResult out;

    std::vector<std::size_t> shared_idx;
    for (const auto& pr : map.pairs) shared_idx.push_back(pr.first);
    const Dataset shared_ds = shared_view(source, shared_idx);

    if (opts.distill) {
        out.teacher = train_teacher(source, hyper, plan);
        out.student = train_student(shared_ds, source, out.teacher->params, out.teacher->norm,
                                    hyper, plan);
    } else {
        out.student = train_student_no_distill(shared_ds, hyper, plan);
    }

    for (std::size_t i = 0; i < map.pairs.size(); ++i)
        out.student_to_target.pairs.emplace_back(i, map.pairs[i].second);

    ModelParams target_init =
        make_model(target.schema, ModelRole::target, ModelArch::covidcare, target.task, hyper,
                   derive_seed(plan.seed, "target-init"));
    ModelParams start = opts.transfer
                            ? transfer_shared_grus(out.student.params, target_init,
                                                   out.student_to_target)
                            : target_init;
    std::vector<std::size_t> frozen;
    if (opts.transfer && opts.freeze_transferred)
        for (const auto& pr : out.student_to_target.pairs) frozen.push_back(pr.second);
    out.target = finetune_target(target, start, plan, frozen);

    if (!opts.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(opts.out_dir);
        const fs::path dir(opts.out_dir);
        if (out.teacher)
            save_checkpoint((dir / "teacher.json").string(), out.teacher->params,
                            out.teacher->norm);
        save_checkpoint((dir / "student.json").string(), out.student.params, out.student.norm);
        save_checkpoint((dir / "target.json").string(), out.target.params, out.target.norm);
        std::ofstream toml(dir / "run.toml");
        toml << plan_to_toml(plan);
        const std::string curves = (dir / "curves.csv").string();
        if (fs::exists(curves)) fs::remove(curves);
        if (out.teacher)
            update_curves_csv(curves, "teacher", out.teacher->train_curve, out.teacher->val_curve);
        update_curves_csv(curves, "student", out.student.train_curve, out.student.val_curve);
        update_curves_csv(curves, "target", out.target.train_curve, out.target.val_curve);
    }
    return out;
}

void add_evaluation_fold(EvalReport& report, const ModelParams& params, const NormStats& norm,
                         const Dataset& raw, std::span<const std::size_t> indices) {
    if (indices.empty()) throw Error("evaluate: no records selected");
    std::vector<std::vector<double>> probs(indices.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(indices.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        PatientRecord rec = normalize_record(impute(raw.records[indices[i]]), norm);
        probs[i] = forward_probs(params, rec);
    }
    if (raw.task == TaskKind::multiclass12) {
        std::vector<int> labels;
        for (std::size_t idx : indices)
            labels.push_back(record_label(raw.records[idx], raw.task));
        report.add_fold(multiclass_report(probs, labels));
    } else {
        std::vector<double> scores;
        std::vector<bool> labels;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            scores.push_back(probs[i][0]);
            labels.push_back(record_label(raw.records[indices[i]], raw.task) == 1);
        }
        report.add_fold(binary_report(scores, labels));
    }
}

EvalReport evaluate_model(const ModelParams& params, const NormStats& norm, const Dataset& raw) {
    EvalReport report;
    std::vector<std::size_t> all(raw.records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    add_evaluation_fold(report, params, norm, raw, all);
    return report;
}

std::string plan_to_toml(const TrainPlan& plan) {
    std::ostringstream out;
    char buf[64];
    out << "[train]\n";
    out << "batch_size = " << plan.batch_size << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", plan.learning_rate);
    out << "learning_rate = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", plan.beta1);
    out << "beta1 = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", plan.beta2);
    out << "beta2 = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", plan.epsilon);
    out << "epsilon = " << buf << "\n";
    out << "max_epochs = " << plan.max_epochs << "\n";
    out << "patience = " << plan.patience << "\n";
    out << "seed = " << plan.seed << "\n";
    out << "precision = " << plan.precision << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", plan.grad_clip);
    out << "grad_clip = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", plan.distill_weight);
    out << "distill_weight = " << buf << "\n";
    out << "reverse_kl = " << (plan.reverse_kl ? "true" : "false") << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", plan.val_fraction);
    out << "val_fraction = " << buf << "\n";
    return out.str();
}

void update_curves_csv(const std::string& path, const std::string& phase,
                       const std::vector<double>& train_curve,
                       const std::vector<double>& val_curve) {
    const std::map<std::string, int> rank{{"teacher", 0}, {"student", 1}, {"target", 2}};
    if (!rank.count(phase)) throw Error("curves: unknown phase '" + phase + "'");

    std::map<int, std::vector<std::string>> kept;
    std::ifstream in(path);
    if (in) {
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const std::string p = line.substr(0, line.find(','));
            if (p == phase) continue;
            auto it = rank.find(p);
            if (it == rank.end()) throw Error("curves: malformed row in " + path);
            kept[it->second].push_back(line);
        }
        in.close();
    }
    {
        std::vector<std::string> rows;
        char buf[96];
        for (std::size_t e = 0; e < train_curve.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g", phase.c_str(), e + 1,
                          train_curve[e], val_curve[e]);
            rows.emplace_back(buf);
        }
        kept[rank.at(phase)] = std::move(rows);
    }
    std::ofstream out(path);
    if (!out) throw Error("curves: cannot write " + path);
    out << "phase,epoch,train_loss,val_loss\n";
    for (const auto& [r, rows] : kept)
        for (const std::string& row : rows) out << row << "\n";
}

}  // namespace covidcare
