#pragma once

// Three-phase training pipeline: teacher on full source features, student on
// shared source features with representation distillation, transfer of
// shared-feature GRU parameters, target fine-tuning. Adam with early
// stopping on an internal 80/20 validation split.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covidcare/checkpoint.hpp"
#include "covidcare/dataset.hpp"
#include "covidcare/metrics.hpp"
#include "covidcare/model.hpp"
#include "covidcare/tensor.hpp"

namespace covidcare {

struct TrainPlan {
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 0;
    int precision = 64;        // 32 or 64
    double grad_clip = 5.0;    // global norm; 0 disables
    double distill_weight = 1.0;
    bool reverse_kl = false;   // ablation: KL(teacher || student) instead
    double val_fraction = 0.2;

    void validate() const;
};

template <class T>
struct AdamStateT {
    std::vector<TensorT<T>> first_moment;
    std::vector<TensorT<T>> second_moment;
    long step = 0;
};

using AdamState = AdamStateT<double>;

// One bias-corrected Adam update over a flat parameter list.
template <class T>
void adam_step(std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>>& grads,
               AdamStateT<T>& state, const TrainPlan& plan) {
    if (params.size() != grads.size()) throw Error("adam: params/grads count mismatch");
    if (state.first_moment.empty()) {
        for (const TensorT<T>* p : params) {
            state.first_moment.push_back(TensorT<T>(p->rows(), p->cols()));
            state.second_moment.push_back(TensorT<T>(p->rows(), p->cols()));
        }
    }
    if (state.first_moment.size() != params.size()) throw Error("adam: state size mismatch");
    ++state.step;
    const T b1 = static_cast<T>(plan.beta1), b2 = static_cast<T>(plan.beta2);
    const T lr = static_cast<T>(plan.learning_rate), eps = static_cast<T>(plan.epsilon);
    const T c1 = T(1) - static_cast<T>(std::pow(plan.beta1, double(state.step)));
    const T c2 = T(1) - static_cast<T>(std::pow(plan.beta2, double(state.step)));
    for (std::size_t k = 0; k < params.size(); ++k) {
        TensorT<T>& p = *params[k];
        const TensorT<T>& g = grads[k];
        if (g.size() != p.size()) throw Error("adam: gradient shape mismatch");
        TensorT<T>& m = state.first_moment[k];
        TensorT<T>& v = state.second_moment[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.v[i] = b1 * m.v[i] + (T(1) - b1) * g.v[i];
            v.v[i] = b2 * v.v[i] + (T(1) - b2) * g.v[i] * g.v[i];
            const T mhat = m.v[i] / c1;
            const T vhat = v.v[i] / c2;
            p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

struct PhaseResult {
    ModelParams params;  // best-validation snapshot
    NormStats norm;      // computed on the phase's training split
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    std::vector<double> train_pred_curve;  // components, when distilling
    std::vector<double> train_emb_curve;
    int stopped_epoch = 0;  // epochs actually run
    double wall_seconds = 0.0;
};

// Phase 1 (Algorithm lines 1-7): teacher on the full source feature set.
PhaseResult train_teacher(const Dataset& source, const ModelHyper& hyper, const TrainPlan& plan);

// Phase 2 (lines 8-14): student on the shared-feature view; the frozen
// teacher supplies reference representations from the full-feature view of
// the same patients.
PhaseResult train_student(const Dataset& source_shared, const Dataset& source_full,
                          const ModelParams& teacher, const NormStats& teacher_norm,
                          const ModelHyper& hyper, const TrainPlan& plan);

// Same student, no imitation loss (the covidcare_stu ablation).
PhaseResult train_student_no_distill(const Dataset& source_shared, const ModelHyper& hyper,
                                     const TrainPlan& plan);

// Pooled representation of every record under a trained model.
std::vector<std::vector<double>> model_representations(const ModelParams& params,
                                                       const NormStats& norm,
                                                       const Dataset& raw);

// Line 15: copy the GRU parameter set of every mapped channel from `from`
// into a fresh copy of `to_init`; everything else keeps its initialization.
// Map pairs index (from-schema feature, to-schema feature).
ModelParams transfer_shared_grus(const ModelParams& from, const ModelParams& to_init,
                                 const SharedFeatureMap& map);

// Generic single-phase training from a given initialization (no
// distillation). phase_tag names the rng streams, so distinct phases of one
// run draw independently.
PhaseResult train_model(const Dataset& data, const ModelParams& init, const TrainPlan& plan,
                        const std::string& phase_tag,
                        const std::vector<std::size_t>& frozen_channels = {});

// Lines 16-21: fine-tune on the target dataset; every parameter trains
// unless freeze_transferred pins the listed GRU channels.
PhaseResult finetune_target(const Dataset& target, const ModelParams& params,
                            const TrainPlan& plan,
                            const std::vector<std::size_t>& frozen_channels = {});

struct PipelineOptions {
    bool distill = true;            // false: student trains without L_emb
    bool transfer = true;           // false: target starts from scratch
    bool freeze_transferred = false;
    std::string out_dir;            // when set: checkpoints, run.toml, curves.csv
};

struct PipelineResult {
    std::optional<PhaseResult> teacher;  // absent when distillation is off
    PhaseResult student;
    PhaseResult target;
    SharedFeatureMap student_to_target;  // pairs in (student index, target index) space
};

PipelineResult run_pipeline(const Dataset& source, const Dataset& target,
                            const SharedFeatureMap& map, const ModelHyper& hyper,
                            const TrainPlan& plan, const PipelineOptions& opts = {});

// Forward the model over `indices` of a raw dataset (imputed + normalized
// with the model's stored stats) and append one metrics fold to the report.
void add_evaluation_fold(EvalReport& report, const ModelParams& params, const NormStats& norm,
                         const Dataset& raw, std::span<const std::size_t> indices);
EvalReport evaluate_model(const ModelParams& params, const NormStats& norm, const Dataset& raw);

// Serialized TrainPlan, as written to run.toml.
std::string plan_to_toml(const TrainPlan& plan);

// Rewrites `phase`'s rows in a curves.csv (header phase,epoch,train_loss,val_loss),
// keeping other phases' rows; phases are ordered teacher < student < target.
void update_curves_csv(const std::string& path, const std::string& phase,
                       const std::vector<double>& train_curve,
                       const std::vector<double>& val_curve);

}  // namespace covidcare
