#pragma once

// Comparison models sharing the preprocessing and evaluation paths:
//   gru           one GRU over the stacked feature vector, no transfer
//   mc-gru        per-feature GRU bank + pooling, no attention, no transfer
//   mc-gru-t      mc-gru pretrained on the full source, shared GRUs transferred
//   covidcare-stu full model, transfer without distillation
//   covidcare     full three-phase pipeline

#include <optional>
#include <string>

#include "covidcare/model.hpp"
#include "covidcare/training.hpp"

namespace covidcare {

enum class BaselineKind { gru, mc_gru, mc_gru_t, covidcare_stu, covidcare };

std::string baseline_name(BaselineKind k);
BaselineKind baseline_from_name(const std::string& name);

// Architecture-only construction (the documented ModelParams subset per kind).
ModelParams build_baseline(BaselineKind kind, const FeatureSchema& schema, TaskKind task,
                           const ModelHyper& hyper, std::uint64_t seed);

struct BaselineRun {
    std::optional<PhaseResult> teacher_phase;  // covidcare only
    std::optional<PhaseResult> source_phase;   // any transfer-based kind
    PhaseResult target_phase;
};

// Trains the baseline end to end. `source` and `map` are ignored by the
// no-transfer kinds.
BaselineRun run_baseline(BaselineKind kind, const Dataset& source, const Dataset& target,
                         const SharedFeatureMap& map, const ModelHyper& hyper,
                         const TrainPlan& plan);

}  // namespace covidcare
