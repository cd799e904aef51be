#pragma once

#include <optional>
#include <string>

#include "covidcare/dataset.hpp"
#include "covidcare/model.hpp"

namespace covidcare {

// Self-describing JSON checkpoint, version "1": role, schema feature names,
// hyperparameters, every parameter tensor as shape + flat values, plus the
// normalization statistics the model was trained with.
struct Checkpoint {
    ModelParams params;
    std::optional<NormStats> norm;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::optional<NormStats>& norm = std::nullopt);

Checkpoint load_checkpoint(const std::string& path);

std::string role_name(ModelRole r);
std::string arch_name(ModelArch a);
std::string task_name(TaskKind t);
ModelRole role_from_name(const std::string& s);
ModelArch arch_from_name(const std::string& s);
TaskKind task_from_name(const std::string& s);

}  // namespace covidcare
