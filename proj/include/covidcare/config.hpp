#pragma once

#include <optional>
#include <string>

#include "covidcare/dataset.hpp"
#include "covidcare/model.hpp"
#include "covidcare/synth.hpp"
#include "covidcare/training.hpp"

namespace covidcare {

struct DataConfig {
    std::string source_csv;
    std::string target_csv;
    std::string alias_csv;  // optional
    TaskKind task_source = TaskKind::binary;
    TaskKind task_target = TaskKind::multiclass12;
    std::optional<std::size_t> predict_at;  // truncates target observation windows
};

// Merged view of the TOML config file; flag overrides are applied by the CLI.
// Every consumed key is validated; unknown sections or keys are rejected by
// name.
struct RunConfig {
    std::optional<SynthConfig> synth;
    std::optional<DataConfig> data;
    ModelHyper hyper;
    TrainPlan plan;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text, const std::string& origin);

}  // namespace covidcare
