#include "covidcare/baselines.hpp"

#include "covidcare/rng.hpp"

namespace covidcare {

std::string baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::gru: return "gru";
        case BaselineKind::mc_gru: return "mc-gru";
        case BaselineKind::mc_gru_t: return "mc-gru-t";
        case BaselineKind::covidcare_stu: return "covidcare-stu";
        case BaselineKind::covidcare: return "covidcare";
    }
    return "?";
}

BaselineKind baseline_from_name(const std::string& name) {
    if (name == "gru") return BaselineKind::gru;
    if (name == "mc-gru") return BaselineKind::mc_gru;
    if (name == "mc-gru-t") return BaselineKind::mc_gru_t;
    if (name == "covidcare-stu") return BaselineKind::covidcare_stu;
    if (name == "covidcare") return BaselineKind::covidcare;
    throw Error("unknown model kind '" + name +
                "' (expected gru|mc-gru|mc-gru-t|covidcare-stu|covidcare)");
}

ModelParams build_baseline(BaselineKind kind, const FeatureSchema& schema, TaskKind task,
                           const ModelHyper& hyper, std::uint64_t seed) {
    switch (kind) {
        case BaselineKind::gru:
            return make_model(schema, ModelRole::target, ModelArch::single_gru, task, hyper, seed);
        case BaselineKind::mc_gru:
        case BaselineKind::mc_gru_t:
            return make_model(schema, ModelRole::target, ModelArch::mc_gru, task, hyper, seed);
        case BaselineKind::covidcare_stu:
        case BaselineKind::covidcare:
            return make_model(schema, ModelRole::target, ModelArch::covidcare, task, hyper, seed);
    }
    throw Error("unknown baseline kind");
}

BaselineRun run_baseline(BaselineKind kind, const Dataset& source, const Dataset& target,
                         const SharedFeatureMap& map, const ModelHyper& hyper,
                         const TrainPlan& plan) {
    BaselineRun run;
    switch (kind) {
        case BaselineKind::gru:
        case BaselineKind::mc_gru: {
            ModelParams init = build_baseline(kind, target.schema, target.task, hyper,
                                              derive_seed(plan.seed, "target-init"));
            run.target_phase = train_model(target, init, plan, "target");
            return run;
        }
        case BaselineKind::mc_gru_t: {
            ModelParams src_init =
                make_model(source.schema, ModelRole::teacher, ModelArch::mc_gru, source.task,
                           hyper, derive_seed(plan.seed, "source-init"));
            run.source_phase = train_model(source, src_init, plan, "source-pretrain");
            ModelParams tgt_init = build_baseline(kind, target.schema, target.task, hyper,
                                                  derive_seed(plan.seed, "target-init"));
            ModelParams start = transfer_shared_grus(run.source_phase->params, tgt_init, map);
            run.target_phase = train_model(target, start, plan, "target");
            return run;
        }
        case BaselineKind::covidcare_stu:
        case BaselineKind::covidcare: {
            PipelineOptions opts;
            opts.distill = kind == BaselineKind::covidcare;
            PipelineResult pipe = run_pipeline(source, target, map, hyper, plan, opts);
            run.teacher_phase = std::move(pipe.teacher);
            run.source_phase = std::move(pipe.student);
            run.target_phase = std::move(pipe.target);
            return run;
        }
    }
    throw Error("unknown baseline kind");
}

}  // namespace covidcare
