// covidcare: synthetic EMR generation, three-phase transfer training,
// cross-validated evaluation, and attention-based feature importance.
//
// Exit codes: 0 ok, 1 internal error, 2 user/config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covidcare/baselines.hpp"
#include "covidcare/checkpoint.hpp"
#include "covidcare/config.hpp"
#include "covidcare/explain.hpp"
#include "covidcare/rng.hpp"
#include "covidcare/synth.hpp"
#include "covidcare/training.hpp"

namespace fs = std::filesystem;
using namespace covidcare;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "run";
    std::optional<std::int64_t> seed;
    int jobs = 1;
};

RunConfig load_config(const GlobalArgs& args) {
    if (args.config_path.empty()) throw UserError("missing --config <path>");
    RunConfig cfg = load_run_config(args.config_path);
    if (args.seed) {
        cfg.plan.seed = static_cast<std::uint64_t>(*args.seed);
        if (cfg.synth) cfg.synth->seed = static_cast<std::uint64_t>(*args.seed);
    }
    return cfg;
}

struct LoadedData {
    Dataset source;
    Dataset target;
    SharedFeatureMap map;  // (source index, target index)
    AliasTable aliases;
};

LoadedData load_data(const RunConfig& cfg) {
    if (!cfg.data) throw UserError("config has no [data] section");
    if (cfg.data->source_csv.empty() || cfg.data->target_csv.empty())
        throw UserError("config [data] needs both 'source' and 'target' paths");
    LoadedData out;
    if (!cfg.data->alias_csv.empty()) out.aliases = load_alias_csv(cfg.data->alias_csv);
    const FeatureSchema src_schema = schema_from_csv(cfg.data->source_csv);
    const FeatureSchema tgt_schema = schema_from_csv(cfg.data->target_csv);
    out.source = load_csv(cfg.data->source_csv, src_schema, cfg.data->task_source);
    out.target =
        load_csv(cfg.data->target_csv, tgt_schema, cfg.data->task_target, cfg.data->predict_at);
    out.map = build_shared_map(src_schema, tgt_schema, out.aliases);
    if (out.source.dropped_records || out.target.dropped_records)
        std::cerr << "note: dropped " << out.source.dropped_records << " source and "
                  << out.target.dropped_records
                  << " target record(s) with an all-missing feature\n";
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

Checkpoint require_checkpoint(const fs::path& path, const std::string& needed_for) {
    if (!fs::exists(path))
        throw UserError("missing prerequisite checkpoint " + path.string() + "; run '" +
                        needed_for + "' first");
    return load_checkpoint(path.string());
}

void save_phase(const fs::path& dir, const std::string& phase, const PhaseResult& result,
                const TrainPlan& plan) {
    fs::create_directories(dir);
    save_checkpoint((dir / (phase + ".json")).string(), result.params, result.norm);
    update_curves_csv((dir / "curves.csv").string(), phase, result.train_curve,
                      result.val_curve);
    write_text(dir / "run.toml", plan_to_toml(plan));
    std::cout << phase << ": stopped after " << result.stopped_epoch << " epoch(s), best val loss "
              << (result.val_curve.empty()
                      ? 0.0
                      : *std::min_element(result.val_curve.begin(), result.val_curve.end()))
              << "\n";
}

// Builds the (student index -> target index) map for a trained model whose
// schema is the shared-feature view, matching names through the alias table.
SharedFeatureMap checkpoint_to_target_map(const FeatureSchema& ck_schema,
                                          const FeatureSchema& target_schema,
                                          const AliasTable& aliases) {
    SharedFeatureMap map = build_shared_map(ck_schema, target_schema, aliases);
    if (map.pairs.size() != ck_schema.size())
        throw UserError("student checkpoint features do not all exist in the target schema");
    return map;
}

int cmd_gen_data(const GlobalArgs& args) {
    RunConfig cfg = load_config(args);
    if (!cfg.synth) throw UserError("gen-data needs a [synth] section in the config");
    SynthResult result = synthesize(*cfg.synth, cfg.synth->seed);
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    write_csv((dir / "source.csv").string(), result.source);
    write_csv((dir / "target.csv").string(), result.target);
    std::string map_csv = "source_feature,target_feature\n";
    for (const auto& [i, j] : result.map.pairs)
        map_csv += result.source.schema.at(i).name + "," + result.target.schema.at(j).name + "\n";
    write_text(dir / "shared_map.csv", map_csv);
    std::cout << "wrote " << (dir / "source.csv").string() << " (" << result.source.records.size()
              << " patients, " << result.source.schema.size() << " features), "
              << (dir / "target.csv").string() << " (" << result.target.records.size()
              << " patients, " << result.target.schema.size() << " features), "
              << result.map.pairs.size() << " shared features\n";
    return 0;
}

int cmd_train(const GlobalArgs& args, const std::string& phase, const std::string& model_kind,
              bool no_distill, bool no_transfer, bool freeze_transferred) {
    RunConfig cfg = load_config(args);
    LoadedData data = load_data(cfg);
    const fs::path dir(args.out_dir);

    if (phase == "teacher") {
        PhaseResult r = train_teacher(data.source, cfg.hyper, cfg.plan);
        save_phase(dir, "teacher", r, cfg.plan);
        return 0;
    }

    if (phase == "student") {
        std::vector<std::size_t> shared_idx;
        for (const auto& pr : data.map.pairs) shared_idx.push_back(pr.first);
        const Dataset shared_ds = shared_view(data.source, shared_idx);
        PhaseResult r;
        if (no_distill) {
            r = train_student_no_distill(shared_ds, cfg.hyper, cfg.plan);
        } else {
            Checkpoint teacher = require_checkpoint(dir / "teacher.json", "train teacher");
            if (!teacher.norm) throw UserError("teacher checkpoint lacks normalization stats");
            r = train_student(shared_ds, data.source, teacher.params, *teacher.norm, cfg.hyper,
                              cfg.plan);
        }
        save_phase(dir, "student", r, cfg.plan);
        return 0;
    }

    if (phase != "target") throw UserError("unknown phase '" + phase + "'");

    const BaselineKind kind = baseline_from_name(model_kind);
    PhaseResult r;
    if (kind == BaselineKind::gru || kind == BaselineKind::mc_gru) {
        ModelParams init = build_baseline(kind, data.target.schema, data.target.task, cfg.hyper,
                                          derive_seed(cfg.plan.seed, "target-init"));
        r = train_model(data.target, init, cfg.plan, "target");
    } else if (kind == BaselineKind::mc_gru_t) {
        BaselineRun run =
            run_baseline(kind, data.source, data.target, data.map, cfg.hyper, cfg.plan);
        r = std::move(run.target_phase);
    } else {
        // covidcare / covidcare-stu: start from the student checkpoint.
        ModelParams init = build_baseline(kind, data.target.schema, data.target.task, cfg.hyper,
                                          derive_seed(cfg.plan.seed, "target-init"));
        std::vector<std::size_t> frozen;
        if (!no_transfer) {
            Checkpoint student = require_checkpoint(dir / "student.json", "train student");
            SharedFeatureMap map = checkpoint_to_target_map(student.params.schema,
                                                            data.target.schema, data.aliases);
            init = transfer_shared_grus(student.params, init, map);
            if (freeze_transferred)
                for (const auto& pr : map.pairs) frozen.push_back(pr.second);
        }
        r = finetune_target(data.target, init, cfg.plan, frozen);
    }
    save_phase(dir, "target", r, cfg.plan);
    return 0;
}

int cmd_cv(const GlobalArgs& args, const std::string& model_kind, std::size_t k) {
    RunConfig cfg = load_config(args);
    LoadedData data = load_data(cfg);
    const BaselineKind kind = baseline_from_name(model_kind);
    if (k < 2) throw UserError("cv: k must be >= 2");

    // Source-side phases are shared across folds.
    std::optional<ModelParams> pretrained;  // student (covidcare*) or source mc-gru
    SharedFeatureMap transfer_map;          // into the target schema
    if (kind == BaselineKind::covidcare || kind == BaselineKind::covidcare_stu) {
        std::vector<std::size_t> shared_idx;
        for (const auto& pr : data.map.pairs) shared_idx.push_back(pr.first);
        const Dataset shared_ds = shared_view(data.source, shared_idx);
        if (kind == BaselineKind::covidcare) {
            PhaseResult teacher = train_teacher(data.source, cfg.hyper, cfg.plan);
            pretrained = train_student(shared_ds, data.source, teacher.params, teacher.norm,
                                       cfg.hyper, cfg.plan)
                             .params;
        } else {
            pretrained = train_student_no_distill(shared_ds, cfg.hyper, cfg.plan).params;
        }
        for (std::size_t i = 0; i < data.map.pairs.size(); ++i)
            transfer_map.pairs.emplace_back(i, data.map.pairs[i].second);
    } else if (kind == BaselineKind::mc_gru_t) {
        ModelParams src_init =
            make_model(data.source.schema, ModelRole::teacher, ModelArch::mc_gru,
                       data.source.task, cfg.hyper, derive_seed(cfg.plan.seed, "source-init"));
        pretrained = train_model(data.source, src_init, cfg.plan, "source-pretrain").params;
        transfer_map = data.map;
    }

    auto folds = kfold(data.target, k, cfg.plan.seed);
    std::vector<ModelParams> fold_params(k);
    std::vector<NormStats> fold_norms(k);

    const int jobs = std::max(1, args.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
    for (std::ptrdiff_t ff = 0; ff < static_cast<std::ptrdiff_t>(k); ++ff) {
        const auto f = static_cast<std::size_t>(ff);
        Dataset fold_train;
        fold_train.schema = data.target.schema;
        fold_train.task = data.target.task;
        for (std::size_t i : folds[f].first) fold_train.records.push_back(data.target.records[i]);

        TrainPlan fold_plan = cfg.plan;
        fold_plan.seed = derive_seed(cfg.plan.seed, "cv-fold", f);
        ModelParams init = build_baseline(kind, data.target.schema, data.target.task, cfg.hyper,
                                          derive_seed(fold_plan.seed, "target-init"));
        if (pretrained) init = transfer_shared_grus(*pretrained, init, transfer_map);
        PhaseResult r = train_model(fold_train, init, fold_plan, "target");
        fold_params[f] = std::move(r.params);
        fold_norms[f] = std::move(r.norm);
    }

    EvalReport report;
    for (std::size_t f = 0; f < k; ++f)
        add_evaluation_fold(report, fold_params[f], fold_norms[f], data.target, folds[f].second);

    fs::create_directories(args.out_dir);
    write_text(fs::path(args.out_dir) / "report.json", report.to_json());
    write_text(fs::path(args.out_dir) / "report.csv", report.to_csv());
    std::cout << model_kind << " " << k << "-fold: " << report.table_row() << "\n";
    return 0;
}

int cmd_evaluate(const GlobalArgs& args) {
    RunConfig cfg = load_config(args);
    LoadedData data = load_data(cfg);
    Checkpoint target = require_checkpoint(fs::path(args.out_dir) / "target.json", "train target");
    if (!target.norm) throw UserError("target checkpoint lacks normalization stats");
    EvalReport report = evaluate_model(target.params, *target.norm, data.target);
    fs::create_directories(args.out_dir);
    write_text(fs::path(args.out_dir) / "report.json", report.to_json());
    write_text(fs::path(args.out_dir) / "report.csv", report.to_csv());
    std::cout << report.table_row() << "\n";
    return 0;
}

int cmd_explain(const GlobalArgs& args, const std::string& cohort_by, bool dump_attention) {
    RunConfig cfg = load_config(args);
    LoadedData data = load_data(cfg);
    Checkpoint target = require_checkpoint(fs::path(args.out_dir) / "target.json", "train target");
    if (!target.norm) throw UserError("target checkpoint lacks normalization stats");

    CohortFn cohorts;
    if (cohort_by == "outcome") cohorts = outcome_cohorts();
    else if (cohort_by == "label") cohorts = label_cohorts(data.target.task);
    else throw UserError("--cohort must be 'outcome' or 'label'");

    ImportanceTable table = collect_importance(target.params, *target.norm, data.target, cohorts);
    fs::create_directories(args.out_dir);
    write_text(fs::path(args.out_dir) / "importance.csv", importance_to_csv(table));

    if (dump_attention) {
        nlohmann::json doc = nlohmann::json::array();
        for (const auto& [id, alpha] : collect_raw_alpha(target.params, *target.norm, data.target))
            doc.push_back({{"patient_id", id}, {"alpha", alpha}});
        write_text(fs::path(args.out_dir) / "attention_raw.json", doc.dump(1) + "\n");
    }

    std::cout << "wrote " << (fs::path(args.out_dir) / "importance.csv").string() << " ("
              << table.rows.size() << " rows)\n";
    if (table.cohorts.size() >= 2) {
        auto ranked = rank_differential(table);
        std::cout << "largest cohort gaps:";
        for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i)
            std::cout << " " << ranked[i].feature;
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CovidCare-style transfer-learning prognosis toolkit"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "TOML configuration file")->envname("COVIDCARE_CONFIG");
    app.add_option("--out", args.out_dir, "Output/run directory (default: run)");
    app.add_option("--seed", args.seed, "Override the config seed");
    app.add_option("--jobs", args.jobs, "Concurrent fold jobs for cv");

    auto* gen = app.add_subcommand("gen-data", "Generate synthetic source/target EMR CSVs");

    auto* train = app.add_subcommand("train", "Train one pipeline phase");
    std::string phase;
    train->add_option("phase", phase, "teacher|student|target")->required();
    std::string train_model_kind = "covidcare";
    train->add_option("--model", train_model_kind, "gru|mc-gru|mc-gru-t|covidcare-stu|covidcare");
    bool no_distill = false, no_transfer = false, freeze_transferred = false;
    train->add_flag("--no-distill", no_distill, "Student: skip the imitation loss");
    train->add_flag("--no-transfer", no_transfer, "Target: skip GRU transfer");
    train->add_flag("--freeze-transferred", freeze_transferred,
                    "Target: freeze transferred GRU channels");

    auto* cv = app.add_subcommand("cv", "Cross-validated pipeline evaluation");
    std::size_t k = 5;
    cv->add_option("--k", k, "Fold count (default 5)");
    std::string cv_model_kind = "covidcare";
    cv->add_option("--model", cv_model_kind, "gru|mc-gru|mc-gru-t|covidcare-stu|covidcare");

    auto* eval = app.add_subcommand("evaluate", "Evaluate the target checkpoint");

    auto* explain = app.add_subcommand("explain", "Export attention-based feature importance");
    std::string cohort_by = "outcome";
    explain->add_option("--cohort", cohort_by, "Cohort grouping: outcome|label");
    bool dump_attention = false;
    explain->add_flag("--dump-attention", dump_attention, "Also write attention_raw.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(args);
        if (train->parsed())
            return cmd_train(args, phase, train_model_kind, no_distill, no_transfer,
                             freeze_transferred);
        if (cv->parsed()) return cmd_cv(args, cv_model_kind, k);
        if (eval->parsed()) return cmd_evaluate(args);
        if (explain->parsed()) return cmd_explain(args, cohort_by, dump_attention);
        throw UserError("no subcommand given");
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
