#include "covidcare/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "covidcare/toml_lite.hpp"

namespace covidcare {

namespace {

void reject_unknown(const toml::Table& table, const std::string& section,
                    const std::set<std::string>& known) {
    for (const auto& [key, value] : table.entries)
        if (!known.count(key))
            throw UserError("config: unknown key '" + section + "." + key + "'");
}

TaskKind parse_task(const toml::Value& v, const std::string& where) {
    const std::string s = v.as_string(where);
    if (s == "multiclass-12") return TaskKind::multiclass12;
    if (s == "binary") return TaskKind::binary;
    throw UserError("config key '" + where + "' must be \"multiclass-12\" or \"binary\"");
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    const toml::Document doc = toml::parse_string(text, origin);
    const std::set<std::string> known_sections{"synth", "data", "model", "train"};
    for (const auto& [name, table] : doc.sections)
        if (!known_sections.count(name))
            throw UserError("config: unknown section '[" + name + "]'");

    RunConfig cfg;

    if (const toml::Table* t = doc.section("synth")) {
        reject_unknown(*t, "synth",
                       {"n_src", "n_tar", "n_shared", "patients_src", "patients_tar", "t_min",
                        "t_max", "seed"});
        SynthConfig s;
        auto set_size = [&t](const char* key, std::size_t& out) {
            if (const toml::Value* v = t->find(key)) {
                const long long x = v->as_int(std::string("synth.") + key);
                if (x < 1) throw UserError(std::string("config: synth.") + key + " must be >= 1");
                out = static_cast<std::size_t>(x);
            }
        };
        set_size("n_src", s.n_src);
        set_size("n_tar", s.n_tar);
        set_size("n_shared", s.n_shared);
        set_size("patients_src", s.patients_src);
        set_size("patients_tar", s.patients_tar);
        if (const toml::Value* v = t->find("t_min")) s.t_min = static_cast<int>(v->as_int("synth.t_min"));
        if (const toml::Value* v = t->find("t_max")) s.t_max = static_cast<int>(v->as_int("synth.t_max"));
        if (const toml::Value* v = t->find("seed"))
            s.seed = static_cast<std::uint64_t>(v->as_int("synth.seed"));
        cfg.synth = s;
    }

    if (const toml::Table* t = doc.section("data")) {
        reject_unknown(*t, "data",
                       {"source", "target", "alias", "task_source", "task_target", "predict_at"});
        DataConfig d;
        if (const toml::Value* v = t->find("source")) d.source_csv = v->as_string("data.source");
        if (const toml::Value* v = t->find("target")) d.target_csv = v->as_string("data.target");
        if (const toml::Value* v = t->find("alias")) d.alias_csv = v->as_string("data.alias");
        if (const toml::Value* v = t->find("task_source"))
            d.task_source = parse_task(*v, "data.task_source");
        if (const toml::Value* v = t->find("task_target"))
            d.task_target = parse_task(*v, "data.task_target");
        if (const toml::Value* v = t->find("predict_at")) {
            const long long x = v->as_int("data.predict_at");
            if (x < 1) throw UserError("config: data.predict_at must be >= 1");
            d.predict_at = static_cast<std::size_t>(x);
        }
        cfg.data = d;
    }

    if (const toml::Table* t = doc.section("model")) {
        reject_unknown(*t, "model", {"hidden", "heads", "key_dim"});
        if (const toml::Value* v = t->find("hidden"))
            cfg.hyper.hidden = static_cast<int>(v->as_int("model.hidden"));
        if (const toml::Value* v = t->find("heads"))
            cfg.hyper.heads = static_cast<int>(v->as_int("model.heads"));
        if (const toml::Value* v = t->find("key_dim"))
            cfg.hyper.key_dim = static_cast<int>(v->as_int("model.key_dim"));
        cfg.hyper.teacher_hidden = cfg.hyper.hidden;
    }

    if (const toml::Table* t = doc.section("train")) {
        reject_unknown(*t, "train",
                       {"batch_size", "learning_rate", "beta1", "beta2", "epsilon", "max_epochs",
                        "patience", "seed", "precision", "grad_clip", "distill_weight",
                        "reverse_kl", "val_fraction"});
        TrainPlan& p = cfg.plan;
        if (const toml::Value* v = t->find("batch_size"))
            p.batch_size = static_cast<int>(v->as_int("train.batch_size"));
        if (const toml::Value* v = t->find("learning_rate"))
            p.learning_rate = v->as_double("train.learning_rate");
        if (const toml::Value* v = t->find("beta1")) p.beta1 = v->as_double("train.beta1");
        if (const toml::Value* v = t->find("beta2")) p.beta2 = v->as_double("train.beta2");
        if (const toml::Value* v = t->find("epsilon")) p.epsilon = v->as_double("train.epsilon");
        if (const toml::Value* v = t->find("max_epochs"))
            p.max_epochs = static_cast<int>(v->as_int("train.max_epochs"));
        if (const toml::Value* v = t->find("patience"))
            p.patience = static_cast<int>(v->as_int("train.patience"));
        if (const toml::Value* v = t->find("seed"))
            p.seed = static_cast<std::uint64_t>(v->as_int("train.seed"));
        if (const toml::Value* v = t->find("precision"))
            p.precision = static_cast<int>(v->as_int("train.precision"));
        if (const toml::Value* v = t->find("grad_clip"))
            p.grad_clip = v->as_double("train.grad_clip");
        if (const toml::Value* v = t->find("distill_weight"))
            p.distill_weight = v->as_double("train.distill_weight");
        if (const toml::Value* v = t->find("reverse_kl"))
            p.reverse_kl = v->as_bool("train.reverse_kl");
        if (const toml::Value* v = t->find("val_fraction"))
            p.val_fraction = v->as_double("train.val_fraction");
        p.validate();
    }

    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path);
}

}  // namespace covidcare
