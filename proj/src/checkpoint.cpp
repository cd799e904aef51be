#include "covidcare/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace covidcare {

using nlohmann::json;

std::string role_name(ModelRole r) {
    switch (r) {
        case ModelRole::teacher: return "teacher";
        case ModelRole::student: return "student";
        case ModelRole::target: return "target";
    }
    return "?";
}

std::string arch_name(ModelArch a) {
    switch (a) {
        case ModelArch::covidcare: return "covidcare";
        case ModelArch::mc_gru: return "mc-gru";
        case ModelArch::single_gru: return "gru";
    }
    return "?";
}

std::string task_name(TaskKind t) {
    return t == TaskKind::multiclass12 ? "multiclass-12" : "binary";
}

ModelRole role_from_name(const std::string& s) {
    if (s == "teacher") return ModelRole::teacher;
    if (s == "student") return ModelRole::student;
    if (s == "target") return ModelRole::target;
    throw Error("checkpoint: unknown role '" + s + "'");
}

ModelArch arch_from_name(const std::string& s) {
    if (s == "covidcare") return ModelArch::covidcare;
    if (s == "mc-gru") return ModelArch::mc_gru;
    if (s == "gru") return ModelArch::single_gru;
    throw Error("checkpoint: unknown arch '" + s + "'");
}

TaskKind task_from_name(const std::string& s) {
    if (s == "multiclass-12") return TaskKind::multiclass12;
    if (s == "binary") return TaskKind::binary;
    throw Error("checkpoint: unknown task '" + s + "'");
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::optional<NormStats>& norm) {
    json doc;
    doc["version"] = "1";
    doc["role"] = role_name(params.role);
    doc["arch"] = arch_name(params.arch);
    doc["task"] = task_name(params.task);
    json schema = json::array();
    for (const Feature& f : params.schema.features())
        schema.push_back({{"name", f.name},
                          {"kind", f.kind == FeatureKind::vital ? "vital" : "lab"}});
    doc["schema"] = std::move(schema);
    doc["hyper"] = {{"hidden", params.hyper.hidden},
                    {"heads", params.hyper.heads},
                    {"key_dim", params.hyper.key_dim},
                    {"teacher_hidden", params.hyper.teacher_hidden},
                    {"classes", class_count(params.task)}};
    json tensors = json::array();
    for_each_param(params, [&tensors](const std::string& name, const Tensor& t) {
        tensors.push_back({{"name", name}, {"shape", t.shape}, {"values", t.v}});
    });
    doc["params"] = std::move(tensors);
    if (norm) doc["norm"] = {{"mean", norm->mean}, {"std", norm->stddev}};

    std::ofstream out(path);
    if (!out) throw Error("checkpoint: cannot write " + path);
    out << doc.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("checkpoint: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error("checkpoint: " + path + " is not valid JSON: " + e.what());
    }
    if (doc.value("version", "") != "1")
        throw Error("checkpoint: " + path + " has unsupported version");

    Checkpoint ck;
    ModelHyper hyper;
    hyper.hidden = doc["hyper"]["hidden"].get<int>();
    hyper.heads = doc["hyper"]["heads"].get<int>();
    hyper.key_dim = doc["hyper"]["key_dim"].get<int>();
    hyper.teacher_hidden = doc["hyper"]["teacher_hidden"].get<int>();

    FeatureSchema schema;
    for (const auto& f : doc["schema"])
        schema.add(f["name"].get<std::string>(),
                   f["kind"].get<std::string>() == "vital" ? FeatureKind::vital
                                                           : FeatureKind::lab);

    // Rebuild the structure with a fresh model, then overwrite every tensor.
    ck.params = make_model(schema, role_from_name(doc["role"].get<std::string>()),
                           arch_from_name(doc["arch"].get<std::string>()),
                           task_from_name(doc["task"].get<std::string>()), hyper, /*seed=*/0);

    std::unordered_map<std::string, Tensor> loaded;
    for (const auto& t : doc["params"]) {
        Tensor tensor;
        tensor.shape = t["shape"].get<std::vector<std::size_t>>();
        tensor.v = t["values"].get<std::vector<double>>();
        std::size_t expect = 1;
        for (std::size_t d : tensor.shape) expect *= d;
        if (expect != tensor.v.size())
            throw Error("checkpoint: tensor '" + t["name"].get<std::string>() +
                        "' shape/value count mismatch");
        loaded.emplace(t["name"].get<std::string>(), std::move(tensor));
    }
    for_each_param(ck.params, [&loaded, &path](const std::string& name, Tensor& t) {
        auto it = loaded.find(name);
        if (it == loaded.end())
            throw Error("checkpoint: " + path + " is missing tensor '" + name + "'");
        if (it->second.rows() != t.rows() || it->second.cols() != t.cols())
            throw Error("checkpoint: tensor '" + name + "' has shape " +
                        it->second.shape_str() + ", expected " + t.shape_str());
        t = std::move(it->second);
    });

    if (doc.contains("norm")) {
        NormStats norm;
        norm.mean = doc["norm"]["mean"].get<std::vector<double>>();
        norm.stddev = doc["norm"]["std"].get<std::vector<double>>();
        if (norm.mean.size() != schema.size() || norm.stddev.size() != schema.size())
            throw Error("checkpoint: norm stats do not match schema size");
        ck.norm = std::move(norm);
    }
    return ck;
}

}  // namespace covidcare
