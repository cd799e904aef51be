#include "covidcare/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "covidcare/error.hpp"

namespace covidcare {

std::string FeatureSchema::canonical(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool in_space = true;  // swallow leading whitespace
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

void FeatureSchema::add(std::string_view name, FeatureKind kind) {
    std::string canon = canonical(name);
    if (canon.empty()) throw Error("schema: empty feature name");
    if (index_.count(canon))
        throw Error("schema: duplicate feature name after canonicalization: '" + canon + "'");
    index_[canon] = features_.size();
    features_.push_back(Feature{std::move(canon), kind});
}

bool FeatureSchema::contains(std::string_view name) const {
    return index_.count(canonical(name)) > 0;
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
    auto it = index_.find(canonical(name));
    if (it == index_.end())
        throw Error("schema: unknown feature '" + std::string(name) + "'");
    return it->second;
}

std::size_t FeatureSchema::find(std::string_view name) const {
    auto it = index_.find(canonical(name));
    return it == index_.end() ? kNotFound : it->second;
}

AliasTable load_alias_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("alias file: cannot open " + path);
    AliasTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("canonical", 0) == 0) continue;  // header
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw Error("alias file: line " + std::to_string(lineno) + " is not 'canonical,alias'");
        std::string canon = FeatureSchema::canonical(line.substr(0, comma));
        std::string alias = FeatureSchema::canonical(line.substr(comma + 1));
        table[alias] = canon;
    }
    return table;
}

namespace {

std::string resolve(const std::string& canon_name, const AliasTable& aliases) {
    auto it = aliases.find(canon_name);
    return it == aliases.end() ? canon_name : it->second;
}

}  // namespace

SharedFeatureMap build_shared_map(const FeatureSchema& source, const FeatureSchema& target,
                                  const AliasTable& aliases) {
    // Index target features by resolved name.
    std::unordered_map<std::string, std::size_t> tgt_by_name;
    for (std::size_t j = 0; j < target.size(); ++j) {
        const std::string key = resolve(target.at(j).name, aliases);
        if (tgt_by_name.count(key))
            throw Error("shared map: target features '" + target.at(tgt_by_name[key]).name +
                        "' and '" + target.at(j).name + "' collide on '" + key + "'");
        tgt_by_name[key] = j;
    }
    SharedFeatureMap map;
    std::set<std::size_t> used_targets;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const std::string key = resolve(source.at(i).name, aliases);
        auto it = tgt_by_name.find(key);
        if (it == tgt_by_name.end()) continue;
        if (!used_targets.insert(it->second).second)
            throw Error("shared map: target feature used twice: '" + key + "'");
        map.pairs.emplace_back(i, it->second);
    }
    return map;
}

}  // namespace covidcare
