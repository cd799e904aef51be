#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "covidcare/error.hpp"

namespace covidcare {

enum class FeatureKind { vital, lab };

struct Feature {
    std::string name;  // canonical form
    FeatureKind kind = FeatureKind::lab;
};

// Ordered feature list with canonical-name lookup. Canonicalization:
// lowercase, trimmed, internal whitespace collapsed to single spaces.
class FeatureSchema {
  public:
    FeatureSchema() = default;

    static std::string canonical(std::string_view raw);

    void add(std::string_view name, FeatureKind kind = FeatureKind::lab);

    std::size_t size() const { return features_.size(); }
    const Feature& at(std::size_t i) const { return features_.at(i); }
    const std::vector<Feature>& features() const { return features_; }

    bool contains(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;  // throws if absent
    // Returns npos-like sentinel rather than throwing.
    static constexpr std::size_t kNotFound = static_cast<std::size_t>(-1);
    std::size_t find(std::string_view name) const;

  private:
    std::vector<Feature> features_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Alias table for shared-feature naming across datasets: maps alias -> canonical.
using AliasTable = std::unordered_map<std::string, std::string>;

AliasTable load_alias_csv(const std::string& path);

// (source feature index, target feature index) pairs; injective both ways.
struct SharedFeatureMap {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

// Matches features by canonical name, after rewriting through the alias
// table (both sides). Validates injectivity.
SharedFeatureMap build_shared_map(const FeatureSchema& source, const FeatureSchema& target,
                                  const AliasTable& aliases = {});

}  // namespace covidcare
