#pragma once

// Minimal TOML subset: [section] headers and key = value pairs where value
// is a quoted string, integer, float, or true/false. Enough for run
// configuration files; unknown constructs fail loudly with line numbers.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace covidcare::toml {

struct Value {
    enum class Kind { string, integer, floating, boolean };
    Kind kind = Kind::string;
    std::string str;
    long long integer = 0;
    double floating = 0.0;
    bool boolean = false;
    std::size_t line = 0;

    // Context-checked accessors; `where` names the key for error messages.
    std::string as_string(const std::string& where) const;
    long long as_int(const std::string& where) const;
    double as_double(const std::string& where) const;  // accepts integers
    bool as_bool(const std::string& where) const;
};

struct Table {
    std::vector<std::pair<std::string, Value>> entries;
    const Value* find(const std::string& key) const;
};

struct Document {
    std::map<std::string, Table> sections;
    bool has_section(const std::string& name) const { return sections.count(name) > 0; }
    const Table* section(const std::string& name) const;
};

Document parse_string(const std::string& text, const std::string& origin = "<string>");
Document parse_file(const std::string& path);

}  // namespace covidcare::toml
