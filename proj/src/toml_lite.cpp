#include "covidcare/toml_lite.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "covidcare/error.hpp"

namespace covidcare::toml {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Strips a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        else if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

bool is_integer(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

Value parse_value(const std::string& raw, std::size_t line, const std::string& origin) {
    Value v;
    v.line = line;
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        v.kind = Value::Kind::string;
        v.str = raw.substr(1, raw.size() - 2);
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = Value::Kind::boolean;
        v.boolean = raw == "true";
        return v;
    }
    if (is_integer(raw)) {
        v.kind = Value::Kind::integer;
        v.integer = std::stoll(raw);
        v.floating = static_cast<double>(v.integer);
        return v;
    }
    try {
        std::size_t used = 0;
        v.floating = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        v.kind = Value::Kind::floating;
        return v;
    } catch (const std::exception&) {
        throw UserError(origin + ":" + std::to_string(line) + ": cannot parse value '" + raw +
                        "'");
    }
}

}  // namespace

std::string Value::as_string(const std::string& where) const {
    if (kind != Kind::string)
        throw UserError("config key '" + where + "' must be a quoted string");
    return str;
}

long long Value::as_int(const std::string& where) const {
    if (kind != Kind::integer)
        throw UserError("config key '" + where + "' must be an integer");
    return integer;
}

double Value::as_double(const std::string& where) const {
    if (kind == Kind::integer) return static_cast<double>(integer);
    if (kind == Kind::floating) return floating;
    throw UserError("config key '" + where + "' must be a number");
}

bool Value::as_bool(const std::string& where) const {
    if (kind != Kind::boolean)
        throw UserError("config key '" + where + "' must be true or false");
    return boolean;
}

const Value* Table::find(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return &v;
    return nullptr;
}

const Table* Document::section(const std::string& name) const {
    auto it = sections.find(name);
    return it == sections.end() ? nullptr : &it->second;
}

Document parse_string(const std::string& text, const std::string& origin) {
    Document doc;
    std::istringstream in(text);
    std::string line, current;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw UserError(origin + ":" + std::to_string(lineno) + ": malformed section header");
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty())
                throw UserError(origin + ":" + std::to_string(lineno) + ": empty section name");
            doc.sections[current];  // section may legitimately stay empty
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UserError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string raw = trim(line.substr(eq + 1));
        if (key.empty() || raw.empty())
            throw UserError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        Table& table = doc.sections[current];
        if (table.find(key))
            throw UserError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                            "'");
        table.entries.emplace_back(key, parse_value(raw, lineno, origin));
    }
    return doc;
}

Document parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

}  // namespace covidcare::toml
