#pragma once

// Minimal TOML-style config dialect used for scenario and experiment files:
// `#` comments, [table] / [table.sub] headers, and `key = value` pairs with
// strings, integers, reals, booleans and flat arrays. Insertion order is
// preserved so that serialized files are deterministic.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cpw/errors.hpp"

namespace cpw::cfg {

struct Value {
    enum class Kind { boolean, integer, real, string, array };
    Kind kind = Kind::string;
    bool b = false;
    std::int64_t i = 0;
    double d = 0.0;
    std::string s;
    std::vector<Value> items;

    static Value of(bool v) { Value x; x.kind = Kind::boolean; x.b = v; return x; }
    static Value of(std::int64_t v) { Value x; x.kind = Kind::integer; x.i = v; return x; }
    static Value of(double v) { Value x; x.kind = Kind::real; x.d = v; return x; }
    static Value of(std::string v) { Value x; x.kind = Kind::string; x.s = std::move(v); return x; }
    static Value of(std::vector<double> v) {
        Value x;
        x.kind = Kind::array;
        for (double e : v) x.items.push_back(of(e));
        return x;
    }

    double as_real() const {
        if (kind == Kind::real) return d;
        if (kind == Kind::integer) return static_cast<double>(i);
        throw ConfigError("config value is not a number");
    }
    std::int64_t as_int() const {
        if (kind == Kind::integer) return i;
        throw ConfigError("config value is not an integer");
    }
    bool as_bool() const {
        if (kind == Kind::boolean) return b;
        throw ConfigError("config value is not a boolean");
    }
    const std::string& as_string() const {
        if (kind == Kind::string) return s;
        throw ConfigError("config value is not a string");
    }
    std::vector<double> as_real_array() const {
        if (kind != Kind::array) throw ConfigError("config value is not an array");
        std::vector<double> out;
        out.reserve(items.size());
        for (const auto& e : items) out.push_back(e.as_real());
        return out;
    }
};

struct Table {
    std::vector<std::pair<std::string, Value>> values;
    std::vector<std::pair<std::string, Table>> tables;

    const Value* find(const std::string& key) const {
        for (const auto& [k, v] : values) {
            if (k == key) return &v;
        }
        return nullptr;
    }
    Value& set(const std::string& key, Value v) {
        for (auto& [k, existing] : values) {
            if (k == key) {
                existing = std::move(v);
                return existing;
            }
        }
        values.emplace_back(key, std::move(v));
        return values.back().second;
    }
    const Table* find_table(const std::string& key) const {
        for (const auto& [k, t] : tables) {
            if (k == key) return &t;
        }
        return nullptr;
    }
    Table& table(const std::string& key) {
        for (auto& [k, t] : tables) {
            if (k == key) return t;
        }
        tables.emplace_back(key, Table{});
        return tables.back().second;
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    double get_real(const std::string& key, double fallback) const {
        const Value* v = find(key);
        return v ? v->as_real() : fallback;
    }
    double require_real(const std::string& key) const {
        const Value* v = find(key);
        if (!v) throw ConfigError("missing required config key: " + key);
        return v->as_real();
    }
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const Value* v = find(key);
        return v ? v->as_int() : fallback;
    }
    bool get_bool(const std::string& key, bool fallback) const {
        const Value* v = find(key);
        return v ? v->as_bool() : fallback;
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        const Value* v = find(key);
        return v ? v->as_string() : fallback;
    }
    std::string require_string(const std::string& key) const {
        const Value* v = find(key);
        if (!v) throw ConfigError("missing required config key: " + key);
        return v->as_string();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline Value parse_scalar(const std::string& tok, std::size_t lineno) {
    if (tok.empty()) throw ConfigError("empty value at line " + std::to_string(lineno));
    if (tok == "true") return Value::of(true);
    if (tok == "false") return Value::of(false);
    if (tok.front() == '"') {
        if (tok.size() < 2 || tok.back() != '"') {
            throw ConfigError("unterminated string at line " + std::to_string(lineno));
        }
        std::string out;
        for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
            if (tok[i] == '\\' && i + 2 < tok.size()) {
                ++i;
                switch (tok[i]) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    default: out.push_back(tok[i]);
                }
            } else {
                out.push_back(tok[i]);
            }
        }
        return Value::of(std::move(out));
    }
    // Number: integer when it parses exactly as one, real otherwise.
    errno = 0;
    char* endp = nullptr;
    const long long asint = std::strtoll(tok.c_str(), &endp, 10);
    if (errno == 0 && endp && *endp == '\0') {
        return Value::of(static_cast<std::int64_t>(asint));
    }
    errno = 0;
    endp = nullptr;
    const double asreal = std::strtod(tok.c_str(), &endp);
    if (endp && *endp == '\0' && errno == 0) {
        return Value::of(asreal);
    }
    throw ConfigError("cannot parse value '" + tok + "' at line " + std::to_string(lineno));
}

inline Value parse_value(const std::string& tok, std::size_t lineno) {
    if (!tok.empty() && tok.front() == '[') {
        if (tok.back() != ']') {
            throw ConfigError("unterminated array at line " + std::to_string(lineno));
        }
        Value arr;
        arr.kind = Value::Kind::array;
        std::string inner = tok.substr(1, tok.size() - 2);
        std::string cur;
        int depth = 0;
        bool in_string = false;
        for (char c : inner) {
            if (c == '"') in_string = !in_string;
            if (c == '[' && !in_string) ++depth;
            if (c == ']' && !in_string) --depth;
            if (c == ',' && depth == 0 && !in_string) {
                const std::string t = trim(cur);
                if (!t.empty()) arr.items.push_back(parse_value(t, lineno));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        const std::string t = trim(cur);
        if (!t.empty()) arr.items.push_back(parse_value(t, lineno));
        return arr;
    }
    return parse_scalar(tok, lineno);
}

inline Table& resolve_path(Table& root, const std::string& dotted, std::size_t lineno) {
    Table* cur = &root;
    std::string part;
    std::istringstream ss(dotted);
    while (std::getline(ss, part, '.')) {
        part = trim(part);
        if (part.empty()) {
            throw ConfigError("empty table name component at line " + std::to_string(lineno));
        }
        cur = &cur->table(part);
    }
    return *cur;
}

inline void serialize_table(const Table& t, const std::string& path, std::ostringstream& out) {
    if (!path.empty() && (!t.values.empty() || t.tables.empty())) {
        out << "[" << path << "]\n";
    }
    char buf[64];
    for (const auto& [k, v] : t.values) {
        out << k << " = ";
        std::function<void(const Value&)> emit = [&](const Value& val) {
            switch (val.kind) {
                case Value::Kind::boolean: out << (val.b ? "true" : "false"); break;
                case Value::Kind::integer: out << val.i; break;
                case Value::Kind::real:
                    std::snprintf(buf, sizeof buf, "%.17g", val.d);
                    out << buf;
                    break;
                case Value::Kind::string: out << '"' << val.s << '"'; break;
                case Value::Kind::array: {
                    out << "[";
                    for (std::size_t i = 0; i < val.items.size(); ++i) {
                        if (i) out << ", ";
                        emit(val.items[i]);
                    }
                    out << "]";
                    break;
                }
            }
        };
        emit(v);
        out << "\n";
    }
    if (!t.values.empty() || path.empty()) out << "\n";
    for (const auto& [k, sub] : t.tables) {
        serialize_table(sub, path.empty() ? k : path + "." + k, out);
    }
}

} // namespace detail

inline Table parse(const std::string& text) {
    Table root;
    Table* current = &root;
    std::istringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.size() < 3 || line.back() != ']') {
                throw ConfigError("malformed table header at line " + std::to_string(lineno));
            }
            const std::string name = detail::trim(line.substr(1, line.size() - 2));
            current = &detail::resolve_path(root, name, lineno);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value' at line " + std::to_string(lineno));
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("empty key at line " + std::to_string(lineno));
        }
        current->set(key, detail::parse_value(val, lineno));
    }
    return root;
}

inline Table parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

inline std::string serialize(const Table& t) {
    std::ostringstream out;
    detail::serialize_table(t, "", out);
    return out.str();
}

inline void write_file(const Table& t, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << serialize(t);
}

} // namespace cpw::cfg
