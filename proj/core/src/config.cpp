#include "semcom/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "semcom/errors.hpp"

namespace semcom::harness {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

}  // namespace

double parse_double_value(const std::string& s, const std::string& context) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: cannot parse number '" + s + "' for " + context);
    }
}

Config Config::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path.string());
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError(origin + ":" + std::to_string(line_no) +
                                      ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ValidationError(origin + ":" + std::to_string(line_no) +
                                      ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": empty key");
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

bool Config::has(const std::string& k) const { return values_.count(k) != 0; }

const std::string& Config::require(const std::string& k) const {
    auto it = values_.find(k);
    if (it == values_.end()) throw ValidationError("config: missing required key '" + k + "'");
    return it->second;
}

std::string Config::get(const std::string& k, const std::string& fallback) const {
    auto it = values_.find(k);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& k, double fallback) const {
    auto it = values_.find(k);
    return it == values_.end() ? fallback : parse_double_value(it->second, k);
}

double Config::require_double(const std::string& k) const {
    return parse_double_value(require(k), k);
}

int Config::get_int(const std::string& k, int fallback) const {
    auto it = values_.find(k);
    if (it == values_.end()) return fallback;
    const double v = parse_double_value(it->second, k);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ValidationError("config: expected integer for '" + k + "'");
    return i;
}

bool Config::get_bool(const std::string& k, bool fallback) const {
    auto it = values_.find(k);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config: expected boolean for '" + k + "'");
}

std::vector<double> Config::get_double_list(const std::string& k,
                                            std::vector<double> fallback) const {
    auto it = values_.find(k);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& tok : split_list(it->second)) out.push_back(parse_double_value(tok, k));
    if (out.empty()) throw ValidationError("config: empty list for '" + k + "'");
    return out;
}

std::vector<int> Config::get_int_list(const std::string& k, std::vector<int> fallback) const {
    auto it = values_.find(k);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    for (const auto& tok : split_list(it->second)) {
        const double v = parse_double_value(tok, k);
        if (static_cast<double>(static_cast<int>(v)) != v)
            throw ValidationError("config: expected integer list for '" + k + "'");
        out.push_back(static_cast<int>(v));
    }
    if (out.empty()) throw ValidationError("config: empty list for '" + k + "'");
    return out;
}

std::vector<std::uint64_t> Config::get_u64_list(const std::string& k,
                                                std::vector<std::uint64_t> fallback) const {
    auto it = values_.find(k);
    if (it == values_.end()) return fallback;
    std::vector<std::uint64_t> out;
    for (const auto& tok : split_list(it->second)) {
        try {
            out.push_back(std::stoull(tok));
        } catch (const std::exception&) {
            throw ValidationError("config: expected unsigned integer list for '" + k + "'");
        }
    }
    if (out.empty()) throw ValidationError("config: empty list for '" + k + "'");
    return out;
}

void Config::set(const std::string& dotted_key, const std::string& value) {
    if (dotted_key.empty()) throw ValidationError("config override: empty key");
    values_[dotted_key] = trim(value);
}

std::string Config::serialize() const {
    // Group by section; std::map already iterates keys sorted.
    std::map<std::string, std::map<std::string, std::string>> sections;
    for (const auto& [k, v] : values_) {
        const auto dot = k.find('.');
        if (dot == std::string::npos)
            sections[""][k] = v;
        else
            sections[k.substr(0, dot)][k.substr(dot + 1)] = v;
    }
    std::string out;
    bool first = true;
    for (const auto& [sec, kv] : sections) {
        if (!first) out += "\n";
        first = false;
        if (!sec.empty()) out += "[" + sec + "]\n";
        for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace semcom::harness
