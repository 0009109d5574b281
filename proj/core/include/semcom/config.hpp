#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace semcom::harness {

// Flat declarative key-value config: UTF-8 text, `key = value` lines,
// `[section]` headers, `#` comments. Keys are addressed as "section.key".
class Config {
   public:
    static Config parse_file(const std::filesystem::path& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& dotted_key) const;
    const std::string& require(const std::string& dotted_key) const;
    std::string get(const std::string& dotted_key, const std::string& fallback) const;

    double get_double(const std::string& dotted_key, double fallback) const;
    double require_double(const std::string& dotted_key) const;
    int get_int(const std::string& dotted_key, int fallback) const;
    bool get_bool(const std::string& dotted_key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& dotted_key,
                                        std::vector<double> fallback) const;
    std::vector<int> get_int_list(const std::string& dotted_key,
                                  std::vector<int> fallback) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& dotted_key,
                                            std::vector<std::uint64_t> fallback) const;

    // Override (or add) a dotted key, as from a `--set` flag.
    void set(const std::string& dotted_key, const std::string& value);

    // Canonical serialization: sections and keys sorted, one blank line
    // between sections. Deterministic, suitable for echoing into outputs.
    std::string serialize() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

   private:
    std::map<std::string, std::string> values_;  // dotted key -> raw value
};

// Parses "inf"/"-inf" in addition to plain numbers.
double parse_double_value(const std::string& s, const std::string& context);

}  // namespace semcom::harness
