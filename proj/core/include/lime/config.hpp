#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lime {

// Run configuration in an INI-like text form: "[section]" headers, one
// "key = value" per line, full-line "#" comments. Keys are stored flattened
// as "section.key". Typed getters throw with the full key name on bad values.
struct RunConfig {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }
    void set(const std::string& key, std::string value) { values[key] = std::move(value); }

    const std::string& get_str(const std::string& key) const;
    int64_t get_i64(const std::string& key) const;
    double get_f64(const std::string& key) const;
    bool get_bool(const std::string& key) const;  // true/false/1/0/yes/no
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical serialization: sections sorted, keys sorted within each section.
std::string dump_config(const RunConfig& config);

struct ConfigDefault {
    const char* key;
    const char* value;
};

// Every key the pipeline understands, with its default.
const std::vector<ConfigDefault>& known_config_keys();

// Rejects unknown keys by their full "section.key" name, materializes the
// defaults for absent keys, and lets the LIME_SEED environment variable
// override run.seed. The input is untouched.
RunConfig validate_config(const RunConfig& raw);

}  // namespace lime
