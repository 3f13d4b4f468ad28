#include "lime/config.hpp"

#include <charconv>
#include <cstdlib>

#include "lime/common.hpp"

namespace lime {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace

const std::string& RunConfig::get_str(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) {
        fail("config: missing key '", key, "'");
    }
    return it->second;
}

int64_t RunConfig::get_i64(const std::string& key) const {
    const std::string& v = get_str(key);
    int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        fail("config: key '", key, "' is not an integer: '", v, "'");
    }
    return out;
}

double RunConfig::get_f64(const std::string& key) const {
    const std::string& v = get_str(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        fail("config: key '", key, "' is not a number: '", v, "'");
    }
    return out;
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get_str(key);
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    fail("config: key '", key, "' is not a boolean: '", v, "'");
}

RunConfig parse_config(std::string_view text) {
    RunConfig config;
    std::string section;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t nl = text.find('\n', pos);
        const std::string_view raw =
            text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                fail("config: malformed section header at line ", std::to_string(line_no));
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty()) {
                fail("config: empty section name at line ", std::to_string(line_no));
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail("config: expected 'key = value' at line ", std::to_string(line_no));
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            fail("config: empty key at line ", std::to_string(line_no));
        }
        if (section.empty()) {
            fail("config: key '", key, "' appears before any [section] (line ",
                 std::to_string(line_no), ")");
        }
        const std::string full = section + "." + key;
        if (config.has(full)) {
            fail("config: duplicate key '", full, "' (line ", std::to_string(line_no), ")");
        }
        config.set(full, value);
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file_text(path));
}

std::string dump_config(const RunConfig& config) {
    std::string out;
    std::string section;
    for (const auto& [key, value] : config.values) {
        const size_t dot = key.find('.');
        const std::string sec = dot == std::string::npos ? std::string() : key.substr(0, dot);
        if (sec != section) {
            if (!out.empty()) {
                out.push_back('\n');
            }
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

const std::vector<ConfigDefault>& known_config_keys() {
    static const std::vector<ConfigDefault> keys = {
        {"run.seed", "42"},

        {"corpus.path", ""},
        {"corpus.format", "plain"},
        {"corpus.synthetic_documents", "20000"},
        {"corpus.test_fraction", "0.02"},

        {"vocab.path", ""},
        {"vocab.size", "4096"},

        {"tagger.path", ""},
        {"tagger.sentences", "40000"},
        {"tagger.epochs", "5"},

        {"gazetteer.path", ""},

        {"model.hidden", "128"},
        {"model.layers", "4"},
        {"model.heads", "4"},
        {"model.kv_heads", "1"},
        {"model.mlp_factor", "6"},
        {"model.seq_len", "384"},
        {"model.mode", "base"},
        {"model.rms_norm_eps", "1e-6"},
        {"model.rotary_base", "10000"},
        {"model.metadata_head_domain", "-1"},
        {"model.metadata_head_weight", "1.0"},

        {"train.steps", "3255"},
        {"train.batch", "16"},
        {"train.peak_lr", "3e-3"},
        {"train.min_lr", "3e-4"},
        {"train.warmup_frac", "0.05"},
        {"train.beta1", "0.9"},
        {"train.beta2", "0.95"},
        {"train.eps", "1e-8"},
        {"train.weight_decay", "0.033"},
        {"train.embed_grad_scale_by_freq", "false"},
        {"train.checkpoint", ""},
        {"train.log_every", "50"},

        {"eval.batch", "16"},
        {"eval.noise_levels", "0,0.05,0.1,0.3"},
        {"eval.max_documents", "0"},
    };
    return keys;
}

RunConfig validate_config(const RunConfig& raw) {
    RunConfig out;
    for (const ConfigDefault& d : known_config_keys()) {
        out.set(d.key, d.value);
    }
    for (const auto& [key, value] : raw.values) {
        if (!out.has(key)) {
            fail("config: unknown key '", key, "'");
        }
        out.set(key, value);
    }
    if (const char* env = std::getenv("LIME_SEED")) {
        const std::string_view v(env);
        uint64_t seed = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
        if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
            fail("config: LIME_SEED must be an unsigned integer, got '", std::string(v), "'");
        }
        out.set("run.seed", std::string(v));
    }
    return out;
}

}  // namespace lime
