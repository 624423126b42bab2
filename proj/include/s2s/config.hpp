#pragma once

// TOML-subset config file, environment overrides, and the merged
// application settings the CLI runs with.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace s2s {

// Minimal TOML reader: [section] headers, key = value, values limited to
// strings, integers, floats, booleans and flat arrays. Enough for a
// settings file; not a general TOML implementation.
struct TomlValue {
    std::variant<std::string, long long, double, bool,
                 std::vector<std::string>, std::vector<long long>>
        value;

    bool is_string() const { return std::holds_alternative<std::string>(value); }
    bool is_int() const { return std::holds_alternative<long long>(value); }
    bool is_float() const { return std::holds_alternative<double>(value); }
    bool is_bool() const { return std::holds_alternative<bool>(value); }
};

// Keys are "section.key"; top-level keys have no dot.
using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml(const std::string& text); // throws ParseError with line number

struct BackendConfig {
    std::string mode = "replay"; // "live" or "replay"
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string model = "gpt-4-turbo";
    double temperature = 0.0;
    int max_tokens = 512;
    int retries = 3;
    int backoff_ms = 1000;
    int timeout_ms = 120000;
};

struct PathsConfig {
    std::string cache = "out/cache.jsonl";
    std::string checkpoint = "out/traces.jsonl";
    std::string report_out = "out/report.json";
    std::string templates; // empty: use built-in prompt templates
};

struct AppConfig {
    BackendConfig backend;
    int rounds = 2;
    std::vector<int> scv_candidates = {0, 1, 2};
    int worker_count = 4;
    int exec_timeout_ms = 30000;
    PathsConfig paths;
    std::string data_root = "data/spider";

    std::vector<std::string> unknown_keys; // collected for a warning, never fatal
};

AppConfig config_from_toml(const TomlTable& table);
AppConfig load_config(const std::filesystem::path& path);

// S2S_DATA_ROOT, S2S_BASE_URL, S2S_MODEL, S2S_MODE override file values.
void apply_env_overrides(AppConfig& cfg);

} // namespace s2s
