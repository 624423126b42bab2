#pragma once

// Uniform completion interface: an OpenAI-compatible chat endpoint with
// retry and an append-only JSONL response cache, or a replay store that
// serves the same JSONL format without touching the network.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>

namespace s2s {

struct CompletionRequest {
    std::string model;
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_tokens = 512;

    // SHA-256 over (model, system_text, user_text, temperature); a pure
    // function of those fields. max_tokens is excluded.
    std::string request_key() const;
};

enum class CompletionSource { live, cache, replay };

std::string_view completion_source_name(CompletionSource s);

struct CompletionResult {
    std::string raw_text; // may be empty, never absent on success
    CompletionSource source = CompletionSource::live;
    long latency_ms = 0; // 0 for cache/replay hits
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

class CompletionError : public std::runtime_error {
public:
    enum class Category {
        transport,    // network failure / retries exhausted
        credential,   // HTTP 401/403, not retried
        protocol,     // unusable response body or non-retryable HTTP status
        fixture_miss, // replay store has no entry for the request key
    };

    CompletionError(Category category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    Category category() const { return category_; }

private:
    Category category_;
};

struct LiveBackendConfig {
    std::string base_url; // e.g. "https://api.openai.com/v1"
    std::string api_key;
    int retries = 3;        // extra attempts after the first
    int backoff_ms = 1000;  // doubled per retry: 1s, 2s, 4s
    int timeout_ms = 120000;
};

// Cache / replay file format: one JSON object per line,
// {"request_key":..., "model":..., "raw_text":..., "timestamp":...}.
// On load, later lines win for a duplicated key; a torn final line (crash
// mid-append) is ignored.
std::unordered_map<std::string, std::string> load_response_file(const std::filesystem::path& path);

class LlmClient {
public:
    // Serves completions from the fixture file only; a miss is an error.
    static LlmClient replay(const std::filesystem::path& fixture_file);
    static LlmClient replay_in_memory(std::unordered_map<std::string, std::string> by_key);

    // POSTs to base_url + "/chat/completions"; successful responses are
    // appended to cache_file and served from memory on repeat requests.
    static LlmClient live(LiveBackendConfig cfg, const std::filesystem::path& cache_file);

    LlmClient(const LlmClient&) = delete;
    LlmClient& operator=(const LlmClient&) = delete;

    // Throws CompletionError. Safe to call from multiple threads.
    CompletionResult complete(const CompletionRequest& req);

private:
    enum class Mode { live, replay };

    LlmClient(Mode mode, LiveBackendConfig cfg, std::filesystem::path cache_path,
              std::unordered_map<std::string, std::string> responses);

    CompletionResult post_once(const CompletionRequest& req); // single HTTP attempt

    Mode mode_;
    LiveBackendConfig cfg_;
    std::filesystem::path cache_path_; // empty in replay mode
    std::unordered_map<std::string, std::string> responses_;
    std::mutex mu_; // guards responses_ and the cache appender
    std::ofstream cache_out_;
};

// Pulls the SQL out of raw model output: strips a markdown code fence if
// present, then returns the first statement starting with SELECT or WITH,
// truncated at the first unquoted semicolon. Falls back to the whole
// trimmed text when no such statement exists. Total and idempotent.
std::string extract_sql(std::string_view raw_text);

std::string sha256_hex(std::string_view data);

} // namespace s2s
