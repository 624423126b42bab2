#include "s2s/llm_client.hpp"

#include <chrono>
#include <cstdio>
#include <thread>
#include <utility>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"

#include "s2s/errors.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// First position where `word` occurs with word boundaries on both sides.
size_t find_keyword(std::string_view lower_text, std::string_view word) {
    size_t pos = 0;
    while ((pos = lower_text.find(word, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_word_char(lower_text[pos - 1]);
        size_t end = pos + word.size();
        bool right_ok = end == lower_text.size() || !is_word_char(lower_text[end]);
        if (left_ok && right_ok) return pos;
        pos += 1;
    }
    return std::string_view::npos;
}

// Fences count only at the start of a line; "```" inside prose or a string
// stays literal.
size_t find_fence(std::string_view s, size_t from) {
    size_t pos = s.find("```", from);
    while (pos != std::string_view::npos) {
        if (pos == 0 || s[pos - 1] == '\n') return pos;
        pos = s.find("```", pos + 3);
    }
    return std::string_view::npos;
}

} // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int md_len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &md_len, EVP_sha256(), nullptr) != 1) {
        throw InfrastructureError("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(md_len * 2);
    for (unsigned int i = 0; i < md_len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

std::string CompletionRequest::request_key() const {
    // Length-prefixed so field boundaries cannot be forged by crafted text.
    std::string payload = "chat-request-v1\n";
    auto add = [&payload](std::string_view field) {
        payload += std::to_string(field.size());
        payload += ':';
        payload += field;
        payload += '\n';
    };
    add(model);
    add(system_text);
    add(user_text);
    char temp_buf[64];
    std::snprintf(temp_buf, sizeof(temp_buf), "%.6f", temperature);
    add(temp_buf);
    return sha256_hex(payload);
}

std::string_view completion_source_name(CompletionSource s) {
    switch (s) {
        case CompletionSource::live: return "live";
        case CompletionSource::cache: return "cache";
        case CompletionSource::replay: return "replay";
    }
    return "unknown";
}

std::unordered_map<std::string, std::string> load_response_file(const std::filesystem::path& path) {
    std::unordered_map<std::string, std::string> out;
    if (!std::filesystem::exists(path)) return out;

    std::string text = read_text_file(path);
    std::vector<std::string_view> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(std::string_view(text).substr(start));
            break;
        }
        lines.push_back(std::string_view(text).substr(start, nl - start));
        start = nl + 1;
    }

    for (size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = trim_view(lines[i]);
        if (line.empty()) continue;
        try {
            json rec = json::parse(line);
            out[rec.at("request_key").get<std::string>()] = rec.at("raw_text").get<std::string>();
        } catch (const json::exception& e) {
            if (i + 1 == lines.size()) break; // torn final line from an interrupted append
            throw ParseError("response file " + path.string() + " line " + std::to_string(i + 1) +
                             ": " + e.what());
        }
    }
    return out;
}

LlmClient::LlmClient(Mode mode, LiveBackendConfig cfg, std::filesystem::path cache_path,
                     std::unordered_map<std::string, std::string> responses)
    : mode_(mode), cfg_(std::move(cfg)), cache_path_(std::move(cache_path)),
      responses_(std::move(responses)) {
    if (mode_ == Mode::live) {
        if (cache_path_.has_parent_path()) {
            std::error_code ec;
            std::filesystem::create_directories(cache_path_.parent_path(), ec);
        }
        cache_out_.open(cache_path_, std::ios::app | std::ios::binary);
        if (!cache_out_) {
            throw InfrastructureError("cannot open cache file for append: " + cache_path_.string());
        }
    }
}

LlmClient LlmClient::replay(const std::filesystem::path& fixture_file) {
    if (!std::filesystem::exists(fixture_file)) {
        throw InfrastructureError("replay fixture file not found: " + fixture_file.string());
    }
    return LlmClient(Mode::replay, {}, {}, load_response_file(fixture_file));
}

LlmClient LlmClient::replay_in_memory(std::unordered_map<std::string, std::string> by_key) {
    return LlmClient(Mode::replay, {}, {}, std::move(by_key));
}

LlmClient LlmClient::live(LiveBackendConfig cfg, const std::filesystem::path& cache_file) {
    return LlmClient(Mode::live, std::move(cfg), cache_file, load_response_file(cache_file));
}

CompletionResult LlmClient::complete(const CompletionRequest& req) {
    std::string key = req.request_key();

    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = responses_.find(key);
        if (it != responses_.end()) {
            CompletionResult r;
            r.raw_text = it->second;
            r.source = mode_ == Mode::replay ? CompletionSource::replay : CompletionSource::cache;
            return r;
        }
    }

    if (mode_ == Mode::replay) {
        throw CompletionError(CompletionError::Category::fixture_miss,
                              "no replay fixture for request_key " + key);
    }

    int attempts = cfg_.retries + 1;
    for (int attempt = 0;; ++attempt) {
        try {
            CompletionResult result = post_once(req);
            std::lock_guard<std::mutex> lock(mu_);
            if (responses_.emplace(key, result.raw_text).second) {
                ordered_json rec;
                rec["request_key"] = key;
                rec["model"] = req.model;
                rec["raw_text"] = result.raw_text;
                rec["timestamp"] = iso8601_utc_now();
                cache_out_ << rec.dump() << "\n";
                cache_out_.flush();
            }
            return result;
        } catch (const CompletionError& e) {
            if (e.category() != CompletionError::Category::transport) throw;
            if (attempt + 1 >= attempts) {
                throw CompletionError(CompletionError::Category::transport,
                                      std::string(e.what()) + " (retries exhausted)");
            }
            long delay = static_cast<long>(cfg_.backoff_ms) << attempt;
            if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
    }
}

CompletionResult LlmClient::post_once(const CompletionRequest& req) {
    std::string origin = cfg_.base_url;
    std::string prefix;
    size_t scheme = origin.find("://");
    size_t path_start = origin.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start != std::string::npos) {
        prefix = origin.substr(path_start);
        origin = origin.substr(0, path_start);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(origin);
    client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    client.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

    ordered_json body;
    body["model"] = req.model;
    body["messages"] = ordered_json::array({
        ordered_json{{"role", "system"}, {"content", req.system_text}},
        ordered_json{{"role", "user"}, {"content", req.user_text}},
    });
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;

    httplib::Headers headers;
    if (!cfg_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    }

    auto start = std::chrono::steady_clock::now();
    httplib::Result res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                                      "application/json");
    auto elapsed = std::chrono::steady_clock::now() - start;

    if (!res) {
        throw CompletionError(CompletionError::Category::transport,
                              "transport error: " + httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
        throw CompletionError(CompletionError::Category::credential,
                              "authentication rejected (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
        throw CompletionError(CompletionError::Category::transport,
                              "retryable HTTP status " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw CompletionError(CompletionError::Category::protocol,
                              "unexpected HTTP status " + std::to_string(res->status) + ": " +
                                  res->body);
    }

    try {
        json doc = json::parse(res->body);
        const json& content = doc.at("choices").at(0).at("message").at("content");
        CompletionResult result;
        result.raw_text = content.is_null() ? "" : content.get<std::string>();
        result.source = CompletionSource::live;
        result.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        if (doc.contains("usage") && doc["usage"].is_object()) {
            result.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
            result.completion_tokens = doc["usage"].value("completion_tokens", 0L);
        }
        return result;
    } catch (const json::exception& e) {
        throw CompletionError(CompletionError::Category::protocol,
                              std::string("malformed completion response: ") + e.what());
    }
}

std::string extract_sql(std::string_view raw_text) {
    std::string_view s = trim_view(raw_text);

    bool fenced = false;
    std::string_view body = s;
    size_t fence = find_fence(s, 0);
    if (fence != std::string_view::npos) {
        fenced = true;
        size_t line_end = s.find('\n', fence);
        if (line_end == std::string_view::npos) {
            body = std::string_view();
        } else {
            size_t content = line_end + 1;
            size_t close = find_fence(s, content);
            body = close == std::string_view::npos ? s.substr(content)
                                                   : s.substr(content, close - content);
        }
        body = trim_view(body);
    }

    std::string lower = to_lower(body);
    size_t sel = find_keyword(lower, "select");
    size_t wit = find_keyword(lower, "with");
    size_t start = std::min(sel, wit);
    if (start == std::string_view::npos) {
        return std::string(fenced ? body : s);
    }

    // Truncate at the first semicolon outside string/identifier quotes.
    size_t end = body.size();
    char quote = 0;
    for (size_t i = start; i < body.size(); ++i) {
        char c = body[i];
        if (quote != 0) {
            if (c == quote) {
                if (i + 1 < body.size() && body[i + 1] == quote) {
                    ++i; // doubled quote escape
                } else {
                    quote = 0;
                }
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == ';') {
            end = i;
            break;
        }
    }
    return trim(body.substr(start, end - start));
}

} // namespace s2s
