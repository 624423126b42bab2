#include "s2s/config.hpp"

#include <cstdlib>

#include "s2s/errors.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

[[noreturn]] void fail(size_t line_no, const std::string& what) {
    throw ParseError("config line " + std::to_string(line_no) + ": " + what);
}

// Cuts an end-of-line comment; a '#' inside a quoted string stays.
std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string parse_quoted(std::string_view text, size_t line_no) {
    if (text.size() < 2 || text.front() != '"' || text.back() != '"') {
        fail(line_no, "expected a quoted string, got: " + std::string(text));
    }
    std::string out;
    for (size_t i = 1; i + 1 < text.size(); ++i) {
        char c = text[i];
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i + 2 >= text.size()) fail(line_no, "dangling escape in string");
        char e = text[++i];
        switch (e) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            default: fail(line_no, std::string("unsupported escape \\") + e);
        }
    }
    return out;
}

bool looks_like_int(std::string_view text) {
    if (text.empty()) return false;
    size_t i = (text[0] == '+' || text[0] == '-') ? 1 : 0;
    if (i == text.size()) return false;
    for (; i < text.size(); ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    return true;
}

TomlValue parse_scalar(std::string_view text, size_t line_no) {
    if (!text.empty() && text.front() == '"') {
        return {parse_quoted(text, line_no)};
    }
    if (text == "true") return {true};
    if (text == "false") return {false};
    if (looks_like_int(text)) {
        try {
            return {static_cast<long long>(std::stoll(std::string(text)))};
        } catch (const std::exception&) {
            fail(line_no, "integer out of range: " + std::string(text));
        }
    }
    // Float: digits with a dot or exponent.
    try {
        size_t used = 0;
        double d = std::stod(std::string(text), &used);
        if (used == text.size()) return {d};
    } catch (const std::exception&) {
    }
    fail(line_no, "unrecognized value: " + std::string(text) +
                      " (strings must be double-quoted)");
}

TomlValue parse_array(std::string_view text, size_t line_no) {
    std::string_view inner = text.substr(1, text.size() - 2);
    std::vector<std::string_view> elements;
    bool in_string = false;
    size_t start = 0;
    for (size_t i = 0; i <= inner.size(); ++i) {
        if (i < inner.size() && in_string) {
            if (inner[i] == '\\') {
                ++i;
            } else if (inner[i] == '"') {
                in_string = false;
            }
            continue;
        }
        if (i < inner.size() && inner[i] == '"') {
            in_string = true;
            continue;
        }
        if (i == inner.size() || inner[i] == ',') {
            std::string_view el = trim_view(inner.substr(start, i - start));
            if (!el.empty()) elements.push_back(el);
            start = i + 1;
        }
    }
    if (in_string) fail(line_no, "unterminated string in array");

    if (elements.empty()) return {std::vector<long long>{}};

    if (elements[0].front() == '"') {
        std::vector<std::string> out;
        for (auto el : elements) out.push_back(parse_quoted(el, line_no));
        return {std::move(out)};
    }
    std::vector<long long> out;
    for (auto el : elements) {
        if (!looks_like_int(el)) fail(line_no, "expected an integer array element: " + std::string(el));
        out.push_back(std::stoll(std::string(el)));
    }
    return {std::move(out)};
}

} // namespace

TomlTable parse_toml(const std::string& text) {
    TomlTable out;
    std::string section;
    size_t line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        std::string_view line(text.data() + start,
                              (nl == std::string::npos ? text.size() : nl) - start);
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        std::string_view body = trim_view(strip_comment(line));
        if (body.empty()) continue;

        if (body.front() == '[') {
            if (body.back() != ']') fail(line_no, "malformed section header");
            section = trim(body.substr(1, body.size() - 2));
            if (section.empty()) fail(line_no, "empty section name");
            continue;
        }

        size_t eq = body.find('=');
        if (eq == std::string_view::npos) fail(line_no, "expected key = value");
        std::string key = trim(body.substr(0, eq));
        std::string_view value = trim_view(body.substr(eq + 1));
        if (key.empty()) fail(line_no, "empty key");
        if (value.empty()) fail(line_no, "empty value for key " + key);

        std::string full_key = section.empty() ? key : section + "." + key;
        TomlValue parsed = (value.front() == '[' && value.back() == ']')
                               ? parse_array(value, line_no)
                               : parse_scalar(value, line_no);
        out[full_key] = std::move(parsed);
    }
    return out;
}

namespace {

void apply_key(AppConfig& cfg, const std::string& key, const TomlValue& v) {
    auto want_string = [&]() -> const std::string& {
        if (!v.is_string()) throw ParseError("config key " + key + ": expected a string");
        return std::get<std::string>(v.value);
    };
    auto want_int = [&]() -> int {
        if (!v.is_int()) throw ParseError("config key " + key + ": expected an integer");
        return static_cast<int>(std::get<long long>(v.value));
    };
    auto want_number = [&]() -> double {
        if (v.is_int()) return static_cast<double>(std::get<long long>(v.value));
        if (v.is_float()) return std::get<double>(v.value);
        throw ParseError("config key " + key + ": expected a number");
    };

    if (key == "data_root") cfg.data_root = want_string();
    else if (key == "backend.mode") cfg.backend.mode = want_string();
    else if (key == "backend.base_url") cfg.backend.base_url = want_string();
    else if (key == "backend.api_key_env") cfg.backend.api_key_env = want_string();
    else if (key == "backend.model") cfg.backend.model = want_string();
    else if (key == "backend.temperature") cfg.backend.temperature = want_number();
    else if (key == "backend.max_tokens") cfg.backend.max_tokens = want_int();
    else if (key == "backend.retries") cfg.backend.retries = want_int();
    else if (key == "backend.backoff_ms") cfg.backend.backoff_ms = want_int();
    else if (key == "backend.timeout_ms") cfg.backend.timeout_ms = want_int();
    else if (key == "pipeline.rounds") cfg.rounds = want_int();
    else if (key == "pipeline.worker_count") cfg.worker_count = want_int();
    else if (key == "pipeline.scv_candidates") {
        if (!std::holds_alternative<std::vector<long long>>(v.value)) {
            throw ParseError("config key " + key + ": expected an integer array");
        }
        cfg.scv_candidates.clear();
        for (long long x : std::get<std::vector<long long>>(v.value)) {
            cfg.scv_candidates.push_back(static_cast<int>(x));
        }
    } else if (key == "eval.exec_timeout_ms") cfg.exec_timeout_ms = want_int();
    else if (key == "paths.cache") cfg.paths.cache = want_string();
    else if (key == "paths.checkpoint") cfg.paths.checkpoint = want_string();
    else if (key == "paths.report_out") cfg.paths.report_out = want_string();
    else if (key == "paths.templates") cfg.paths.templates = want_string();
    else cfg.unknown_keys.push_back(key);
}

} // namespace

AppConfig config_from_toml(const TomlTable& table) {
    AppConfig cfg;
    for (const auto& [key, value] : table) {
        apply_key(cfg, key, value);
    }
    if (cfg.backend.mode != "live" && cfg.backend.mode != "replay") {
        throw ParseError("config key backend.mode: expected \"live\" or \"replay\", got \"" +
                         cfg.backend.mode + "\"");
    }
    if (cfg.rounds < 1) throw ParseError("config key pipeline.rounds: must be >= 1");
    if (cfg.worker_count < 1) throw ParseError("config key pipeline.worker_count: must be >= 1");
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    return config_from_toml(parse_toml(read_text_file(path)));
}

void apply_env_overrides(AppConfig& cfg) {
    if (const char* v = std::getenv("S2S_DATA_ROOT")) cfg.data_root = v;
    if (const char* v = std::getenv("S2S_BASE_URL")) cfg.backend.base_url = v;
    if (const char* v = std::getenv("S2S_MODEL")) cfg.backend.model = v;
    if (const char* v = std::getenv("S2S_MODE")) {
        std::string mode = v;
        if (mode != "live" && mode != "replay") {
            throw ParseError("S2S_MODE: expected \"live\" or \"replay\", got \"" + mode + "\"");
        }
        cfg.backend.mode = mode;
    }
}

} // namespace s2s
