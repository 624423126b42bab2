#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace s2s {

inline char lower_ascii(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = lower_ascii(c);
    return out;
}

// ASCII case-insensitive equality; SQL identifiers in this project are ASCII.
inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (lower_ascii(a[i]) != lower_ascii(b[i])) return false;
    return true;
}

inline bool is_space_char(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_view(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space_char(s[b])) ++b;
    while (e > b && is_space_char(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

// Throws InfrastructureError when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown by any fn is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

std::string iso8601_utc_now();

std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace s2s
