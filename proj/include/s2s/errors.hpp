#pragma once

#include <stdexcept>
#include <string>

namespace s2s {

// Malformed input text: dataset JSON, config files, prompt templates.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Cross-reference violations: dangling indexes, unknown tables or columns,
// misaligned per-question lists.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing files, unusable databases, exhausted retries, broken setup.
struct InfrastructureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace s2s
