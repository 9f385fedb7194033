#pragma once

#include <stdexcept>
#include <string>

namespace pcir {

/// Malformed input document (topics, qrels, run, config, ...).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structurally valid input that violates a domain invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Chat or embedding endpoint failure after the configured retries.
struct GatewayError : std::runtime_error {
    GatewayError(const std::string& message, int http_status)
        : std::runtime_error(message), status(http_status) {}
    int status;
};

/// Model output that could not be parsed into the expected structure after
/// the re-ask budget; callers fall back per their own policy.
struct ParseFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pcir
