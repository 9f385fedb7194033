#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace pcir::llm {

struct ChatMessage {
    std::string role;  // "system", "user" or "assistant"
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Injection point for tests; the default sends a JSON POST via httplib.
using HttpTransport = std::function<HttpResponse(
    const std::string& url, const std::string& body,
    const std::vector<std::pair<std::string, std::string>>& headers)>;

HttpTransport default_http_transport();

struct GatewayConfig {
    std::string endpoint;  // e.g. http://localhost:8089/v1/chat/completions
    std::string model = "gpt-3.5-turbo-16k";
    double temperature = 0.0;
    int max_retries = 3;            // total attempts = max_retries + 1
    double backoff_initial_ms = 200.0;  // doubles after every failed attempt
    std::string api_key_env = "PCIR_API_KEY";
    std::filesystem::path cache_dir;    // empty disables persistence
};

/// Chat-completion client with a content-addressed response cache.
/// Identical (model, temperature, messages) triples are served from the
/// cache without touching the network; new responses are appended to a
/// JSONL record file so reruns are reproducible and auditable.
class ChatClient {
public:
    explicit ChatClient(GatewayConfig config, HttpTransport transport = default_http_transport());

    /// Cached text when available, otherwise calls the endpoint with
    /// exponential backoff and stores the result.
    std::string chat(const ChatRequest& request);

    /// chat() plus structured-output parsing; on a malformed reply, re-asks
    /// with the previous answer and a corrective note up to retry_budget
    /// times before letting ParseFailure escape.
    std::map<std::string, std::string> chat_structured(const ChatRequest& request,
                                                       const std::vector<std::string>& fields,
                                                       int retry_budget);

    /// Number of HTTP calls issued, cache hits excluded. For tests.
    std::size_t network_calls() const { return network_calls_.load(); }

    const GatewayConfig& config() const { return config_; }

    /// SHA-256 over the canonical (model, temperature, messages) rendering.
    static std::string cache_key(const ChatRequest& request);

private:
    std::string call_endpoint(const ChatRequest& request);
    void store(const std::string& key, const ChatRequest& request, const std::string& text);

    GatewayConfig config_;
    HttpTransport transport_;
    std::filesystem::path cache_file_;
    std::unordered_map<std::string, std::string> cache_;
    std::mutex mutex_;
    std::atomic<std::size_t> network_calls_{0};
};

/// Extracts the named fields from a structured block in model text; the
/// block may be fenced, bare, or wrapped in prose. Every expected field must
/// be present; values are stringified (lists joined with commas).
std::map<std::string, std::string> parse_structured_output(
    const std::string& text, const std::vector<std::string>& fields);

/// SHA-256 hex digest of a byte string (shared by caches and config hashes).
std::string sha256_hex(std::string_view bytes);

}  // namespace pcir::llm
