#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcir/chat_client.hpp"

namespace pcir::llm {

struct EmbeddingConfig {
    std::string endpoint;  // e.g. http://localhost:8089/v1/embeddings
    std::string model = "text-embedding-mock";
    int max_retries = 3;
    double backoff_initial_ms = 200.0;
    std::string api_key_env = "PCIR_API_KEY";
    std::filesystem::path cache_dir;  // empty disables persistence
    std::size_t batch_size = 64;
};

/// Embedding endpoint client with a per-text content-addressed cache.
/// Texts already seen are never re-sent; vectors must keep one dimension
/// across all calls or the client raises a drift error.
class EmbeddingClient {
public:
    explicit EmbeddingClient(EmbeddingConfig config,
                             HttpTransport transport = default_http_transport());

    /// One vector per input text, in input order.
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

    std::size_t network_calls() const { return network_calls_.load(); }
    std::size_t dimension() const { return dimension_; }  // 0 until first vector

private:
    std::string text_key(const std::string& text) const;
    void store(const std::string& key, const std::vector<double>& vector);
    std::vector<std::vector<double>> call_endpoint(const std::vector<std::string>& texts);

    EmbeddingConfig config_;
    HttpTransport transport_;
    std::filesystem::path cache_file_;
    std::unordered_map<std::string, std::vector<double>> cache_;
    std::size_t dimension_ = 0;
    std::mutex mutex_;
    std::atomic<std::size_t> network_calls_{0};
};

}  // namespace pcir::llm
