#include "pcir/embedding.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "pcir/errors.hpp"

namespace pcir::llm {

namespace {

using nlohmann::json;

}  // namespace

EmbeddingClient::EmbeddingClient(EmbeddingConfig config, HttpTransport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (config_.cache_dir.empty()) return;
    std::filesystem::create_directories(config_.cache_dir);
    cache_file_ = config_.cache_dir / "embed_cache.jsonl";
    if (!std::filesystem::exists(cache_file_)) return;

    std::ifstream in(cache_file_);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("key") || !record.contains("vector")) {
            throw ParseError("corrupt cache record at " + cache_file_.string() + ":" +
                             std::to_string(line_number));
        }
        auto vector = record.at("vector").get<std::vector<double>>();
        if (dimension_ == 0) {
            dimension_ = vector.size();
        } else if (vector.size() != dimension_) {
            throw ValidationError("dimension drift in cache " + cache_file_.string() + ":" +
                                  std::to_string(line_number));
        }
        cache_[record.at("key").get<std::string>()] = std::move(vector);
    }
}

std::string EmbeddingClient::text_key(const std::string& text) const {
    return sha256_hex(config_.model + '\n' + text);
}

void EmbeddingClient::store(const std::string& key, const std::vector<double>& vector) {
    cache_[key] = vector;
    if (cache_file_.empty()) return;
    json record{{"key", key}, {"vector", vector}};
    std::ofstream out(cache_file_, std::ios::app);
    if (!out) throw IoError("cannot append to cache " + cache_file_.string());
    out << record.dump() << '\n';
}

std::vector<std::vector<double>> EmbeddingClient::call_endpoint(
    const std::vector<std::string>& texts) {
    json body{{"model", config_.model}, {"input", texts}};
    std::vector<std::pair<std::string, std::string>> headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key) {
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }

    int last_status = 0;
    double backoff_ms = config_.backoff_initial_ms;
    const int attempts = config_.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff_ms));
            backoff_ms *= 2.0;
        }
        network_calls_.fetch_add(1);
        HttpResponse response = transport_(config_.endpoint, body.dump(), headers);
        last_status = response.status;
        if (response.status != 200) continue;
        json parsed = json::parse(response.body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("data") ||
            parsed.at("data").size() != texts.size()) {
            continue;
        }
        std::vector<std::vector<double>> vectors;
        vectors.reserve(texts.size());
        bool ok = true;
        for (const auto& item : parsed.at("data")) {
            if (!item.contains("embedding")) {
                ok = false;
                break;
            }
            vectors.push_back(item.at("embedding").get<std::vector<double>>());
        }
        if (ok) return vectors;
    }
    throw GatewayError("embedding endpoint failed after " + std::to_string(attempts) +
                           " attempts (last status " + std::to_string(last_status) + ")",
                       last_status);
}

std::vector<std::vector<double>> EmbeddingClient::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> result(texts.size());
    std::vector<std::size_t> missing;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = cache_.find(text_key(texts[i]));
            if (it != cache_.end()) {
                result[i] = it->second;
            } else {
                missing.push_back(i);
            }
        }
    }

    for (std::size_t begin = 0; begin < missing.size(); begin += config_.batch_size) {
        const std::size_t end = std::min(begin + config_.batch_size, missing.size());
        std::vector<std::string> batch;
        for (std::size_t i = begin; i < end; ++i) batch.push_back(texts[missing[i]]);
        auto vectors = call_endpoint(batch);

        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (dimension_ == 0) {
                dimension_ = vectors[i].size();
            } else if (vectors[i].size() != dimension_) {
                throw GatewayError(
                    "embedding dimension drift: expected " + std::to_string(dimension_) +
                        ", endpoint returned " + std::to_string(vectors[i].size()),
                    200);
            }
            const std::string key = text_key(batch[i]);
            if (cache_.find(key) == cache_.end()) store(key, vectors[i]);
            result[missing[begin + i]] = std::move(vectors[i]);
        }
    }
    return result;
}

}  // namespace pcir::llm
