#include "pcir/chat_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

#include "pcir/errors.hpp"

namespace pcir::llm {

namespace {

using nlohmann::json;

json canonical_request(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& message : request.messages) {
        messages.push_back({{"role", message.role}, {"content", message.content}});
    }
    return json{{"model", request.model},
                {"temperature", request.temperature},
                {"messages", messages}};
}

void validate(const ChatRequest& request) {
    if (request.messages.empty()) {
        throw ValidationError("chat request needs at least one message");
    }
    if (request.temperature < 0.0) {
        throw ValidationError("chat temperature must be non-negative");
    }
}

std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string stringify(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_null()) return "";
    if (value.is_array()) {
        std::string joined;
        for (const auto& item : value) {
            if (!joined.empty()) joined += ",";
            joined += stringify(item);
        }
        return joined;
    }
    return value.dump();
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

HttpTransport default_http_transport() {
    return [](const std::string& url, const std::string& body,
              const std::vector<std::pair<std::string, std::string>>& headers) -> HttpResponse {
        auto path_start = url.find('/', url.find("://") == std::string::npos
                                            ? 0
                                            : url.find("://") + 3);
        std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(base);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(120, 0);
        httplib::Headers request_headers;
        for (const auto& [key, value] : headers) request_headers.emplace(key, value);
        auto result = client.Post(path, request_headers, body, "application/json");
        if (!result) return {0, "transport error: " + httplib::to_string(result.error())};
        return {result->status, result->body};
    };
}

std::string ChatClient::cache_key(const ChatRequest& request) {
    return sha256_hex(canonical_request(request).dump());
}

ChatClient::ChatClient(GatewayConfig config, HttpTransport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (config_.cache_dir.empty()) return;
    std::filesystem::create_directories(config_.cache_dir);
    cache_file_ = config_.cache_dir / "chat_cache.jsonl";
    if (!std::filesystem::exists(cache_file_)) return;

    std::ifstream in(cache_file_);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("key") || !record.contains("response")) {
            throw ParseError("corrupt cache record at " + cache_file_.string() + ":" +
                             std::to_string(line_number));
        }
        cache_[record.at("key").get<std::string>()] =
            record.at("response").get<std::string>();
    }
}

std::string ChatClient::call_endpoint(const ChatRequest& request) {
    json body = canonical_request(request);
    body["max_tokens"] = request.max_tokens;
    std::vector<std::pair<std::string, std::string>> headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key) {
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }

    int last_status = 0;
    std::string last_detail;
    double backoff_ms = config_.backoff_initial_ms;
    const int attempts = config_.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::duration<double, std::milli>(backoff_ms));
            backoff_ms *= 2.0;
        }
        network_calls_.fetch_add(1);
        HttpResponse response = transport_(config_.endpoint, body.dump(), headers);
        last_status = response.status;
        if (response.status != 200) {
            last_detail = response.body;
            continue;
        }
        json parsed = json::parse(response.body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") ||
            parsed.at("choices").empty() ||
            !parsed.at("choices")[0].contains("message")) {
            last_detail = "unparseable completion body";
            continue;
        }
        return parsed.at("choices")[0].at("message").value("content", std::string{});
    }
    throw GatewayError("chat endpoint failed after " + std::to_string(attempts) +
                           " attempts (last status " + std::to_string(last_status) + ")" +
                           (last_detail.empty() ? "" : ": " + last_detail.substr(0, 200)),
                       last_status);
}

void ChatClient::store(const std::string& key, const ChatRequest& request,
                       const std::string& text) {
    cache_[key] = text;
    if (cache_file_.empty()) return;
    json record{{"key", key},
                {"request", canonical_request(request).dump()},
                {"response", text},
                {"time", unix_now()}};
    std::ofstream out(cache_file_, std::ios::app);
    if (!out) throw IoError("cannot append to cache " + cache_file_.string());
    out << record.dump() << '\n';
}

std::string ChatClient::chat(const ChatRequest& request) {
    validate(request);
    const std::string key = cache_key(request);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    std::string text = call_endpoint(request);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (cache_.find(key) == cache_.end()) store(key, request, text);
    }
    return text;
}

std::map<std::string, std::string> ChatClient::chat_structured(
    const ChatRequest& request, const std::vector<std::string>& fields, int retry_budget) {
    ChatRequest current = request;
    for (int attempt = 0;; ++attempt) {
        std::string reply = chat(current);
        try {
            return parse_structured_output(reply, fields);
        } catch (const ParseFailure&) {
            if (attempt >= retry_budget) throw;
            std::string field_list;
            for (const auto& field : fields) {
                if (!field_list.empty()) field_list += ", ";
                field_list += '"' + field + '"';
            }
            current.messages.push_back({"assistant", reply});
            current.messages.push_back(
                {"user", "Your previous answer was not parseable. Reply with only a JSON "
                         "object containing exactly the fields " +
                             field_list + "."});
        }
    }
}

std::map<std::string, std::string> parse_structured_output(
    const std::string& text, const std::vector<std::string>& fields) {
    if (fields.empty()) throw ValidationError("expected_fields must be non-empty");

    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        // Find the balanced closing brace, honoring JSON string syntax.
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t end = std::string::npos;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    end = i;
                    break;
                }
            }
        }
        if (end == std::string::npos) continue;
        json candidate = json::parse(text.substr(start, end - start + 1), nullptr, false);
        if (candidate.is_discarded() || !candidate.is_object()) continue;
        bool complete = true;
        for (const auto& field : fields) {
            if (!candidate.contains(field)) {
                complete = false;
                break;
            }
        }
        if (!complete) continue;
        std::map<std::string, std::string> values;
        for (const auto& field : fields) values[field] = stringify(candidate.at(field));
        return values;
    }

    std::string field_list;
    for (const auto& field : fields) {
        if (!field_list.empty()) field_list += ", ";
        field_list += field;
    }
    throw ParseFailure("no structured block with fields [" + field_list + "] in model output");
}

}  // namespace pcir::llm
