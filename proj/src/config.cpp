#include "pcir/config.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "pcir/errors.hpp"
#include "pcir/formats.hpp"

namespace pcir {

namespace {

using nlohmann::json;

/// Rejects keys the section does not know; typos in config files should
/// fail loudly, not silently fall back to defaults.
void check_keys(const json& section, const std::string& name,
                std::initializer_list<const char*> known) {
    for (const auto& [key, value] : section.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }) == known.end()) {
            throw ConfigError("config: unknown key '" + name + "." + key + "'");
        }
    }
}

std::filesystem::path resolve(const json& section, const char* key,
                              const std::filesystem::path& base) {
    if (!section.contains(key)) return {};
    auto raw = section.at(key).get<std::string>();
    if (raw.empty()) return {};
    std::filesystem::path path(raw);
    return path.is_absolute() ? path : base / path;
}

template <typename T>
void read_into(const json& section, const char* key, T& target) {
    if (section.contains(key)) target = section.at(key).get<T>();
}

void require_exists(const std::filesystem::path& path, const std::string& name) {
    if (path.empty()) throw ConfigError("config: paths." + name + " is required");
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config: paths." + name + " does not exist: " + path.string());
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::string_view text,
                                         const std::filesystem::path& base_dir) {
    json document = json::parse(text, nullptr, false);
    if (document.is_discarded() || !document.is_object()) {
        throw ConfigError("config: not a JSON object");
    }
    check_keys(document, "",
               {"paths", "retriever", "gateway", "grid", "metrics", "history", "seed"});

    ExperimentConfig config;
    try {
        if (document.contains("paths")) {
            const auto& paths = document.at("paths");
            check_keys(paths, "paths",
                       {"topics", "qrels", "collection", "template_dir", "vectors",
                        "train_topics", "train_qrels", "cache_dir", "output_dir"});
            config.topics = resolve(paths, "topics", base_dir);
            config.qrels = resolve(paths, "qrels", base_dir);
            config.collection = resolve(paths, "collection", base_dir);
            config.template_dir = resolve(paths, "template_dir", base_dir);
            config.vectors = resolve(paths, "vectors", base_dir);
            config.train_topics = resolve(paths, "train_topics", base_dir);
            config.train_qrels = resolve(paths, "train_qrels", base_dir);
            config.cache_dir = resolve(paths, "cache_dir", base_dir);
            config.output_dir = resolve(paths, "output_dir", base_dir);
        }
        if (document.contains("retriever")) {
            const auto& retriever = document.at("retriever");
            check_keys(retriever, "retriever", {"k1", "b", "stemming", "depth"});
            read_into(retriever, "k1", config.bm25.k1);
            read_into(retriever, "b", config.bm25.b);
            read_into(retriever, "stemming", config.stemming);
            read_into(retriever, "depth", config.depth);
        }
        if (document.contains("gateway")) {
            const auto& gateway = document.at("gateway");
            check_keys(gateway, "gateway",
                       {"endpoint", "model", "temperature", "max_retries", "backoff_initial_ms",
                        "api_key_env", "parse_retries", "parallelism", "embedding_endpoint",
                        "embedding_model"});
            read_into(gateway, "endpoint", config.endpoint);
            read_into(gateway, "model", config.model);
            read_into(gateway, "temperature", config.temperature);
            read_into(gateway, "max_retries", config.max_retries);
            read_into(gateway, "backoff_initial_ms", config.backoff_initial_ms);
            read_into(gateway, "api_key_env", config.api_key_env);
            read_into(gateway, "parse_retries", config.parse_retries);
            read_into(gateway, "parallelism", config.parallelism);
            read_into(gateway, "embedding_endpoint", config.embedding_endpoint);
            read_into(gateway, "embedding_model", config.embedding_model);
        }
        if (document.contains("grid")) {
            const auto& grid = document.at("grid");
            check_keys(grid, "grid", {"strategies", "shots", "retrievers"});
            if (grid.contains("strategies")) {
                config.strategies.clear();
                for (const auto& name : grid.at("strategies")) {
                    config.strategies.push_back(
                        reform::strategy_from(name.get<std::string>()));
                }
            }
            if (grid.contains("shots")) {
                config.shots = grid.at("shots").get<std::vector<int>>();
            }
            if (grid.contains("retrievers")) {
                config.retrievers.clear();
                for (const auto& name : grid.at("retrievers")) {
                    config.retrievers.push_back(
                        reform::retriever_kind_from(name.get<std::string>()));
                }
            }
        }
        if (document.contains("metrics")) {
            const auto& metrics = document.at("metrics");
            check_keys(metrics, "metrics",
                       {"relevance_threshold", "ndcg_ks", "impact_metric", "impact_depth",
                        "evaluate_subset"});
            read_into(metrics, "relevance_threshold", config.metrics.relevance_threshold);
            if (metrics.contains("ndcg_ks")) {
                config.metrics.ndcg_ks = metrics.at("ndcg_ks").get<std::vector<int>>();
            }
            read_into(metrics, "impact_metric", config.impact_metric);
            read_into(metrics, "impact_depth", config.impact_depth);
            read_into(metrics, "evaluate_subset", config.evaluate_subset);
        }
        if (document.contains("history")) {
            const auto& history = document.at("history");
            check_keys(history, "history", {"include_responses"});
            read_into(history, "include_responses", config.responses_in_history);
        }
        if (document.contains("seed")) config.seed = document.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    return parse(read_file(path), path.parent_path());
}

void ExperimentConfig::validate() const {
    require_exists(topics, "topics");
    require_exists(qrels, "qrels");
    require_exists(collection, "collection");
    require_exists(template_dir, "template_dir");
    if (output_dir.empty()) throw ConfigError("config: paths.output_dir is required");

    if (strategies.empty()) throw ConfigError("config: grid.strategies is empty");
    if (shots.empty()) throw ConfigError("config: grid.shots is empty");
    if (retrievers.empty()) throw ConfigError("config: grid.retrievers is empty");
    auto duplicated = [](const auto& values) {
        std::set<std::decay_t<decltype(values.front())>> seen(values.begin(), values.end());
        return seen.size() != values.size();
    };
    if (duplicated(strategies)) throw ConfigError("config: grid.strategies has duplicates");
    if (duplicated(shots)) throw ConfigError("config: grid.shots has duplicates");
    if (duplicated(retrievers)) throw ConfigError("config: grid.retrievers has duplicates");

    for (int k : shots) {
        if (k < 0) throw ConfigError("config: grid.shots must be non-negative");
    }
    bool few_shot = std::any_of(shots.begin(), shots.end(), [](int k) { return k > 0; });
    if (few_shot) {
        require_exists(train_topics, "train_topics");
        require_exists(train_qrels, "train_qrels");
    }
    bool dense = std::find(retrievers.begin(), retrievers.end(),
                           reform::RetrieverKind::Dense) != retrievers.end();
    if (dense && embedding_endpoint.empty()) {
        throw ConfigError("config: gateway.embedding_endpoint is required for dense retrieval");
    }
    if (dense && !vectors.empty()) require_exists(vectors, "vectors");

    if (bm25.k1 <= 0.0) throw ConfigError("config: retriever.k1 must be positive");
    if (bm25.b < 0.0 || bm25.b > 1.0) throw ConfigError("config: retriever.b must be in [0,1]");
    if (depth == 0) throw ConfigError("config: retriever.depth must be at least 1");
    if (max_retries < 0) throw ConfigError("config: gateway.max_retries must be non-negative");
    if (parse_retries < 0) throw ConfigError("config: gateway.parse_retries must be non-negative");
    if (parallelism < 1) throw ConfigError("config: gateway.parallelism must be at least 1");
    if (metrics.relevance_threshold < 1) {
        throw ConfigError("config: metrics.relevance_threshold must be at least 1");
    }
    if (metrics.ndcg_ks.empty()) throw ConfigError("config: metrics.ndcg_ks is empty");
    for (int k : metrics.ndcg_ks) {
        if (k < 1) throw ConfigError("config: metrics.ndcg_ks entries must be at least 1");
    }
    try {
        annot::make_metric(impact_metric);
    } catch (const std::exception& error) {
        throw ConfigError("config: metrics.impact_metric: " + std::string(error.what()));
    }
    if (impact_depth == 0) throw ConfigError("config: metrics.impact_depth must be at least 1");
}

std::string ExperimentConfig::canonical() const {
    json document;  // std::map-backed: keys render sorted
    document["paths"]["topics"] = topics.string();
    document["paths"]["qrels"] = qrels.string();
    document["paths"]["collection"] = collection.string();
    document["paths"]["template_dir"] = template_dir.string();
    document["paths"]["vectors"] = vectors.string();
    document["paths"]["train_topics"] = train_topics.string();
    document["paths"]["train_qrels"] = train_qrels.string();
    document["paths"]["cache_dir"] = cache_dir.string();
    document["paths"]["output_dir"] = output_dir.string();
    document["retriever"]["k1"] = bm25.k1;
    document["retriever"]["b"] = bm25.b;
    document["retriever"]["stemming"] = stemming;
    document["retriever"]["depth"] = depth;
    document["gateway"]["endpoint"] = endpoint;
    document["gateway"]["model"] = model;
    document["gateway"]["temperature"] = temperature;
    document["gateway"]["max_retries"] = max_retries;
    document["gateway"]["backoff_initial_ms"] = backoff_initial_ms;
    document["gateway"]["api_key_env"] = api_key_env;
    document["gateway"]["parse_retries"] = parse_retries;
    document["gateway"]["parallelism"] = parallelism;
    document["gateway"]["embedding_endpoint"] = embedding_endpoint;
    document["gateway"]["embedding_model"] = embedding_model;
    for (auto strategy : strategies) {
        document["grid"]["strategies"].push_back(reform::to_string(strategy));
    }
    document["grid"]["shots"] = shots;
    for (auto kind : retrievers) {
        document["grid"]["retrievers"].push_back(reform::to_string(kind));
    }
    document["metrics"]["relevance_threshold"] = metrics.relevance_threshold;
    document["metrics"]["ndcg_ks"] = metrics.ndcg_ks;
    document["metrics"]["impact_metric"] = impact_metric;
    document["metrics"]["impact_depth"] = impact_depth;
    document["metrics"]["evaluate_subset"] = evaluate_subset;
    document["history"]["include_responses"] = responses_in_history;
    document["seed"] = seed;
    return document.dump();
}

std::string ExperimentConfig::hash() const { return llm::sha256_hex(canonical()); }

llm::GatewayConfig ExperimentConfig::gateway_config() const {
    llm::GatewayConfig gateway;
    gateway.endpoint = endpoint;
    gateway.model = model;
    gateway.temperature = temperature;
    gateway.max_retries = max_retries;
    gateway.backoff_initial_ms = backoff_initial_ms;
    gateway.api_key_env = api_key_env;
    gateway.cache_dir = cache_dir;
    return gateway;
}

llm::EmbeddingConfig ExperimentConfig::embedding_config() const {
    llm::EmbeddingConfig embedding;
    embedding.endpoint = embedding_endpoint;
    embedding.model = embedding_model;
    embedding.max_retries = max_retries;
    embedding.backoff_initial_ms = backoff_initial_ms;
    embedding.api_key_env = api_key_env;
    embedding.cache_dir = cache_dir;
    return embedding;
}

reform::ReformulatorConfig ExperimentConfig::reformulator_config() const {
    reform::ReformulatorConfig reformulator;
    reformulator.template_dir = template_dir;
    reformulator.parse_retries = parse_retries;
    reformulator.responses_in_history = responses_in_history;
    return reformulator;
}

annot::AnnotatorConfig ExperimentConfig::annotator_config() const {
    annot::AnnotatorConfig annotator;
    annotator.template_dir = template_dir;
    annotator.parse_retries = parse_retries;
    annotator.responses_in_history = responses_in_history;
    return annotator;
}

}  // namespace pcir
