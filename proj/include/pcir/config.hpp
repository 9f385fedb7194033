#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pcir/annotation.hpp"
#include "pcir/chat_client.hpp"
#include "pcir/embedding.hpp"
#include "pcir/evaluation.hpp"
#include "pcir/reformulation.hpp"
#include "pcir/sparse.hpp"

namespace pcir {

/// Everything one experiment needs, read from a single JSON file. Relative
/// paths resolve against the config file's directory. The SHA-256 over the
/// canonical rendering (after any --seed override) stamps every artifact,
/// so artifacts with equal hashes were produced by identical settings.
struct ExperimentConfig {
    // inputs
    std::filesystem::path topics;
    std::filesystem::path qrels;
    std::filesystem::path collection;
    std::filesystem::path template_dir;
    std::filesystem::path vectors;       // document embeddings, needed for dense runs
    std::filesystem::path train_topics;  // training split, needed for k-shot demos
    std::filesystem::path train_qrels;
    // outputs
    std::filesystem::path cache_dir;
    std::filesystem::path output_dir;

    // retriever
    sparse::Bm25Params bm25;
    bool stemming = true;
    std::size_t depth = 100;

    // gateway
    std::string endpoint;
    std::string model = "gpt-3.5-turbo-16k";
    double temperature = 0.0;
    int max_retries = 3;
    double backoff_initial_ms = 200.0;
    std::string api_key_env = "PCIR_API_KEY";
    int parse_retries = 1;
    int parallelism = 1;  // concurrent chat calls during reformulation
    std::string embedding_endpoint;
    std::string embedding_model = "text-embedding-mock";

    // experiment grid
    std::vector<reform::Strategy> strategies{reform::Strategy::None};
    std::vector<int> shots{0, 1, 3, 5};
    std::vector<reform::RetrieverKind> retrievers{reform::RetrieverKind::Sparse};

    // metrics
    eval::MetricConfig metrics;
    std::string impact_metric = "ndcg@3";
    std::size_t impact_depth = 10;
    bool evaluate_subset = true;

    bool responses_in_history = true;
    std::uint64_t seed = 13;

    static ExperimentConfig parse(std::string_view text, const std::filesystem::path& base_dir);
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Structural checks plus existence of every input path the grid needs.
    void validate() const;

    /// Key-sorted JSON rendering of the effective settings.
    std::string canonical() const;
    std::string hash() const;

    llm::GatewayConfig gateway_config() const;
    llm::EmbeddingConfig embedding_config() const;
    reform::ReformulatorConfig reformulator_config() const;
    annot::AnnotatorConfig annotator_config() const;
};

}  // namespace pcir
