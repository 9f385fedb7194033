#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "pcir/config.hpp"
#include "pcir/errors.hpp"

using namespace pcir;
using nlohmann::json;
using pcir::testing::TempDir;
using pcir::testing::fixture_path;
using pcir::testing::template_dir;

namespace {

json valid_config(const TempDir& dir) {
    json document;
    document["paths"]["topics"] = fixture_path("pipeline/topics.json").string();
    document["paths"]["qrels"] = fixture_path("pipeline/qrels.txt").string();
    document["paths"]["collection"] = fixture_path("pipeline/collection.tsv").string();
    document["paths"]["template_dir"] = template_dir().string();
    document["paths"]["cache_dir"] = (dir / "cache").string();
    document["paths"]["output_dir"] = (dir / "out").string();
    document["gateway"]["endpoint"] = "http://127.0.0.1:9/v1/chat/completions";
    document["grid"]["strategies"] = {"none"};
    document["grid"]["shots"] = {0};
    document["grid"]["retrievers"] = {"sparse"};
    return document;
}

ExperimentConfig parse(const json& document) {
    return ExperimentConfig::parse(document.dump(), "/base");
}

}  // namespace

TEST_CASE("defaults and explicit settings") {
    SUBCASE("empty document keeps defaults") {
        auto config = ExperimentConfig::parse("{}", "/base");
        CHECK(config.bm25.k1 == 0.9);
        CHECK(config.bm25.b == 0.4);
        CHECK(config.stemming);
        CHECK(config.depth == 100);
        CHECK(config.model == "gpt-3.5-turbo-16k");
        CHECK(config.temperature == 0.0);
        CHECK(config.max_retries == 3);
        CHECK(config.api_key_env == "PCIR_API_KEY");
        CHECK(config.parallelism == 1);
        CHECK(config.strategies == std::vector{reform::Strategy::None});
        CHECK(config.shots == std::vector{0, 1, 3, 5});
        CHECK(config.retrievers == std::vector{reform::RetrieverKind::Sparse});
        CHECK(config.metrics.relevance_threshold == 1);
        CHECK(config.metrics.ndcg_ks == std::vector{3, 5});
        CHECK(config.impact_metric == "ndcg@3");
        CHECK(config.impact_depth == 10);
        CHECK(config.evaluate_subset);
        CHECK(config.responses_in_history);
        CHECK(config.seed == 13);
    }

    SUBCASE("every section parsed") {
        json document = json::parse(R"({
            "paths": {"topics": "t.json", "qrels": "q.txt", "collection": "c.tsv",
                      "template_dir": "tpl", "vectors": "v.tsv",
                      "train_topics": "tt.json", "train_qrels": "tq.txt",
                      "cache_dir": "cache", "output_dir": "out"},
            "retriever": {"k1": 1.2, "b": 0.75, "stemming": false, "depth": 50},
            "gateway": {"endpoint": "http://x/chat", "model": "m", "temperature": 0.5,
                        "max_retries": 1, "backoff_initial_ms": 10.0,
                        "api_key_env": "KEY", "parse_retries": 2, "parallelism": 4,
                        "embedding_endpoint": "http://x/emb", "embedding_model": "e"},
            "grid": {"strategies": ["none", "all", "str", "sar"], "shots": [0, 3],
                     "retrievers": ["sparse", "dense"]},
            "metrics": {"relevance_threshold": 2, "ndcg_ks": [3, 10],
                        "impact_metric": "mrr", "impact_depth": 5,
                        "evaluate_subset": false},
            "history": {"include_responses": false},
            "seed": 7
        })");
        auto config = parse(document);
        CHECK(config.topics == std::filesystem::path("/base/t.json"));
        CHECK(config.vectors == std::filesystem::path("/base/v.tsv"));
        CHECK(config.train_topics == std::filesystem::path("/base/tt.json"));
        CHECK(config.output_dir == std::filesystem::path("/base/out"));
        CHECK(config.bm25.k1 == 1.2);
        CHECK(config.bm25.b == 0.75);
        CHECK_FALSE(config.stemming);
        CHECK(config.depth == 50);
        CHECK(config.endpoint == "http://x/chat");
        CHECK(config.temperature == 0.5);
        CHECK(config.parse_retries == 2);
        CHECK(config.parallelism == 4);
        CHECK(config.embedding_endpoint == "http://x/emb");
        CHECK(config.embedding_model == "e");
        CHECK(config.strategies ==
              std::vector{reform::Strategy::None, reform::Strategy::All, reform::Strategy::Str,
                          reform::Strategy::Sar});
        CHECK(config.shots == std::vector{0, 3});
        CHECK(config.retrievers ==
              std::vector{reform::RetrieverKind::Sparse, reform::RetrieverKind::Dense});
        CHECK(config.metrics.relevance_threshold == 2);
        CHECK(config.metrics.ndcg_ks == std::vector{3, 10});
        CHECK(config.impact_metric == "mrr");
        CHECK_FALSE(config.evaluate_subset);
        CHECK_FALSE(config.responses_in_history);
        CHECK(config.seed == 7);
    }

    SUBCASE("absolute paths are kept as-is") {
        json document;
        document["paths"]["topics"] = "/abs/topics.json";
        CHECK(parse(document).topics == std::filesystem::path("/abs/topics.json"));
    }
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(ExperimentConfig::parse(R"({"pathz": {}})", "/b"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse(R"({"paths": {"topicz": "x"}})", "/b"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse(R"({"grid": {"shotz": [0]}})", "/b"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("[]", "/b"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("not json", "/b"), ConfigError);
    // a typo'd key must name itself in the message
    try {
        ExperimentConfig::parse(R"({"retriever": {"K1": 1.0}})", "/b");
        FAIL("expected ConfigError");
    } catch (const ConfigError& error) {
        CHECK(std::string(error.what()).find("retriever.K1") != std::string::npos);
    }
    // wrong value types surface as ConfigError too
    CHECK_THROWS_AS(ExperimentConfig::parse(R"({"retriever": {"k1": "fast"}})", "/b"),
                    ConfigError);
}

TEST_CASE("validation") {
    TempDir dir("config_validate");

    SUBCASE("valid baseline passes") { CHECK_NOTHROW(parse(valid_config(dir)).validate()); }

    SUBCASE("missing input file") {
        json document = valid_config(dir);
        document["paths"]["topics"] = (dir / "absent.json").string();
        try {
            parse(document).validate();
            FAIL("expected ConfigError");
        } catch (const ConfigError& error) {
            CHECK(std::string(error.what()).find("paths.topics") != std::string::npos);
        }
    }

    SUBCASE("output dir required") {
        json document = valid_config(dir);
        document["paths"].erase("output_dir");
        CHECK_THROWS_AS(parse(document).validate(), ConfigError);
    }

    SUBCASE("grid must be non-empty and duplicate-free") {
        json document = valid_config(dir);
        document["grid"]["strategies"] = json::array();
        CHECK_THROWS_AS(parse(document).validate(), ConfigError);
        document = valid_config(dir);
        document["grid"]["strategies"] = {"none", "none"};
        CHECK_THROWS_AS(parse(document).validate(), ConfigError);
        document = valid_config(dir);
        document["grid"]["shots"] = {0, -1};
        CHECK_THROWS_AS(parse(document).validate(), ConfigError);
    }

    SUBCASE("few-shot needs the training split") {
        json document = valid_config(dir);
        document["grid"]["shots"] = {0, 1};
        CHECK_THROWS_AS(parse(document).validate(), ConfigError);
        document["paths"]["train_topics"] = fixture_path("pipeline/train_topics.json").string();
        document["paths"]["train_qrels"] = fixture_path("pipeline/train_qrels.txt").string();
        CHECK_NOTHROW(parse(document).validate());
    }

    SUBCASE("dense retrieval needs an embedding endpoint") {
        json document = valid_config(dir);
        document["grid"]["retrievers"] = {"sparse", "dense"};
        CHECK_THROWS_AS(parse(document).validate(), ConfigError);
        document["gateway"]["embedding_endpoint"] = "http://127.0.0.1:9/v1/embeddings";
        CHECK_NOTHROW(parse(document).validate());
    }

    SUBCASE("value ranges") {
        auto broken = [&](auto mutate) {
            json document = valid_config(dir);
            mutate(document);
            CHECK_THROWS_AS(parse(document).validate(), ConfigError);
        };
        broken([](json& j) { j["retriever"]["k1"] = 0.0; });
        broken([](json& j) { j["retriever"]["b"] = 1.5; });
        broken([](json& j) { j["retriever"]["depth"] = 0; });
        broken([](json& j) { j["gateway"]["parallelism"] = 0; });
        broken([](json& j) { j["metrics"]["ndcg_ks"] = json::array(); });
        broken([](json& j) { j["metrics"]["ndcg_ks"] = {3, 0}; });
        broken([](json& j) { j["metrics"]["relevance_threshold"] = 0; });
        broken([](json& j) { j["metrics"]["impact_metric"] = "bleu"; });
        broken([](json& j) { j["metrics"]["impact_depth"] = 0; });
    }
}

TEST_CASE("canonical hash") {
    TempDir dir("config_hash");
    const json document = valid_config(dir);
    auto config = parse(document);

    SUBCASE("stable across reparses and formatting") {
        CHECK(config.hash() == parse(document).hash());
        // same settings, different JSON text layout
        auto reordered = json::parse(document.dump());
        CHECK(parse(reordered).hash() == config.hash());
        CHECK(config.hash().size() == 64);
    }

    SUBCASE("any effective setting changes the hash") {
        auto changed = config;
        changed.seed = 14;
        CHECK(changed.hash() != config.hash());
        changed = config;
        changed.bm25.b = 0.5;
        CHECK(changed.hash() != config.hash());
        changed = config;
        changed.strategies.push_back(reform::Strategy::Sar);
        CHECK(changed.hash() != config.hash());
    }

    SUBCASE("canonical text is key-sorted JSON") {
        auto canonical = nlohmann::json::parse(config.canonical());
        CHECK(canonical.at("seed") == 13);
        CHECK(canonical.at("grid").at("strategies") == json{"none"});
        CHECK(config.canonical() == canonical.dump());
    }
}

TEST_CASE("sub-config builders") {
    TempDir dir("config_sub");
    auto config = parse(valid_config(dir));
    config.parse_retries = 2;

    auto gateway = config.gateway_config();
    CHECK(gateway.endpoint == config.endpoint);
    CHECK(gateway.model == config.model);
    CHECK(gateway.max_retries == config.max_retries);
    CHECK(gateway.api_key_env == config.api_key_env);
    CHECK(gateway.cache_dir == config.cache_dir);

    auto embedding = config.embedding_config();
    CHECK(embedding.endpoint == config.embedding_endpoint);
    CHECK(embedding.model == config.embedding_model);
    CHECK(embedding.cache_dir == config.cache_dir);

    auto reformulator = config.reformulator_config();
    CHECK(reformulator.template_dir == config.template_dir);
    CHECK(reformulator.parse_retries == 2);
    CHECK(reformulator.responses_in_history == config.responses_in_history);

    auto annotator = config.annotator_config();
    CHECK(annotator.template_dir == config.template_dir);
    CHECK(annotator.parse_retries == 2);
}
