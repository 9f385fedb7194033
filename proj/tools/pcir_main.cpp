#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcir/cli.hpp"
#include "pcir/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"personalized conversational retrieval experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    std::uint64_t seed = 0;
    auto* seed_option =
        app.add_option("--seed", seed, "override the seed recorded in the config");

    auto* stats = app.add_subcommand("stats", "dataset statistics table");
    auto* index = app.add_subcommand("index", "build the sparse index");
    auto* embed = app.add_subcommand("embed", "build the dense vector store");

    auto* annotate = app.add_subcommand("annotate", "produce a PTKB annotation set");
    std::string source_name;
    annotate->add_option("--source", source_name, "human, automatic or llm")->required();

    auto* reformulate = app.add_subcommand("reformulate", "rewrite every turn");
    std::string strategy_name;
    int shots = 0;
    reformulate->add_option("--strategy", strategy_name,
                            "none, all, human, automatic, llm, str or sar")
        ->required();
    reformulate->add_option("--shots", shots, "in-context demonstrations per prompt")
        ->check(CLI::NonNegativeNumber);

    auto* retrieve = app.add_subcommand("retrieve", "turn reformulations into a run file");
    std::string reformulations_path;
    std::string retriever_name;
    retrieve->add_option("--input", reformulations_path, "reformulations file")->required();
    retrieve->add_option("--retriever", retriever_name, "sparse or dense")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score run files against the qrels");
    std::vector<std::string> run_paths;
    bool subset = false;
    std::string baseline;
    evaluate->add_option("--run", run_paths, "run file (repeatable)")->required();
    evaluate->add_flag("--subset", subset, "restrict scoring to the needs-PTKB subset");
    evaluate->add_option("--baseline", baseline, "comparison baseline tag");

    auto* pipeline = app.add_subcommand("pipeline", "run the full experiment grid");

    CLI11_PARSE(app, argc, argv);

    try {
        auto config = pcir::ExperimentConfig::load(config_path);
        if (*seed_option) config.seed = seed;
        config.validate();

        if (stats->parsed()) {
            pcir::cli::cmd_stats(config, std::cout);
        } else if (index->parsed()) {
            pcir::cli::cmd_index(config, std::cout);
        } else if (embed->parsed()) {
            pcir::cli::cmd_embed(config, std::cout);
        } else if (annotate->parsed()) {
            pcir::cli::cmd_annotate(config, pcir::annotation_source_from(source_name),
                                    std::cout);
        } else if (reformulate->parsed()) {
            pcir::cli::cmd_reformulate(config, pcir::reform::strategy_from(strategy_name),
                                       shots, std::cout);
        } else if (retrieve->parsed()) {
            pcir::cli::cmd_retrieve(config, reformulations_path,
                                    pcir::reform::retriever_kind_from(retriever_name),
                                    std::cout);
        } else if (evaluate->parsed()) {
            std::vector<std::filesystem::path> runs(run_paths.begin(), run_paths.end());
            pcir::cli::cmd_evaluate(config, runs, subset, baseline, std::cout);
        } else if (pipeline->parsed()) {
            pcir::cli::cmd_pipeline(config, std::cout);
        }
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << '\n';
        return 1;
    }
    return 0;
}
