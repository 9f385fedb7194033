#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pcir/config.hpp"
#include "pcir/reformulation.hpp"
#include "pcir/types.hpp"

namespace pcir::cli {

/// Canonical artifact locations under the experiment output directory.
/// Commands address artifacts only through this struct, so file layout is
/// decided in exactly one place.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path stats_file() const { return root / "stats.tsv"; }
    std::filesystem::path index_file() const { return root / "index.bin"; }
    std::filesystem::path vectors_file() const { return root / "vectors.bin"; }

    std::filesystem::path annotations_dir() const { return root / "annotations"; }
    std::filesystem::path annotation_file(AnnotationSource source) const;
    std::filesystem::path llm_notes_file() const;
    std::filesystem::path impact_file() const;
    std::filesystem::path train_annotation_file() const;
    std::filesystem::path train_impact_file() const;

    std::filesystem::path reformulations_dir() const { return root / "reformulations"; }
    std::filesystem::path reformulation_file(reform::Strategy strategy, int shots) const;

    std::filesystem::path runs_dir() const { return root / "runs"; }
    std::filesystem::path run_file(const std::string& tag) const;

    std::filesystem::path reports_dir(bool subset) const;
    std::filesystem::path report_file(const std::string& tag, bool subset) const;
    std::filesystem::path comparison_file(bool subset) const;
    std::filesystem::path plot_file(bool subset) const;
    std::filesystem::path overlap_file(AnnotationSource a, AnnotationSource b) const;
};

/// "<strategy>-<shots>-<retriever>", the join key of comparison tables.
std::string run_tag(reform::Strategy strategy, int shots, reform::RetrieverKind kind);

/// "config=<hash> seed=<seed>" stamped into every artifact; extras append
/// as further space-separated tokens.
std::string artifact_header(const ExperimentConfig& config, const std::string& extras = "");

/// True when the artifact exists and embeds exactly this header, meaning it
/// was produced by the same effective config and can be kept as-is.
bool artifact_current(const std::filesystem::path& path, const std::string& header);

// Commands assume a validated config (main validates once after the --seed
// override). Each prints one "wrote <path>" or "kept <path>" line per
// artifact to out; expensive artifacts are skipped when already current.

void cmd_stats(const ExperimentConfig& config, std::ostream& out);
void cmd_index(const ExperimentConfig& config, std::ostream& out);
void cmd_embed(const ExperimentConfig& config, std::ostream& out);
void cmd_annotate(const ExperimentConfig& config, AnnotationSource source, std::ostream& out);
void cmd_reformulate(const ExperimentConfig& config, reform::Strategy strategy, int shots,
                     std::ostream& out);
void cmd_retrieve(const ExperimentConfig& config, const std::filesystem::path& reformulations,
                  reform::RetrieverKind kind, std::ostream& out);

/// Evaluates the given run files; with subset set, restricts scoring to the
/// needs-PTKB subset derived from the automatic annotations. An empty
/// baseline defaults to the first run's tag.
void cmd_evaluate(const ExperimentConfig& config,
                  const std::vector<std::filesystem::path>& runs, bool subset,
                  const std::string& baseline, std::ostream& out);

/// Runs the whole grid: stats, index, embeddings (for dense runs), every
/// needed annotation source plus agreement reports, reformulations and runs
/// for strategies x shots x retrievers, then whole-set (and optionally
/// subset) evaluation. Resumable: artifacts already current are kept.
void cmd_pipeline(const ExperimentConfig& config, std::ostream& out);

}  // namespace pcir::cli
