#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcir/chat_client.hpp"
#include "pcir/evaluation.hpp"
#include "pcir/prompt_template.hpp"
#include "pcir/reformulation.hpp"
#include "pcir/types.hpp"

namespace pcir::annot {

/// Audit trail of one sentence's retrieval impact test. A turn with an empty
/// PTKB gets a single baseline-only record with an empty key.
struct ImpactRecord {
    std::string turn_id;
    std::string ptkb_key;
    double baseline_metric = 0.0;
    double with_sentence_metric = 0.0;
    bool improved = false;
};

/// Agreement between two annotation sets over a fixed turn list. A turn
/// missing from a set counts as an empty selection. exact_match_turns,
/// agreed_keys and union_keys are symmetric in (a, b); the no-PTKB counts
/// swap with the arguments.
struct OverlapReport {
    std::string source_a;
    std::string source_b;
    std::size_t turn_count = 0;
    std::size_t exact_match_turns = 0;
    std::size_t agreed_keys = 0;  // sum over turns of |selection_a ∩ selection_b|
    std::size_t union_keys = 0;   // sum over turns of |selection_a ∪ selection_b|
    std::size_t no_ptkb_a = 0;    // turns source a judged to need no sentence
    std::size_t no_ptkb_b = 0;
};

/// Selections straight from the dataset's per-turn PTKB judgments. Turns
/// without a judgment get no entry; a judged turn with no relevant sentence
/// gets an empty selection. A judged key absent from the conversation's PTKB
/// is a validation error.
AnnotationSet ingest_human(const std::vector<Conversation>& conversations);

struct LlmSelection {
    std::set<std::string> keys;
    std::string note;  // dropped keys or fallback reason; empty when clean
    bool parse_failed = false;
};

struct AnnotatorConfig {
    std::filesystem::path template_dir;
    int parse_retries = 1;
    bool responses_in_history = true;
};

/// Prompts the chat model to pick relevant PTKB sentences per turn. Keys the
/// model invents are dropped with a note; an unparseable reply after the
/// re-ask budget yields an empty selection flagged as a parse failure.
class LlmAnnotator {
public:
    LlmAnnotator(llm::ChatClient& client, AnnotatorConfig config);

    LlmSelection annotate(const ConversationTurn& turn,
                          const std::vector<ConversationTurn>& history, const Ptkb& ptkb);

    /// Runs annotate over every turn of every conversation.
    AnnotationSet annotate_all(const std::vector<Conversation>& conversations);

private:
    llm::ChatClient& client_;
    AnnotatorConfig config_;
    llm::PromptTemplate template_;
};

/// Reformulates a turn with exactly the given sentence subset available.
using ReformulateFn = std::function<reform::ReformulatedQuery(
    const ConversationTurn& turn, const std::vector<ConversationTurn>& history, const Ptkb& ptkb,
    const std::set<std::string>& subset)>;

/// Ranked retrieval for a query string, best first, at most depth results.
using RetrieveFn =
    std::function<std::vector<ScoredDoc>(const std::string& query, std::size_t depth)>;

/// Scores a ranking against a turn's graded judgments.
using MetricFn =
    std::function<double(const std::vector<ScoredDoc>&, const std::map<std::string, int>&)>;

/// Named metric over a ranking: "ndcg@k", "mrr" or "map" (relevance
/// threshold 1 for the latter two; undefined map scores 0).
MetricFn make_metric(const std::string& name);

struct AutomaticResult {
    std::set<std::string> keys;
    std::vector<ImpactRecord> records;
};

/// Retrieval-impact annotation for one turn: score a no-PTKB reformulation,
/// then each sentence in isolation; a sentence is selected iff it raises the
/// metric by more than epsilon. Returns nullopt when the turn has no
/// relevance judgments, so callers can skip it without treating it as a
/// failure.
std::optional<AutomaticResult> automatic_annotate(
    const ConversationTurn& turn, const std::vector<ConversationTurn>& history, const Ptkb& ptkb,
    const ReformulateFn& reformulate, const RetrieveFn& retrieve, const Qrels& qrels,
    const MetricFn& metric, std::size_t depth = 10, double epsilon = 1e-9);

/// automatic_annotate over every assessed turn, merged in turn_id order.
std::pair<AnnotationSet, std::vector<ImpactRecord>> automatic_annotate_all(
    const std::vector<Conversation>& conversations, const ReformulateFn& reformulate,
    const RetrieveFn& retrieve, const Qrels& qrels, const MetricFn& metric,
    std::size_t depth = 10, double epsilon = 1e-9);

OverlapReport overlap_stats(const AnnotationSet& a, const AnnotationSet& b,
                            const std::vector<std::string>& turns);

/// Turns for which the automatic annotation selected at least one sentence.
std::set<std::string> needs_ptkb_subset(const AnnotationSet& automatic,
                                        const std::vector<std::string>& assessed_turns);

/// "turn_id<TAB>key<TAB>baseline<TAB>with_sentence<TAB>improved" lines.
std::string render_impact_audit(const std::vector<ImpactRecord>& records,
                                const std::string& header = "");

/// "name<TAB>value" lines mirroring the OverlapReport fields.
std::string render_overlap(const OverlapReport& report);

}  // namespace pcir::annot
