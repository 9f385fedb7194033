#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcir/chat_client.hpp"
#include "pcir/prompt_template.hpp"
#include "pcir/types.hpp"

namespace pcir::reform {

/// How the PTKB enters query reformulation. The first five provide a chosen
/// sentence subset up front; Str asks for a hypothetical response first and
/// rewrites from it; Sar lets the model select and rewrite in one call.
enum class Strategy { None, All, Human, Automatic, Llm, Str, Sar };

std::string to_string(Strategy strategy);
Strategy strategy_from(const std::string& name);

/// Strategies whose sentence subset comes from an annotation set.
bool uses_annotation(Strategy strategy);
AnnotationSource annotation_source_for(Strategy strategy);

enum class RetrieverKind { Sparse, Dense };

std::string to_string(RetrieverKind kind);
RetrieverKind retriever_kind_from(const std::string& name);

/// Model output for one turn. flags records degraded paths (parse fallbacks,
/// dropped selection keys); an empty list means the clean path was taken.
struct ReformulatedQuery {
    std::string turn_id;
    std::string rewrite;
    std::string response;
    std::optional<std::set<std::string>> selected_keys;
    Strategy strategy = Strategy::None;
    int shots = 0;
    std::vector<std::string> flags;
};

/// One in-context example: a rendered conversation excerpt, the keys the
/// impact annotation selected for its final turn, and the dataset's resolved
/// utterance as the gold rewrite.
struct Demonstration {
    std::string excerpt;
    std::set<std::string> selected_keys;
    std::string gold_rewrite;
};

/// Samples k demonstrations uniformly without replacement from the turns of
/// the training conversations that carry an annotation entry. Deterministic
/// for a fixed seed; k larger than the annotated pool is an error.
std::vector<Demonstration> build_demonstrations(const std::vector<Conversation>& train_conversations,
                                                const AnnotationSet& train_annotations,
                                                std::size_t k, std::uint64_t seed);

/// "- <key>: <text>" per sentence, or "(none)" for an empty list.
std::string render_ptkb(const Ptkb& ptkb, const std::set<std::string>& keys);
std::string render_ptkb(const Ptkb& ptkb);

/// "Q_i: ..." lines, with "A_i: ..." after each turn that has a response
/// when include_responses is set; "(none)" for an empty history.
std::string render_history(const std::vector<ConversationTurn>& history, bool include_responses);

/// Final query string per retriever: sparse searches rewrite plus response,
/// dense searches the rewrite alone.
std::string assemble_search_query(const ReformulatedQuery& rq, RetrieverKind kind);

struct ReformulatorConfig {
    std::filesystem::path template_dir;
    int parse_retries = 1;           // corrective re-asks before falling back
    bool responses_in_history = true;
};

/// Turns one conversation turn into a ReformulatedQuery by prompting the
/// chat model. Template files (reformulate.txt, str_stage1.txt,
/// str_stage2.txt, sar.txt) are loaded from template_dir at construction.
class Reformulator {
public:
    Reformulator(llm::ChatClient& client, ReformulatorConfig config);

    /// One call with the given sentence subset in the prompt. Covers the
    /// None (empty subset), All (every key) and annotation-based strategies.
    ReformulatedQuery reformulate_selected(const ConversationTurn& turn,
                                           const std::vector<ConversationTurn>& history,
                                           const Ptkb& ptkb, const std::set<std::string>& subset,
                                           Strategy strategy, int shots,
                                           const std::vector<Demonstration>& demos);

    /// Two calls: a hypothetical response over the whole PTKB, then a rewrite
    /// conditioned on that response. Stage-1 failure falls back to a single
    /// reformulate_selected call over the full PTKB.
    ReformulatedQuery str_reformulate(const ConversationTurn& turn,
                                      const std::vector<ConversationTurn>& history,
                                      const Ptkb& ptkb, int shots,
                                      const std::vector<Demonstration>& demos);

    /// One call returning selection, rewrite and response together; the
    /// selection is validated against the PTKB keys.
    ReformulatedQuery sar_reformulate(const ConversationTurn& turn,
                                      const std::vector<ConversationTurn>& history,
                                      const Ptkb& ptkb, int shots,
                                      const std::vector<Demonstration>& demos);

    /// Strategy dispatch; annotations is consulted only for the
    /// annotation-based strategies and may be null otherwise.
    ReformulatedQuery reformulate(Strategy strategy, const ConversationTurn& turn,
                                  const std::vector<ConversationTurn>& history, const Ptkb& ptkb,
                                  const AnnotationSet* annotations, int shots,
                                  const std::vector<Demonstration>& demos);

    const ReformulatorConfig& config() const { return config_; }

private:
    std::string render(const llm::PromptTemplate& tmpl, int shots,
                       const std::vector<Demonstration>& demos,
                       const std::map<std::string, std::string>& slots) const;
    std::map<std::string, std::string> ask(const llm::PromptTemplate& tmpl, int shots,
                                           const std::vector<Demonstration>& demos,
                                           const std::map<std::string, std::string>& slots,
                                           const std::vector<std::string>& fields) const;

    llm::ChatClient& client_;
    ReformulatorConfig config_;
    llm::PromptTemplate reformulate_template_;
    llm::PromptTemplate str_stage1_template_;
    llm::PromptTemplate str_stage2_template_;
    llm::PromptTemplate sar_template_;
};

/// One JSON object per line: turn_id, strategy, shots, rewrite, response,
/// selected_keys (null when the strategy has none), flags.
std::string write_reformulations(const std::vector<ReformulatedQuery>& queries,
                                 const std::string& header = "");
std::vector<ReformulatedQuery> parse_reformulations(std::string_view document);
void save_reformulations(const std::vector<ReformulatedQuery>& queries,
                         const std::filesystem::path& path, const std::string& header = "");
std::vector<ReformulatedQuery> load_reformulations(const std::filesystem::path& path);

}  // namespace pcir::reform
