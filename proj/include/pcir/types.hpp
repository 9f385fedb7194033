#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcir/errors.hpp"

namespace pcir {

/// One sentence of a user's personal knowledge base, addressed by the key
/// the dataset assigns to it (usually "1", "2", ...).
struct PtkbSentence {
    std::string key;
    std::string text;
};

/// Ordered personal knowledge base of a conversation. Keys are unique and
/// iteration follows the order of the source document.
class Ptkb {
public:
    void add(PtkbSentence sentence);

    const std::vector<PtkbSentence>& sentences() const { return sentences_; }
    std::size_t size() const { return sentences_.size(); }
    bool empty() const { return sentences_.empty(); }
    bool contains(const std::string& key) const { return index_.count(key) > 0; }
    const PtkbSentence* find(const std::string& key) const;

private:
    std::vector<PtkbSentence> sentences_;
    std::map<std::string, std::size_t> index_;
};

/// A single user turn. turn_id has the form "<topic>-<conversation>-<turn>".
/// human_ptkb_keys distinguishes "not judged" (nullopt) from "judged, none
/// relevant" (empty list); dataset statistics rely on that distinction.
struct ConversationTurn {
    std::string turn_id;
    std::string utterance;
    std::optional<std::string> resolved_utterance;
    std::optional<std::string> canonical_response;
    std::optional<std::vector<std::string>> human_ptkb_keys;

    int turn_number() const;

    std::vector<std::string> human_keys_or_empty() const {
        return human_ptkb_keys.value_or(std::vector<std::string>{});
    }
};

struct Conversation {
    std::string conversation_id;  // e.g. "9-1"
    std::string title;
    Ptkb ptkb;
    std::vector<ConversationTurn> turns;

    std::string topic_id() const;
};

struct Document {
    std::string doc_id;
    std::string text;
};

/// Graded relevance judgments keyed by (turn_id, doc_id).
class Qrels {
public:
    void add(const std::string& turn_id, const std::string& doc_id, int grade);

    /// Grade for a judged pair; 0 for unjudged documents.
    int grade(const std::string& turn_id, const std::string& doc_id) const;

    /// nullptr when the turn is not assessed at all.
    const std::map<std::string, int>* turn_grades(const std::string& turn_id) const;

    bool assessed(const std::string& turn_id) const { return judgments_.count(turn_id) > 0; }
    std::vector<std::string> assessed_turns() const;
    std::size_t assessed_turn_count() const { return judgments_.size(); }
    std::size_t judgment_count() const;
    bool empty() const { return judgments_.empty(); }

    const std::map<std::string, std::map<std::string, int>>& all() const { return judgments_; }

private:
    std::map<std::string, std::map<std::string, int>> judgments_;
};

struct ScoredDoc {
    std::string doc_id;
    double score;

    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Ranked retrieval output in TREC run convention: per turn an ordered list
/// of distinct documents with non-increasing scores.
struct Run {
    std::string tag;
    std::map<std::string, std::vector<ScoredDoc>> rankings;

    void validate(std::size_t max_depth = 0) const;
};

enum class AnnotationSource { Human, Automatic, Llm };

std::string to_string(AnnotationSource source);
AnnotationSource annotation_source_from(const std::string& name);

/// Per-turn PTKB key selections from one annotation approach. notes carries
/// per-turn diagnostics (dropped keys, parse fallbacks); it is not part of
/// the selection semantics.
struct AnnotationSet {
    AnnotationSource source = AnnotationSource::Human;
    std::map<std::string, std::set<std::string>> selections;
    std::map<std::string, std::string> notes;

    const std::set<std::string>& selection(const std::string& turn_id) const;
};

}  // namespace pcir
