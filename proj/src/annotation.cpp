#include "pcir/annotation.hpp"

#include <algorithm>
#include <charconv>

#include "pcir/errors.hpp"

namespace pcir::annot {

namespace {

std::string format_metric(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", value);
    return buffer;
}

std::vector<ConversationTurn> history_before(const Conversation& conversation,
                                             std::size_t turn_index) {
    return {conversation.turns.begin(), conversation.turns.begin() + turn_index};
}

}  // namespace

AnnotationSet ingest_human(const std::vector<Conversation>& conversations) {
    AnnotationSet set;
    set.source = AnnotationSource::Human;
    for (const auto& conversation : conversations) {
        for (const auto& turn : conversation.turns) {
            if (!turn.human_ptkb_keys.has_value()) continue;
            std::set<std::string> selection;
            for (const auto& key : *turn.human_ptkb_keys) {
                if (!conversation.ptkb.contains(key)) {
                    throw ValidationError("turn " + turn.turn_id + ": judged PTKB key '" + key +
                                          "' is not in conversation " +
                                          conversation.conversation_id + "'s PTKB");
                }
                selection.insert(key);
            }
            set.selections[turn.turn_id] = std::move(selection);
        }
    }
    return set;
}

LlmAnnotator::LlmAnnotator(llm::ChatClient& client, AnnotatorConfig config)
    : client_(client),
      config_(std::move(config)),
      template_(llm::PromptTemplate::load(config_.template_dir / "annotate.txt")) {}

LlmSelection LlmAnnotator::annotate(const ConversationTurn& turn,
                                    const std::vector<ConversationTurn>& history,
                                    const Ptkb& ptkb) {
    llm::ChatRequest request;
    request.model = client_.config().model;
    request.temperature = client_.config().temperature;
    request.messages.push_back(
        {"user", llm::render_prompt(
                     template_,
                     {{"ptkb", reform::render_ptkb(ptkb)},
                      {"history", reform::render_history(history, config_.responses_in_history)},
                      {"question", turn.utterance}})});

    LlmSelection result;
    std::string raw;
    try {
        raw = client_.chat_structured(request, {"ptkb_selection"}, config_.parse_retries)
                  .at("ptkb_selection");
    } catch (const ParseFailure&) {
        result.parse_failed = true;
        result.note = "parse_fallback";
        return result;
    }

    std::vector<std::string> dropped;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::string lowered = token;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lowered != "none" && lowered != "and") {
            if (ptkb.contains(token)) {
                result.keys.insert(token);
            } else {
                dropped.push_back(token);
            }
        }
        token.clear();
    };
    for (char c : raw) {
        if (c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            token += c;
        }
    }
    flush();
    if (!dropped.empty()) {
        result.note = "dropped_keys:";
        for (std::size_t i = 0; i < dropped.size(); ++i) {
            if (i > 0) result.note += ",";
            result.note += dropped[i];
        }
    }
    return result;
}

AnnotationSet LlmAnnotator::annotate_all(const std::vector<Conversation>& conversations) {
    AnnotationSet set;
    set.source = AnnotationSource::Llm;
    for (const auto& conversation : conversations) {
        for (std::size_t i = 0; i < conversation.turns.size(); ++i) {
            const auto& turn = conversation.turns[i];
            auto selection = annotate(turn, history_before(conversation, i), conversation.ptkb);
            set.selections[turn.turn_id] = std::move(selection.keys);
            if (!selection.note.empty()) set.notes[turn.turn_id] = selection.note;
        }
    }
    return set;
}

MetricFn make_metric(const std::string& name) {
    if (name == "mrr") {
        return [](const std::vector<ScoredDoc>& ranking, const std::map<std::string, int>& grades) {
            return eval::mrr(ranking, grades, 1);
        };
    }
    if (name == "map") {
        return [](const std::vector<ScoredDoc>& ranking, const std::map<std::string, int>& grades) {
            return eval::average_precision(ranking, grades, 1).value_or(0.0);
        };
    }
    if (name.rfind("ndcg@", 0) == 0) {
        const std::string suffix = name.substr(5);
        std::size_t k = 0;
        auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), k);
        if (ec == std::errc() && ptr == suffix.data() + suffix.size() && k > 0) {
            return [k](const std::vector<ScoredDoc>& ranking,
                       const std::map<std::string, int>& grades) {
                return eval::ndcg_at_k(ranking, grades, k);
            };
        }
    }
    throw ValidationError("unknown impact metric '" + name +
                          "' (expected mrr, map or ndcg@<k>)");
}

std::optional<AutomaticResult> automatic_annotate(
    const ConversationTurn& turn, const std::vector<ConversationTurn>& history, const Ptkb& ptkb,
    const ReformulateFn& reformulate, const RetrieveFn& retrieve, const Qrels& qrels,
    const MetricFn& metric, std::size_t depth, double epsilon) {
    const auto* grades = qrels.turn_grades(turn.turn_id);
    if (grades == nullptr) return std::nullopt;

    auto score_subset = [&](const std::set<std::string>& subset) {
        auto rq = reformulate(turn, history, ptkb, subset);
        auto query = reform::assemble_search_query(rq, reform::RetrieverKind::Sparse);
        return metric(retrieve(query, depth), *grades);
    };

    AutomaticResult result;
    const double baseline = score_subset({});
    if (ptkb.empty()) {
        result.records.push_back({turn.turn_id, "", baseline, baseline, false});
        return result;
    }
    for (const auto& sentence : ptkb.sentences()) {
        const double with_sentence = score_subset({sentence.key});
        const bool improved = with_sentence > baseline + epsilon;
        result.records.push_back({turn.turn_id, sentence.key, baseline, with_sentence, improved});
        if (improved) result.keys.insert(sentence.key);
    }
    return result;
}

std::pair<AnnotationSet, std::vector<ImpactRecord>> automatic_annotate_all(
    const std::vector<Conversation>& conversations, const ReformulateFn& reformulate,
    const RetrieveFn& retrieve, const Qrels& qrels, const MetricFn& metric, std::size_t depth,
    double epsilon) {
    AnnotationSet set;
    set.source = AnnotationSource::Automatic;
    std::vector<ImpactRecord> records;
    for (const auto& conversation : conversations) {
        for (std::size_t i = 0; i < conversation.turns.size(); ++i) {
            const auto& turn = conversation.turns[i];
            auto result = automatic_annotate(turn, history_before(conversation, i),
                                             conversation.ptkb, reformulate, retrieve, qrels,
                                             metric, depth, epsilon);
            if (!result.has_value()) continue;  // unassessed turn
            set.selections[turn.turn_id] = std::move(result->keys);
            records.insert(records.end(), result->records.begin(), result->records.end());
        }
    }
    // Conversations arrive in document order; audits sort by turn for stable
    // output regardless of how the caller grouped them.
    std::stable_sort(records.begin(), records.end(),
                     [](const ImpactRecord& a, const ImpactRecord& b) {
                         return a.turn_id < b.turn_id;
                     });
    return {std::move(set), std::move(records)};
}

OverlapReport overlap_stats(const AnnotationSet& a, const AnnotationSet& b,
                            const std::vector<std::string>& turns) {
    OverlapReport report;
    report.source_a = to_string(a.source);
    report.source_b = to_string(b.source);
    report.turn_count = turns.size();
    for (const auto& turn_id : turns) {
        const auto& selection_a = a.selection(turn_id);
        const auto& selection_b = b.selection(turn_id);
        if (selection_a == selection_b) ++report.exact_match_turns;
        if (selection_a.empty()) ++report.no_ptkb_a;
        if (selection_b.empty()) ++report.no_ptkb_b;
        std::size_t shared = 0;
        for (const auto& key : selection_a) shared += selection_b.count(key);
        report.agreed_keys += shared;
        report.union_keys += selection_a.size() + selection_b.size() - shared;
    }
    return report;
}

std::set<std::string> needs_ptkb_subset(const AnnotationSet& automatic,
                                        const std::vector<std::string>& assessed_turns) {
    std::set<std::string> subset;
    for (const auto& turn_id : assessed_turns) {
        if (!automatic.selection(turn_id).empty()) subset.insert(turn_id);
    }
    return subset;
}

std::string render_impact_audit(const std::vector<ImpactRecord>& records,
                                const std::string& header) {
    std::string out;
    if (!header.empty()) out += "# " + header + "\n";
    for (const auto& record : records) {
        out += record.turn_id + "\t" + record.ptkb_key + "\t" +
               format_metric(record.baseline_metric) + "\t" +
               format_metric(record.with_sentence_metric) + "\t" +
               (record.improved ? "1" : "0") + "\n";
    }
    return out;
}

std::string render_overlap(const OverlapReport& report) {
    std::string out;
    out += "source_a\t" + report.source_a + "\n";
    out += "source_b\t" + report.source_b + "\n";
    out += "turns\t" + std::to_string(report.turn_count) + "\n";
    out += "exact_match_turns\t" + std::to_string(report.exact_match_turns) + "\n";
    out += "agreed_keys\t" + std::to_string(report.agreed_keys) + "\n";
    out += "union_keys\t" + std::to_string(report.union_keys) + "\n";
    out += "no_ptkb_" + report.source_a + "\t" + std::to_string(report.no_ptkb_a) + "\n";
    out += "no_ptkb_" + report.source_b + "\t" + std::to_string(report.no_ptkb_b) + "\n";
    return out;
}

}  // namespace pcir::annot
