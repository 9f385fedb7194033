#include "pcir/reformulation.hpp"

#include <algorithm>
#include <random>

#include <json.hpp>

#include "pcir/errors.hpp"
#include "pcir/formats.hpp"

namespace pcir::reform {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* kStrategyNames[] = {"none", "all", "human", "automatic", "llm", "str", "sar"};

std::string join_keys(const std::set<std::string>& keys) {
    std::string out;
    for (const auto& key : keys) {
        if (!out.empty()) out += ",";
        out += key;
    }
    return out;
}

/// Selection strings arrive as "1, 3", "none", "2 and 4", ... Split on
/// commas, semicolons and whitespace; "none" and "and" are noise words.
std::vector<std::string> split_selection(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        std::string lowered = current;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lowered != "none" && lowered != "and") tokens.push_back(current);
        current.clear();
    };
    for (char c : text) {
        if (c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            current += c;
        }
    }
    flush();
    return tokens;
}

std::string render_excerpt(const Conversation& conversation, std::size_t turn_index) {
    const auto& turn = conversation.turns[turn_index];
    std::vector<ConversationTurn> history(conversation.turns.begin(),
                                          conversation.turns.begin() + turn_index);
    std::string out = "User knowledge:\n" + render_ptkb(conversation.ptkb);
    out += "\nConversation so far:\n" + render_history(history, true);
    out += "\nCurrent question: " + turn.utterance;
    return out;
}

}  // namespace

std::string to_string(Strategy strategy) {
    return kStrategyNames[static_cast<int>(strategy)];
}

Strategy strategy_from(const std::string& name) {
    for (int i = 0; i < 7; ++i) {
        if (name == kStrategyNames[i]) return static_cast<Strategy>(i);
    }
    throw ValidationError("unknown strategy '" + name +
                          "' (expected none, all, human, automatic, llm, str or sar)");
}

bool uses_annotation(Strategy strategy) {
    return strategy == Strategy::Human || strategy == Strategy::Automatic ||
           strategy == Strategy::Llm;
}

AnnotationSource annotation_source_for(Strategy strategy) {
    switch (strategy) {
        case Strategy::Human: return AnnotationSource::Human;
        case Strategy::Automatic: return AnnotationSource::Automatic;
        case Strategy::Llm: return AnnotationSource::Llm;
        default:
            throw ValidationError("strategy '" + to_string(strategy) +
                                  "' does not read an annotation set");
    }
}

std::string to_string(RetrieverKind kind) {
    return kind == RetrieverKind::Sparse ? "sparse" : "dense";
}

RetrieverKind retriever_kind_from(const std::string& name) {
    if (name == "sparse") return RetrieverKind::Sparse;
    if (name == "dense") return RetrieverKind::Dense;
    throw ValidationError("unknown retriever '" + name + "' (expected sparse or dense)");
}

std::vector<Demonstration> build_demonstrations(const std::vector<Conversation>& train_conversations,
                                                const AnnotationSet& train_annotations,
                                                std::size_t k, std::uint64_t seed) {
    // Pool in turn_id order so the sample depends only on (pool, seed), not
    // on the order conversations were loaded in.
    std::vector<std::pair<std::string, Demonstration>> pool;
    for (const auto& conversation : train_conversations) {
        for (std::size_t i = 0; i < conversation.turns.size(); ++i) {
            const auto& turn = conversation.turns[i];
            auto it = train_annotations.selections.find(turn.turn_id);
            if (it == train_annotations.selections.end()) continue;
            Demonstration demo;
            demo.excerpt = render_excerpt(conversation, i);
            demo.selected_keys = it->second;
            demo.gold_rewrite = turn.resolved_utterance.value_or(turn.utterance);
            pool.emplace_back(turn.turn_id, std::move(demo));
        }
    }
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    if (k > pool.size()) {
        throw ValidationError("cannot sample " + std::to_string(k) + " demonstrations from " +
                              std::to_string(pool.size()) + " annotated training turns");
    }

    // Partial Fisher-Yates over the raw mt19937 stream. The engine's output
    // sequence is pinned by the standard, so the draw is reproducible across
    // platforms; distribution adapters are not.
    std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
    std::vector<Demonstration> sample;
    sample.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
        sample.push_back(std::move(pool[i].second));
    }
    return sample;
}

std::string render_ptkb(const Ptkb& ptkb, const std::set<std::string>& keys) {
    std::string out;
    for (const auto& sentence : ptkb.sentences()) {
        if (keys.count(sentence.key) == 0) continue;
        if (!out.empty()) out += "\n";
        out += "- " + sentence.key + ": " + sentence.text;
    }
    return out.empty() ? "(none)" : out;
}

std::string render_ptkb(const Ptkb& ptkb) {
    std::string out;
    for (const auto& sentence : ptkb.sentences()) {
        if (!out.empty()) out += "\n";
        out += "- " + sentence.key + ": " + sentence.text;
    }
    return out.empty() ? "(none)" : out;
}

std::string render_history(const std::vector<ConversationTurn>& history, bool include_responses) {
    std::string out;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (!out.empty()) out += "\n";
        out += "Q_" + std::to_string(i + 1) + ": " + history[i].utterance;
        if (include_responses && history[i].canonical_response.has_value()) {
            out += "\nA_" + std::to_string(i + 1) + ": " + *history[i].canonical_response;
        }
    }
    return out.empty() ? "(none)" : out;
}

std::string assemble_search_query(const ReformulatedQuery& rq, RetrieverKind kind) {
    if (kind == RetrieverKind::Dense || rq.response.empty()) return rq.rewrite;
    if (rq.rewrite.empty()) return rq.response;
    return rq.rewrite + " " + rq.response;
}

Reformulator::Reformulator(llm::ChatClient& client, ReformulatorConfig config)
    : client_(client),
      config_(std::move(config)),
      reformulate_template_(llm::PromptTemplate::load(config_.template_dir / "reformulate.txt")),
      str_stage1_template_(llm::PromptTemplate::load(config_.template_dir / "str_stage1.txt")),
      str_stage2_template_(llm::PromptTemplate::load(config_.template_dir / "str_stage2.txt")),
      sar_template_(llm::PromptTemplate::load(config_.template_dir / "sar.txt")) {}

std::string Reformulator::render(const llm::PromptTemplate& tmpl, int shots,
                                 const std::vector<Demonstration>& demos,
                                 const std::map<std::string, std::string>& slots) const {
    if (shots != static_cast<int>(demos.size())) {
        throw ValidationError("a " + std::to_string(shots) + "-shot prompt needs exactly " +
                              std::to_string(shots) + " demonstrations, got " +
                              std::to_string(demos.size()));
    }
    const auto* pattern = tmpl.demonstration_pattern();
    if (pattern == nullptr) {
        if (shots > 0) {
            throw ValidationError("template '" + tmpl.name +
                                  "' has no demonstration section but shots=" +
                                  std::to_string(shots));
        }
        return llm::render_prompt(tmpl, slots);
    }
    std::vector<std::string> rendered;
    rendered.reserve(demos.size());
    for (const auto& demo : demos) {
        std::string selection = demo.selected_keys.empty() ? "none" : join_keys(demo.selected_keys);
        rendered.push_back(llm::render_text(pattern->text, {{"excerpt", demo.excerpt},
                                                            {"selection", selection},
                                                            {"rewrite", demo.gold_rewrite}}));
    }
    return llm::render_prompt(tmpl.with_demonstrations(rendered), slots);
}

std::map<std::string, std::string> Reformulator::ask(
    const llm::PromptTemplate& tmpl, int shots, const std::vector<Demonstration>& demos,
    const std::map<std::string, std::string>& slots, const std::vector<std::string>& fields) const {
    llm::ChatRequest request;
    request.model = client_.config().model;
    request.temperature = client_.config().temperature;
    request.messages.push_back({"user", render(tmpl, shots, demos, slots)});
    return client_.chat_structured(request, fields, config_.parse_retries);
}

ReformulatedQuery Reformulator::reformulate_selected(const ConversationTurn& turn,
                                                     const std::vector<ConversationTurn>& history,
                                                     const Ptkb& ptkb,
                                                     const std::set<std::string>& subset,
                                                     Strategy strategy, int shots,
                                                     const std::vector<Demonstration>& demos) {
    for (const auto& key : subset) {
        if (!ptkb.contains(key)) {
            throw ValidationError("turn " + turn.turn_id + ": selected key '" + key +
                                  "' is not in the PTKB");
        }
    }
    ReformulatedQuery rq;
    rq.turn_id = turn.turn_id;
    rq.strategy = strategy;
    rq.shots = shots;
    rq.selected_keys = subset;

    std::map<std::string, std::string> slots{
        {"ptkb", render_ptkb(ptkb, subset)},
        {"history", render_history(history, config_.responses_in_history)},
        {"question", turn.utterance}};
    try {
        auto fields = ask(reformulate_template_, shots, demos, slots, {"rewrite", "response"});
        rq.rewrite = fields.at("rewrite");
        rq.response = fields.at("response");
    } catch (const ParseFailure&) {
        rq.rewrite = turn.utterance;
        rq.response.clear();
        rq.flags.push_back("parse_fallback");
    }
    if (rq.rewrite.empty()) {
        rq.rewrite = turn.utterance;
        rq.flags.push_back("empty_rewrite_fallback");
    }
    return rq;
}

ReformulatedQuery Reformulator::str_reformulate(const ConversationTurn& turn,
                                                const std::vector<ConversationTurn>& history,
                                                const Ptkb& ptkb, int shots,
                                                const std::vector<Demonstration>& demos) {
    std::map<std::string, std::string> stage1_slots{
        {"ptkb", render_ptkb(ptkb)},
        {"history", render_history(history, config_.responses_in_history)},
        {"question", turn.utterance}};
    std::string hypothetical;
    try {
        hypothetical = ask(str_stage1_template_, shots, demos, stage1_slots, {"response"})
                           .at("response");
    } catch (const ParseFailure&) {
        std::set<std::string> all_keys;
        for (const auto& sentence : ptkb.sentences()) all_keys.insert(sentence.key);
        auto rq = reformulate_selected(turn, history, ptkb, all_keys, Strategy::Str, shots, demos);
        rq.selected_keys.reset();
        rq.flags.push_back("str_stage1_fallback");
        return rq;
    }

    ReformulatedQuery rq;
    rq.turn_id = turn.turn_id;
    rq.strategy = Strategy::Str;
    rq.shots = shots;
    rq.response = hypothetical;

    std::map<std::string, std::string> stage2_slots{
        {"history", render_history(history, config_.responses_in_history)},
        {"question", turn.utterance},
        {"response", hypothetical}};
    try {
        rq.rewrite = ask(str_stage2_template_, shots, demos, stage2_slots, {"rewrite"})
                         .at("rewrite");
    } catch (const ParseFailure&) {
        rq.rewrite = turn.utterance;
        rq.flags.push_back("parse_fallback");
    }
    if (rq.rewrite.empty()) {
        rq.rewrite = turn.utterance;
        rq.flags.push_back("empty_rewrite_fallback");
    }
    return rq;
}

ReformulatedQuery Reformulator::sar_reformulate(const ConversationTurn& turn,
                                                const std::vector<ConversationTurn>& history,
                                                const Ptkb& ptkb, int shots,
                                                const std::vector<Demonstration>& demos) {
    ReformulatedQuery rq;
    rq.turn_id = turn.turn_id;
    rq.strategy = Strategy::Sar;
    rq.shots = shots;

    std::map<std::string, std::string> slots{
        {"ptkb", render_ptkb(ptkb)},
        {"history", render_history(history, config_.responses_in_history)},
        {"question", turn.utterance}};
    try {
        auto fields = ask(sar_template_, shots, demos, slots,
                          {"ptkb_selection", "rewrite", "response"});
        rq.rewrite = fields.at("rewrite");
        rq.response = fields.at("response");
        std::set<std::string> keys;
        std::vector<std::string> dropped;
        for (const auto& token : split_selection(fields.at("ptkb_selection"))) {
            if (ptkb.contains(token)) {
                keys.insert(token);
            } else {
                dropped.push_back(token);
            }
        }
        rq.selected_keys = std::move(keys);
        if (!dropped.empty()) {
            std::string flag = "dropped_keys:";
            for (std::size_t i = 0; i < dropped.size(); ++i) {
                if (i > 0) flag += ",";
                flag += dropped[i];
            }
            rq.flags.push_back(flag);
        }
    } catch (const ParseFailure&) {
        rq.rewrite = turn.utterance;
        rq.response.clear();
        rq.selected_keys = std::set<std::string>{};
        rq.flags.push_back("parse_fallback");
    }
    if (rq.rewrite.empty()) {
        rq.rewrite = turn.utterance;
        rq.flags.push_back("empty_rewrite_fallback");
    }
    return rq;
}

ReformulatedQuery Reformulator::reformulate(Strategy strategy, const ConversationTurn& turn,
                                            const std::vector<ConversationTurn>& history,
                                            const Ptkb& ptkb, const AnnotationSet* annotations,
                                            int shots, const std::vector<Demonstration>& demos) {
    switch (strategy) {
        case Strategy::None:
            return reformulate_selected(turn, history, ptkb, {}, strategy, shots, demos);
        case Strategy::All: {
            std::set<std::string> all_keys;
            for (const auto& sentence : ptkb.sentences()) all_keys.insert(sentence.key);
            return reformulate_selected(turn, history, ptkb, all_keys, strategy, shots, demos);
        }
        case Strategy::Human:
        case Strategy::Automatic:
        case Strategy::Llm: {
            if (annotations == nullptr) {
                throw ValidationError("strategy '" + to_string(strategy) +
                                      "' needs an annotation set");
            }
            if (annotations->source != annotation_source_for(strategy)) {
                throw ValidationError("strategy '" + to_string(strategy) + "' got a " +
                                      pcir::to_string(annotations->source) + " annotation set");
            }
            return reformulate_selected(turn, history, ptkb, annotations->selection(turn.turn_id),
                                        strategy, shots, demos);
        }
        case Strategy::Str:
            return str_reformulate(turn, history, ptkb, shots, demos);
        case Strategy::Sar:
            return sar_reformulate(turn, history, ptkb, shots, demos);
    }
    throw ValidationError("unhandled strategy");
}

std::string write_reformulations(const std::vector<ReformulatedQuery>& queries,
                                 const std::string& header) {
    std::string out;
    if (!header.empty()) out += "# " + header + "\n";
    for (const auto& rq : queries) {
        ordered_json record;
        record["turn_id"] = rq.turn_id;
        record["strategy"] = to_string(rq.strategy);
        record["shots"] = rq.shots;
        record["rewrite"] = rq.rewrite;
        record["response"] = rq.response;
        if (rq.selected_keys.has_value()) {
            record["selected_keys"] = *rq.selected_keys;
        } else {
            record["selected_keys"] = nullptr;
        }
        record["flags"] = rq.flags;
        out += record.dump() + "\n";
    }
    return out;
}

std::vector<ReformulatedQuery> parse_reformulations(std::string_view document) {
    std::vector<ReformulatedQuery> queries;
    std::size_t line_number = 0;
    std::size_t start = 0;
    while (start < document.size()) {
        std::size_t end = document.find('\n', start);
        if (end == std::string_view::npos) end = document.size();
        std::string_view line = document.substr(start, end - start);
        start = end + 1;
        ++line_number;
        if (line.empty() || line.front() == '#') continue;
        ordered_json record = ordered_json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw ParseError("reformulations line " + std::to_string(line_number) +
                             ": not a JSON object");
        }
        try {
            ReformulatedQuery rq;
            rq.turn_id = record.at("turn_id").get<std::string>();
            rq.strategy = strategy_from(record.at("strategy").get<std::string>());
            rq.shots = record.at("shots").get<int>();
            rq.rewrite = record.at("rewrite").get<std::string>();
            rq.response = record.at("response").get<std::string>();
            if (!record.at("selected_keys").is_null()) {
                rq.selected_keys = record.at("selected_keys").get<std::set<std::string>>();
            }
            rq.flags = record.at("flags").get<std::vector<std::string>>();
            queries.push_back(std::move(rq));
        } catch (const ordered_json::exception& e) {
            throw ParseError("reformulations line " + std::to_string(line_number) + ": " +
                             e.what());
        }
    }
    return queries;
}

void save_reformulations(const std::vector<ReformulatedQuery>& queries,
                         const std::filesystem::path& path, const std::string& header) {
    write_file_atomic(path, write_reformulations(queries, header));
}

std::vector<ReformulatedQuery> load_reformulations(const std::filesystem::path& path) {
    return parse_reformulations(read_file(path));
}

}  // namespace pcir::reform
