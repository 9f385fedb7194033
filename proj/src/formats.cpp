#include "pcir/formats.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pcir {

namespace {

using ojson = nlohmann::ordered_json;

std::string json_scalar_to_string(const ojson& value, const std::string& path) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    throw ParseError("expected string or integer at " + path);
}

bool is_valid_turn_id(const std::string& id) {
    // "<topic>-<conversation>-<turn>" with decimal components
    int parts = 0;
    std::size_t begin = 0;
    while (begin <= id.size()) {
        std::size_t end = id.find('-', begin);
        if (end == std::string::npos) end = id.size();
        if (end == begin) return false;
        for (std::size_t i = begin; i < end; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
        }
        ++parts;
        if (end == id.size()) break;
        begin = end + 1;
    }
    return parts == 3;
}

Conversation parse_conversation(const ojson& node, const std::string& path) {
    if (!node.is_object()) throw ParseError("expected object at " + path);
    Conversation conversation;

    if (!node.contains("number")) throw ParseError("missing 'number' at " + path);
    conversation.conversation_id = json_scalar_to_string(node.at("number"), path + ".number");
    conversation.title = node.value("title", std::string{});

    if (node.contains("ptkb")) {
        const auto& ptkb = node.at("ptkb");
        if (!ptkb.is_object()) throw ParseError("expected object at " + path + ".ptkb");
        for (const auto& [key, sentence] : ptkb.items()) {
            conversation.ptkb.add(
                {key, json_scalar_to_string(sentence, path + ".ptkb." + key)});
        }
    }

    if (!node.contains("turns") || !node.at("turns").is_array()) {
        throw ParseError("missing 'turns' array at " + path);
    }
    int previous_number = 0;
    std::size_t turn_index = 0;
    for (const auto& turn_node : node.at("turns")) {
        const std::string turn_path = path + ".turns[" + std::to_string(turn_index) + "]";
        if (!turn_node.is_object()) throw ParseError("expected object at " + turn_path);
        ConversationTurn turn;
        if (turn_node.contains("turn_id")) {
            turn.turn_id = json_scalar_to_string(turn_node.at("turn_id"), turn_path + ".turn_id");
        } else if (turn_node.contains("number")) {
            turn.turn_id = conversation.conversation_id + "-" +
                           json_scalar_to_string(turn_node.at("number"), turn_path + ".number");
        } else {
            throw ParseError("turn without 'turn_id' or 'number' at " + turn_path);
        }
        if (!is_valid_turn_id(turn.turn_id)) {
            throw ValidationError("turn id '" + turn.turn_id + "' at " + turn_path +
                                  " is not of the form <topic>-<conversation>-<turn>");
        }
        if (turn.turn_id.rfind(conversation.conversation_id + "-", 0) != 0) {
            throw ValidationError("turn id '" + turn.turn_id + "' does not extend conversation '" +
                                  conversation.conversation_id + "'");
        }

        if (!turn_node.contains("utterance")) {
            throw ParseError("missing 'utterance' at " + turn_path);
        }
        turn.utterance = json_scalar_to_string(turn_node.at("utterance"), turn_path + ".utterance");
        if (turn.utterance.empty()) {
            throw ValidationError("empty utterance at " + turn_path);
        }
        if (turn_node.contains("resolved_utterance")) {
            turn.resolved_utterance =
                json_scalar_to_string(turn_node.at("resolved_utterance"), turn_path);
        }
        if (turn_node.contains("response")) {
            turn.canonical_response = json_scalar_to_string(turn_node.at("response"), turn_path);
        }
        if (turn_node.contains("ptkb_provenance")) {
            const auto& provenance = turn_node.at("ptkb_provenance");
            if (!provenance.is_array()) {
                throw ParseError("expected array at " + turn_path + ".ptkb_provenance");
            }
            std::vector<std::string> keys;
            for (const auto& key : provenance) {
                keys.push_back(json_scalar_to_string(key, turn_path + ".ptkb_provenance"));
            }
            turn.human_ptkb_keys = std::move(keys);
        }

        int number = turn.turn_number();
        if (number <= previous_number) {
            throw ValidationError("turn numbers not strictly increasing at " + turn_path);
        }
        previous_number = number;
        conversation.turns.push_back(std::move(turn));
        ++turn_index;
    }
    return conversation;
}

}  // namespace

std::vector<Conversation> parse_topics(std::string_view document) {
    ojson root = ojson::parse(document, nullptr, false);
    if (root.is_discarded()) throw ParseError("topics document is not valid JSON");
    if (!root.is_array()) throw ParseError("expected a JSON array at the document root");

    std::vector<Conversation> conversations;
    std::set<std::string> seen_turn_ids;
    std::size_t index = 0;
    for (const auto& node : root) {
        auto conversation =
            parse_conversation(node, "conversation[" + std::to_string(index) + "]");
        for (const auto& turn : conversation.turns) {
            if (!seen_turn_ids.insert(turn.turn_id).second) {
                throw ValidationError("duplicate turn id '" + turn.turn_id + "'");
            }
        }
        conversations.push_back(std::move(conversation));
        ++index;
    }
    return conversations;
}

std::vector<Conversation> load_topics(const std::filesystem::path& path) {
    return parse_topics(read_file(path));
}

Qrels parse_qrels(std::string_view document) {
    Qrels qrels;
    std::size_t line_number = 0;
    std::istringstream stream{std::string(document)};
    std::string line;
    while (std::getline(stream, line)) {
        ++line_number;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string turn_id, iteration, doc_id, grade_text;
        if (!(fields >> turn_id >> iteration >> doc_id >> grade_text)) {
            if (turn_id.empty()) continue;  // whitespace-only line
            throw ParseError("qrels line " + std::to_string(line_number) + ": expected 4 fields");
        }
        int grade = 0;
        auto [ptr, ec] = std::from_chars(grade_text.data(),
                                         grade_text.data() + grade_text.size(), grade);
        if (ec != std::errc{} || ptr != grade_text.data() + grade_text.size()) {
            throw ParseError("qrels line " + std::to_string(line_number) +
                             ": grade '" + grade_text + "' is not an integer");
        }
        qrels.add(turn_id, doc_id, grade);
    }
    return qrels;
}

Qrels load_qrels(const std::filesystem::path& path) {
    return parse_qrels(read_file(path));
}

std::string write_run(const Run& run, std::size_t depth, const std::string& header) {
    run.validate();
    std::string out;
    if (!header.empty()) {
        out += "# " + header + "\n";
    }
    const std::string tag = run.tag.empty() ? "pcir" : run.tag;
    char buffer[64];
    for (const auto& [turn_id, ranking] : run.rankings) {
        const std::size_t limit = depth == 0 ? ranking.size() : std::min(depth, ranking.size());
        for (std::size_t rank = 0; rank < limit; ++rank) {
            std::snprintf(buffer, sizeof(buffer), "%.6f", ranking[rank].score);
            out += turn_id;
            out += " Q0 ";
            out += ranking[rank].doc_id;
            out += ' ';
            out += std::to_string(rank + 1);
            out += ' ';
            out += buffer;
            out += ' ';
            out += tag;
            out += '\n';
        }
    }
    return out;
}

Run parse_run(std::string_view document) {
    Run run;
    std::size_t line_number = 0;
    std::istringstream stream{std::string(document)};
    std::string line;
    std::string header_tag;
    for (; std::getline(stream, line);) {
        ++line_number;
        if (line.empty() || line[0] == '#') {
            // Our writer stamps "tag=<tag>" into the header comment; keep it
            // so a run whose every ranking came back empty still has a name.
            auto pos = line.find("tag=");
            if (header_tag.empty() && pos != std::string::npos) {
                auto end = line.find(' ', pos);
                header_tag = line.substr(pos + 4, end == std::string::npos ? end : end - pos - 4);
            }
            continue;
        }
        std::istringstream fields(line);
        std::string turn_id, q0, doc_id, rank_text, score_text, tag;
        if (!(fields >> turn_id >> q0 >> doc_id >> rank_text >> score_text >> tag)) {
            if (turn_id.empty()) continue;
            throw ParseError("run line " + std::to_string(line_number) + ": expected 6 fields");
        }
        std::size_t rank = 0;
        try {
            rank = std::stoul(rank_text);
        } catch (const std::exception&) {
            throw ParseError("run line " + std::to_string(line_number) + ": bad rank");
        }
        double score = 0.0;
        try {
            score = std::stod(score_text);
        } catch (const std::exception&) {
            throw ParseError("run line " + std::to_string(line_number) + ": bad score");
        }
        auto& ranking = run.rankings[turn_id];
        if (rank != ranking.size() + 1) {
            throw ValidationError("run line " + std::to_string(line_number) +
                                  ": rank " + rank_text + " out of order for turn " + turn_id);
        }
        if (!ranking.empty() && score > ranking.back().score) {
            throw ValidationError("run line " + std::to_string(line_number) +
                                  ": score increases within turn " + turn_id);
        }
        ranking.push_back({doc_id, score});
        if (run.tag.empty()) run.tag = tag;
    }
    if (run.tag.empty()) run.tag = header_tag;
    run.validate();
    return run;
}

void save_run(const Run& run, const std::filesystem::path& path, std::size_t depth,
              const std::string& header) {
    write_file_atomic(path, write_run(run, depth, header));
}

Run load_run(const std::filesystem::path& path) {
    return parse_run(read_file(path));
}

void for_each_document(const std::filesystem::path& path,
                       const std::function<void(Document&&)>& sink) {
    std::ifstream stream(path);
    if (!stream) throw IoError("cannot open collection file " + path.string());
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(stream, line)) {
        ++line_number;
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ParseError("collection line " + std::to_string(line_number) +
                             ": expected doc_id<TAB>text");
        }
        sink(Document{line.substr(0, tab), line.substr(tab + 1)});
    }
}

std::vector<Document> load_collection(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for_each_document(path, [&docs](Document&& doc) { docs.push_back(std::move(doc)); });
    return docs;
}

std::string write_annotation_set(const AnnotationSet& set, const std::string& header) {
    std::string out;
    if (!header.empty()) out += "# " + header + "\n";
    const std::string source = to_string(set.source);
    for (const auto& [turn_id, keys] : set.selections) {
        out += turn_id;
        out += '\t';
        out += source;
        out += '\t';
        bool first = true;
        for (const auto& key : keys) {
            if (!first) out += ',';
            out += key;
            first = false;
        }
        out += '\n';
    }
    return out;
}

AnnotationSet parse_annotation_set(std::string_view document) {
    AnnotationSet set;
    bool source_seen = false;
    std::istringstream stream{std::string(document)};
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(stream, line)) {
        ++line_number;
        if (line.empty() || line[0] == '#') continue;
        auto first_tab = line.find('\t');
        auto second_tab = first_tab == std::string::npos
                              ? std::string::npos
                              : line.find('\t', first_tab + 1);
        if (second_tab == std::string::npos) {
            throw ParseError("annotation line " + std::to_string(line_number) +
                             ": expected turn_id<TAB>source<TAB>keys");
        }
        std::string turn_id = line.substr(0, first_tab);
        std::string source = line.substr(first_tab + 1, second_tab - first_tab - 1);
        std::string keys = line.substr(second_tab + 1);
        AnnotationSource parsed_source = annotation_source_from(source);
        if (!source_seen) {
            set.source = parsed_source;
            source_seen = true;
        } else if (parsed_source != set.source) {
            throw ValidationError("annotation line " + std::to_string(line_number) +
                                  ": mixed sources in one file");
        }
        auto& selection = set.selections[turn_id];
        std::size_t begin = 0;
        while (begin <= keys.size() && !keys.empty()) {
            auto end = keys.find(',', begin);
            if (end == std::string::npos) end = keys.size();
            if (end > begin) selection.insert(keys.substr(begin, end - begin));
            if (end == keys.size()) break;
            begin = end + 1;
        }
    }
    return set;
}

void save_annotation_set(const AnnotationSet& set, const std::filesystem::path& path,
                         const std::string& header) {
    write_file_atomic(path, write_annotation_set(set, header));
}

AnnotationSet load_annotation_set(const std::filesystem::path& path) {
    return parse_annotation_set(read_file(path));
}

DatasetStats dataset_stats(std::span<const Conversation> conversations, const Qrels& qrels) {
    DatasetStats stats;
    std::set<std::string> topics;
    std::set<std::string> turn_ids;
    for (const auto& conversation : conversations) {
        topics.insert(conversation.topic_id());
        ++stats.conversations;
        stats.ptkb_sentences += conversation.ptkb.size();
        for (const auto& turn : conversation.turns) {
            ++stats.turns;
            turn_ids.insert(turn.turn_id);
            if (turn.human_ptkb_keys.has_value()) {
                ++stats.ptkb_assessed_turns;
                stats.ptkb_assessments += conversation.ptkb.size();
                stats.relevant_ptkb_labels += turn.human_ptkb_keys->size();
            }
        }
    }
    stats.topics = topics.size();
    for (const auto& turn_id : qrels.assessed_turns()) {
        if (turn_ids.count(turn_id) > 0) ++stats.assessed_turns;
    }
    return stats;
}

std::string render_dataset_stats(const DatasetStats& stats) {
    std::ostringstream out;
    out << "topics\t" << stats.topics << '\n'
        << "conversations\t" << stats.conversations << '\n'
        << "turns\t" << stats.turns << '\n'
        << "assessed_turns\t" << stats.assessed_turns << '\n'
        << "ptkb_sentences\t" << stats.ptkb_sentences << '\n'
        << "ptkb_assessed_turns\t" << stats.ptkb_assessed_turns << '\n'
        << "ptkb_assessments\t" << stats.ptkb_assessments << '\n'
        << "relevant_ptkb_labels\t" << stats.relevant_ptkb_labels << '\n';
    return out.str();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream stream(path, std::ios::binary);
    if (!stream) throw IoError("cannot open " + path.string());
    std::ostringstream content;
    content << stream.rdbuf();
    return content.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    auto temp = path;
    temp += ".tmp";
    {
        std::ofstream stream(temp, std::ios::binary | std::ios::trunc);
        if (!stream) throw IoError("cannot write " + temp.string());
        stream.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    std::filesystem::rename(temp, path);
}

}  // namespace pcir
