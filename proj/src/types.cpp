#include "pcir/types.hpp"

#include <algorithm>
#include <charconv>

namespace pcir {

namespace {

std::string trimmed(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

void Ptkb::add(PtkbSentence sentence) {
    if (sentence.key.empty()) {
        throw ValidationError("PTKB sentence with empty key");
    }
    if (trimmed(sentence.text).empty()) {
        throw ValidationError("PTKB sentence '" + sentence.key + "' has empty text");
    }
    if (!index_.emplace(sentence.key, sentences_.size()).second) {
        throw ValidationError("duplicate PTKB key '" + sentence.key + "'");
    }
    sentences_.push_back(std::move(sentence));
}

const PtkbSentence* Ptkb::find(const std::string& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &sentences_[it->second];
}

int ConversationTurn::turn_number() const {
    auto pos = turn_id.rfind('-');
    int value = 0;
    if (pos != std::string::npos) {
        const char* first = turn_id.data() + pos + 1;
        const char* last = turn_id.data() + turn_id.size();
        auto result = std::from_chars(first, last, value);
        if (result.ec != std::errc{} || result.ptr != last) value = 0;
    }
    return value;
}

std::string Conversation::topic_id() const {
    auto pos = conversation_id.find('-');
    return pos == std::string::npos ? conversation_id : conversation_id.substr(0, pos);
}

void Qrels::add(const std::string& turn_id, const std::string& doc_id, int grade) {
    if (grade < 0) {
        throw ValidationError("negative relevance grade for " + turn_id + " / " + doc_id);
    }
    judgments_[turn_id][doc_id] = grade;
}

int Qrels::grade(const std::string& turn_id, const std::string& doc_id) const {
    auto turn = judgments_.find(turn_id);
    if (turn == judgments_.end()) return 0;
    auto doc = turn->second.find(doc_id);
    return doc == turn->second.end() ? 0 : doc->second;
}

const std::map<std::string, int>* Qrels::turn_grades(const std::string& turn_id) const {
    auto it = judgments_.find(turn_id);
    return it == judgments_.end() ? nullptr : &it->second;
}

std::vector<std::string> Qrels::assessed_turns() const {
    std::vector<std::string> turns;
    turns.reserve(judgments_.size());
    for (const auto& [turn_id, _] : judgments_) turns.push_back(turn_id);
    return turns;
}

std::size_t Qrels::judgment_count() const {
    std::size_t count = 0;
    for (const auto& [_, grades] : judgments_) count += grades.size();
    return count;
}

void Run::validate(std::size_t max_depth) const {
    for (const auto& [turn_id, ranking] : rankings) {
        if (max_depth > 0 && ranking.size() > max_depth) {
            throw ValidationError("run exceeds depth for turn " + turn_id);
        }
        std::set<std::string> seen;
        for (std::size_t i = 0; i < ranking.size(); ++i) {
            if (!seen.insert(ranking[i].doc_id).second) {
                throw ValidationError("duplicate document '" + ranking[i].doc_id +
                                      "' in turn " + turn_id);
            }
            if (i > 0 && ranking[i].score > ranking[i - 1].score) {
                throw ValidationError("scores increase at rank " + std::to_string(i + 1) +
                                      " of turn " + turn_id);
            }
        }
    }
}

std::string to_string(AnnotationSource source) {
    switch (source) {
        case AnnotationSource::Human: return "human";
        case AnnotationSource::Automatic: return "automatic";
        case AnnotationSource::Llm: return "llm";
    }
    return "human";
}

AnnotationSource annotation_source_from(const std::string& name) {
    if (name == "human") return AnnotationSource::Human;
    if (name == "automatic") return AnnotationSource::Automatic;
    if (name == "llm") return AnnotationSource::Llm;
    throw ValidationError("unknown annotation source '" + name + "'");
}

const std::set<std::string>& AnnotationSet::selection(const std::string& turn_id) const {
    static const std::set<std::string> kEmpty;
    auto it = selections.find(turn_id);
    return it == selections.end() ? kEmpty : it->second;
}

}  // namespace pcir
