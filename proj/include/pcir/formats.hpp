#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcir/types.hpp"

namespace pcir {

// Topics document: JSON list of conversations, each carrying number, title,
// a "ptkb" object (key -> sentence, source order preserved) and "turns".
std::vector<Conversation> parse_topics(std::string_view document);
std::vector<Conversation> load_topics(const std::filesystem::path& path);

// Qrels: whitespace-separated "turn_id 0 doc_id grade" lines.
Qrels parse_qrels(std::string_view document);
Qrels load_qrels(const std::filesystem::path& path);

// Run files: "turn_id Q0 doc_id rank score tag", rank starting at 1.
// Lines starting with '#' are metadata comments and are skipped on parse.
std::string write_run(const Run& run, std::size_t depth, const std::string& header = "");
Run parse_run(std::string_view document);
void save_run(const Run& run, const std::filesystem::path& path, std::size_t depth,
              const std::string& header = "");
Run load_run(const std::filesystem::path& path);

// Document collection: one "doc_id<TAB>text" per line, UTF-8.
void for_each_document(const std::filesystem::path& path,
                       const std::function<void(Document&&)>& sink);
std::vector<Document> load_collection(const std::filesystem::path& path);

// Annotation set file: "turn_id<TAB>source<TAB>comma-separated-keys".
std::string write_annotation_set(const AnnotationSet& set, const std::string& header = "");
AnnotationSet parse_annotation_set(std::string_view document);
void save_annotation_set(const AnnotationSet& set, const std::filesystem::path& path,
                         const std::string& header = "");
AnnotationSet load_annotation_set(const std::filesystem::path& path);

struct DatasetStats {
    std::size_t topics = 0;
    std::size_t conversations = 0;
    std::size_t turns = 0;
    std::size_t assessed_turns = 0;
    std::size_t ptkb_sentences = 0;
    std::size_t ptkb_assessed_turns = 0;
    std::size_t ptkb_assessments = 0;
    std::size_t relevant_ptkb_labels = 0;

    friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats dataset_stats(std::span<const Conversation> conversations, const Qrels& qrels);
std::string render_dataset_stats(const DatasetStats& stats);

// Small file helpers shared across modules.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace pcir
