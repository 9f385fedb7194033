#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pcir/text.hpp"
#include "pcir/types.hpp"

namespace pcir::sparse {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

struct Posting {
    std::uint32_t doc;  // internal id, insertion order
    std::uint32_t tf;
};

/// BM25 inverted index. Single writer while adding; immutable afterwards and
/// safe for concurrent readers. Postings stay sorted by internal id because
/// documents are appended in id order.
class InvertedIndex {
public:
    explicit InvertedIndex(text::AnalyzerConfig analyzer = {}) : analyzer_(analyzer) {}

    void add(std::string doc_id, std::string_view text);

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const;
    const text::AnalyzerConfig& analyzer() const { return analyzer_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    std::uint32_t term_frequency(const std::string& term, const std::string& doc_id) const;
    std::size_t document_frequency(const std::string& term) const;

    /// Σ over query_terms of idf·tf / (tf + k1·(1−b+b·dl/avgdl)), with
    /// idf = ln(1 + (N−df+0.5)/(df+0.5)); absent terms contribute zero.
    double bm25_score(const std::vector<std::string>& query_terms, const std::string& doc_id,
                      const Bm25Params& params = {}) const;

    /// Top-k documents with positive score, ties broken by ascending doc_id.
    /// The query is analyzed with the index's analyzer. Parallel over the
    /// document space; numerically identical to search_serial.
    std::vector<ScoredDoc> search(std::string_view query, std::size_t k,
                                  const Bm25Params& params = {}) const;

    /// Single-threaded reference with the same contract as search().
    std::vector<ScoredDoc> search_serial(std::string_view query, std::size_t k,
                                         const Bm25Params& params = {}) const;

    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

private:
    std::vector<const std::vector<Posting>*> query_postings(
        const std::vector<std::string>& terms) const;
    std::vector<ScoredDoc> select_top_k(const std::vector<double>& scores, std::size_t k) const;

    text::AnalyzerConfig analyzer_;
    std::unordered_map<std::string, std::uint32_t> term_index_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> doc_index_;
    std::vector<std::uint32_t> doc_lengths_;
    std::uint64_t total_tokens_ = 0;
};

/// Builds an index over a collection file of "doc_id<TAB>text" lines.
InvertedIndex index_collection(const std::filesystem::path& collection,
                               text::AnalyzerConfig analyzer);

}  // namespace pcir::sparse
