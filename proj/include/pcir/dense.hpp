#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcir/types.hpp"

namespace pcir::dense {

/// Fixed-dimension document vectors with exact inner-product search.
/// Single writer while adding; immutable afterwards and safe for concurrent
/// readers.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dimension);

    void add(std::string doc_id, const std::vector<double>& vector);

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return doc_ids_.size(); }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const double* vector(const std::string& doc_id) const;  // nullptr when absent

    /// Exact top-k by inner product over all stored vectors, ties broken by
    /// ascending doc_id; k past the store size returns every document.
    /// Parallel over documents; numerically identical to search_serial.
    std::vector<ScoredDoc> search(const std::vector<double>& query, std::size_t k) const;

    /// Single-threaded reference with the same contract as search().
    std::vector<ScoredDoc> search_serial(const std::vector<double>& query, std::size_t k) const;

    void save(const std::filesystem::path& path) const;
    static EmbeddingStore load(const std::filesystem::path& path);

private:
    std::vector<ScoredDoc> select_top_k(const std::vector<double>& scores, std::size_t k) const;

    std::size_t dimension_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> doc_index_;
    std::vector<double> data_;  // row-major, size() * dimension_
};

/// Parses a "doc_id<TAB>v1,v2,...,vD" vectors file; the first line fixes D.
EmbeddingStore load_vectors_file(const std::filesystem::path& path);
void save_vectors_file(const EmbeddingStore& store, const std::filesystem::path& path);

}  // namespace pcir::dense
