#include "pcir/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pcir/formats.hpp"

namespace pcir::sparse {

namespace {

double idf(std::size_t doc_count, std::size_t df) {
    return std::log(1.0 + (static_cast<double>(doc_count) - static_cast<double>(df) + 0.5) /
                              (static_cast<double>(df) + 0.5));
}

double term_weight(std::uint32_t tf, std::uint32_t dl, double avgdl, const Bm25Params& params) {
    double t = static_cast<double>(tf);
    return t / (t + params.k1 * (1.0 - params.b + params.b * static_cast<double>(dl) / avgdl));
}

void write_u32(std::ostream& out, std::uint32_t value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

void write_u64(std::ostream& out, std::uint64_t value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

void write_str(std::ostream& out, const std::string& value) {
    write_u32(out, static_cast<std::uint32_t>(value.size()));
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t value = 0;
    in.read(reinterpret_cast<char*>(&value), sizeof(value));
    return value;
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t value = 0;
    in.read(reinterpret_cast<char*>(&value), sizeof(value));
    return value;
}

std::string read_str(std::istream& in) {
    std::string value(read_u32(in), '\0');
    in.read(value.data(), static_cast<std::streamsize>(value.size()));
    return value;
}

constexpr char kMagic[8] = {'P', 'C', 'I', 'R', 'I', 'D', 'X', '1'};

}  // namespace

void InvertedIndex::add(std::string doc_id, std::string_view text) {
    if (doc_index_.count(doc_id) > 0) {
        throw ValidationError("duplicate doc_id '" + doc_id + "'");
    }
    const auto internal = static_cast<std::uint32_t>(doc_ids_.size());
    std::vector<std::string> terms = text::analyze(text, analyzer_);

    // Count within the document, then append one posting per distinct term.
    std::unordered_map<std::string, std::uint32_t> counts;
    for (const auto& term : terms) ++counts[term];
    for (const auto& [term, tf] : counts) {
        auto [it, inserted] =
            term_index_.try_emplace(term, static_cast<std::uint32_t>(postings_.size()));
        if (inserted) postings_.emplace_back();
        postings_[it->second].push_back({internal, tf});
    }

    doc_index_.emplace(doc_id, internal);
    doc_ids_.push_back(std::move(doc_id));
    doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    total_tokens_ += terms.size();
}

double InvertedIndex::avg_doc_length() const {
    if (doc_ids_.empty()) return 0.0;
    return static_cast<double>(total_tokens_) / static_cast<double>(doc_ids_.size());
}

std::uint32_t InvertedIndex::term_frequency(const std::string& term,
                                            const std::string& doc_id) const {
    auto term_it = term_index_.find(term);
    auto doc_it = doc_index_.find(doc_id);
    if (term_it == term_index_.end() || doc_it == doc_index_.end()) return 0;
    const auto& list = postings_[term_it->second];
    auto it = std::lower_bound(list.begin(), list.end(), doc_it->second,
                               [](const Posting& p, std::uint32_t doc) { return p.doc < doc; });
    if (it == list.end() || it->doc != doc_it->second) return 0;
    return it->tf;
}

std::size_t InvertedIndex::document_frequency(const std::string& term) const {
    auto it = term_index_.find(term);
    return it == term_index_.end() ? 0 : postings_[it->second].size();
}

double InvertedIndex::bm25_score(const std::vector<std::string>& query_terms,
                                 const std::string& doc_id, const Bm25Params& params) const {
    auto doc_it = doc_index_.find(doc_id);
    if (doc_it == doc_index_.end()) {
        throw ValidationError("unknown doc_id '" + doc_id + "'");
    }
    const double avgdl = avg_doc_length();
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto term_it = term_index_.find(term);
        if (term_it == term_index_.end()) continue;
        const auto& list = postings_[term_it->second];
        auto it =
            std::lower_bound(list.begin(), list.end(), doc_it->second,
                             [](const Posting& p, std::uint32_t doc) { return p.doc < doc; });
        if (it == list.end() || it->doc != doc_it->second) continue;
        score += idf(doc_count(), list.size()) *
                 term_weight(it->tf, doc_lengths_[doc_it->second], avgdl, params);
    }
    return score;
}

std::vector<const std::vector<Posting>*> InvertedIndex::query_postings(
    const std::vector<std::string>& terms) const {
    std::vector<const std::vector<Posting>*> lists;
    for (const auto& term : terms) {
        auto it = term_index_.find(term);
        if (it != term_index_.end()) lists.push_back(&postings_[it->second]);
    }
    return lists;
}

std::vector<ScoredDoc> InvertedIndex::select_top_k(const std::vector<double>& scores,
                                                   std::size_t k) const {
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t doc = 0; doc < scores.size(); ++doc) {
        if (scores[doc] > 0.0) candidates.push_back(doc);
    }
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return doc_ids_[a] < doc_ids_[b];
    };
    if (candidates.size() > k) {
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                          candidates.end(), better);
        candidates.resize(k);
    } else {
        std::sort(candidates.begin(), candidates.end(), better);
    }
    std::vector<ScoredDoc> result;
    result.reserve(candidates.size());
    for (auto doc : candidates) result.push_back({doc_ids_[doc], scores[doc]});
    return result;
}

std::vector<ScoredDoc> InvertedIndex::search(std::string_view query, std::size_t k,
                                             const Bm25Params& params) const {
    if (doc_ids_.empty() || k == 0) return {};
    const auto lists = query_postings(text::analyze(query, analyzer_));
    const double avgdl = avg_doc_length();
    const std::size_t n = doc_ids_.size();
    std::vector<double> scores(n, 0.0);

    // Threads own disjoint ranges of the document space; every thread walks
    // the query terms in order, so each document accumulates contributions
    // in exactly the order the serial path uses.
#pragma omp parallel
    {
#ifdef _OPENMP
        const int thread = omp_get_thread_num();
        const int threads = omp_get_num_threads();
#else
        const int thread = 0;
        const int threads = 1;
#endif
        const std::uint32_t lo =
            static_cast<std::uint32_t>(n * static_cast<std::size_t>(thread) /
                                       static_cast<std::size_t>(threads));
        const std::uint32_t hi =
            static_cast<std::uint32_t>(n * (static_cast<std::size_t>(thread) + 1) /
                                       static_cast<std::size_t>(threads));
        for (const auto* list : lists) {
            const double w = idf(n, list->size());
            auto it = std::lower_bound(
                list->begin(), list->end(), lo,
                [](const Posting& p, std::uint32_t doc) { return p.doc < doc; });
            for (; it != list->end() && it->doc < hi; ++it) {
                scores[it->doc] += w * term_weight(it->tf, doc_lengths_[it->doc], avgdl, params);
            }
        }
    }
    return select_top_k(scores, k);
}

std::vector<ScoredDoc> InvertedIndex::search_serial(std::string_view query, std::size_t k,
                                                    const Bm25Params& params) const {
    if (doc_ids_.empty() || k == 0) return {};
    const auto lists = query_postings(text::analyze(query, analyzer_));
    const double avgdl = avg_doc_length();
    std::vector<double> scores(doc_ids_.size(), 0.0);
    for (const auto* list : lists) {
        const double w = idf(doc_count(), list->size());
        for (const auto& posting : *list) {
            scores[posting.doc] +=
                w * term_weight(posting.tf, doc_lengths_[posting.doc], avgdl, params);
        }
    }
    return select_top_k(scores, k);
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    auto parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    auto temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + temp.string());
        out.write(kMagic, sizeof(kMagic));
        out.put(analyzer_.stem ? 1 : 0);
        write_u64(out, doc_ids_.size());
        for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
            write_str(out, doc_ids_[i]);
            write_u32(out, doc_lengths_[i]);
        }
        // Terms serialized in lexicographic order so saves are reproducible.
        std::vector<const std::string*> terms;
        terms.reserve(term_index_.size());
        for (const auto& [term, slot] : term_index_) terms.push_back(&term);
        std::sort(terms.begin(), terms.end(),
                  [](const std::string* a, const std::string* b) { return *a < *b; });
        write_u64(out, terms.size());
        for (const auto* term : terms) {
            write_str(out, *term);
            const auto& list = postings_[term_index_.at(*term)];
            write_u64(out, list.size());
            for (const auto& posting : list) {
                write_u32(out, posting.doc);
                write_u32(out, posting.tf);
            }
        }
        if (!out) throw IoError("failed writing " + temp.string());
    }
    std::filesystem::rename(temp, path);
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[sizeof(kMagic)] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("bad index magic in " + path.string());
    }
    text::AnalyzerConfig analyzer;
    analyzer.stem = in.get() == 1;
    InvertedIndex index(analyzer);
    const std::uint64_t docs = read_u64(in);
    for (std::uint64_t i = 0; i < docs; ++i) {
        std::string doc_id = read_str(in);
        std::uint32_t length = read_u32(in);
        index.doc_index_.emplace(doc_id, static_cast<std::uint32_t>(i));
        index.doc_ids_.push_back(std::move(doc_id));
        index.doc_lengths_.push_back(length);
        index.total_tokens_ += length;
    }
    const std::uint64_t terms = read_u64(in);
    for (std::uint64_t i = 0; i < terms; ++i) {
        std::string term = read_str(in);
        const std::uint64_t count = read_u64(in);
        std::vector<Posting> list(count);
        for (auto& posting : list) {
            posting.doc = read_u32(in);
            posting.tf = read_u32(in);
        }
        index.term_index_.emplace(std::move(term),
                                  static_cast<std::uint32_t>(index.postings_.size()));
        index.postings_.push_back(std::move(list));
    }
    if (!in) throw ParseError("truncated index file " + path.string());
    return index;
}

InvertedIndex index_collection(const std::filesystem::path& collection,
                               text::AnalyzerConfig analyzer) {
    InvertedIndex index(analyzer);
    for_each_document(collection, [&index](Document&& doc) {
        index.add(std::move(doc.doc_id), doc.text);
    });
    return index;
}

}  // namespace pcir::sparse
