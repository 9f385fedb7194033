#include "pcir/dense.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pcir/formats.hpp"

namespace pcir::dense {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'I', 'R', 'V', 'E', 'C', '1'};

double dot(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingStore::add(std::string doc_id, const std::vector<double>& vector) {
    if (vector.size() != dimension_) {
        throw ValidationError("vector for '" + doc_id + "' has dimension " +
                              std::to_string(vector.size()) + ", store expects " +
                              std::to_string(dimension_));
    }
    for (double v : vector) {
        if (!std::isfinite(v)) {
            throw ValidationError("non-finite component in vector for '" + doc_id + "'");
        }
    }
    if (doc_index_.count(doc_id) > 0) {
        throw ValidationError("duplicate doc_id '" + doc_id + "'");
    }
    doc_index_.emplace(doc_id, static_cast<std::uint32_t>(doc_ids_.size()));
    doc_ids_.push_back(std::move(doc_id));
    data_.insert(data_.end(), vector.begin(), vector.end());
}

const double* EmbeddingStore::vector(const std::string& doc_id) const {
    auto it = doc_index_.find(doc_id);
    if (it == doc_index_.end()) return nullptr;
    return data_.data() + static_cast<std::size_t>(it->second) * dimension_;
}

std::vector<ScoredDoc> EmbeddingStore::select_top_k(const std::vector<double>& scores,
                                                    std::size_t k) const {
    std::vector<std::uint32_t> order(doc_ids_.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return doc_ids_[a] < doc_ids_[b];
    };
    if (order.size() > k) {
        std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                          better);
        order.resize(k);
    } else {
        std::sort(order.begin(), order.end(), better);
    }
    std::vector<ScoredDoc> result;
    result.reserve(order.size());
    for (auto doc : order) result.push_back({doc_ids_[doc], scores[doc]});
    return result;
}

std::vector<ScoredDoc> EmbeddingStore::search(const std::vector<double>& query,
                                              std::size_t k) const {
    if (query.size() != dimension_) {
        throw ValidationError("query has dimension " + std::to_string(query.size()) +
                              ", store expects " + std::to_string(dimension_));
    }
    if (doc_ids_.empty() || k == 0) return {};
    std::vector<double> scores(doc_ids_.size());
    const long n = static_cast<long>(doc_ids_.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        scores[static_cast<std::size_t>(i)] =
            dot(data_.data() + static_cast<std::size_t>(i) * dimension_, query.data(),
                dimension_);
    }
    return select_top_k(scores, k);
}

std::vector<ScoredDoc> EmbeddingStore::search_serial(const std::vector<double>& query,
                                                     std::size_t k) const {
    if (query.size() != dimension_) {
        throw ValidationError("query has dimension " + std::to_string(query.size()) +
                              ", store expects " + std::to_string(dimension_));
    }
    if (doc_ids_.empty() || k == 0) return {};
    std::vector<double> scores(doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        scores[i] = dot(data_.data() + i * dimension_, query.data(), dimension_);
    }
    return select_top_k(scores, k);
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
    auto parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    auto temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + temp.string());
        out.write(kMagic, sizeof(kMagic));
        std::uint64_t dim = dimension_;
        std::uint64_t count = doc_ids_.size();
        out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        out.write(reinterpret_cast<const char*>(&count), sizeof(count));
        for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
            std::uint32_t length = static_cast<std::uint32_t>(doc_ids_[i].size());
            out.write(reinterpret_cast<const char*>(&length), sizeof(length));
            out.write(doc_ids_[i].data(), length);
            out.write(reinterpret_cast<const char*>(data_.data() + i * dimension_),
                      static_cast<std::streamsize>(dimension_ * sizeof(double)));
        }
        if (!out) throw IoError("failed writing " + temp.string());
    }
    std::filesystem::rename(temp, path);
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[sizeof(kMagic)] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("bad vector store magic in " + path.string());
    }
    std::uint64_t dim = 0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || dim == 0) throw ParseError("corrupt vector store header in " + path.string());
    EmbeddingStore store(static_cast<std::size_t>(dim));
    std::vector<double> vector(static_cast<std::size_t>(dim));
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t length = 0;
        in.read(reinterpret_cast<char*>(&length), sizeof(length));
        std::string doc_id(length, '\0');
        in.read(doc_id.data(), length);
        in.read(reinterpret_cast<char*>(vector.data()),
                static_cast<std::streamsize>(vector.size() * sizeof(double)));
        if (!in) throw ParseError("truncated vector store " + path.string());
        store.add(std::move(doc_id), vector);
    }
    return store;
}

EmbeddingStore load_vectors_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t line_number = 0;
    std::size_t dimension = 0;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ParseError("vectors line " + std::to_string(line_number) +
                             ": expected doc_id<TAB>components");
        }
        std::vector<double> vector;
        std::size_t begin = tab + 1;
        while (begin <= line.size()) {
            auto end = line.find(',', begin);
            if (end == std::string::npos) end = line.size();
            try {
                vector.push_back(std::stod(line.substr(begin, end - begin)));
            } catch (const std::exception&) {
                throw ParseError("vectors line " + std::to_string(line_number) +
                                 ": bad component '" + line.substr(begin, end - begin) + "'");
            }
            if (end == line.size()) break;
            begin = end + 1;
        }
        if (dimension == 0) {
            dimension = vector.size();
            if (dimension == 0) {
                throw ParseError("vectors line " + std::to_string(line_number) +
                                 ": empty vector");
            }
        } else if (vector.size() != dimension) {
            throw ParseError("vectors line " + std::to_string(line_number) + ": dimension " +
                             std::to_string(vector.size()) + " differs from " +
                             std::to_string(dimension));
        }
        rows.emplace_back(line.substr(0, tab), std::move(vector));
    }
    if (rows.empty()) throw ParseError("vectors file " + path.string() + " is empty");
    EmbeddingStore store(dimension);
    for (auto& [doc_id, vector] : rows) store.add(std::move(doc_id), vector);
    return store;
}

void save_vectors_file(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::string out;
    char buffer[32];
    for (const auto& doc_id : store.doc_ids()) {
        out += doc_id;
        out += '\t';
        const double* v = store.vector(doc_id);
        for (std::size_t d = 0; d < store.dimension(); ++d) {
            if (d > 0) out += ',';
            std::snprintf(buffer, sizeof(buffer), "%.17g", v[d]);
            out += buffer;
        }
        out += '\n';
    }
    write_file_atomic(path, out);
}

}  // namespace pcir::dense
