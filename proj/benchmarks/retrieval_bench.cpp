// Times the parallel retrieval kernels against their serial references on
// synthetic data and checks that both return identical rankings. Sizes are
// overridable: retrieval_bench [docs] [dim] [queries].

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include "pcir/dense.hpp"
#include "pcir/sparse.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Zipf-ish synthetic text: low term ids appear in most documents, the tail
// is rare, which gives the postings lists realistic skew.
std::string synthetic_document(std::mt19937& rng, std::size_t vocabulary, std::size_t length) {
    std::string text;
    for (std::size_t i = 0; i < length; ++i) {
        const double u = static_cast<double>(rng()) / 4294967296.0;
        const auto term =
            static_cast<std::size_t>(static_cast<double>(vocabulary) * u * u * u);
        text += "term" + std::to_string(term) + " ";
    }
    return text;
}

template <typename SearchFn>
double time_queries(const std::vector<std::string>& queries, const SearchFn& search) {
    const auto start = Clock::now();
    for (const auto& query : queries) search(query);
    return ms_since(start);
}

void report(const std::string& kernel, double serial_ms, double parallel_ms, bool identical) {
    std::cout << kernel << "\tserial " << serial_ms << " ms\tparallel " << parallel_ms
              << " ms\tspeedup " << serial_ms / parallel_ms << "\t"
              << (identical ? "results identical" : "RESULTS DIFFER") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t docs = argc > 1 ? std::stoul(argv[1]) : 40000;
    const std::size_t dim = argc > 2 ? std::stoul(argv[2]) : 128;
    const std::size_t query_count = argc > 3 ? std::stoul(argv[3]) : 50;
    const std::size_t depth = 100;
    std::cout << "docs " << docs << ", dim " << dim << ", queries " << query_count
              << ", threads " << omp_get_max_threads() << "\n";

    std::mt19937 rng(1234);

    pcir::sparse::InvertedIndex index;
    for (std::size_t d = 0; d < docs; ++d) {
        index.add("doc" + std::to_string(d), synthetic_document(rng, 20000, 120));
    }
    std::vector<std::string> queries;
    for (std::size_t q = 0; q < query_count; ++q) {
        queries.push_back(synthetic_document(rng, 20000, 8));
    }

    bool sparse_identical = true;
    for (const auto& query : queries) {
        if (index.search(query, depth) != index.search_serial(query, depth)) {
            sparse_identical = false;
        }
    }
    const double sparse_serial = time_queries(
        queries, [&](const std::string& query) { return index.search_serial(query, depth); });
    const double sparse_parallel = time_queries(
        queries, [&](const std::string& query) { return index.search(query, depth); });
    report("bm25", sparse_serial, sparse_parallel, sparse_identical);

    pcir::dense::EmbeddingStore store(dim);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> vector(dim);
    for (std::size_t d = 0; d < docs; ++d) {
        for (auto& value : vector) value = unit(rng);
        store.add("doc" + std::to_string(d), vector);
    }
    std::vector<std::vector<double>> query_vectors(query_count, std::vector<double>(dim));
    for (auto& query : query_vectors) {
        for (auto& value : query) value = unit(rng);
    }

    bool dense_identical = true;
    for (const auto& query : query_vectors) {
        if (store.search(query, depth) != store.search_serial(query, depth)) {
            dense_identical = false;
        }
    }
    auto dense_serial_start = Clock::now();
    for (const auto& query : query_vectors) store.search_serial(query, depth);
    const double dense_serial = ms_since(dense_serial_start);
    auto dense_parallel_start = Clock::now();
    for (const auto& query : query_vectors) store.search(query, depth);
    const double dense_parallel = ms_since(dense_parallel_start);
    report("dense", dense_serial, dense_parallel, dense_identical);

    return (sparse_identical && dense_identical) ? 0 : 1;
}
