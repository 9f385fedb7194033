#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcir/types.hpp"

namespace pcir::eval {

struct MetricConfig {
    int relevance_threshold = 1;  // binary cutoff for MRR and MAP
    std::vector<int> ndcg_ks = {3, 5};

    std::vector<std::string> metric_names() const;
};

/// 1/rank of the first document with grade >= threshold; 0 on a miss.
double mrr(const std::vector<ScoredDoc>& ranking, const std::map<std::string, int>& grades,
           int threshold);

/// DCG with linear gain and log2(i+1) discount over the top k, divided by
/// the ideal DCG from the judged grades; 0 when the ideal is empty.
double ndcg_at_k(const std::vector<ScoredDoc>& ranking,
                 const std::map<std::string, int>& grades, int k);

/// Mean precision at relevant ranks over the total number of relevant
/// documents in the judgments; nullopt when the turn has none (the turn is
/// then excluded from MAP aggregation).
std::optional<double> average_precision(const std::vector<ScoredDoc>& ranking,
                                        const std::map<std::string, int>& grades,
                                        int threshold);

struct MetricReport {
    std::vector<std::string> metric_names;  // canonical rendering order
    std::map<std::string, std::map<std::string, double>> per_turn;
    std::map<std::string, double> aggregates;  // arithmetic means over evaluated turns
    std::size_t evaluated_turn_count = 0;
};

/// Scores every assessed turn (optionally restricted to a filter); turns
/// missing from the run contribute zeros rather than being skipped.
MetricReport evaluate_run(const Run& run, const Qrels& qrels, const MetricConfig& config,
                          const std::set<std::string>* turn_filter = nullptr);

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    std::size_t degrees_of_freedom = 0;
    bool significant_at_05 = false;
    bool degenerate = false;  // zero variance with nonzero mean difference
};

/// Two-tailed paired t-test on aligned per-turn values, df = n-1.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct MethodComparison {
    std::string baseline;
    std::vector<std::string> methods;       // input order, baseline first
    std::vector<std::string> metric_names;  // canonical order
    std::map<std::string, std::map<std::string, double>> values;  // method -> metric -> mean
    std::map<std::string, std::string> best_method;               // metric -> method
    // metric -> method -> test of the best method against this one.
    std::map<std::string, std::map<std::string, TTestResult>> tests_vs_best;
};

MethodComparison compare_methods(const std::map<std::string, MetricReport>& reports,
                                 const std::string& baseline);

std::string render_report(const MetricReport& report, const std::string& header = "");
std::string render_comparison(const MethodComparison& comparison, const std::string& header = "");

/// Per-method aggregates as tab-separated values for external plotting.
std::string render_plot_data(const std::map<std::string, MetricReport>& reports);

}  // namespace pcir::eval
