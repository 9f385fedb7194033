#include "pcir/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace pcir::eval {

namespace {

std::string format2(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", value);
    return buffer;
}

std::string format6(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", value);
    return buffer;
}

}  // namespace

std::vector<std::string> MetricConfig::metric_names() const {
    std::vector<std::string> names{"mrr"};
    for (int k : ndcg_ks) names.push_back("ndcg@" + std::to_string(k));
    names.push_back("map");
    return names;
}

double mrr(const std::vector<ScoredDoc>& ranking, const std::map<std::string, int>& grades,
           int threshold) {
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        auto it = grades.find(ranking[i].doc_id);
        if (it != grades.end() && it->second >= threshold) {
            return 1.0 / static_cast<double>(i + 1);
        }
    }
    return 0.0;
}

double ndcg_at_k(const std::vector<ScoredDoc>& ranking,
                 const std::map<std::string, int>& grades, int k) {
    double dcg = 0.0;
    const std::size_t depth = std::min<std::size_t>(ranking.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < depth; ++i) {
        auto it = grades.find(ranking[i].doc_id);
        if (it != grades.end() && it->second > 0) {
            dcg += it->second / std::log2(static_cast<double>(i + 2));
        }
    }
    std::vector<int> ideal;
    ideal.reserve(grades.size());
    for (const auto& [doc, grade] : grades) ideal.push_back(grade);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(ideal.size(), static_cast<std::size_t>(k));
         ++i) {
        idcg += ideal[i] / std::log2(static_cast<double>(i + 2));
    }
    if (idcg == 0.0) return 0.0;
    return dcg / idcg;
}

std::optional<double> average_precision(const std::vector<ScoredDoc>& ranking,
                                        const std::map<std::string, int>& grades,
                                        int threshold) {
    std::size_t total_relevant = 0;
    for (const auto& [doc, grade] : grades) {
        if (grade >= threshold) ++total_relevant;
    }
    if (total_relevant == 0) return std::nullopt;
    std::size_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        auto it = grades.find(ranking[i].doc_id);
        if (it != grades.end() && it->second >= threshold) {
            ++hits;
            precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return precision_sum / static_cast<double>(total_relevant);
}

MetricReport evaluate_run(const Run& run, const Qrels& qrels, const MetricConfig& config,
                          const std::set<std::string>* turn_filter) {
    MetricReport report;
    report.metric_names = config.metric_names();

    static const std::vector<ScoredDoc> kEmptyRanking;
    std::map<std::string, std::vector<double>> collected;
    for (const auto& [turn_id, grades] : qrels.all()) {
        if (turn_filter != nullptr && turn_filter->count(turn_id) == 0) continue;
        auto run_it = run.rankings.find(turn_id);
        const auto& ranking = run_it == run.rankings.end() ? kEmptyRanking : run_it->second;

        auto& values = report.per_turn[turn_id];
        values["mrr"] = mrr(ranking, grades, config.relevance_threshold);
        for (int k : config.ndcg_ks) {
            values["ndcg@" + std::to_string(k)] = ndcg_at_k(ranking, grades, k);
        }
        if (auto ap = average_precision(ranking, grades, config.relevance_threshold)) {
            values["map"] = *ap;
        }
        for (const auto& [metric, value] : values) collected[metric].push_back(value);
        ++report.evaluated_turn_count;
    }
    if (report.evaluated_turn_count == 0) {
        throw ValidationError("no evaluable turns: the qrels and filter select nothing");
    }
    for (const auto& [metric, values] : collected) {
        double sum = 0.0;
        for (double v : values) sum += v;
        report.aggregates[metric] = sum / static_cast<double>(values.size());
    }
    return report;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw ValidationError("paired t-test needs equally long value lists (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                              ")");
    }
    if (a.size() < 2) {
        throw ValidationError("paired t-test needs at least two pairs");
    }
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double variance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double centered = (a[i] - b[i]) - mean;
        variance += centered * centered;
    }
    variance /= static_cast<double>(n - 1);

    TTestResult result;
    result.degrees_of_freedom = n - 1;
    if (variance == 0.0) {
        if (mean == 0.0) {
            result.t_statistic = 0.0;  // identical inputs
            result.p_value = 1.0;
        } else {
            result.t_statistic = mean > 0.0 ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity();
            result.p_value = 0.0;
            result.degenerate = true;
        }
    } else {
        result.t_statistic = mean / std::sqrt(variance / static_cast<double>(n));
        boost::math::students_t distribution(static_cast<double>(n - 1));
        result.p_value =
            2.0 * boost::math::cdf(boost::math::complement(distribution,
                                                           std::fabs(result.t_statistic)));
    }
    result.significant_at_05 = result.p_value < 0.05;
    return result;
}

MethodComparison compare_methods(const std::map<std::string, MetricReport>& reports,
                                 const std::string& baseline) {
    if (reports.empty()) throw ValidationError("compare_methods needs at least one report");
    if (reports.count(baseline) == 0) {
        throw ValidationError("baseline method '" + baseline + "' not among the reports");
    }

    // All reports must cover the same turns.
    const auto& reference = reports.begin()->second;
    for (const auto& [method, report] : reports) {
        if (report.per_turn.size() == reference.per_turn.size() &&
            std::equal(report.per_turn.begin(), report.per_turn.end(),
                       reference.per_turn.begin(),
                       [](const auto& x, const auto& y) { return x.first == y.first; })) {
            continue;
        }
        std::string differing;
        for (const auto& [turn_id, values] : report.per_turn) {
            if (reference.per_turn.count(turn_id) == 0) differing += " " + turn_id;
        }
        for (const auto& [turn_id, values] : reference.per_turn) {
            if (report.per_turn.count(turn_id) == 0) differing += " " + turn_id;
        }
        throw ValidationError("method '" + method + "' evaluates different turns than '" +
                              reports.begin()->first + "':" + differing);
    }

    MethodComparison comparison;
    comparison.baseline = baseline;
    comparison.metric_names = reference.metric_names;
    comparison.methods.push_back(baseline);
    for (const auto& [method, report] : reports) {
        if (method != baseline) comparison.methods.push_back(method);
    }
    for (const auto& [method, report] : reports) {
        comparison.values[method] = report.aggregates;
    }

    for (const auto& metric : comparison.metric_names) {
        std::string best;
        double best_value = -1.0;
        for (const auto& [method, report] : reports) {
            auto it = report.aggregates.find(metric);
            if (it != report.aggregates.end() && it->second > best_value) {
                best_value = it->second;
                best = method;
            }
        }
        if (best.empty()) continue;
        comparison.best_method[metric] = best;

        // Align per-turn values of the best method against every other one.
        const auto& best_report = reports.at(best);
        for (const auto& [method, report] : reports) {
            if (method == best) continue;
            std::vector<double> best_values;
            std::vector<double> other_values;
            for (const auto& [turn_id, values] : best_report.per_turn) {
                auto bv = values.find(metric);
                auto other_turn = report.per_turn.find(turn_id);
                if (bv == values.end() || other_turn == report.per_turn.end()) continue;
                auto ov = other_turn->second.find(metric);
                if (ov == other_turn->second.end()) continue;
                best_values.push_back(bv->second);
                other_values.push_back(ov->second);
            }
            if (best_values.size() >= 2) {
                comparison.tests_vs_best[metric][method] =
                    paired_t_test(best_values, other_values);
            }
        }
    }
    return comparison;
}

std::string render_report(const MetricReport& report, const std::string& header) {
    std::string out;
    if (!header.empty()) out += "# " + header + "\n";
    for (const auto& [turn_id, values] : report.per_turn) {
        for (const auto& metric : report.metric_names) {
            auto it = values.find(metric);
            if (it == values.end()) continue;
            out += turn_id + "\t" + metric + "\t" + format6(it->second) + "\n";
        }
    }
    out += "evaluated_turns\t" + std::to_string(report.evaluated_turn_count) + "\n";
    for (const auto& metric : report.metric_names) {
        auto it = report.aggregates.find(metric);
        if (it == report.aggregates.end()) continue;
        out += "aggregate\t" + metric + "\t" + format2(it->second * 100.0) + "\n";
    }
    return out;
}

std::string render_comparison(const MethodComparison& comparison, const std::string& header) {
    std::string out;
    if (!header.empty()) out += "# " + header + "\n";
    out += "# best per metric marked '*'; methods the best beats at p<0.05 marked '+'\n";
    out += "method";
    for (const auto& metric : comparison.metric_names) out += "\t" + metric;
    out += "\n";
    for (const auto& method : comparison.methods) {
        out += method;
        for (const auto& metric : comparison.metric_names) {
            out += "\t";
            auto values_it = comparison.values.find(method);
            auto value_it = values_it->second.find(metric);
            if (value_it == values_it->second.end()) {
                out += "-";
                continue;
            }
            out += format2(value_it->second * 100.0);
            auto best_it = comparison.best_method.find(metric);
            if (best_it != comparison.best_method.end() && best_it->second == method) {
                out += "*";
            } else {
                auto metric_tests = comparison.tests_vs_best.find(metric);
                if (metric_tests != comparison.tests_vs_best.end()) {
                    auto test_it = metric_tests->second.find(method);
                    if (test_it != metric_tests->second.end() &&
                        test_it->second.significant_at_05) {
                        out += "+";
                    }
                }
            }
        }
        out += "\n";
    }
    return out;
}

std::string render_plot_data(const std::map<std::string, MetricReport>& reports) {
    std::string out = "method\tmetric\tvalue\n";
    for (const auto& [method, report] : reports) {
        for (const auto& metric : report.metric_names) {
            auto it = report.aggregates.find(metric);
            if (it == report.aggregates.end()) continue;
            out += method + "\t" + metric + "\t" + format2(it->second * 100.0) + "\n";
        }
    }
    return out;
}

}  // namespace pcir::eval
