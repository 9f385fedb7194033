#include "pcir/cli.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>
#include <utility>

#include "pcir/annotation.hpp"
#include "pcir/chat_client.hpp"
#include "pcir/dense.hpp"
#include "pcir/embedding.hpp"
#include "pcir/errors.hpp"
#include "pcir/evaluation.hpp"
#include "pcir/formats.hpp"
#include "pcir/sparse.hpp"

namespace pcir::cli {

namespace fs = std::filesystem;

namespace {

void note(std::ostream& out, const char* verb, const Layout& layout, const fs::path& path) {
    out << verb << ' ' << path.lexically_relative(layout.root).generic_string() << '\n';
}

std::string first_line(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
}

fs::path meta_of(fs::path path) {
    path += ".meta";
    return path;
}

/// Binary artifacts carry their stamp in a sidecar that also pins the
/// artifact's digest, so a stale or truncated file is never reused.
bool binary_current(const fs::path& path, const std::string& header) {
    const fs::path meta = meta_of(path);
    if (!fs::exists(path) || !fs::exists(meta)) return false;
    const std::string expected_prefix = "# " + header + " sha256=";
    std::string line = first_line(meta);
    if (line.rfind(expected_prefix, 0) != 0) return false;
    return line.substr(expected_prefix.size()) == llm::sha256_hex(read_file(path));
}

void write_binary_meta(const fs::path& path, const std::string& header) {
    write_file_atomic(meta_of(path),
                      "# " + header + " sha256=" + llm::sha256_hex(read_file(path)) + "\n");
}

/// Upstream artifact gate: it must exist and must have been produced under
/// the current effective config, otherwise the caller is told which command
/// to run.
void require_current(const fs::path& path, const std::string& header_prefix,
                     const std::string& what, const std::string& command) {
    if (!fs::exists(path)) {
        throw ConfigError("missing " + what + " at " + path.string() + "; run the '" + command +
                          "' command first");
    }
    if (first_line(path).rfind("# " + header_prefix, 0) != 0) {
        throw ConfigError(what + " at " + path.string() +
                          " was produced under a different config; rerun the '" + command +
                          "' command");
    }
}

void require_binary_current(const fs::path& path, const std::string& header,
                            const std::string& what, const std::string& command) {
    if (!fs::exists(path)) {
        throw ConfigError("missing " + what + " at " + path.string() + "; run the '" + command +
                          "' command first");
    }
    if (!binary_current(path, header)) {
        throw ConfigError(what + " at " + path.string() +
                          " was produced under a different config; rerun the '" + command +
                          "' command");
    }
}

/// Runs body(0..count) across up to `workers` threads pulling indices from a
/// shared counter. Results must land at their own index for the output to be
/// order-independent; the first exception wins and is rethrown after join.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& body) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto drain = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t spawn = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    for (std::size_t t = 0; t < spawn; ++t) threads.emplace_back(drain);
    for (auto& thread : threads) thread.join();
    if (error) std::rethrow_exception(error);
}

std::vector<std::string> all_turn_ids(const std::vector<Conversation>& conversations) {
    std::vector<std::string> ids;
    for (const auto& conversation : conversations) {
        for (const auto& turn : conversation.turns) ids.push_back(turn.turn_id);
    }
    return ids;
}

/// The retrieval-impact probe and its sparse scorer, shared by the test and
/// train splits of the automatic annotation command.
std::pair<AnnotationSet, std::vector<annot::ImpactRecord>> annotate_split(
    const ExperimentConfig& config, const std::vector<Conversation>& conversations,
    const Qrels& qrels, reform::Reformulator& reformulator, const sparse::InvertedIndex& index) {
    annot::ReformulateFn reformulate = [&](const ConversationTurn& turn,
                                           const std::vector<ConversationTurn>& history,
                                           const Ptkb& ptkb,
                                           const std::set<std::string>& subset) {
        return reformulator.reformulate_selected(turn, history, ptkb, subset,
                                                 reform::Strategy::Automatic, 0, {});
    };
    annot::RetrieveFn retrieve = [&](const std::string& query, std::size_t depth) {
        return index.search(query, depth, config.bm25);
    };
    return annot::automatic_annotate_all(conversations, reformulate, retrieve, qrels,
                                         annot::make_metric(config.impact_metric),
                                         config.impact_depth);
}

}  // namespace

fs::path Layout::annotation_file(AnnotationSource source) const {
    return annotations_dir() / (to_string(source) + ".tsv");
}

fs::path Layout::llm_notes_file() const { return annotations_dir() / "llm_notes.tsv"; }

fs::path Layout::impact_file() const { return annotations_dir() / "automatic_impact.tsv"; }

fs::path Layout::train_annotation_file() const {
    return annotations_dir() / "automatic_train.tsv";
}

fs::path Layout::train_impact_file() const {
    return annotations_dir() / "automatic_train_impact.tsv";
}

fs::path Layout::reformulation_file(reform::Strategy strategy, int shots) const {
    return reformulations_dir() /
           (reform::to_string(strategy) + "-" + std::to_string(shots) + ".jsonl");
}

fs::path Layout::run_file(const std::string& tag) const { return runs_dir() / (tag + ".run"); }

fs::path Layout::reports_dir(bool subset) const {
    return subset ? root / "reports" / "subset" : root / "reports";
}

fs::path Layout::report_file(const std::string& tag, bool subset) const {
    return reports_dir(subset) / (tag + ".tsv");
}

fs::path Layout::comparison_file(bool subset) const {
    return reports_dir(subset) / "comparison.tsv";
}

fs::path Layout::plot_file(bool subset) const { return reports_dir(subset) / "plot_data.tsv"; }

fs::path Layout::overlap_file(AnnotationSource a, AnnotationSource b) const {
    return reports_dir(false) / ("overlap_" + to_string(a) + "_vs_" + to_string(b) + ".tsv");
}

std::string run_tag(reform::Strategy strategy, int shots, reform::RetrieverKind kind) {
    return reform::to_string(strategy) + "-" + std::to_string(shots) + "-" +
           reform::to_string(kind);
}

std::string artifact_header(const ExperimentConfig& config, const std::string& extras) {
    std::string header = "config=" + config.hash() + " seed=" + std::to_string(config.seed);
    if (!extras.empty()) header += " " + extras;
    return header;
}

bool artifact_current(const fs::path& path, const std::string& header) {
    return fs::exists(path) && first_line(path) == "# " + header;
}

void cmd_stats(const ExperimentConfig& config, std::ostream& out) {
    Layout layout{config.output_dir};
    const auto conversations = load_topics(config.topics);
    const auto qrels = load_qrels(config.qrels);
    const std::string table = render_dataset_stats(dataset_stats(conversations, qrels));
    fs::create_directories(layout.root);
    write_file_atomic(layout.stats_file(), "# " + artifact_header(config) + "\n" + table);
    out << table;
    note(out, "wrote", layout, layout.stats_file());
}

void cmd_index(const ExperimentConfig& config, std::ostream& out) {
    Layout layout{config.output_dir};
    const std::string header = artifact_header(config);
    if (binary_current(layout.index_file(), header)) {
        note(out, "kept", layout, layout.index_file());
        return;
    }
    const auto index = sparse::index_collection(config.collection, {.stem = config.stemming});
    index.save(layout.index_file());
    write_binary_meta(layout.index_file(), header);
    note(out, "wrote", layout, layout.index_file());
}

void cmd_embed(const ExperimentConfig& config, std::ostream& out) {
    Layout layout{config.output_dir};
    const std::string header = artifact_header(config);
    if (binary_current(layout.vectors_file(), header)) {
        note(out, "kept", layout, layout.vectors_file());
        return;
    }
    if (!config.vectors.empty()) {
        const auto store = dense::load_vectors_file(config.vectors);
        store.save(layout.vectors_file());
    } else {
        if (config.embedding_endpoint.empty()) {
            throw ConfigError(
                "config: paths.vectors or gateway.embedding_endpoint needed to embed documents");
        }
        std::vector<std::string> ids;
        std::vector<std::string> texts;
        for_each_document(config.collection, [&](Document&& document) {
            ids.push_back(std::move(document.doc_id));
            texts.push_back(std::move(document.text));
        });
        if (ids.empty()) {
            throw ValidationError("collection is empty: " + config.collection.string());
        }
        llm::EmbeddingClient client(config.embedding_config());
        const auto vectors = client.embed(texts);
        dense::EmbeddingStore store(vectors.front().size());
        for (std::size_t i = 0; i < ids.size(); ++i) store.add(ids[i], vectors[i]);
        store.save(layout.vectors_file());
    }
    write_binary_meta(layout.vectors_file(), header);
    note(out, "wrote", layout, layout.vectors_file());
}

void cmd_annotate(const ExperimentConfig& config, AnnotationSource source, std::ostream& out) {
    Layout layout{config.output_dir};
    const std::string source_name = to_string(source);
    const std::string header = artifact_header(config, "source=" + source_name);
    const fs::path target = layout.annotation_file(source);

    switch (source) {
        case AnnotationSource::Human: {
            if (artifact_current(target, header)) {
                note(out, "kept", layout, target);
                return;
            }
            const auto set = annot::ingest_human(load_topics(config.topics));
            save_annotation_set(set, target, header);
            note(out, "wrote", layout, target);
            return;
        }
        case AnnotationSource::Llm: {
            const std::string notes_header = artifact_header(config, "source=llm kind=notes");
            if (artifact_current(target, header) &&
                artifact_current(layout.llm_notes_file(), notes_header)) {
                note(out, "kept", layout, target);
                note(out, "kept", layout, layout.llm_notes_file());
                return;
            }
            llm::ChatClient client(config.gateway_config());
            annot::LlmAnnotator annotator(client, config.annotator_config());
            const auto set = annotator.annotate_all(load_topics(config.topics));
            save_annotation_set(set, target, header);
            std::string notes = "# " + notes_header + "\n";
            for (const auto& [turn_id, text] : set.notes) {
                if (!text.empty()) notes += turn_id + "\t" + text + "\n";
            }
            write_file_atomic(layout.llm_notes_file(), notes);
            note(out, "wrote", layout, target);
            note(out, "wrote", layout, layout.llm_notes_file());
            return;
        }
        case AnnotationSource::Automatic: {
            const std::string impact_header =
                artifact_header(config, "source=automatic kind=impact");
            const std::string train_header =
                artifact_header(config, "source=automatic split=train");
            const std::string train_impact_header =
                artifact_header(config, "source=automatic split=train kind=impact");
            const bool with_train = !config.train_topics.empty();
            bool current = artifact_current(target, header) &&
                           artifact_current(layout.impact_file(), impact_header);
            if (with_train) {
                current = current &&
                          artifact_current(layout.train_annotation_file(), train_header) &&
                          artifact_current(layout.train_impact_file(), train_impact_header);
            }
            if (current) {
                note(out, "kept", layout, target);
                note(out, "kept", layout, layout.impact_file());
                if (with_train) {
                    note(out, "kept", layout, layout.train_annotation_file());
                    note(out, "kept", layout, layout.train_impact_file());
                }
                return;
            }
            require_binary_current(layout.index_file(), artifact_header(config),
                                   "index artifact", "index");
            const auto index = sparse::InvertedIndex::load(layout.index_file());
            llm::ChatClient client(config.gateway_config());
            reform::Reformulator reformulator(client, config.reformulator_config());

            const auto [set, records] =
                annotate_split(config, load_topics(config.topics), load_qrels(config.qrels),
                               reformulator, index);
            save_annotation_set(set, target, header);
            write_file_atomic(layout.impact_file(),
                              annot::render_impact_audit(records, impact_header));
            note(out, "wrote", layout, target);
            note(out, "wrote", layout, layout.impact_file());

            if (with_train) {
                const auto [train_set, train_records] =
                    annotate_split(config, load_topics(config.train_topics),
                                   load_qrels(config.train_qrels), reformulator, index);
                save_annotation_set(train_set, layout.train_annotation_file(), train_header);
                write_file_atomic(layout.train_impact_file(),
                                  annot::render_impact_audit(train_records, train_impact_header));
                note(out, "wrote", layout, layout.train_annotation_file());
                note(out, "wrote", layout, layout.train_impact_file());
            }
            return;
        }
    }
    throw ValidationError("unhandled annotation source");
}

void cmd_reformulate(const ExperimentConfig& config, reform::Strategy strategy, int shots,
                     std::ostream& out) {
    Layout layout{config.output_dir};
    const std::string header = artifact_header(config, "strategy=" + reform::to_string(strategy) +
                                                           " shots=" + std::to_string(shots));
    const fs::path target = layout.reformulation_file(strategy, shots);
    if (artifact_current(target, header)) {
        note(out, "kept", layout, target);
        return;
    }

    AnnotationSet annotations;
    const AnnotationSet* annotations_ptr = nullptr;
    if (reform::uses_annotation(strategy)) {
        const AnnotationSource source = reform::annotation_source_for(strategy);
        const fs::path path = layout.annotation_file(source);
        require_current(path, artifact_header(config, "source=" + to_string(source)),
                        to_string(source) + " annotations", "annotate --source " +
                                                                to_string(source));
        annotations = load_annotation_set(path);
        annotations_ptr = &annotations;
    }

    std::vector<reform::Demonstration> demos;
    if (shots > 0) {
        require_current(layout.train_annotation_file(),
                        artifact_header(config, "source=automatic split=train"),
                        "training annotations", "annotate --source automatic");
        demos = reform::build_demonstrations(load_topics(config.train_topics),
                                             load_annotation_set(layout.train_annotation_file()),
                                             static_cast<std::size_t>(shots), config.seed);
    }

    const auto conversations = load_topics(config.topics);
    struct Job {
        const Conversation* conversation;
        std::size_t turn;
    };
    std::vector<Job> jobs;
    for (const auto& conversation : conversations) {
        for (std::size_t i = 0; i < conversation.turns.size(); ++i) {
            jobs.push_back({&conversation, i});
        }
    }

    llm::ChatClient client(config.gateway_config());
    reform::Reformulator reformulator(client, config.reformulator_config());
    std::vector<reform::ReformulatedQuery> results(jobs.size());
    parallel_for(jobs.size(), config.parallelism, [&](std::size_t i) {
        const auto& [conversation, turn] = jobs[i];
        const std::vector<ConversationTurn> history(conversation->turns.begin(),
                                                    conversation->turns.begin() +
                                                        static_cast<std::ptrdiff_t>(turn));
        results[i] = reformulator.reformulate(strategy, conversation->turns[turn], history,
                                              conversation->ptkb, annotations_ptr, shots, demos);
    });

    reform::save_reformulations(results, target, header);
    note(out, "wrote", layout, target);
}

void cmd_retrieve(const ExperimentConfig& config, const fs::path& reformulations,
                  reform::RetrieverKind kind, std::ostream& out) {
    Layout layout{config.output_dir};
    require_current(reformulations, artifact_header(config, "strategy="), "reformulations",
                    "reformulate");
    const auto records = reform::load_reformulations(reformulations);
    if (records.empty()) {
        throw ValidationError("no reformulations in " + reformulations.string());
    }
    for (const auto& record : records) {
        if (record.strategy != records.front().strategy ||
            record.shots != records.front().shots) {
            throw ValidationError("mixed strategies or shot counts in " +
                                  reformulations.string());
        }
    }
    const std::string tag = run_tag(records.front().strategy, records.front().shots, kind);
    const std::string header = artifact_header(config, "tag=" + tag);
    const fs::path target = layout.run_file(tag);
    if (artifact_current(target, header)) {
        note(out, "kept", layout, target);
        return;
    }

    Run run;
    run.tag = tag;
    if (kind == reform::RetrieverKind::Sparse) {
        require_binary_current(layout.index_file(), artifact_header(config), "index artifact",
                               "index");
        const auto index = sparse::InvertedIndex::load(layout.index_file());
        for (const auto& record : records) {
            auto ranking =
                index.search(reform::assemble_search_query(record, kind), config.depth,
                             config.bm25);
            if (!ranking.empty()) run.rankings.emplace(record.turn_id, std::move(ranking));
        }
    } else {
        require_binary_current(layout.vectors_file(), artifact_header(config),
                               "vectors artifact", "embed");
        const auto store = dense::EmbeddingStore::load(layout.vectors_file());
        llm::EmbeddingClient client(config.embedding_config());
        std::vector<std::string> queries;
        queries.reserve(records.size());
        for (const auto& record : records) {
            queries.push_back(reform::assemble_search_query(record, kind));
        }
        const auto vectors = client.embed(queries);
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto ranking = store.search(vectors[i], config.depth);
            if (!ranking.empty()) run.rankings.emplace(records[i].turn_id, std::move(ranking));
        }
    }
    save_run(run, target, config.depth, header);
    note(out, "wrote", layout, target);
}

void cmd_evaluate(const ExperimentConfig& config, const std::vector<fs::path>& runs,
                  bool subset, const std::string& baseline, std::ostream& out) {
    if (runs.empty()) throw ValidationError("no run files given");
    Layout layout{config.output_dir};
    const auto qrels = load_qrels(config.qrels);

    std::set<std::string> subset_turns;
    const std::set<std::string>* filter = nullptr;
    if (subset) {
        const fs::path automatic = layout.annotation_file(AnnotationSource::Automatic);
        require_current(automatic, artifact_header(config, "source=automatic"),
                        "automatic annotations", "annotate --source automatic");
        subset_turns =
            annot::needs_ptkb_subset(load_annotation_set(automatic), qrels.assessed_turns());
        if (subset_turns.empty()) {
            throw ValidationError("needs-PTKB subset is empty; nothing to evaluate");
        }
        filter = &subset_turns;
    }
    const std::string turns_token = subset ? "turns=needs_ptkb" : "turns=whole";

    std::map<std::string, eval::MetricReport> reports;
    std::string first_tag;
    for (const auto& path : runs) {
        require_current(path, artifact_header(config, "tag="), "run file", "retrieve");
        const Run run = load_run(path);
        if (reports.count(run.tag) != 0) {
            throw ValidationError("duplicate run tag '" + run.tag + "' in " + path.string());
        }
        if (first_tag.empty()) first_tag = run.tag;
        auto report = eval::evaluate_run(run, qrels, config.metrics, filter);
        const fs::path target = layout.report_file(run.tag, subset);
        write_file_atomic(target,
                          eval::render_report(report, artifact_header(config, "run=" + run.tag +
                                                                                  " " +
                                                                                  turns_token)));
        note(out, "wrote", layout, target);
        reports.emplace(run.tag, std::move(report));
    }

    const std::string plot_header = artifact_header(config, turns_token);
    write_file_atomic(layout.plot_file(subset),
                      "# " + plot_header + "\n" + eval::render_plot_data(reports));
    note(out, "wrote", layout, layout.plot_file(subset));

    if (reports.size() >= 2) {
        const auto comparison =
            eval::compare_methods(reports, baseline.empty() ? first_tag : baseline);
        const std::string table = eval::render_comparison(comparison, plot_header);
        write_file_atomic(layout.comparison_file(subset), table);
        note(out, "wrote", layout, layout.comparison_file(subset));
        out << table;
    }
}

void cmd_pipeline(const ExperimentConfig& config, std::ostream& out) {
    Layout layout{config.output_dir};
    cmd_stats(config, out);
    cmd_index(config, out);
    const bool dense =
        std::find(config.retrievers.begin(), config.retrievers.end(),
                  reform::RetrieverKind::Dense) != config.retrievers.end();
    if (dense) cmd_embed(config, out);

    std::set<AnnotationSource> needed;
    for (const auto strategy : config.strategies) {
        if (reform::uses_annotation(strategy)) {
            needed.insert(reform::annotation_source_for(strategy));
        }
    }
    const bool few_shot =
        std::any_of(config.shots.begin(), config.shots.end(), [](int k) { return k > 0; });
    if (config.evaluate_subset || few_shot) needed.insert(AnnotationSource::Automatic);
    for (const auto source :
         {AnnotationSource::Human, AnnotationSource::Automatic, AnnotationSource::Llm}) {
        if (needed.count(source) != 0) cmd_annotate(config, source, out);
    }

    if (needed.size() >= 2) {
        const auto turns = all_turn_ids(load_topics(config.topics));
        std::map<AnnotationSource, AnnotationSet> sets;
        for (const auto source : needed) {
            sets.emplace(source, load_annotation_set(layout.annotation_file(source)));
        }
        for (auto a = sets.begin(); a != sets.end(); ++a) {
            for (auto b = std::next(a); b != sets.end(); ++b) {
                const auto report = annot::overlap_stats(a->second, b->second, turns);
                const fs::path target = layout.overlap_file(a->first, b->first);
                const std::string extras =
                    "overlap=" + to_string(a->first) + "_vs_" + to_string(b->first);
                write_file_atomic(target, "# " + artifact_header(config, extras) + "\n" +
                                              annot::render_overlap(report));
                note(out, "wrote", layout, target);
            }
        }
    }

    std::vector<fs::path> run_files;
    for (const auto strategy : config.strategies) {
        for (const int shots : config.shots) {
            cmd_reformulate(config, strategy, shots, out);
            for (const auto kind : config.retrievers) {
                cmd_retrieve(config, layout.reformulation_file(strategy, shots), kind, out);
                run_files.push_back(layout.run_file(run_tag(strategy, shots, kind)));
            }
        }
    }

    cmd_evaluate(config, run_files, false, "", out);
    if (config.evaluate_subset) cmd_evaluate(config, run_files, true, "", out);
}

}  // namespace pcir::cli
