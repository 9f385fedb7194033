#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "mock_llm.hpp"
#include "pcir/annotation.hpp"
#include "pcir/errors.hpp"
#include "pcir/formats.hpp"
#include "pcir/sparse.hpp"

using namespace pcir;
using namespace pcir::annot;
using pcir::testing::fixture_path;
using pcir::testing::ScriptedLlm;
using pcir::testing::template_dir;

namespace {

llm::GatewayConfig mock_gateway() {
    llm::GatewayConfig config;
    config.endpoint = "http://mock.test/v1/chat/completions";
    config.model = "mock-model";
    config.max_retries = 0;
    return config;
}

AnnotatorConfig annotator_config() {
    AnnotatorConfig config;
    config.template_dir = template_dir();
    config.parse_retries = 1;
    return config;
}

/// One conversation, one assessed turn, a three-sentence knowledge base and
/// a three-document corpus where only sentence 2 carries the term of the
/// sole relevant document.
struct ImpactFixture {
    Conversation conversation;
    Qrels qrels;
    sparse::InvertedIndex index;

    ImpactFixture() {
        conversation.conversation_id = "5-1";
        conversation.ptkb.add({"1", "I adore apples."});
        conversation.ptkb.add({"2", "I study zymurgy."});
        conversation.ptkb.add({"3", "My bicycle is green."});

        ConversationTurn turn;
        turn.turn_id = "5-1-1";
        turn.utterance = "Which introductory volume would you suggest?";
        conversation.turns.push_back(turn);

        ConversationTurn unassessed;
        unassessed.turn_id = "5-1-2";
        unassessed.utterance = "Anything newer?";
        conversation.turns.push_back(unassessed);

        qrels.add("5-1-1", "d1", 2);
        qrels.add("5-1-1", "d2", 0);

        index.add("d1", "zymurgy handbook for starters");
        index.add("d2", "apples pears quinces");
        index.add("d3", "unrelated filler document");
    }

    ReformulateFn reformulate() const {
        return [](const ConversationTurn& turn, const std::vector<ConversationTurn>&,
                  const Ptkb& ptkb, const std::set<std::string>& subset) {
            reform::ReformulatedQuery rq;
            rq.turn_id = turn.turn_id;
            rq.rewrite = turn.utterance;
            for (const auto& sentence : ptkb.sentences()) {
                if (subset.count(sentence.key)) rq.rewrite += " " + sentence.text;
            }
            return rq;
        };
    }

    RetrieveFn retrieve() const {
        return [this](const std::string& query, std::size_t depth) {
            return index.search(query, depth);
        };
    }
};

}  // namespace

TEST_CASE("human ingestion copies the dataset judgments") {
    Conversation conv;
    conv.conversation_id = "9-1";
    conv.ptkb.add({"1", "alpha"});
    conv.ptkb.add({"2", "beta"});
    conv.ptkb.add({"5", "gamma"});

    ConversationTurn judged;
    judged.turn_id = "9-1-1";
    judged.human_ptkb_keys = std::vector<std::string>{"2", "5"};
    conv.turns.push_back(judged);

    ConversationTurn judged_empty;
    judged_empty.turn_id = "9-1-2";
    judged_empty.human_ptkb_keys = std::vector<std::string>{};
    conv.turns.push_back(judged_empty);

    ConversationTurn unjudged;
    unjudged.turn_id = "9-1-3";
    conv.turns.push_back(unjudged);

    auto set = ingest_human({conv});
    CHECK(set.source == AnnotationSource::Human);
    CHECK(set.selections.size() == 2);
    CHECK(set.selections.at("9-1-1") == std::set<std::string>{"2", "5"});
    CHECK(set.selections.at("9-1-2").empty());
    CHECK(set.selections.count("9-1-3") == 0);

    SUBCASE("a judged key outside the ptkb is rejected") {
        conv.turns[0].human_ptkb_keys = std::vector<std::string>{"2", "9"};
        CHECK_THROWS_AS(ingest_human({conv}), ValidationError);
    }
}

TEST_CASE("human ingestion totals match the dataset splits") {
    auto test_set = ingest_human(load_topics(fixture_path("ikat_mirror/topics_test.json")));
    std::size_t test_pairs = 0;
    for (const auto& [turn_id, keys] : test_set.selections) test_pairs += keys.size();
    CHECK(test_pairs == 182);

    auto train_set = ingest_human(load_topics(fixture_path("ikat_mirror/topics_train.json")));
    std::size_t train_pairs = 0;
    for (const auto& [turn_id, keys] : train_set.selections) train_pairs += keys.size();
    CHECK(train_pairs == 64);
}

TEST_CASE("llm annotation parses, filters and falls back") {
    Conversation conv;
    conv.conversation_id = "3-1";
    conv.ptkb.add({"1", "I keep tropical fish."});
    conv.ptkb.add({"2", "I work night shifts."});
    conv.ptkb.add({"3", "My flat has no balcony."});
    ConversationTurn turn;
    turn.turn_id = "3-1-1";
    turn.utterance = "How do I keep an aquarium quiet at night?";
    conv.turns.push_back(turn);

    SUBCASE("key list reply") {
        ScriptedLlm script;
        script.replies = {R"({"ptkb_selection": "1, 3"})"};
        llm::ChatClient client(mock_gateway(), script.transport());
        LlmAnnotator annotator(client, annotator_config());

        auto result = annotator.annotate(turn, {}, conv.ptkb);
        CHECK(result.keys == std::set<std::string>{"1", "3"});
        CHECK(result.note.empty());
        CHECK_FALSE(result.parse_failed);
        // the prompt offered every sentence and the question
        CHECK(script.prompts.at(0).find("I keep tropical fish.") != std::string::npos);
        CHECK(script.prompts.at(0).find("My flat has no balcony.") != std::string::npos);
        CHECK(script.prompts.at(0).find("How do I keep an aquarium quiet at night?") !=
              std::string::npos);
    }

    SUBCASE("none reply") {
        ScriptedLlm script;
        script.replies = {R"({"ptkb_selection": "none"})"};
        llm::ChatClient client(mock_gateway(), script.transport());
        LlmAnnotator annotator(client, annotator_config());
        auto result = annotator.annotate(turn, {}, conv.ptkb);
        CHECK(result.keys.empty());
        CHECK_FALSE(result.parse_failed);
    }

    SUBCASE("invented keys are dropped with a note") {
        ScriptedLlm script;
        script.replies = {R"({"ptkb_selection": "7"})"};
        llm::ChatClient client(mock_gateway(), script.transport());
        LlmAnnotator annotator(client, annotator_config());
        auto result = annotator.annotate(turn, {}, conv.ptkb);
        CHECK(result.keys.empty());
        CHECK(result.note == "dropped_keys:7");
    }

    SUBCASE("unparseable replies give an empty flagged selection") {
        ScriptedLlm script;
        script.replies = {"free text", "more free text"};
        llm::ChatClient client(mock_gateway(), script.transport());
        LlmAnnotator annotator(client, annotator_config());
        auto result = annotator.annotate(turn, {}, conv.ptkb);
        CHECK(result.keys.empty());
        CHECK(result.parse_failed);
        CHECK(result.note == "parse_fallback");
    }

    SUBCASE("annotate_all covers every turn and keeps notes") {
        ConversationTurn second;
        second.turn_id = "3-1-2";
        second.utterance = "And during the day?";
        conv.turns.push_back(second);

        ScriptedLlm script;
        script.replies = {R"({"ptkb_selection": "2"})", R"({"ptkb_selection": "9"})"};
        llm::ChatClient client(mock_gateway(), script.transport());
        LlmAnnotator annotator(client, annotator_config());

        auto set = annotator.annotate_all({conv});
        CHECK(set.source == AnnotationSource::Llm);
        CHECK(set.selections.at("3-1-1") == std::set<std::string>{"2"});
        CHECK(set.selections.at("3-1-2").empty());
        CHECK(set.notes.at("3-1-2") == "dropped_keys:9");
        CHECK(set.notes.count("3-1-1") == 0);
        // the second prompt carries the first turn as history
        CHECK(script.prompts.at(1).find("Q_1: How do I keep an aquarium quiet at night?") !=
              std::string::npos);
    }
}

TEST_CASE("named impact metrics") {
    std::map<std::string, int> grades{{"d1", 2}, {"d2", 0}};
    std::vector<ScoredDoc> ranking{{"d2", 2.0}, {"d1", 1.0}};

    CHECK(make_metric("mrr")(ranking, grades) == 0.5);
    // relevant doc at rank 2: dcg 2/log2(3) against idcg 2
    CHECK(make_metric("ndcg@3")(ranking, grades) == doctest::Approx(0.6309297535714574));
    CHECK(make_metric("map")(ranking, grades) == 0.5);
    std::map<std::string, int> nothing{{"d1", 0}};
    CHECK(make_metric("map")(ranking, nothing) == 0.0);  // undefined scores zero here

    CHECK_THROWS_AS(make_metric("recall"), ValidationError);
    CHECK_THROWS_AS(make_metric("ndcg@"), ValidationError);
    CHECK_THROWS_AS(make_metric("ndcg@x"), ValidationError);
    CHECK_THROWS_AS(make_metric("ndcg@0"), ValidationError);
}

TEST_CASE("retrieval impact selects exactly the sentences that help") {
    ImpactFixture fixture;
    auto metric = make_metric("ndcg@3");
    const auto& turn = fixture.conversation.turns[0];

    auto result = automatic_annotate(turn, {}, fixture.conversation.ptkb,
                                     fixture.reformulate(), fixture.retrieve(), fixture.qrels,
                                     metric);
    REQUIRE(result.has_value());
    // baseline matches nothing; apples pull in an irrelevant document;
    // zymurgy pulls the relevant one to rank 1; the bicycle changes nothing
    CHECK(result->keys == std::set<std::string>{"2"});
    REQUIRE(result->records.size() == 3);
    for (const auto& record : result->records) {
        CAPTURE(record.ptkb_key);
        CHECK(record.turn_id == "5-1-1");
        CHECK(record.baseline_metric == 0.0);
        if (record.ptkb_key == "2") {
            CHECK(record.with_sentence_metric == doctest::Approx(1.0));
            CHECK(record.improved);
        } else {
            CHECK(record.with_sentence_metric == 0.0);
            CHECK_FALSE(record.improved);
        }
    }

    SUBCASE("unassessed turns signal instead of failing") {
        auto skipped = automatic_annotate(fixture.conversation.turns[1], {},
                                          fixture.conversation.ptkb, fixture.reformulate(),
                                          fixture.retrieve(), fixture.qrels, metric);
        CHECK_FALSE(skipped.has_value());
    }

    SUBCASE("empty knowledge base gives a baseline-only record") {
        Ptkb empty;
        auto bare = automatic_annotate(turn, {}, empty, fixture.reformulate(),
                                       fixture.retrieve(), fixture.qrels, metric);
        REQUIRE(bare.has_value());
        CHECK(bare->keys.empty());
        REQUIRE(bare->records.size() == 1);
        CHECK(bare->records[0].ptkb_key.empty());
        CHECK(bare->records[0].baseline_metric == 0.0);
        CHECK_FALSE(bare->records[0].improved);
    }

    SUBCASE("a tie is not an improvement") {
        // sentence 3 leaves the ranking unchanged, so its record is a tie
        auto tie = std::find_if(result->records.begin(), result->records.end(),
                                [](const ImpactRecord& r) { return r.ptkb_key == "3"; });
        REQUIRE(tie != result->records.end());
        CHECK(tie->with_sentence_metric == tie->baseline_metric);
        CHECK_FALSE(tie->improved);
    }
}

TEST_CASE("whole-dataset impact annotation skips unassessed turns") {
    ImpactFixture fixture;
    auto [set, records] = automatic_annotate_all({fixture.conversation}, fixture.reformulate(),
                                                 fixture.retrieve(), fixture.qrels,
                                                 make_metric("ndcg@3"));
    CHECK(set.source == AnnotationSource::Automatic);
    CHECK(set.selections.size() == 1);
    CHECK(set.selections.at("5-1-1") == std::set<std::string>{"2"});
    CHECK(records.size() == 3);
    CHECK(std::is_sorted(records.begin(), records.end(),
                         [](const ImpactRecord& a, const ImpactRecord& b) {
                             return a.turn_id < b.turn_id;
                         }));

    SUBCASE("needs-ptkb subset lists turns with a selection") {
        AnnotationSet automatic;
        automatic.source = AnnotationSource::Automatic;
        automatic.selections["1-1-1"] = {};
        automatic.selections["1-1-2"] = {"1"};
        automatic.selections["1-1-3"] = {};
        automatic.selections["1-1-4"] = {"2", "3"};
        automatic.selections["1-1-5"] = {};
        std::vector<std::string> assessed{"1-1-1", "1-1-2", "1-1-3", "1-1-4", "1-1-5"};
        CHECK(needs_ptkb_subset(automatic, assessed) ==
              std::set<std::string>{"1-1-2", "1-1-4"});
        CHECK(needs_ptkb_subset(AnnotationSet{}, assessed).empty());
        // turns outside the assessed list are ignored
        automatic.selections["9-9-9"] = {"1"};
        CHECK(needs_ptkb_subset(automatic, assessed).size() == 2);
    }

    SUBCASE("impact audit rendering") {
        std::string audit = render_impact_audit(records, "metric=ndcg@3");
        CHECK(audit.rfind("# metric=ndcg@3\n", 0) == 0);
        CHECK(audit.find("5-1-1\t2\t0.000000\t1.000000\t1\n") != std::string::npos);
        CHECK(audit.find("5-1-1\t1\t0.000000\t0.000000\t0\n") != std::string::npos);
    }
}

TEST_CASE("annotation overlap statistics") {
    AnnotationSet a;
    a.source = AnnotationSource::Human;
    a.selections["1-1-1"] = {"1"};
    a.selections["1-1-2"] = {"1", "2"};
    a.selections["1-1-3"] = {};

    AnnotationSet b;
    b.source = AnnotationSource::Llm;
    b.selections["1-1-1"] = {"1"};
    b.selections["1-1-2"] = {"2"};
    b.selections["1-1-3"] = {};

    std::vector<std::string> turns{"1-1-1", "1-1-2", "1-1-3"};

    auto report = overlap_stats(a, b, turns);
    CHECK(report.source_a == "human");
    CHECK(report.source_b == "llm");
    CHECK(report.turn_count == 3);
    CHECK(report.exact_match_turns == 2);
    CHECK(report.agreed_keys == 2);  // key 1 of turn 1, key 2 of turn 2
    CHECK(report.union_keys == 3);
    CHECK(report.no_ptkb_a == 1);
    CHECK(report.no_ptkb_b == 1);

    SUBCASE("identity") {
        auto self = overlap_stats(a, a, turns);
        CHECK(self.exact_match_turns == 3);
        CHECK(self.agreed_keys == self.union_keys);
    }

    SUBCASE("symmetric fields survive swapping the arguments") {
        AnnotationSet c = b;
        c.selections["1-1-3"] = {"9"};
        auto forward = overlap_stats(a, c, turns);
        auto backward = overlap_stats(c, a, turns);
        CHECK(forward.exact_match_turns == backward.exact_match_turns);
        CHECK(forward.agreed_keys == backward.agreed_keys);
        CHECK(forward.union_keys == backward.union_keys);
        CHECK(forward.no_ptkb_a == backward.no_ptkb_b);
        CHECK(forward.no_ptkb_b == backward.no_ptkb_a);
    }

    SUBCASE("missing turns count as empty selections") {
        std::vector<std::string> wider{"1-1-1", "1-1-2", "1-1-3", "1-1-4"};
        auto widened = overlap_stats(a, b, wider);
        CHECK(widened.exact_match_turns == 3);
        CHECK(widened.no_ptkb_a == 2);
        CHECK(widened.no_ptkb_b == 2);
    }

    SUBCASE("one empty set against a partially filled one") {
        AnnotationSet empty;
        empty.source = AnnotationSource::Automatic;
        auto vs_empty = overlap_stats(empty, b, turns);
        CHECK(vs_empty.exact_match_turns == 1);  // only the turn where b is empty
        CHECK(vs_empty.agreed_keys == 0);
        CHECK(vs_empty.no_ptkb_a == 3);
    }

    SUBCASE("rendering lists every field") {
        std::string text = render_overlap(report);
        CHECK(text.find("source_a\thuman\n") != std::string::npos);
        CHECK(text.find("exact_match_turns\t2\n") != std::string::npos);
        CHECK(text.find("agreed_keys\t2\n") != std::string::npos);
        CHECK(text.find("no_ptkb_llm\t1\n") != std::string::npos);
    }
}
