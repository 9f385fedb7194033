#include <doctest.h>

#include "helpers.hpp"
#include "pcir/errors.hpp"
#include "pcir/formats.hpp"
#include "pcir/prompt_template.hpp"

using namespace pcir;
using namespace pcir::llm;
using pcir::testing::TempDir;

namespace {

const char* kTwoPart =
    "[instruction]\n"
    "Rewrite the question.\n"
    "\n"
    "[input]\n"
    "Question: {question}\n";

const char* kWithDemo =
    "[instruction]\n"
    "Rewrite the question using the user knowledge.\n"
    "[demonstration]\n"
    "Example question: {demo_question}\n"
    "Example rewrite: {demo_rewrite}\n"
    "[input]\n"
    "Question: {question}\n";

}  // namespace

TEST_CASE("template parsing keeps sections in declared order") {
    auto tmpl = PromptTemplate::parse("basic", kTwoPart);
    REQUIRE(tmpl.sections.size() == 2);
    CHECK(tmpl.sections[0].kind == SectionKind::Instruction);
    CHECK(tmpl.sections[1].kind == SectionKind::Input);
    CHECK(tmpl.sections[0].text == "Rewrite the question.");
    CHECK(tmpl.demonstration_pattern() == nullptr);

    auto with_demo = PromptTemplate::parse("demo", kWithDemo);
    REQUIRE(with_demo.sections.size() == 3);
    CHECK(with_demo.count(SectionKind::Demonstration) == 1);
    REQUIRE(with_demo.demonstration_pattern() != nullptr);
}

TEST_CASE("template structural violations are rejected") {
    CHECK_THROWS_AS(PromptTemplate::parse("x", "[input]\nonly input\n"), ValidationError);
    CHECK_THROWS_AS(PromptTemplate::parse("x", "[instruction]\nno input\n"), ValidationError);
    CHECK_THROWS_AS(
        PromptTemplate::parse("x", "[input]\nI\n[instruction]\nQ\n"), ValidationError);
    CHECK_THROWS_AS(
        PromptTemplate::parse(
            "x", "[instruction]\nA\n[input]\nB\n[demonstration]\nC\n"),
        ValidationError);
    CHECK_THROWS_AS(PromptTemplate::parse("x", "[bogus]\ntext\n[input]\n"), ParseError);
    CHECK_THROWS_AS(PromptTemplate::parse("x", "stray text\n[instruction]\nA\n[input]\nB\n"),
                    ParseError);
    CHECK_THROWS_AS(
        PromptTemplate::parse("x",
                              "[instruction]\nA\n[demonstration]\nD\n[demonstration]\nD\n"
                              "[input]\nB\n"),
        ValidationError);
}

TEST_CASE("placeholders substitute and missing slots name the placeholder") {
    CHECK(render_text("Ask: {query}", {{"query", "Q"}}) == "Ask: Q");
    CHECK(render_text("{a}{b}", {{"a", "1"}, {"b", "2"}}) == "12");
    CHECK_THROWS_WITH_AS(render_text("Ask: {query}", {}),
                         "no slot value for placeholder 'query'", ValidationError);

    SUBCASE("braces that are not placeholders stay literal") {
        CHECK(render_text(R"(Reply with {"rewrite": "..."} only)", {}) ==
              R"(Reply with {"rewrite": "..."} only)");
        CHECK(render_text("{ spaced }", {}) == "{ spaced }");
        CHECK(render_text("trailing {", {}) == "trailing {");
    }
}

TEST_CASE("rendering joins sections with single blank lines") {
    auto tmpl = PromptTemplate::parse("basic", kTwoPart);
    std::string prompt = render_prompt(tmpl, {{"question", "Where?"}});
    CHECK(prompt == "Rewrite the question.\n\nQuestion: Where?");
    // No silent truncation: total length is sections plus separators.
    CHECK(prompt.size() == tmpl.sections[0].text.size() + 2 +
                               std::string("Question: Where?").size());
}

TEST_CASE("demonstration pattern expands to k literal sections") {
    auto tmpl = PromptTemplate::parse("demo", kWithDemo);

    auto zero = tmpl.with_demonstrations({});
    CHECK(zero.count(SectionKind::Demonstration) == 0);
    CHECK(render_prompt(zero, {{"question", "Q?"}}) ==
          "Rewrite the question using the user knowledge.\n\nQuestion: Q?");

    std::vector<std::string> demos = {"demo one", "demo two", "demo three"};
    auto three = tmpl.with_demonstrations(demos);
    REQUIRE(three.count(SectionKind::Demonstration) == 3);
    CHECK(three.sections[1].text == "demo one");
    CHECK(three.sections[2].text == "demo two");
    CHECK(three.sections[3].text == "demo three");
    std::string prompt = render_prompt(three, {{"question", "Q?"}});
    CHECK(prompt ==
          "Rewrite the question using the user knowledge.\n\ndemo one\n\ndemo two\n\n"
          "demo three\n\nQuestion: Q?");

    auto no_pattern = PromptTemplate::parse("basic", kTwoPart);
    CHECK_THROWS_AS(no_pattern.with_demonstrations({"d"}), ValidationError);
    CHECK_NOTHROW(no_pattern.with_demonstrations({}));
}

TEST_CASE("templates load from files") {
    TempDir dir("tmpl");
    write_file_atomic(dir / "rewrite.txt", kTwoPart);
    auto tmpl = PromptTemplate::load(dir / "rewrite.txt");
    CHECK(tmpl.name == "rewrite");
    CHECK(tmpl.sections.size() == 2);
    CHECK_THROWS_AS(PromptTemplate::load(dir / "missing.txt"), IoError);
}
