#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "rav/prompt.hpp"
#include "rav/errors.hpp"
#include "testutil.hpp"

using namespace rav;

TEST_CASE("render: single substitution") {
    PromptTemplate t("t", "claim: {claim}\nlabel:", {"claim"});
    CHECK(t.render({{"claim", "X"}}) == "claim: X\nlabel:");
}

TEST_CASE("render: missing binding raises MissingPlaceholder") {
    PromptTemplate t("t", "claim: {claim}\nlabel:", {"claim"});
    try {
        t.render({});
        FAIL("expected MissingPlaceholder");
    } catch (const RavError& e) {
        CHECK(e.code() == Errc::MissingPlaceholder);
        CHECK(std::string(e.what()).find("claim") != std::string::npos);
    }
}

TEST_CASE("render: unknown binding key in strict mode") {
    PromptTemplate t("t", "claim: {claim}", {"claim"});
    try {
        t.render({{"claim", "x"}, {"evidence", "y"}});
        FAIL("expected UnknownPlaceholder");
    } catch (const RavError& e) {
        CHECK(e.code() == Errc::UnknownPlaceholder);
    }
    CHECK(t.render({{"claim", "x"}, {"evidence", "y"}}, /*strict=*/false) == "claim: x");
}

TEST_CASE("render: doubled braces escape literal braces") {
    PromptTemplate t("t", "json like {{\"k\": 1}} then {v}", {"v"});
    CHECK(t.render({{"v", "ok"}}) == "json like {\"k\": 1} then ok");
}

TEST_CASE("render: substituted values are not re-scanned") {
    PromptTemplate t("t", "say {v}", {"v"});
    CHECK(t.render({{"v", "{claim}"}}) == "say {claim}");
}

TEST_CASE("render: pure function, identical bytes") {
    const auto& tpl = ravtest::prompt_library().get("qg_iterative");
    PromptBinding b{{"claim", "Some claim."},
                    {"history", "NONE"},
                    {"question_types", "Ask anything."}};
    auto a1 = tpl.render(b);
    auto a2 = tpl.render(b);
    CHECK(a1 == a2);
}

TEST_CASE("template validation") {
    CHECK_THROWS_AS(PromptTemplate("t", "no placeholder", {"claim"}), RavError);
    // few-shot examples without an {examples} slot
    CHECK_THROWS_AS(PromptTemplate("t", "{claim}", {"claim"}, {"example"}), RavError);
}

TEST_CASE("render_history: empty, one pair, three pairs") {
    CHECK(render_history({}) == "NONE");

    History one = {{Question{"Who wrote it?", QuestionType::inquiry}, Answer{"Steffens"}}};
    CHECK(render_history(one) == "Q1: Who wrote it?\nA1: Steffens");

    History three = one;
    three.push_back({Question{"Q two?", QuestionType::verification}, Answer{"a2"}});
    three.push_back({Question{"Q three?", QuestionType::verification}, Answer{"a3"}});
    auto text = render_history(three);
    CHECK(text == "Q1: Who wrote it?\nA1: Steffens\nQ2: Q two?\nA2: a2\nQ3: Q three?\nA3: a3");
}

TEST_CASE("asset parsing: header, body, fewshot blocks") {
    auto t = PromptTemplate::parse(
        "name: demo\nplaceholders: a, b\nfewshot: 2\n---\nbody {a} {b}\nwith {examples}\n"
        "===\nfirst block\nline two\n===\nsecond block\n",
        "inline");
    CHECK(t.name() == "demo");
    CHECK(t.required_placeholders() == std::set<std::string>{"a", "b"});
    REQUIRE(t.fewshot_examples().size() == 2);
    CHECK(t.fewshot_examples()[0] == "first block\nline two");
    auto rendered = t.render({{"a", "1"}, {"b", "2"}});
    CHECK(rendered.find("first block\nline two\n\nsecond block") != std::string::npos);

    CHECK_NOTHROW(PromptTemplate::parse("name: x\n---", "inline"));  // empty body, 0 examples
    CHECK_THROWS_AS(PromptTemplate::parse("fewshot: 1\n---\nbody", "inline"), RavError);  // no name
    CHECK_THROWS_AS(PromptTemplate::parse("name: x\nfewshot: 3\n---\nbody {examples}\n===\nb\n", "x"),
                    RavError);  // count mismatch
    CHECK_THROWS_AS(PromptTemplate::parse("name: x\nbody without separator", "inline"), RavError);
}

TEST_CASE("shipped template set is exactly the published list") {
    const auto& lib = ravtest::prompt_library();
    std::vector<std::string> expected = {
        "ag_gold_evidence", "ag_pretrained_only", "lg",          "lg_no_reasoning",
        "qg_all_at_once",   "qg_iterative",       "qg_no_reasoning",
        "zeroshot_p1",      "zeroshot_p2",        "zeroshot_p3", "zeroshot_p4",
        "zeroshot_p5",      "zeroshot_p6",        "zeroshot_p7"};
    std::sort(expected.begin(), expected.end());
    CHECK(lib.names() == expected);
}

TEST_CASE("qg and lg templates carry 8 few-shot blocks; ag carries none") {
    const auto& lib = ravtest::prompt_library();
    for (const auto& name : {"qg_iterative", "qg_all_at_once", "qg_no_reasoning", "lg",
                             "lg_no_reasoning"}) {
        CHECK(lib.get(name).fewshot_examples().size() == 8);
    }
    CHECK(lib.get("ag_gold_evidence").fewshot_examples().empty());
    CHECK(lib.get("ag_pretrained_only").fewshot_examples().empty());
    for (int p = 1; p <= 7; ++p) {
        CHECK(lib.get("zeroshot_p" + std::to_string(p)).fewshot_examples().empty());
    }
}

TEST_CASE("qg templates never reference evidence") {
    const auto& lib = ravtest::prompt_library();
    for (const auto& name : {"qg_iterative", "qg_all_at_once", "qg_no_reasoning"}) {
        auto placeholders = PromptTemplate::extract_placeholders(lib.get(name).body());
        CHECK(std::find(placeholders.begin(), placeholders.end(), "evidence") ==
              placeholders.end());
    }
}

TEST_CASE("zero-shot templates open with their published first lines") {
    const auto& lib = ravtest::prompt_library();
    auto p6 = lib.get("zeroshot_p6").render({{"claim", "c"}, {"evidence", "e"}});
    CHECK(p6.rfind("You need to determine the accuracy of a claim based on the evidence.", 0) == 0);
    auto p1 = lib.get("zeroshot_p1").render({{"claim", "c"}, {"evidence", "e"}});
    CHECK(p1.rfind("Given claim and evidence, predict if the claim is", 0) == 0);
    CHECK(p1.find("claim: c\nevidence: e\nlabel:") != std::string::npos);
}

TEST_CASE("few-shot blocks are injected before the live instance") {
    const auto& tpl = ravtest::prompt_library().get("qg_iterative");
    auto rendered = tpl.render({{"claim", "LIVE-CLAIM-SENTINEL"},
                                {"history", "NONE"},
                                {"question_types", "rules"}});
    auto example_pos = rendered.find(tpl.fewshot_examples().front());
    auto live_pos = rendered.find("LIVE-CLAIM-SENTINEL");
    REQUIRE(example_pos != std::string::npos);
    REQUIRE(live_pos != std::string::npos);
    CHECK(example_pos < live_pos);
    CHECK(rendered.find('{') == std::string::npos);  // no markers left behind
}
