#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "rav/pipeline.hpp"
#include "rav/util.hpp"
#include "testutil.hpp"

using namespace rav;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const RavError& e) {
        return e.code();
    }
    FAIL("expected a RavError");
    return Errc::IoError;
}

PipelineConfig p2_config(int k = 10) {
    PipelineConfig cfg;
    cfg.strategy = Strategy::iterative;
    cfg.k = k;
    return cfg;
}

Trajectory ok_trajectory(const std::string& label) {
    Trajectory t;
    t.predicted = label;
    t.status = TrajectoryStatus::ok;
    return t;
}

}  // namespace

TEST_CASE("config resolution and validation") {
    PipelineConfig p1;
    p1.strategy = Strategy::all_at_once;
    auto r1 = p1.resolved();
    CHECK(r1.num_trajectories == 3);
    CHECK(*r1.qg_temperature == doctest::Approx(0.7));

    PipelineConfig p2;
    p2.strategy = Strategy::iterative;
    auto r2 = p2.resolved();
    CHECK(r2.num_trajectories == 1);
    CHECK(*r2.qg_temperature == doctest::Approx(0.0));

    PipelineConfig even = r1;
    even.num_trajectories = 4;
    CHECK_THROWS_AS(even.validate(), RavError);

    PipelineConfig low_k = r2;
    low_k.k = 2;
    low_k.min_questions = 5;
    CHECK_THROWS_AS(low_k.validate(), RavError);

    PipelineConfig p1_nores = r1;
    p1_nores.reasoning_on = false;
    CHECK_THROWS_AS(p1_nores.validate(), RavError);

    SUBCASE("hash covers semantics, not transport") {
        auto h1 = p2.hash("model-a", "politifact-5");
        CHECK(h1 == p2.hash("model-a", "politifact-5"));
        CHECK(h1 != p2.hash("model-b", "politifact-5"));
        PipelineConfig changed = p2;
        changed.k = 7;
        CHECK(h1 != changed.hash("model-a", "politifact-5"));
    }
}

TEST_CASE("majority_vote: strict majority, tie-break, empty input") {
    auto [label, detail] = majority_vote(
        {ok_trajectory("false"), ok_trajectory("false"), ok_trajectory("half-true")});
    CHECK(label == "false");
    CHECK(detail.at("false") == 2);
    CHECK(detail.at("half-true") == 1);

    auto [tie_label, tie_detail] = majority_vote(
        {ok_trajectory("true"), ok_trajectory("half-true"), ok_trajectory("false")});
    CHECK(tie_label == "true");  // earliest trajectory wins the tie
    CHECK(tie_detail.size() == 3);

    Trajectory failed;
    failed.status = TrajectoryStatus::failed;
    CHECK(code_of([&] { majority_vote({}); }) == Errc::NoSuccessfulTrajectory);
    CHECK(code_of([&] { majority_vote({failed}); }) == Errc::NoSuccessfulTrajectory);

    // failed trajectories are excluded from the vote
    auto [l2, d2] = majority_vote({failed, ok_trajectory("true")});
    CHECK(l2 == "true");
    CHECK(d2.size() == 1);
}

TEST_CASE("run_trajectory: three questions then stop") {
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 3, "half-true");
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto claim = ravtest::make_claim("c1", "half-true");
    auto traj = runner.run_trajectory(claim, "c1/T0/");

    REQUIRE(traj.ok());
    CHECK(traj.history.size() == 3);
    CHECK(traj.predicted == "half-true");
    CHECK(traj.qg_reasonings.size() == 4);  // 3 questions + the stop step
    int lg_calls = 0;
    for (const auto& t : traj.transcripts) {
        if (t.tag.find("LG:") != std::string::npos) lg_calls++;
    }
    CHECK(lg_calls == 1);
}

TEST_CASE("run_trajectory: never-stopping QG is capped at k") {
    ScriptedBackend backend;
    for (int t = 1; t <= 4; ++t) {
        backend.add("QG:" + std::to_string(t),
                    "Reasoning: more.\nQuestion: [V] Did fact " + std::to_string(t) + " happen?");
        backend.add("AG:" + std::to_string(t), "Answer: yes");
    }
    backend.add("LG:1", "Reasoning: fine.\nLabel: true");
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config(4));
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "true"));
    REQUIRE(traj.ok());
    CHECK(traj.history.size() == 4);  // QG:5 would be unscripted; the cap kept us from asking
}

TEST_CASE("run_trajectory: premature stop is nudged into a question") {
    ScriptedBackend backend;
    backend.add_sequence("QG:1", {"Reasoning: done already.\nstop_iteration",
                                  "Reasoning: fine, one more.\nQuestion: [V] Did it happen?"});
    backend.add("AG:1", "Answer: yes");
    backend.add("QG:2", "Reasoning: covered.\nstop_iteration");
    backend.add("LG:1", "Reasoning: ok.\nLabel: true");

    ravtest::TempDir tmp;
    RunLogger logger(tmp.file("log.jsonl"));
    backend.set_run_logger(&logger);

    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "true"));
    REQUIRE(traj.ok());
    CHECK(traj.history.size() == 1);

    // The second QG:1 call carries the must-continue nudge.
    bool nudged = false;
    for (const auto& line : util::read_lines(tmp.file("log.jsonl"))) {
        auto j = nlohmann::json::parse(line);
        if (j["tag"] == "QG:1" &&
            j["request"]["user"].get<std::string>().find("must ask at least one more") !=
                std::string::npos) {
            nudged = true;
        }
    }
    CHECK(nudged);
}

TEST_CASE("run_trajectory: early stop honored after min questions") {
    // Stop arrives at step 3; two answered pairs precede it.
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 2, "true");
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "true"), "c1/T0/");
    REQUIRE(traj.ok());
    CHECK(traj.history.size() == 2);
}

TEST_CASE("run_trajectory: min_questions=0 restores the bare loop") {
    ScriptedBackend backend;
    backend.add("QG:1", "Reasoning: nothing to ask.\nstop_iteration");
    backend.add("LG:1", "Reasoning: no evidence either way.\nLabel: half-true");
    auto cfg = p2_config();
    cfg.min_questions = 0;
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "half-true"));
    REQUIRE(traj.ok());
    CHECK(traj.history.empty());
    CHECK(traj.predicted == "half-true");
    // LG saw the literal NONE history
    bool saw_none = false;
    for (const auto& t : traj.transcripts) {
        if (t.tag == "LG:1" && t.prompt.find("\nNONE\n") != std::string::npos) saw_none = true;
    }
    CHECK(saw_none);
}

TEST_CASE("run_trajectory: insistent premature stop fails the trajectory") {
    ScriptedBackend backend;
    backend.add("QG:1", "Reasoning: done.\nstop_iteration");  // scalar: repeats for the nudge
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "true"));
    CHECK(!traj.ok());
    CHECK(traj.failure_reason.find("min_questions") != std::string::npos);
}

TEST_CASE("run_trajectory: gold mode refuses claims without evidence") {
    ScriptedBackend backend;
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto claim = ravtest::make_claim("c1", "true", "some claim", /*evidence=*/"");
    auto traj = runner.run_trajectory(claim);
    CHECK(!traj.ok());
    CHECK(traj.failure_reason.find("EvidenceMissing") != std::string::npos);

    SUBCASE("pretrained mode accepts them") {
        ScriptedBackend b2;
        ravtest::script_p2_claim(b2, "c1", 0, 1, "true");
        auto cfg = p2_config();
        cfg.evidence_mode = AnswerMode::pretrained_only;
        PipelineRunner r2(b2, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);
        auto t2 = r2.run_trajectory(claim, "c1/T0/");
        CHECK(t2.ok());
    }
}

TEST_CASE("run_trajectory: long evidence is tail-truncated and flagged") {
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 1, "true");
    auto cfg = p2_config();
    cfg.evidence_char_budget = 64;
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);

    std::string evidence(500, 'e');
    evidence += "TAIL-SENTINEL";
    auto claim = ravtest::make_claim("c1", "true", "claim", evidence);
    auto traj = runner.run_trajectory(claim, "c1/T0/");
    REQUIRE(traj.ok());
    CHECK(traj.evidence_truncated);
    for (const auto& t : traj.transcripts) {
        CHECK(t.prompt.find("TAIL-SENTINEL") == std::string::npos);
        if (t.tag.find("AG:") != std::string::npos) {
            CHECK(t.prompt.find("[truncated]") != std::string::npos);
        }
    }
}

namespace {

// Rejects answer-step prompts above the limit, mimicking a provider context
// window hit by long evidence; everything else delegates to the inner script.
class ContextLimitedBackend : public CompletionBackend {
public:
    ContextLimitedBackend(CompletionBackend& inner, std::size_t limit)
        : inner_(inner), limit_(limit) {}

protected:
    CompletionResponse do_complete(const CompletionRequest& r, int& attempt_out) override {
        attempt_out = 1;
        if (r.tag.find("AG:") != std::string::npos && r.user_text.size() > limit_) {
            raise(Errc::ContextOverflow, "maximum context length exceeded");
        }
        return inner_.complete(r);
    }

private:
    CompletionBackend& inner_;
    std::size_t limit_;
};

}  // namespace

TEST_CASE("run_trajectory: context overflow halves the evidence and retries") {
    ScriptedBackend script;
    ravtest::script_p2_claim(script, "c1", 0, 1, "true");
    // The 8000-char evidence overflows the answer prompt; one halving fits.
    ContextLimitedBackend backend(script, 6000);

    auto cfg = p2_config();
    cfg.evidence_char_budget = 100000;  // budget alone would not truncate
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);

    std::string evidence(8000, 'e');
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "true", "claim", evidence),
                                      "c1/T0/");
    REQUIRE(traj.ok());
    CHECK(traj.evidence_truncated);

    SUBCASE("or fails once the evidence cannot shrink further") {
        ContextLimitedBackend tiny(script, 10);
        PipelineRunner r2(tiny, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);
        auto t2 = r2.run_trajectory(ravtest::make_claim("c1", "true", "claim", evidence),
                                    "c1/T0/");
        CHECK(!t2.ok());
        CHECK(t2.failure_reason.find("context") != std::string::npos);
    }
}

TEST_CASE("run_trajectory: reasoning-off uses the no-reasoning templates") {
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 2, "mostly-false", /*reasoning=*/false);
    auto cfg = p2_config();
    cfg.reasoning_on = false;
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "mostly-false"), "c1/T0/");
    REQUIRE(traj.ok());
    CHECK(traj.history.size() == 2);
    CHECK(traj.predicted == "mostly-false");
    CHECK(traj.lg_reasoning.empty());
    for (const auto& t : traj.transcripts) {
        CHECK(t.prompt.find("Reasoning:") == std::string::npos);
    }
}

TEST_CASE("run_trajectory: only answer prompts ever carry the evidence") {
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 2, "true");
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto claim = ravtest::make_claim("c1", "true", "plain claim", "EVIDENCE-SENTINEL text");
    auto traj = runner.run_trajectory(claim, "c1/T0/");
    REQUIRE(traj.ok());
    int ag_prompts = 0;
    for (const auto& t : traj.transcripts) {
        bool has_evidence = t.prompt.find("EVIDENCE-SENTINEL") != std::string::npos;
        if (t.tag.find("AG:") != std::string::npos) {
            CHECK(has_evidence);
            ag_prompts++;
        } else {
            CHECK(!has_evidence);  // QG and LG stay evidence-blind
        }
    }
    CHECK(ag_prompts == 2);
}

TEST_CASE("run_trajectory: all-at-once batch truncated to k, answered in order") {
    ScriptedBackend backend;
    std::string batch = "Reasoning: five parts.";
    for (int i = 1; i <= 5; ++i) {
        batch += "\nQuestion: [V] Did part " + std::to_string(i) + " happen?";
    }
    backend.add("QG:1", batch);
    for (int i = 1; i <= 3; ++i) {
        backend.add("AG:" + std::to_string(i), "Answer: part " + std::to_string(i) + " yes");
    }
    backend.add("LG:1", "Reasoning: verified.\nLabel: mostly-true");

    PipelineConfig cfg;
    cfg.strategy = Strategy::all_at_once;
    cfg.k = 3;
    cfg.num_trajectories = 1;
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);
    auto traj = runner.run_trajectory(ravtest::make_claim("c1", "mostly-true"));
    REQUIRE(traj.ok());
    REQUIRE(traj.history.size() == 3);
    CHECK(traj.history[0].question.text == "Did part 1 happen?");
    CHECK(traj.history[2].answer.text == "part 3 yes");
}

TEST_CASE("run_trajectory: bit-reproducible on a scripted backend") {
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 2, "true");
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto claim = ravtest::make_claim("c1", "true");
    auto a = claim_result_to_json([&] {
        ClaimResult r;
        r.trajectories.push_back(runner.run_trajectory(claim, "c1/T0/"));
        return r;
    }()).dump();
    auto b = claim_result_to_json([&] {
        ClaimResult r;
        r.trajectories.push_back(runner.run_trajectory(claim, "c1/T0/"));
        return r;
    }()).dump();
    CHECK(a == b);
}

TEST_CASE("run_claim: trajectories vote") {
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 1, "true");
    ravtest::script_p2_claim(backend, "c1", 1, 1, "false");
    ravtest::script_p2_claim(backend, "c1", 2, 1, "true");
    auto cfg = p2_config();
    cfg.num_trajectories = 3;
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(), cfg);
    auto result = runner.run_claim(ravtest::make_claim("c1", "true"));
    CHECK(result.final_label == "true");
    CHECK(result.vote_detail.at("true") == 2);
    CHECK(result.vote_detail.at("false") == 1);
    CHECK(result.trajectories.size() == 3);
    CHECK(result.gold == "true");
}

TEST_CASE("run_dataset: resume, workers, failure accounting") {
    ravtest::TempDir tmp;
    std::vector<std::pair<std::string, std::string>> id_labels;
    for (int i = 0; i < 6; ++i) id_labels.emplace_back("c" + std::to_string(i), "true");
    auto data = ravtest::make_dataset(id_labels);

    ScriptedBackend backend;
    for (int i = 0; i < 6; ++i) {
        if (i == 4) continue;  // c4 stays unscripted and must fail
        ravtest::script_p2_claim(backend, "c" + std::to_string(i), 0, 1, "true");
    }

    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto out = tmp.file("results.jsonl");
    auto summary = runner.run_dataset(data, out, /*workers=*/3);
    CHECK(summary.total == 6);
    CHECK(summary.processed == 6);
    CHECK(summary.failed == 1);

    auto results = load_results(out);
    REQUIRE(results.size() == 6);
    // ordered writer keeps dataset order regardless of worker count
    for (int i = 0; i < 6; ++i) CHECK(results[i].claim_id == "c" + std::to_string(i));
    CHECK(results[4].final_label == kFailedLabel);
    CHECK(!results[4].trajectories[0].ok());

    SUBCASE("a second run resumes everything") {
        auto again = runner.run_dataset(data, out, 2);
        CHECK(again.skipped == 6);
        CHECK(again.processed == 0);
        CHECK(load_results(out).size() == 6);
    }

    SUBCASE("a config change reruns every claim") {
        auto cfg2 = p2_config(9);
        PipelineRunner runner2(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                               cfg2);
        auto redo = runner2.run_dataset(data, out, 1);
        CHECK(redo.processed == 6);
        CHECK(load_results(out).size() == 12);  // appended under the new hash
    }

    SUBCASE("partial files resume only the written prefix") {
        auto partial = tmp.file("partial.jsonl");
        {
            std::ofstream trunc(partial, std::ios::binary);
            auto lines = util::read_lines(out);
            for (int i = 0; i < 3; ++i) trunc << lines[i] << '\n';
            trunc << "{\"claim_id\":\"c3\",\"config_ha";  // torn final line
        }
        auto resumed = runner.run_dataset(data, partial, 2);
        CHECK(resumed.skipped == 3);
        CHECK(resumed.processed == 3);
    }
}

TEST_CASE("run_dataset: loop bounds hold for every ok trajectory") {
    std::mt19937_64 rng(31337);
    const int k = 5;
    std::vector<std::pair<std::string, std::string>> id_labels;
    ScriptedBackend backend;
    std::uniform_int_distribution<int> lend(1, 8);  // some exceed k and get capped
    for (int i = 0; i < 12; ++i) {
        std::string id = "c" + std::to_string(i);
        id_labels.emplace_back(id, "true");
        int len = lend(rng);
        if (len <= k) {
            ravtest::script_p2_claim(backend, id, 0, len, "true");
        } else {
            // never stops before the cap: script exactly k questions
            std::string p = id + "/T0/";
            for (int t = 1; t <= k; ++t) {
                backend.add(p + "QG:" + std::to_string(t),
                            "Reasoning: more.\nQuestion: [V] Did fact " + std::to_string(t) +
                                " happen?");
                backend.add(p + "AG:" + std::to_string(t), "Answer: yes");
            }
            backend.add(p + "LG:1", "Reasoning: ok.\nLabel: true");
        }
    }
    auto data = ravtest::make_dataset(id_labels);
    ravtest::TempDir tmp;
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config(k));
    runner.run_dataset(data, tmp.file("bounds.jsonl"), 3);
    for (const auto& res : load_results(tmp.file("bounds.jsonl"))) {
        for (const auto& t : res.trajectories) {
            REQUIRE(t.ok());
            CHECK(t.history.size() >= 1);
            CHECK(t.history.size() <= std::size_t(k));
        }
    }
}

TEST_CASE("sweep_k: one report per k") {
    ravtest::TempDir tmp;
    auto data = ravtest::make_dataset({{"c0", "true"}, {"c1", "false"}});

    // Scalar entries repeat across the per-k runs; QG stops after one
    // question regardless of k.
    ScriptedBackend backend;
    for (const auto& [id, label] : std::vector<std::pair<std::string, std::string>>{
             {"c0", "true"}, {"c1", "false"}}) {
        ravtest::script_p2_claim(backend, id, 0, 1, label);
    }
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto reports = runner.sweep_k(data, tmp.file("sweep"), {1, 2});
    REQUIRE(reports.size() == 2);
    CHECK(reports.at(1).micro_f1 == doctest::Approx(1.0));
    CHECK(reports.at(2).micro_f1 == doctest::Approx(1.0));
    CHECK(code_of([&] { runner.sweep_k(data, tmp.file("x"), {}); }) == Errc::ConfigError);
}

TEST_CASE("zeroshot runner: predictions land in evaluate-compatible results") {
    ravtest::TempDir tmp;
    auto data = ravtest::make_dataset({{"c0", "true"}, {"c1", "true"}});
    ScriptedBackend backend;
    backend.add("c0/ZS:1", "label: true");
    backend.add("c1/ZS:1", "true");
    auto out = tmp.file("zs.jsonl");
    auto summary = run_zeroshot(backend, ravtest::prompt_library().get("zeroshot_p6"), data, out);
    CHECK(summary.processed == 2);
    CHECK(summary.failed == 0);
    auto report = evaluate(load_results(out), data);
    CHECK(report.micro_f1 == doctest::Approx(1.0));

    SUBCASE("unmappable outputs fail the claim but not the run") {
        ScriptedBackend bad;
        bad.add("c0/ZS:1", "cannot say");
        bad.add("c1/ZS:1", "true");
        auto out2 = tmp.file("zs2.jsonl");
        auto s2 = run_zeroshot(bad, ravtest::prompt_library().get("zeroshot_p6"), data, out2);
        CHECK(s2.failed == 1);
        auto r2 = evaluate(load_results(out2), data);
        CHECK(r2.failure_rate == doctest::Approx(0.5));
    }
}

TEST_CASE("trajectory json round-trips") {
    ScriptedBackend backend;
    ravtest::script_p2_claim(backend, "c1", 0, 2, "mostly-false");
    PipelineRunner runner(backend, ravtest::prompt_library(), LabelSpace::politifact5(),
                          p2_config());
    auto claim = ravtest::make_claim("c1", "mostly-false");
    ClaimResult result = ClaimResult{};
    result.claim_id = "c1";
    result.gold = "mostly-false";
    result.trajectories.push_back(runner.run_trajectory(claim, "c1/T0/"));
    result.final_label = result.trajectories[0].predicted;

    auto j = claim_result_to_json(result);
    auto back = claim_result_from_json(j);
    CHECK(claim_result_to_json(back).dump() == j.dump());
    CHECK(back.trajectories[0].history.size() == 2);
    CHECK(back.trajectories[0].history[0].question.qtype == QuestionType::verification);

    // wire schema: the documented keys are all present
    for (const char* key : {"claim_id", "config_hash", "gold", "final_label", "vote_detail",
                            "trajectories"}) {
        CHECK(j.contains(key));
    }
    const auto& jt = j["trajectories"][0];
    for (const char* key : {"history", "qg_reasonings", "lg_reasoning", "predicted", "status",
                            "tokens", "transcripts"}) {
        CHECK(jt.contains(key));
    }
    const auto& pair = jt["history"][0];
    for (const char* key : {"q", "qtype", "a", "abstained"}) CHECK(pair.contains(key));
}
