#include "rav/results.hpp"

#include "rav/agents.hpp"
#include "rav/errors.hpp"
#include "rav/util.hpp"

namespace rav {

using nlohmann::json;

nlohmann::json trajectory_to_json(const Trajectory& t) {
    json j = json::object();
    j["claim_id"] = t.claim_id;
    j["config_hash"] = t.config_hash;
    j["qg_reasonings"] = t.qg_reasonings;
    json hist = json::array();
    for (const auto& pair : t.history) {
        hist.push_back({{"q", pair.question.text},
                        {"qtype", to_string(pair.question.qtype)},
                        {"a", pair.answer.text},
                        {"abstained", pair.answer.abstained}});
    }
    j["history"] = std::move(hist);
    j["lg_reasoning"] = t.lg_reasoning;
    j["predicted"] = t.predicted;
    j["status"] = t.ok() ? "ok" : "failed";
    if (!t.ok()) j["failure_reason"] = t.failure_reason;
    if (t.evidence_truncated) j["evidence_truncated"] = true;
    json transcripts = json::array();
    for (const auto& tr : t.transcripts) {
        transcripts.push_back({{"tag", tr.tag}, {"prompt", tr.prompt}, {"response", tr.response}});
    }
    j["transcripts"] = std::move(transcripts);
    j["tokens"] = {{"prompt", t.tokens.prompt}, {"completion", t.tokens.completion}};
    return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    Trajectory t;
    t.claim_id = j.value("claim_id", "");
    t.config_hash = j.value("config_hash", "");
    if (j.contains("qg_reasonings")) {
        t.qg_reasonings = j["qg_reasonings"].get<std::vector<std::string>>();
    }
    if (j.contains("history")) {
        for (const auto& p : j["history"]) {
            QAPair pair;
            pair.question.text = p.value("q", "");
            pair.question.qtype = question_type_from_string(p.value("qtype", "verification"));
            pair.answer.text = p.value("a", "");
            pair.answer.abstained = p.value("abstained", false);
            t.history.push_back(std::move(pair));
        }
    }
    t.lg_reasoning = j.value("lg_reasoning", "");
    t.predicted = j.value("predicted", "");
    t.status = j.value("status", "ok") == "ok" ? TrajectoryStatus::ok : TrajectoryStatus::failed;
    t.failure_reason = j.value("failure_reason", "");
    t.evidence_truncated = j.value("evidence_truncated", false);
    if (j.contains("transcripts")) {
        for (const auto& tr : j["transcripts"]) {
            t.transcripts.push_back(Transcript{tr.value("tag", ""), tr.value("prompt", ""),
                                               tr.value("response", "")});
        }
    }
    if (j.contains("tokens")) {
        t.tokens.prompt = j["tokens"].value("prompt", 0LL);
        t.tokens.completion = j["tokens"].value("completion", 0LL);
    }
    return t;
}

nlohmann::json claim_result_to_json(const ClaimResult& r) {
    json j = json::object();
    j["claim_id"] = r.claim_id;
    j["config_hash"] = r.config_hash;
    j["gold"] = r.gold;
    j["final_label"] = r.final_label;
    j["vote_detail"] = r.vote_detail;
    json trajs = json::array();
    for (const auto& t : r.trajectories) trajs.push_back(trajectory_to_json(t));
    j["trajectories"] = std::move(trajs);
    return j;
}

ClaimResult claim_result_from_json(const nlohmann::json& j) {
    ClaimResult r;
    r.claim_id = j.value("claim_id", "");
    r.config_hash = j.value("config_hash", "");
    r.gold = j.value("gold", "");
    r.final_label = j.value("final_label", "");
    if (j.contains("vote_detail")) {
        for (const auto& [label, count] : j["vote_detail"].items()) {
            r.vote_detail[label] = count.get<int>();
        }
    }
    if (j.contains("trajectories")) {
        for (const auto& t : j["trajectories"]) r.trajectories.push_back(trajectory_from_json(t));
    }
    return r;
}

std::vector<ClaimResult> load_results(const std::string& path) {
    auto lines = util::read_lines(path);
    std::vector<ClaimResult> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = util::trim(lines[i]);
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            raise(Errc::IoError, path + ": bad results line " + std::to_string(i + 1));
        }
        out.push_back(claim_result_from_json(j));
    }
    return out;
}

}  // namespace rav
