#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rav/types.hpp"

namespace rav {

// Reserved prediction for claims whose every trajectory failed. Always
// scored as wrong; the failure rate is reported separately.
inline constexpr const char* kFailedLabel = "__failed__";

struct Transcript {
    std::string tag;
    std::string prompt;
    std::string response;
};

struct TokenUsage {
    long long prompt = 0;
    long long completion = 0;
};

enum class TrajectoryStatus { ok, failed };

// Full record of one pipeline run for a claim.
struct Trajectory {
    std::string claim_id;
    std::string config_hash;
    std::vector<std::string> qg_reasonings;
    History history;
    std::string lg_reasoning;
    std::string predicted;  // empty while failed
    TrajectoryStatus status = TrajectoryStatus::ok;
    std::string failure_reason;
    bool evidence_truncated = false;
    std::vector<Transcript> transcripts;
    TokenUsage tokens;

    bool ok() const { return status == TrajectoryStatus::ok; }
};

struct ClaimResult {
    std::string claim_id;
    std::string config_hash;
    std::string gold;
    std::string final_label;
    std::map<std::string, int> vote_detail;  // over ok trajectories
    std::vector<Trajectory> trajectories;
};

nlohmann::json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);
nlohmann::json claim_result_to_json(const ClaimResult& r);
ClaimResult claim_result_from_json(const nlohmann::json& j);

// Reads a results JSONL file (one ClaimResult per line). Unparseable lines
// raise IoError with the line number.
std::vector<ClaimResult> load_results(const std::string& path);

}  // namespace rav
