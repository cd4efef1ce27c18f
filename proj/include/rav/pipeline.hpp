#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rav/agents.hpp"
#include "rav/dataset.hpp"
#include "rav/llm_backend.hpp"
#include "rav/metrics.hpp"
#include "rav/prompt.hpp"
#include "rav/results.hpp"

namespace rav {

enum class Strategy { all_at_once, iterative };  // P1 / P2

const char* to_string(Strategy s);

struct PipelineConfig {
    Strategy strategy = Strategy::iterative;
    QtypePolicy qtypes = QtypePolicy::t1_and_t2;
    int k = 10;             // hard cap on sub-questions per trajectory
    int min_questions = 1;  // premature stops get nudged below this; 0 restores the bare loop
    int num_trajectories = 0;  // 0 = auto: 3 for all_at_once, 1 for iterative
    bool reasoning_on = true;
    AnswerMode evidence_mode = AnswerMode::gold_evidence;
    // unset = auto: 0.0 single-trajectory, 0.7 when voting
    std::optional<double> qg_temperature;
    std::optional<double> ag_temperature;
    std::optional<double> lg_temperature;
    int qg_max_tokens = 512;
    int ag_max_tokens = 64;
    int lg_max_tokens = 512;
    int max_reasks = 2;
    int evidence_char_budget = 24000;

    // Copy with auto fields filled in.
    PipelineConfig resolved() const;
    void validate() const;  // on a resolved config

    nlohmann::json to_json() const;
    // Identifies an experiment for resume purposes: pipeline semantics plus
    // model and label space, independent of transport (http vs scripted).
    std::string hash(const std::string& model, const std::string& space_name) const;
};

// Label with the highest count over ok trajectories; ties go to the earliest
// trajectory holding a tied label.
std::pair<std::string, std::map<std::string, int>> majority_vote(
    const std::vector<Trajectory>& trajectories);

struct RunSummary {
    long long total = 0;
    long long skipped = 0;    // resumed from an earlier run
    long long processed = 0;  // newly written this run
    long long failed = 0;     // processed claims with final_label == __failed__
    std::string out_path;
};

using ProgressFn = std::function<void(long long done, long long total)>;

class PipelineRunner {
public:
    PipelineRunner(CompletionBackend& backend, const PromptLibrary& prompts,
                   LabelSpace space, PipelineConfig cfg, std::string model_name = "");

    const PipelineConfig& config() const { return cfg_; }
    const std::string& config_hash() const { return config_hash_; }

    // One full pipeline execution. Agent errors mark the trajectory failed;
    // nothing escapes the trajectory boundary.
    Trajectory run_trajectory(const ClaimRecord& c, const std::string& tag_prefix = "") const;

    // num_trajectories runs plus the vote.
    ClaimResult run_claim(const ClaimRecord& c) const;

    // One ClaimResult JSONL line per claim, written in dataset order.
    // Claims already in the file with a matching config hash are skipped.
    RunSummary run_dataset(const Dataset& d, const std::string& out_path,
                           int workers = 1, ProgressFn progress = nullptr) const;

    // run_dataset + evaluate per k; results land at "<out_base>.k<k>.jsonl".
    std::map<int, MetricsReport> sweep_k(const Dataset& d, const std::string& out_base,
                                         const std::vector<int>& ks, int workers = 1) const;

    // First claim's opening QG prompt, for --dry-run.
    std::string preview_qg_prompt(const ClaimRecord& c) const;

private:
    CompletionBackend& backend_;
    const PromptLibrary& prompts_;
    LabelSpace space_;
    PipelineConfig cfg_;
    std::string model_name_;
    std::string config_hash_;
};

// Single-call baseline: render the zero-shot template with claim+evidence,
// normalize the reply into the space. Output is evaluate-compatible.
RunSummary run_zeroshot(CompletionBackend& backend, const PromptTemplate& tpl,
                        const Dataset& d, const std::string& out_path,
                        int workers = 1, int max_reasks = 2,
                        double temperature = 0.0, int max_tokens = 16,
                        ProgressFn progress = nullptr);

}  // namespace rav
