#include "rav/pipeline.hpp"

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "rav/util.hpp"

namespace rav {

using nlohmann::json;

const char* to_string(Strategy s) {
    return s == Strategy::all_at_once ? "all_at_once" : "iterative";
}

PipelineConfig PipelineConfig::resolved() const {
    PipelineConfig r = *this;
    if (r.num_trajectories == 0) {
        r.num_trajectories = r.strategy == Strategy::all_at_once ? 3 : 1;
    }
    const double auto_temp = r.num_trajectories > 1 ? 0.7 : 0.0;
    if (!r.qg_temperature) r.qg_temperature = auto_temp;
    if (!r.ag_temperature) r.ag_temperature = auto_temp;
    if (!r.lg_temperature) r.lg_temperature = auto_temp;
    return r;
}

void PipelineConfig::validate() const {
    if (k < 1) raise(Errc::ConfigError, "pipeline.k must be >= 1");
    if (min_questions < 0) raise(Errc::ConfigError, "pipeline.min_questions must be >= 0");
    if (k < min_questions) raise(Errc::ConfigError, "pipeline.k must be >= min_questions");
    if (num_trajectories < 1) raise(Errc::ConfigError, "pipeline.num_trajectories must be >= 1");
    if (num_trajectories > 1 && num_trajectories % 2 == 0) {
        raise(Errc::ConfigError, "pipeline.num_trajectories must be odd when voting");
    }
    for (const auto& t : {qg_temperature, ag_temperature, lg_temperature}) {
        if (t && (*t < 0.0 || *t > 2.0)) {
            raise(Errc::ConfigError, "temperatures must be within [0, 2]");
        }
    }
    if (qg_max_tokens < 1 || ag_max_tokens < 1 || lg_max_tokens < 1) {
        raise(Errc::ConfigError, "max token budgets must be positive");
    }
    if (max_reasks < 0) raise(Errc::ConfigError, "pipeline.max_reasks must be >= 0");
    if (evidence_char_budget < 16) {
        raise(Errc::ConfigError, "pipeline.evidence_char_budget is unusably small");
    }
    if (strategy == Strategy::all_at_once && !reasoning_on) {
        raise(Errc::ConfigError,
              "no shipped template for all_at_once without reasoning; use the iterative strategy");
    }
}

nlohmann::json PipelineConfig::to_json() const {
    PipelineConfig r = resolved();
    return json{{"strategy", to_string(r.strategy)},
                {"qtypes", to_string(r.qtypes)},
                {"k", r.k},
                {"min_questions", r.min_questions},
                {"num_trajectories", r.num_trajectories},
                {"reasoning_on", r.reasoning_on},
                {"evidence_mode", to_string(r.evidence_mode)},
                {"qg_temperature", *r.qg_temperature},
                {"ag_temperature", *r.ag_temperature},
                {"lg_temperature", *r.lg_temperature},
                {"qg_max_tokens", r.qg_max_tokens},
                {"ag_max_tokens", r.ag_max_tokens},
                {"lg_max_tokens", r.lg_max_tokens},
                {"max_reasks", r.max_reasks},
                {"evidence_char_budget", r.evidence_char_budget}};
}

std::string PipelineConfig::hash(const std::string& model, const std::string& space_name) const {
    json j = to_json();
    j["model"] = model;
    j["space"] = space_name;
    return util::fnv1a_hex(j.dump());
}

std::pair<std::string, std::map<std::string, int>> majority_vote(
    const std::vector<Trajectory>& trajectories) {
    std::map<std::string, int> counts;
    for (const auto& t : trajectories) {
        if (t.ok()) counts[t.predicted]++;
    }
    if (counts.empty()) raise(Errc::NoSuccessfulTrajectory, "no ok trajectory to vote over");

    int best = 0;
    for (const auto& [label, count] : counts) best = std::max(best, count);
    // Deterministic tie-break: the earliest trajectory holding a tied label.
    for (const auto& t : trajectories) {
        if (t.ok() && counts[t.predicted] == best) return {t.predicted, counts};
    }
    raise(Errc::NoSuccessfulTrajectory, "unreachable");
}

namespace {

constexpr const char* kTruncationMark = "…[truncated]";

std::string truncate_evidence(const std::string& evidence, std::size_t budget, bool& truncated) {
    if (evidence.size() <= budget) return evidence;
    truncated = true;
    return evidence.substr(0, budget) + kTruncationMark;
}

const char* qg_template_name(const PipelineConfig& cfg) {
    if (cfg.strategy == Strategy::all_at_once) return "qg_all_at_once";
    return cfg.reasoning_on ? "qg_iterative" : "qg_no_reasoning";
}

const char* ag_template_name(const PipelineConfig& cfg) {
    return cfg.evidence_mode == AnswerMode::gold_evidence ? "ag_gold_evidence"
                                                          : "ag_pretrained_only";
}

const char* lg_template_name(const PipelineConfig& cfg) {
    return cfg.reasoning_on ? "lg" : "lg_no_reasoning";
}

// Captures every request/response this trajectory makes, regardless of which
// agent issued it.
class TranscribingBackend : public CompletionBackend {
public:
    TranscribingBackend(CompletionBackend& inner, Trajectory& sink)
        : inner_(inner), sink_(sink) {}

protected:
    CompletionResponse do_complete(const CompletionRequest& r, int& attempt_out) override {
        CompletionResponse resp = inner_.complete(r);
        attempt_out = 1;
        sink_.transcripts.push_back(Transcript{r.tag, r.user_text, resp.text});
        sink_.tokens.prompt += resp.prompt_tokens;
        sink_.tokens.completion += resp.completion_tokens;
        return resp;
    }

private:
    CompletionBackend& inner_;
    Trajectory& sink_;
};

}  // namespace

PipelineRunner::PipelineRunner(CompletionBackend& backend, const PromptLibrary& prompts,
                               LabelSpace space, PipelineConfig cfg, std::string model_name)
    : backend_(backend),
      prompts_(prompts),
      space_(std::move(space)),
      cfg_(cfg.resolved()),
      model_name_(std::move(model_name)) {
    cfg_.validate();
    config_hash_ = cfg_.hash(model_name_, space_.name());
    // Fail fast when the template set is incomplete.
    prompts_.get(qg_template_name(cfg_));
    prompts_.get(ag_template_name(cfg_));
    prompts_.get(lg_template_name(cfg_));
}

std::string PipelineRunner::preview_qg_prompt(const ClaimRecord& c) const {
    const auto& tpl = prompts_.get(qg_template_name(cfg_));
    PromptBinding binding{{"claim", c.claim}, {"question_types", qtype_instruction(cfg_.qtypes)}};
    if (cfg_.strategy == Strategy::iterative) binding["history"] = render_history({});
    return tpl.render(binding);
}

Trajectory PipelineRunner::run_trajectory(const ClaimRecord& c, const std::string& tag_prefix) const {
    Trajectory traj;
    traj.claim_id = c.id;
    traj.config_hash = config_hash_;

    TranscribingBackend backend(backend_, traj);

    AgentOptions qg_opt{cfg_.max_reasks, *cfg_.qg_temperature, cfg_.qg_max_tokens,
                        cfg_.reasoning_on};
    AgentOptions ag_opt{cfg_.max_reasks, *cfg_.ag_temperature, cfg_.ag_max_tokens,
                        cfg_.reasoning_on};
    AgentOptions lg_opt{cfg_.max_reasks, *cfg_.lg_temperature, cfg_.lg_max_tokens,
                        cfg_.reasoning_on};

    QuestionGenerator qg(backend, prompts_.get(qg_template_name(cfg_)), cfg_.qtypes, qg_opt);
    AnswerGenerator ag(backend, prompts_.get(ag_template_name(cfg_)),
                       cfg_.evidence_mode, ag_opt);
    LabelGenerator lg(backend, prompts_.get(lg_template_name(cfg_)), space_, lg_opt);

    try {
        std::string evidence;
        if (cfg_.evidence_mode == AnswerMode::gold_evidence) {
            if (!c.has_evidence()) {
                raise(Errc::EvidenceMissing,
                      "claim '" + c.id + "' has no evidence in gold-evidence mode");
            }
            evidence = truncate_evidence(c.evidence,
                                         static_cast<std::size_t>(cfg_.evidence_char_budget),
                                         traj.evidence_truncated);
        }

        auto answer_question = [&](const Question& q, int step) {
            // A context overflow mid-trajectory halves the evidence and
            // retries rather than aborting the claim.
            std::string tag = tag_prefix + "AG:" + std::to_string(step);
            for (;;) {
                try {
                    return ag.step(q.text, evidence, tag);
                } catch (const RavError& e) {
                    if (e.code() != Errc::ContextOverflow || evidence.size() < 256) throw;
                    bool truncated = false;
                    evidence = truncate_evidence(evidence, evidence.size() / 2, truncated);
                    traj.evidence_truncated = true;
                }
            }
        };

        if (cfg_.strategy == Strategy::iterative) {
            bool must_continue = false;
            for (int step = 1;; ++step) {
                std::string tag = tag_prefix + "QG:" + std::to_string(step);
                QGOutput out = qg.step(c.claim, traj.history, tag, must_continue);
                must_continue = false;
                if (!out.reasoning.empty() || cfg_.reasoning_on) {
                    traj.qg_reasonings.push_back(out.reasoning);
                }
                if (out.stop()) {
                    if (static_cast<int>(traj.history.size()) >= cfg_.min_questions) break;
                    // Premature stop: repeat this step with a must-ask nudge.
                    QGOutput forced = qg.step(c.claim, traj.history, tag, true);
                    if (!forced.reasoning.empty() || cfg_.reasoning_on) {
                        traj.qg_reasonings.push_back(forced.reasoning);
                    }
                    if (forced.stop()) {
                        raise(Errc::ParseFailure,
                              "question generator insists on stopping before min_questions");
                    }
                    out = std::move(forced);
                }
                Answer a = answer_question(*out.question, step);
                traj.history.push_back(QAPair{*out.question, std::move(a)});
                if (static_cast<int>(traj.history.size()) >= cfg_.k) break;
            }
        } else {
            QGBatch batch = qg.generate_all(c.claim, tag_prefix + "QG:1");
            traj.qg_reasonings.push_back(batch.reasoning);
            if (static_cast<int>(batch.questions.size()) > cfg_.k) {
                batch.questions.resize(static_cast<std::size_t>(cfg_.k));
            }
            if (static_cast<int>(batch.questions.size()) < cfg_.min_questions) {
                raise(Errc::EmptyQuestionList, "all-at-once produced fewer than min_questions");
            }
            int step = 1;
            for (const auto& q : batch.questions) {
                Answer a = answer_question(q, step);
                traj.history.push_back(QAPair{q, std::move(a)});
                ++step;
            }
        }

        LGOutput verdict = lg.step(c.claim, traj.history, tag_prefix + "LG:1");
        traj.lg_reasoning = verdict.reasoning;
        traj.predicted = verdict.label;
        traj.status = TrajectoryStatus::ok;
    } catch (const RavError& e) {
        traj.status = TrajectoryStatus::failed;
        traj.failure_reason = e.what();
    } catch (const std::exception& e) {
        traj.status = TrajectoryStatus::failed;
        traj.failure_reason = std::string("unexpected: ") + e.what();
    }
    return traj;
}

ClaimResult PipelineRunner::run_claim(const ClaimRecord& c) const {
    ClaimResult result;
    result.claim_id = c.id;
    result.config_hash = config_hash_;
    result.gold = c.label;

    for (int j = 0; j < cfg_.num_trajectories; ++j) {
        std::string prefix = c.id + "/T" + std::to_string(j) + "/";
        result.trajectories.push_back(run_trajectory(c, prefix));
    }

    try {
        auto [label, detail] = majority_vote(result.trajectories);
        result.final_label = label;
        result.vote_detail = std::move(detail);
    } catch (const RavError&) {
        result.final_label = kFailedLabel;
    }
    return result;
}

namespace {

// Completed results are buffered and flushed strictly in dataset order, so
// output files are deterministic for any worker count.
class OrderedWriter {
public:
    OrderedWriter(const std::string& path, std::size_t total) : pending_(total) {
        // An interrupted run can leave a torn final line; start appending on
        // a fresh line so it cannot corrupt the next record.
        bool needs_newline = false;
        if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
            std::ifstream in(path, std::ios::binary);
            in.seekg(-1, std::ios::end);
            char last = '\n';
            in.get(last);
            needs_newline = last != '\n';
        }
        out_.open(path, std::ios::binary | std::ios::app);
        if (!out_) raise(Errc::IoError, "cannot open results file: " + path);
        if (needs_newline) out_ << '\n';
    }

    void skip(std::size_t index) { deliver(index, std::nullopt); }

    void write(std::size_t index, std::string line) { deliver(index, std::move(line)); }

private:
    void deliver(std::size_t index, std::optional<std::string> line) {
        std::lock_guard<std::mutex> lock(mutex_);
        pending_.at(index) = Slot{true, std::move(line)};
        while (next_ < pending_.size() && pending_[next_].done) {
            if (pending_[next_].line) {
                out_ << *pending_[next_].line << '\n';
                out_.flush();
            }
            pending_[next_].line.reset();
            ++next_;
        }
    }

    struct Slot {
        bool done = false;
        std::optional<std::string> line;
    };
    std::ofstream out_;
    std::mutex mutex_;
    std::vector<Slot> pending_;
    std::size_t next_ = 0;
};

std::unordered_set<std::string> completed_claims(const std::string& path,
                                                 const std::string& config_hash) {
    std::unordered_set<std::string> done;
    if (!std::filesystem::exists(path)) return done;
    for (const auto& line : util::read_lines(path)) {
        std::string trimmed = util::trim(line);
        if (trimmed.empty()) continue;
        json j = json::parse(trimmed, nullptr, false);
        // A truncated trailing line from an interrupted run is not resumable
        // state; the claim simply reruns.
        if (j.is_discarded() || !j.is_object()) continue;
        if (j.value("config_hash", "") != config_hash) continue;
        std::string id = j.value("claim_id", "");
        if (!id.empty()) done.insert(id);
    }
    return done;
}

}  // namespace

RunSummary PipelineRunner::run_dataset(const Dataset& d, const std::string& out_path, int workers,
                                       ProgressFn progress) const {
    if (workers < 1) raise(Errc::ConfigError, "workers must be >= 1");
    auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);

    const auto done = completed_claims(out_path, config_hash_);

    RunSummary summary;
    summary.total = static_cast<long long>(d.size());
    summary.out_path = out_path;

    OrderedWriter writer(out_path, d.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<long long> skipped{0}, processed{0}, failed{0}, finished{0};
    std::mutex progress_mutex;

    auto work = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= d.size()) return;
            const ClaimRecord& claim = d.records()[i];
            if (done.count(claim.id)) {
                writer.skip(i);
                skipped.fetch_add(1);
            } else {
                ClaimResult result = run_claim(claim);
                if (result.final_label == kFailedLabel) failed.fetch_add(1);
                writer.write(i, claim_result_to_json(result).dump());
                processed.fetch_add(1);
            }
            long long n = finished.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                progress(n, summary.total);
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    summary.skipped = skipped.load();
    summary.processed = processed.load();
    summary.failed = failed.load();
    return summary;
}

std::map<int, MetricsReport> PipelineRunner::sweep_k(const Dataset& d, const std::string& out_base,
                                                     const std::vector<int>& ks,
                                                     int workers) const {
    if (ks.empty()) raise(Errc::ConfigError, "sweep requires at least one k");
    for (int k : ks) {
        if (k < cfg_.min_questions || k < 1) {
            raise(Errc::ConfigError, "sweep k=" + std::to_string(k) + " below min_questions");
        }
    }
    std::map<int, MetricsReport> reports;
    for (int k : ks) {
        PipelineConfig cfg = cfg_;
        cfg.k = k;
        PipelineRunner runner(backend_, prompts_, space_, cfg, model_name_);
        std::string out_path = out_base + ".k" + std::to_string(k) + ".jsonl";
        runner.run_dataset(d, out_path, workers);
        reports.emplace(k, evaluate(load_results(out_path), d));
    }
    return reports;
}

RunSummary run_zeroshot(CompletionBackend& backend, const PromptTemplate& tpl, const Dataset& d,
                        const std::string& out_path, int workers, int max_reasks,
                        double temperature, int max_tokens, ProgressFn progress) {
    if (workers < 1) raise(Errc::ConfigError, "workers must be >= 1");
    auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);

    // Zero-shot runs are identified by the template and space, mirroring the
    // pipeline's resume behavior.
    const std::string hash =
        util::fnv1a_hex("zeroshot:" + tpl.name() + ":" + d.space().name() + ":" +
                        std::to_string(temperature));
    const auto done = completed_claims(out_path, hash);

    RunSummary summary;
    summary.total = static_cast<long long>(d.size());
    summary.out_path = out_path;

    OrderedWriter writer(out_path, d.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<long long> skipped{0}, processed{0}, failed{0}, finished{0};
    std::mutex progress_mutex;

    constexpr const char* kZsReminder =
        "Answer with exactly one label from the list, and nothing else.";

    auto run_one = [&](const ClaimRecord& claim) {
        ClaimResult result;
        result.claim_id = claim.id;
        result.config_hash = hash;
        result.gold = claim.label;

        Trajectory traj;
        traj.claim_id = claim.id;
        traj.config_hash = hash;
        std::string prompt =
            tpl.render({{"claim", claim.claim}, {"evidence", claim.evidence}});
        try {
            for (int attempt = 0;; ++attempt) {
                CompletionRequest req;
                req.user_text = attempt == 0 ? prompt : prompt + "\n\n" + kZsReminder;
                req.temperature = temperature;
                req.max_tokens = max_tokens;
                req.tag = claim.id + "/ZS:1";
                CompletionResponse resp = backend.complete(req);
                traj.transcripts.push_back(Transcript{req.tag, req.user_text, resp.text});
                traj.tokens.prompt += resp.prompt_tokens;
                traj.tokens.completion += resp.completion_tokens;
                try {
                    traj.predicted = normalize_label(resp.text, d.space());
                    traj.status = TrajectoryStatus::ok;
                    break;
                } catch (const RavError& e) {
                    if (e.code() != Errc::UnmappableLabel || attempt >= max_reasks) throw;
                }
            }
        } catch (const RavError& e) {
            traj.status = TrajectoryStatus::failed;
            traj.failure_reason = e.what();
        }

        result.trajectories.push_back(std::move(traj));
        const Trajectory& t = result.trajectories.back();
        if (t.ok()) {
            result.final_label = t.predicted;
            result.vote_detail[t.predicted] = 1;
        } else {
            result.final_label = kFailedLabel;
        }
        return result;
    };

    auto work = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= d.size()) return;
            const ClaimRecord& claim = d.records()[i];
            if (done.count(claim.id)) {
                writer.skip(i);
                skipped.fetch_add(1);
            } else {
                ClaimResult result = run_one(claim);
                if (result.final_label == kFailedLabel) failed.fetch_add(1);
                writer.write(i, claim_result_to_json(result).dump());
                processed.fetch_add(1);
            }
            long long n = finished.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                progress(n, summary.total);
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    summary.skipped = skipped.load();
    summary.processed = processed.load();
    summary.failed = failed.load();
    return summary;
}

}  // namespace rav
