#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rav/config.hpp"
#include "rav/dataset.hpp"
#include "rav/llm_backend.hpp"
#include "rav/metrics.hpp"
#include "rav/pipeline.hpp"
#include "rav/prompt.hpp"
#include "rav/util.hpp"

namespace {

using namespace rav;

std::unique_ptr<CompletionBackend> make_backend(const RunConfig& cfg) {
    if (!cfg.scripted_path.empty()) {
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_run_log(cfg.scripted_path));
    }
    if (cfg.base_url.empty()) {
        raise(Errc::ConfigError, "backend.base_url (or backend.scripted) is required to run");
    }
    HttpBackendConfig http;
    http.base_url = cfg.base_url;
    http.model = cfg.model;
    http.retry = cfg.retry;
    http.timeout_ms = cfg.timeout_ms;
    return std::make_unique<HttpBackend>(http);
}

RunConfig load_config_with_overrides(const std::string& path,
                                     const std::vector<std::string>& extras) {
    RunConfig cfg = load_run_config(path);
    for (const auto& [key, value] : parse_override_args(extras)) {
        apply_override(cfg, key, value);
    }
    cfg.validate_paths();
    return cfg;
}

void print_progress(long long done, long long total) {
    if (done == total || done % 10 == 0) {
        std::fprintf(stderr, "\rclaims %lld/%lld", done, total);
        if (done == total) std::fprintf(stderr, "\n");
        std::fflush(stderr);
    }
}

void print_summary(const RunSummary& s) {
    std::printf("claims %lld total, %lld new, %lld resumed, %lld failed\n", s.total, s.processed,
                s.skipped, s.failed);
    if (s.processed == 0) std::printf("0 new claims (output already complete)\n");
    double rate = s.total > 0 ? static_cast<double>(s.failed) / static_cast<double>(s.total) : 0.0;
    std::printf("failure rate %.4f\n", rate);
    std::printf("results: %s\n", s.out_path.c_str());
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& extras, bool dry_run) {
    RunConfig cfg = load_config_with_overrides(config_path, extras);
    LabelSpace space = LabelSpace::from_spec(cfg.space_spec);
    Dataset data = load_jsonl(cfg.dataset_path, space, cfg.field_map);
    PromptLibrary prompts = PromptLibrary::load_dir(cfg.prompts_dir);

    if (dry_run) {
        if (data.empty()) raise(Errc::ConfigError, "dataset is empty");
        ScriptedBackend offline;
        PipelineRunner runner(offline, prompts, space, cfg.pipeline, cfg.model);
        std::printf("%s\n", runner.preview_qg_prompt(data.records().front()).c_str());
        return 0;
    }

    auto backend = make_backend(cfg);
    std::unique_ptr<RunLogger> logger;
    if (!cfg.run_log_path.empty()) {
        logger = std::make_unique<RunLogger>(cfg.run_log_path, /*append=*/true);
        backend->set_run_logger(logger.get());
    }
    PipelineRunner runner(*backend, prompts, space, cfg.pipeline, cfg.model);
    RunSummary summary = runner.run_dataset(data, cfg.output_path, cfg.workers, print_progress);
    print_summary(summary);
    return 0;
}

int cmd_eval(const std::string& results_path, const std::string& dataset_path,
             const std::string& space_spec) {
    LabelSpace space = LabelSpace::from_spec(space_spec);
    Dataset gold = load_jsonl(dataset_path, space);
    MetricsReport report = evaluate(load_results(results_path), gold);
    std::printf("%s", report_to_table(report).c_str());

    std::string json_path = results_path + ".metrics.json";
    util::write_file(json_path, report_to_json(report).dump(2) + "\n");
    std::string csv_path = results_path + ".confusion.csv";
    util::write_file(csv_path, report.confusion.to_csv());
    std::printf("metrics: %s\nconfusion: %s\n", json_path.c_str(), csv_path.c_str());
    return 0;
}

int cmd_zeroshot(const std::string& config_path, const std::string& prompt_id,
                 const std::vector<std::string>& extras) {
    std::string id = util::lower(prompt_id);
    bool known = id.size() == 2 && id[0] == 'p' && id[1] >= '1' && id[1] <= '7';
    if (!known) {
        raise(Errc::ConfigError, "unknown prompt id '" + prompt_id + "' (expected P1..P7)");
    }
    RunConfig cfg = load_config_with_overrides(config_path, extras);
    LabelSpace space = LabelSpace::from_spec(cfg.space_spec);
    Dataset data = load_jsonl(cfg.dataset_path, space, cfg.field_map);
    PromptLibrary prompts = PromptLibrary::load_dir(cfg.prompts_dir);
    const PromptTemplate& tpl = prompts.get("zeroshot_" + id);

    auto backend = make_backend(cfg);
    std::unique_ptr<RunLogger> logger;
    if (!cfg.run_log_path.empty()) {
        logger = std::make_unique<RunLogger>(cfg.run_log_path, /*append=*/true);
        backend->set_run_logger(logger.get());
    }
    double temp = cfg.pipeline.lg_temperature.value_or(0.0);
    RunSummary summary = run_zeroshot(*backend, tpl, data, cfg.output_path, cfg.workers,
                                      cfg.pipeline.max_reasks, temp, 16, print_progress);
    print_summary(summary);
    return 0;
}

int cmd_stats(const std::string& filtered_path, const std::string& unfiltered_path,
              const std::string& space_spec) {
    LabelSpace space = LabelSpace::from_spec(space_spec);
    Dataset filtered = load_jsonl(filtered_path, space);
    std::optional<Dataset> unfiltered;
    if (!unfiltered_path.empty()) unfiltered = load_jsonl(unfiltered_path, space);
    CorpusStats stats = corpus_stats(filtered, unfiltered ? &*unfiltered : nullptr);
    std::printf("%s", corpus_stats_to_table(stats).c_str());
    return 0;
}

int cmd_kappa(const std::string& ratings_path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& line : util::read_lines(ratings_path)) {
        std::string trimmed = util::trim(line);
        if (trimmed.empty()) continue;
        std::vector<std::string> cells;
        for (auto& cell : util::split(trimmed, ',')) cells.push_back(util::trim(cell));
        rows.push_back(std::move(cells));
    }
    RatingMatrix matrix = RatingMatrix::from_labels(rows);
    double kappa = fleiss_kappa(matrix);
    std::printf("items %zu  raters %lld  categories %zu\n", matrix.items(),
                matrix.raters_per_item(), matrix.categories());
    std::printf("fleiss_kappa %.4f\n", kappa);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& ks_csv,
              const std::vector<std::string>& extras) {
    RunConfig cfg = load_config_with_overrides(config_path, extras);
    std::vector<int> ks;
    for (const auto& part : util::split_any(ks_csv, ", ")) {
        try {
            ks.push_back(std::stoi(part));
        } catch (const std::exception&) {
            raise(Errc::ConfigError, "bad k value '" + part + "'");
        }
    }
    LabelSpace space = LabelSpace::from_spec(cfg.space_spec);
    Dataset data = load_jsonl(cfg.dataset_path, space, cfg.field_map);
    PromptLibrary prompts = PromptLibrary::load_dir(cfg.prompts_dir);
    auto backend = make_backend(cfg);
    PipelineRunner runner(*backend, prompts, space, cfg.pipeline, cfg.model);

    std::string base = cfg.output_path;
    if (base.size() > 6 && base.substr(base.size() - 6) == ".jsonl") {
        base = base.substr(0, base.size() - 6);
    }
    auto reports = runner.sweep_k(data, base, ks, cfg.workers);
    std::printf("%6s %10s %10s\n", "k", "macro-F1", "micro-F1");
    for (const auto& [k, report] : reports) {
        std::printf("%6d %10.4f %10.4f\n", k, report.macro_f1, report.micro_f1);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RAV claim-verification pipeline"};
    app.require_subcommand(1);

    std::string config_path, results_path, dataset_path, space_spec = "politifact-5";
    std::string prompt_id, ratings_path, unfiltered_path, ks_csv;
    bool dry_run = false;

    auto* run = app.add_subcommand("run", "Run the pipeline over a dataset");
    run->add_option("-c,--config", config_path, "run config file")->required();
    run->add_flag("--dry-run", dry_run, "print the first claim's opening prompt and exit");
    run->allow_extras();

    auto* eval = app.add_subcommand("eval", "Score a results file against gold labels");
    eval->add_option("results", results_path, "results JSONL")->required();
    eval->add_option("dataset", dataset_path, "gold dataset JSONL")->required();
    eval->add_option("--space", space_spec, "label space (default politifact-5)");

    auto* zeroshot = app.add_subcommand("zeroshot", "Single-prompt baseline over a dataset");
    zeroshot->add_option("-c,--config", config_path, "run config file")->required();
    zeroshot->add_option("-p,--prompt", prompt_id, "prompt id P1..P7")->required();
    zeroshot->allow_extras();

    auto* stats = app.add_subcommand("stats", "Evidence-length statistics per class");
    stats->add_option("filtered", dataset_path, "dataset JSONL")->required();
    stats->add_option("--unfiltered", unfiltered_path, "paired unfiltered dataset JSONL");
    stats->add_option("--space", space_spec, "label space (default politifact-5)");

    auto* kappa = app.add_subcommand("kappa", "Fleiss' kappa over a ratings CSV");
    kappa->add_option("ratings", ratings_path, "CSV, one row per item, one column per rater")
        ->required();

    auto* sweep = app.add_subcommand("sweep", "Run and evaluate across several k values");
    sweep->add_option("-c,--config", config_path, "run config file")->required();
    sweep->add_option("--ks", ks_csv, "comma-separated k values")->required();
    sweep->allow_extras();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, run->remaining(), dry_run);
        if (eval->parsed()) return cmd_eval(results_path, dataset_path, space_spec);
        if (zeroshot->parsed()) return cmd_zeroshot(config_path, prompt_id, zeroshot->remaining());
        if (stats->parsed()) return cmd_stats(dataset_path, unfiltered_path, space_spec);
        if (kappa->parsed()) return cmd_kappa(ratings_path);
        if (sweep->parsed()) return cmd_sweep(config_path, ks_csv, sweep->remaining());
    } catch (const rav::RavError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
