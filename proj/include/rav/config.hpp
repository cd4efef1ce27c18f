#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rav/dataset.hpp"
#include "rav/llm_backend.hpp"
#include "rav/pipeline.hpp"

namespace rav {

// Flat key=value run configuration with section prefixes (dataset.,
// backend., pipeline., prompts., output.). Unknown keys are rejected with
// the offending line number.
struct RunConfig {
    // dataset.
    std::string dataset_path;
    std::string space_spec = "politifact-5";
    FieldMap field_map;
    // backend.
    std::string base_url;
    std::string model;
    std::string scripted_path;  // run-log JSONL; selects the scripted backend
    RetryPolicy retry;
    int timeout_ms = 120000;
    // pipeline.
    PipelineConfig pipeline;
    int workers = 1;
    // prompts.
    std::string prompts_dir = "prompts";
    // output.
    std::string output_path;
    std::string run_log_path;  // optional transcript log

    void validate_paths() const;  // referenced input paths must exist
};

RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// "--pipeline.k", "5" style leftovers from the command line, mirrored onto
// config keys. Returns key/value pairs; rejects flags that mirror no key.
std::vector<std::pair<std::string, std::string>> parse_override_args(
    const std::vector<std::string>& args);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace rav
