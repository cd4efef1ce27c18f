#pragma once

#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rav/errors.hpp"

namespace rav {

struct CompletionRequest {
    std::optional<std::string> system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_tokens = 512;
    std::vector<std::string> stop_sequences;  // at most 4
    // Free-form role/step identifier, e.g. "c12/T0/QG:3". Keys the scripted
    // backend and the run log.
    std::string tag;
};

struct CompletionResponse {
    std::string text;  // provider text verbatim, trailing whitespace trimmed
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int latency_ms = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    int base_backoff_ms = 250;
    int max_concurrent = 4;
};

void validate_request(const CompletionRequest& r);

// Thread-safe JSONL appender; one line per request/response exchange.
class RunLogger {
public:
    explicit RunLogger(const std::string& path, bool append = false);

    void log(const CompletionRequest& req, const CompletionResponse& resp, int attempt);
    const std::string& path() const { return path_; }

private:
    std::mutex mutex_;
    std::ofstream out_;
    std::string path_;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;

    // Validates, dispatches, and logs when a run logger is attached.
    CompletionResponse complete(const CompletionRequest& r);

    void set_run_logger(RunLogger* logger) { logger_ = logger; }

protected:
    virtual CompletionResponse do_complete(const CompletionRequest& r, int& attempt_out) = 0;

private:
    RunLogger* logger_ = nullptr;
};

struct ScriptEntry {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

// Deterministic backend for tests and replay. Scalar entries answer every
// call with the same text; sequences are consumed one entry per call and
// raise UnscriptedTag once exhausted.
class ScriptedBackend : public CompletionBackend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(const std::map<std::string, std::string>& script);

    void add(const std::string& tag, std::string text);
    void add_sequence(const std::string& tag, std::vector<std::string> texts);
    void add_entry_sequence(const std::string& tag, std::vector<ScriptEntry> entries);

    // Builds a replay script from a run log: per-tag sequences in file order,
    // token counts restored.
    static ScriptedBackend from_run_log(const std::string& path);

protected:
    CompletionResponse do_complete(const CompletionRequest& r, int& attempt_out) override;

private:
    struct Slot {
        bool repeatable = false;           // scalar entry, never exhausted
        std::deque<ScriptEntry> entries;
    };
    // behind a pointer so backends stay movable
    std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
    std::map<std::string, Slot> script_;
};

struct HttpBackendConfig {
    std::string base_url;  // e.g. "http://localhost:8000/v1"
    std::string model;
    std::string api_key_env = "RAV_API_KEY";  // credential read from env only
    RetryPolicy retry;
    int timeout_ms = 120000;
};

// OpenAI-compatible chat endpoint: POST <base>/chat/completions with
// {model, messages, temperature, max_tokens, stop}. 429 and 5xx retry with
// exponential backoff and jitter; 401/403 fail immediately; context-length
// 400s surface as ContextOverflow so callers can truncate evidence.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);
    ~HttpBackend() override;

    const HttpBackendConfig& config() const { return cfg_; }

protected:
    CompletionResponse do_complete(const CompletionRequest& r, int& attempt_out) override;

private:
    class Limiter;
    HttpBackendConfig cfg_;
    std::string scheme_host_;  // "http://host:port"
    std::string path_prefix_;  // "/v1"
    std::unique_ptr<Limiter> limiter_;
};

}  // namespace rav
