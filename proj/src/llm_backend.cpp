#include "rav/llm_backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <random>
#include <thread>

#include <filesystem>

#include <httplib.h>
#include <json.hpp>

#include "rav/util.hpp"

namespace rav {

using nlohmann::json;

void validate_request(const CompletionRequest& r) {
    if (r.user_text.empty()) raise(Errc::InvalidRequest, "user_text is empty (tag " + r.tag + ")");
    if (r.temperature < 0.0 || r.temperature > 2.0) {
        raise(Errc::InvalidRequest, "temperature out of [0, 2]: " + std::to_string(r.temperature));
    }
    if (r.max_tokens < 1) raise(Errc::InvalidRequest, "max_tokens must be positive");
    if (r.stop_sequences.size() > 4) raise(Errc::InvalidRequest, "at most 4 stop sequences");
}

RunLogger::RunLogger(const std::string& path, bool append) : path_(path) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out_) raise(Errc::IoError, "cannot open run log: " + path);
}

void RunLogger::log(const CompletionRequest& req, const CompletionResponse& resp, int attempt) {
    json line = json::object();
    line["tag"] = req.tag;
    json jr = json::object();
    if (req.system_text) jr["system"] = *req.system_text;
    jr["user"] = req.user_text;
    jr["temperature"] = req.temperature;
    jr["max_tokens"] = req.max_tokens;
    if (!req.stop_sequences.empty()) jr["stop"] = req.stop_sequences;
    line["request"] = std::move(jr);
    line["response"] = resp.text;
    line["tokens"] = {{"prompt", resp.prompt_tokens}, {"completion", resp.completion_tokens}};
    line["latency_ms"] = resp.latency_ms;
    line["attempt"] = attempt;

    std::lock_guard<std::mutex> lock(mutex_);
    out_ << line.dump() << '\n';
    out_.flush();
}

CompletionResponse CompletionBackend::complete(const CompletionRequest& r) {
    validate_request(r);
    int attempt = 1;
    CompletionResponse resp = do_complete(r, attempt);
    // Trailing whitespace only; leading text may be significant to parsers.
    while (!resp.text.empty() && std::isspace(static_cast<unsigned char>(resp.text.back()))) {
        resp.text.pop_back();
    }
    if (logger_) logger_->log(r, resp, attempt);
    return resp;
}

ScriptedBackend::ScriptedBackend(const std::map<std::string, std::string>& script) {
    for (const auto& [tag, text] : script) add(tag, text);
}

void ScriptedBackend::add(const std::string& tag, std::string text) {
    std::lock_guard<std::mutex> lock(*mutex_);
    Slot slot;
    slot.repeatable = true;
    slot.entries.push_back(ScriptEntry{std::move(text)});
    script_[tag] = std::move(slot);
}

void ScriptedBackend::add_sequence(const std::string& tag, std::vector<std::string> texts) {
    std::vector<ScriptEntry> entries;
    entries.reserve(texts.size());
    for (auto& t : texts) entries.push_back(ScriptEntry{std::move(t)});
    add_entry_sequence(tag, std::move(entries));
}

void ScriptedBackend::add_entry_sequence(const std::string& tag, std::vector<ScriptEntry> entries) {
    std::lock_guard<std::mutex> lock(*mutex_);
    Slot& slot = script_[tag];
    slot.repeatable = false;
    for (auto& e : entries) slot.entries.push_back(std::move(e));
}

ScriptedBackend ScriptedBackend::from_run_log(const std::string& path) {
    ScriptedBackend backend;
    auto lines = util::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = util::trim(lines[i]);
        if (line.empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("tag") ||
            !obj.contains("response")) {
            raise(Errc::IoError,
                  "run log " + path + ": bad entry at line " + std::to_string(i + 1));
        }
        ScriptEntry entry;
        entry.text = obj["response"].get<std::string>();
        if (obj.contains("tokens") && obj["tokens"].is_object()) {
            entry.prompt_tokens = obj["tokens"].value("prompt", 0);
            entry.completion_tokens = obj["tokens"].value("completion", 0);
        }
        backend.add_entry_sequence(obj["tag"].get<std::string>(), {std::move(entry)});
    }
    return backend;
}

CompletionResponse ScriptedBackend::do_complete(const CompletionRequest& r, int& attempt_out) {
    attempt_out = 1;
    std::lock_guard<std::mutex> lock(*mutex_);
    auto it = script_.find(r.tag);
    if (it == script_.end()) raise(Errc::UnscriptedTag, "no script entry for tag '" + r.tag + "'");
    Slot& slot = it->second;
    if (slot.entries.empty()) {
        raise(Errc::UnscriptedTag, "script for tag '" + r.tag + "' is exhausted");
    }
    ScriptEntry entry = slot.entries.front();
    if (!slot.repeatable) slot.entries.pop_front();
    CompletionResponse resp;
    resp.text = std::move(entry.text);
    resp.prompt_tokens = entry.prompt_tokens;
    resp.completion_tokens = entry.completion_tokens;
    resp.latency_ms = 0;
    return resp;
}

// ---------------------------------------------------------------------------
// HTTP backend

class HttpBackend::Limiter {
public:
    explicit Limiter(int max) : available_(max > 0 ? max : 1) {}

    struct Guard {
        explicit Guard(Limiter* l) : limiter(l) {}
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;
        ~Guard() { limiter->release(); }
        Limiter* limiter;
    };

    Guard scoped() {
        acquire();
        return Guard{this};
    }

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

namespace {

int backoff_ms(int attempt, int base_ms) {
    if (base_ms <= 0) return 0;
    double expo = static_cast<double>(base_ms) * static_cast<double>(1 << std::min(attempt - 1, 16));
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    double ms = std::min(expo * jitter(rng), 30000.0);
    return static_cast<int>(ms);
}

bool looks_like_context_overflow(const std::string& body) {
    std::string l = util::lower(body);
    return l.find("context length") != std::string::npos ||
           l.find("context_length") != std::string::npos ||
           l.find("maximum context") != std::string::npos ||
           l.find("context window") != std::string::npos ||
           l.find("too many tokens") != std::string::npos;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) raise(Errc::ConfigError, "backend.base_url is empty");
    std::string url = cfg_.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        raise(Errc::ConfigError, "backend.base_url must start with http:// or https://");
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_ = url;
        path_prefix_.clear();
    } else {
        scheme_host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
    }
    limiter_ = std::make_unique<Limiter>(cfg_.retry.max_concurrent);
}

HttpBackend::~HttpBackend() = default;

CompletionResponse HttpBackend::do_complete(const CompletionRequest& r, int& attempt_out) {
    auto guard = limiter_->scoped();

    json body = json::object();
    body["model"] = cfg_.model;
    json messages = json::array();
    if (r.system_text) messages.push_back({{"role", "system"}, {"content", *r.system_text}});
    messages.push_back({{"role", "user"}, {"content", r.user_text}});
    body["messages"] = std::move(messages);
    body["temperature"] = r.temperature;
    body["max_tokens"] = r.max_tokens;
    if (!r.stop_sequences.empty()) body["stop"] = r.stop_sequences;
    const std::string payload = body.dump();
    const std::string path = path_prefix_ + "/chat/completions";

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const int max_attempts = std::max(1, cfg_.retry.max_attempts);
    std::string last_error;
    Errc last_code = Errc::Transport;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        attempt_out = attempt;
        if (attempt > 1) {
            int delay = backoff_ms(attempt - 1, cfg_.retry.base_backoff_ms);
            if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }

        httplib::Client client(scheme_host_);
        client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        client.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

        auto t0 = util::steady_ms();
        httplib::Result res = client.Post(path, headers, payload, "application/json");
        auto elapsed = util::steady_ms() - t0;

        if (!res) {
            last_error = "io error: " + httplib::to_string(res.error());
            last_code = Errc::Transport;
            continue;  // retryable
        }

        const int status = res->status;
        if (status == 200) {
            json resp = json::parse(res->body, nullptr, false);
            if (resp.is_discarded()) {
                last_error = "unparseable 200 body";
                last_code = Errc::Transport;
                continue;
            }
            CompletionResponse out;
            try {
                const auto& choice = resp.at("choices").at(0);
                if (choice.contains("message")) {
                    const auto& content = choice.at("message").at("content");
                    out.text = content.is_null() ? "" : content.get<std::string>();
                } else {
                    out.text = choice.value("text", "");
                }
            } catch (const json::exception& e) {
                last_error = std::string("bad response shape: ") + e.what();
                last_code = Errc::Transport;
                continue;
            }
            if (resp.contains("usage") && resp["usage"].is_object()) {
                out.prompt_tokens = resp["usage"].value("prompt_tokens", 0);
                out.completion_tokens = resp["usage"].value("completion_tokens", 0);
            }
            out.latency_ms = static_cast<int>(elapsed);
            return out;
        }

        if (status == 401 || status == 403) {
            raise(Errc::AuthFailed, "HTTP " + std::to_string(status) + " from " + path);
        }
        if (status == 400 && looks_like_context_overflow(res->body)) {
            raise(Errc::ContextOverflow, "provider rejected request as over context limit");
        }
        if (status == 429) {
            last_error = "HTTP 429";
            last_code = Errc::RateLimited;
            // Honor a numeric Retry-After if present.
            if (res->has_header("Retry-After")) {
                try {
                    int secs = std::stoi(res->get_header_value("Retry-After"));
                    if (secs > 0 && attempt < max_attempts) {
                        std::this_thread::sleep_for(std::chrono::seconds(std::min(secs, 30)));
                    }
                } catch (const std::exception&) {
                }
            }
            continue;
        }
        if (status >= 500) {
            last_error = "HTTP " + std::to_string(status);
            last_code = Errc::Transport;
            continue;
        }
        // Remaining 4xx: not retryable.
        raise(Errc::Transport, "HTTP " + std::to_string(status) + ": " + res->body);
    }

    raise(last_code, last_error + " after " + std::to_string(max_attempts) + " attempts");
}

}  // namespace rav
