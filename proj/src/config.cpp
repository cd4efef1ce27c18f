#include "rav/config.hpp"

#include <filesystem>
#include <set>

#include "rav/util.hpp"

namespace rav {

namespace {

long long parse_ll(const std::string& value, const std::string& key, const std::string& where) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        raise(Errc::ConfigError, where + ": key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& value, const std::string& key, const std::string& where) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        raise(Errc::ConfigError, where + ": key '" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& value, const std::string& key, const std::string& where) {
    std::string v = util::lower(value);
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    raise(Errc::ConfigError, where + ": key '" + key + "' expects a boolean, got '" + value + "'");
}

// "a=b,c=d" pair lists used by dataset.field_map / dataset.label_map.
std::map<std::string, std::string> parse_pairs(const std::string& value, const std::string& key,
                                               const std::string& where) {
    std::map<std::string, std::string> out;
    for (const auto& item : util::split_any(value, ",")) {
        auto eq = item.find('=');
        if (eq == std::string::npos) {
            raise(Errc::ConfigError,
                  where + ": key '" + key + "' expects src=dst pairs, got '" + item + "'");
        }
        out[util::trim(item.substr(0, eq))] = util::trim(item.substr(eq + 1));
    }
    return out;
}

Strategy parse_strategy(const std::string& value, const std::string& where) {
    std::string v = util::lower(value);
    if (v == "iterative" || v == "p2") return Strategy::iterative;
    if (v == "all_at_once" || v == "p1") return Strategy::all_at_once;
    raise(Errc::ConfigError, where + ": pipeline.strategy must be iterative|all_at_once, got '" +
                                 value + "'");
}

QtypePolicy parse_qtypes(const std::string& value, const std::string& where) {
    std::string v = util::lower(value);
    if (v == "t1" || v == "t1_only") return QtypePolicy::t1_only;
    if (v == "t1t2" || v == "t1_and_t2" || v == "t1&2") return QtypePolicy::t1_and_t2;
    raise(Errc::ConfigError, where + ": pipeline.qtypes must be t1|t1t2, got '" + value + "'");
}

AnswerMode parse_evidence_mode(const std::string& value, const std::string& where) {
    std::string v = util::lower(value);
    if (v == "gold" || v == "gold_evidence") return AnswerMode::gold_evidence;
    if (v == "pretrained" || v == "pretrained_only") return AnswerMode::pretrained_only;
    raise(Errc::ConfigError,
          where + ": pipeline.evidence_mode must be gold|pretrained, got '" + value + "'");
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value,
                      const std::string& where) {
    if (key == "dataset.path") cfg.dataset_path = value;
    else if (key == "dataset.space") cfg.space_spec = value;
    else if (key == "dataset.field_map") cfg.field_map.names = parse_pairs(value, key, where);
    else if (key == "dataset.label_map") cfg.field_map.label_values = parse_pairs(value, key, where);
    else if (key == "backend.base_url") cfg.base_url = value;
    else if (key == "backend.model") cfg.model = value;
    else if (key == "backend.scripted") cfg.scripted_path = value;
    else if (key == "backend.max_attempts") cfg.retry.max_attempts = static_cast<int>(parse_ll(value, key, where));
    else if (key == "backend.base_backoff_ms") cfg.retry.base_backoff_ms = static_cast<int>(parse_ll(value, key, where));
    else if (key == "backend.max_concurrent") cfg.retry.max_concurrent = static_cast<int>(parse_ll(value, key, where));
    else if (key == "backend.timeout_ms") cfg.timeout_ms = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.strategy") cfg.pipeline.strategy = parse_strategy(value, where);
    else if (key == "pipeline.qtypes") cfg.pipeline.qtypes = parse_qtypes(value, where);
    else if (key == "pipeline.k") cfg.pipeline.k = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.min_questions") cfg.pipeline.min_questions = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.num_trajectories") cfg.pipeline.num_trajectories = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.reasoning") cfg.pipeline.reasoning_on = parse_bool(value, key, where);
    else if (key == "pipeline.evidence_mode") cfg.pipeline.evidence_mode = parse_evidence_mode(value, where);
    else if (key == "pipeline.qg_temperature") cfg.pipeline.qg_temperature = parse_double(value, key, where);
    else if (key == "pipeline.ag_temperature") cfg.pipeline.ag_temperature = parse_double(value, key, where);
    else if (key == "pipeline.lg_temperature") cfg.pipeline.lg_temperature = parse_double(value, key, where);
    else if (key == "pipeline.qg_max_tokens") cfg.pipeline.qg_max_tokens = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.ag_max_tokens") cfg.pipeline.ag_max_tokens = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.lg_max_tokens") cfg.pipeline.lg_max_tokens = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.max_reasks") cfg.pipeline.max_reasks = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.evidence_char_budget") cfg.pipeline.evidence_char_budget = static_cast<int>(parse_ll(value, key, where));
    else if (key == "pipeline.workers") cfg.workers = static_cast<int>(parse_ll(value, key, where));
    else if (key == "prompts.dir") cfg.prompts_dir = value;
    else if (key == "output.path") cfg.output_path = value;
    else if (key == "output.run_log") cfg.run_log_path = value;
    else raise(Errc::ConfigError, where + ": unknown key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    auto lines = util::split(text, '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string where = origin + ":" + std::to_string(i + 1);
        std::string line = util::trim(lines[i]);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            raise(Errc::ConfigError, where + ": expected key = value, got '" + line + "'");
        }
        std::string key = util::trim(line.substr(0, eq));
        std::string value = util::trim(line.substr(eq + 1));
        apply_config_key(cfg, key, value, where);
    }
    if (cfg.dataset_path.empty()) {
        raise(Errc::ConfigError, origin + ": missing required key 'dataset.path'");
    }
    if (cfg.output_path.empty()) {
        raise(Errc::ConfigError, origin + ": missing required key 'output.path'");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(util::read_file(path), path);
}

void RunConfig::validate_paths() const {
    namespace fs = std::filesystem;
    if (!fs::exists(dataset_path)) {
        raise(Errc::ConfigError, "dataset.path does not exist: " + dataset_path);
    }
    if (!fs::is_directory(prompts_dir)) {
        raise(Errc::ConfigError, "prompts.dir does not exist: " + prompts_dir);
    }
    if (!scripted_path.empty() && !fs::exists(scripted_path)) {
        raise(Errc::ConfigError, "backend.scripted does not exist: " + scripted_path);
    }
}

std::vector<std::pair<std::string, std::string>> parse_override_args(
    const std::vector<std::string>& args) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string arg = args[i];
        if (arg.rfind("--", 0) != 0) {
            raise(Errc::ConfigError, "unexpected argument '" + arg + "'");
        }
        std::string key = arg.substr(2);
        std::string value;
        auto eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= args.size()) {
                raise(Errc::ConfigError, "flag '" + arg + "' is missing a value");
            }
            value = args[++i];
        }
        // Short aliases for the keys touched most in sweeps.
        if (key == "k") key = "pipeline.k";
        if (key == "workers") key = "pipeline.workers";
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    apply_config_key(cfg, key, value, "override --" + key);
}

}  // namespace rav
