#include "rav/agents.hpp"

#include <algorithm>
#include <set>

#include "rav/util.hpp"

namespace rav {

namespace {

const std::vector<std::string> kVerificationLeads = {"did", "is", "was", "does", "has", "are"};

struct Line {
    std::string text;     // trimmed
    std::string content;  // text after a marker, when the line starts one
};

std::vector<std::string> to_lines(const std::string& raw) {
    auto parts = util::split(raw, '\n');
    for (auto& p : parts) p = util::trim(p);
    return parts;
}

bool starts_with(const std::string& s, const std::string& prefix) {
    return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

// Multi-line marker capture: content after `marker` on its line plus any
// following lines up to the next marker line or end of text.
std::optional<std::string> capture_block(const std::vector<std::string>& lines,
                                         const std::string& marker,
                                         const std::vector<std::string>& all_markers,
                                         const std::string& stop_marker) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!starts_with(lines[i], marker)) continue;
        std::string out = util::trim(lines[i].substr(marker.size()));
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            const std::string& l = lines[j];
            bool is_marker = l == stop_marker;
            for (const auto& m : all_markers) is_marker = is_marker || starts_with(l, m);
            if (is_marker) break;
            if (l.empty()) break;
            if (!out.empty()) out += '\n';
            out += l;
        }
        return out;
    }
    return std::nullopt;
}

}  // namespace

const char* to_string(QtypePolicy p) {
    return p == QtypePolicy::t1_only ? "t1_only" : "t1_and_t2";
}

const char* to_string(AnswerMode m) {
    return m == AnswerMode::gold_evidence ? "gold_evidence" : "pretrained_only";
}

QuestionType classify_question(std::string_view text) {
    std::string t = util::lower(util::trim(text));
    auto space = t.find_first_of(" \t");
    std::string first = space == std::string::npos ? t : t.substr(0, space);
    for (const auto& lead : kVerificationLeads) {
        if (first == lead) return QuestionType::verification;
    }
    return QuestionType::inquiry;
}

std::string normalize_label(std::string_view raw, const LabelSpace& space) {
    // Canonical form: lowercase, space/underscore to hyphen, punctuation
    // stripped, hyphen runs collapsed.
    std::string canon;
    canon.reserve(raw.size());
    for (char c : util::lower(raw)) {
        if (c == ' ' || c == '_') c = '-';
        bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
        if (!keep) continue;
        if (c == '-' && (canon.empty() || canon.back() == '-')) continue;
        canon.push_back(c);
    }
    while (!canon.empty() && canon.back() == '-') canon.pop_back();

    if (space.contains(canon)) return canon;

    // Unique substring match. Longer labels claim their occurrences first so
    // "mostly-true" never double-counts as "true".
    std::vector<std::string> by_length(space.labels());
    std::stable_sort(by_length.begin(), by_length.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    std::string scratch = canon;
    std::vector<std::string> mentioned;
    for (const auto& label : by_length) {
        bool found = false;
        std::size_t pos = 0;
        while ((pos = scratch.find(label, pos)) != std::string::npos) {
            found = true;
            std::fill(scratch.begin() + static_cast<std::ptrdiff_t>(pos),
                      scratch.begin() + static_cast<std::ptrdiff_t>(pos + label.size()), '#');
            pos += label.size();
        }
        if (found) mentioned.push_back(label);
    }
    if (mentioned.size() == 1) return mentioned.front();
    if (mentioned.empty()) {
        raise(Errc::UnmappableLabel,
              "'" + std::string(raw) + "' matches no label in space " + space.name());
    }
    raise(Errc::UnmappableLabel, "'" + std::string(raw) + "' mentions " +
                                     std::to_string(mentioned.size()) + " labels of space " +
                                     space.name());
}

namespace {

Question parse_question_text(std::string text, QtypePolicy qtypes) {
    text = util::trim(text);
    std::optional<QuestionType> tagged;
    if (starts_with(text, "[V]")) {
        tagged = QuestionType::verification;
        text = util::trim(text.substr(3));
    } else if (starts_with(text, "[I]")) {
        tagged = QuestionType::inquiry;
        text = util::trim(text.substr(3));
    }
    if (text.empty()) raise(Errc::ParseFailure, "empty question text");
    if (text.back() != '?') raise(Errc::ParseFailure, "question does not end with '?': " + text);

    QuestionType qtype = tagged ? *tagged : classify_question(text);
    if (qtypes == QtypePolicy::t1_only && qtype != QuestionType::verification) {
        raise(Errc::ParseFailure, "inquiry question under t1_only policy: " + text);
    }
    return Question{std::move(text), qtype};
}

}  // namespace

QGOutput parse_qg_output(const std::string& raw, QtypePolicy qtypes, bool reasoning_expected,
                          const Markers& m) {
    auto lines = to_lines(raw);
    const std::vector<std::string> markers = {m.reasoning, m.question, m.answer, m.label};

    bool has_stop = false;
    std::optional<std::string> question_line;
    for (const auto& l : lines) {
        if (l == m.stop) has_stop = true;
        if (starts_with(l, m.question) && !question_line) {
            question_line = util::trim(l.substr(m.question.size()));
        }
    }
    if (has_stop && question_line) {
        raise(Errc::ParseFailure, "output contains both a question and the stop marker");
    }

    std::string reasoning;
    auto block = capture_block(lines, m.reasoning, markers, m.stop);
    if (block) reasoning = *block;
    if (reasoning_expected && !block) {
        raise(Errc::ParseFailure, "missing '" + m.reasoning + "' marker");
    }

    QGOutput out;
    out.reasoning = std::move(reasoning);
    if (has_stop) return out;
    if (!question_line) raise(Errc::ParseFailure, "missing '" + m.question + "' marker");
    out.question = parse_question_text(*question_line, qtypes);
    return out;
}

QGBatch parse_qg_batch(const std::string& raw, QtypePolicy qtypes, bool reasoning_expected,
                       const Markers& m) {
    auto lines = to_lines(raw);
    const std::vector<std::string> markers = {m.reasoning, m.question, m.answer, m.label};

    for (const auto& l : lines) {
        if (l == m.stop) {
            raise(Errc::ParseFailure, "stop marker is not valid in all-at-once output");
        }
    }

    QGBatch out;
    auto block = capture_block(lines, m.reasoning, markers, m.stop);
    if (block) out.reasoning = *block;
    if (reasoning_expected && !block) {
        raise(Errc::ParseFailure, "missing '" + m.reasoning + "' marker");
    }

    for (const auto& l : lines) {
        if (!starts_with(l, m.question)) continue;
        out.questions.push_back(parse_question_text(l.substr(m.question.size()), qtypes));
    }
    if (out.questions.empty()) raise(Errc::EmptyQuestionList, "no questions in all-at-once output");
    return out;
}

Answer parse_answer(const std::string& raw, const Markers& m) {
    auto pos = raw.find(m.answer);
    if (pos == std::string::npos) raise(Errc::ParseFailure, "missing '" + m.answer + "' marker");
    std::string text = util::trim(raw.substr(pos + m.answer.size()));

    std::string probe = text;
    if (!probe.empty() && probe.back() == '.') probe = util::trim(probe.substr(0, probe.size() - 1));
    if (probe == m.abstain) return Answer{m.abstain, true};

    if (text.empty()) raise(Errc::ParseFailure, "empty answer text");
    return Answer{std::move(text), false};
}

LGOutput parse_lg_output(const std::string& raw, const LabelSpace& space, bool reasoning_expected,
                         const Markers& m) {
    auto lines = to_lines(raw);
    const std::vector<std::string> markers = {m.reasoning, m.question, m.answer, m.label};

    LGOutput out;
    auto block = capture_block(lines, m.reasoning, markers, m.stop);
    if (block) out.reasoning = *block;
    if (reasoning_expected && !block) {
        raise(Errc::ParseFailure, "missing '" + m.reasoning + "' marker");
    }

    for (const auto& l : lines) {
        if (!starts_with(l, m.label)) continue;
        std::string value = util::trim(l.substr(m.label.size()));
        if (value.empty()) raise(Errc::ParseFailure, "empty label text");
        out.label = normalize_label(value, space);
        return out;
    }
    raise(Errc::ParseFailure, "missing '" + m.label + "' marker");
}

std::string qtype_instruction(QtypePolicy p) {
    if (p == QtypePolicy::t1_only) {
        return "Ask only verification questions: true/false-answerable questions that each "
               "check one complete <entity, relationship, entity> triple. Prefix every "
               "question with [V].";
    }
    return "Ask verification questions (true/false answerable, checking one complete "
           "<entity, relationship, entity> triple; prefix with [V]) or inquiry questions "
           "(asking for an entity or a relationship; prefix with [I]), whichever best "
           "uncovers the unverified parts.";
}

// ---------------------------------------------------------------------------
// Agents

namespace {

constexpr const char* kQgReminder =
    "Your previous reply did not follow the required format. Reply with 'Reasoning: ...' "
    "followed by either 'Question: ...' (one question ending in '?', prefixed [V] or [I]) "
    "or the single line 'stop_iteration'.";
constexpr const char* kQgBatchReminder =
    "Your previous reply did not follow the required format. Reply with 'Reasoning: ...' "
    "followed by one or more 'Question: ...' lines, each ending in '?' and prefixed [V] or [I].";
constexpr const char* kAgReminder =
    "Your previous reply did not follow the required format. Reply with a single line "
    "'Answer: ...' in 10 words or fewer.";
constexpr const char* kLgReminder =
    "Your previous reply did not follow the required format. Reply with 'Reasoning: ...' "
    "followed by 'Label: ...' using exactly one label from the list.";
constexpr const char* kMustContinueNudge =
    "You must ask at least one more question before stopping. Do not output the stop "
    "marker yet.";

bool retryable_parse_error(Errc c) {
    return c == Errc::ParseFailure || c == Errc::UnmappableLabel || c == Errc::EmptyQuestionList;
}

// Shared re-ask loop: on a parse error, re-issue the same tag with a format
// reminder appended, at most max_reasks times, then let the error propagate.
template <typename ParseFn>
auto complete_and_parse(CompletionBackend& backend, const std::string& prompt,
                        const std::string& tag, const AgentOptions& opt, int max_tokens,
                        std::vector<std::string> stops, const char* reminder, ParseFn&& parse) {
    for (int attempt = 0;; ++attempt) {
        CompletionRequest req;
        req.user_text = attempt == 0 ? prompt : prompt + "\n\n" + reminder;
        req.temperature = opt.temperature;
        req.max_tokens = max_tokens;
        req.stop_sequences = stops;
        req.tag = tag;
        CompletionResponse resp = backend.complete(req);
        try {
            return parse(resp.text);
        } catch (const RavError& e) {
            if (!retryable_parse_error(e.code()) || attempt >= opt.max_reasks) throw;
        }
    }
}

// Keeps a chatty model from continuing into an imagined next example.
std::vector<std::string> qg_lg_stops() { return {"\nclaim:", "\n==="}; }
std::vector<std::string> ag_stops() { return {"\nquestion:", "\nevidence:"}; }

}  // namespace

QuestionGenerator::QuestionGenerator(CompletionBackend& backend, const PromptTemplate& tpl,
                                     QtypePolicy qtypes, AgentOptions opt)
    : backend_(backend), tpl_(tpl), qtypes_(qtypes), opt_(std::move(opt)) {}

QGOutput QuestionGenerator::step(const std::string& claim, const History& history,
                                 const std::string& tag, bool must_continue) const {
    if (claim.empty()) raise(Errc::InvalidRequest, "claim is empty");
    PromptBinding binding{{"claim", claim},
                          {"history", render_history(history)},
                          {"question_types", qtype_instruction(qtypes_)}};
    std::string prompt = tpl_.render(binding);
    if (must_continue) prompt += std::string("\n\n") + kMustContinueNudge;
    return complete_and_parse(backend_, prompt, tag, opt_, opt_.max_tokens, qg_lg_stops(),
                              kQgReminder,
                              [&](const std::string& text) {
                                  return parse_qg_output(text, qtypes_, opt_.reasoning_on,
                                                         opt_.markers);
                              });
}

QGBatch QuestionGenerator::generate_all(const std::string& claim, const std::string& tag) const {
    if (claim.empty()) raise(Errc::InvalidRequest, "claim is empty");
    PromptBinding binding{{"claim", claim}, {"question_types", qtype_instruction(qtypes_)}};
    std::string prompt = tpl_.render(binding);
    return complete_and_parse(backend_, prompt, tag, opt_, opt_.max_tokens, qg_lg_stops(),
                              kQgBatchReminder,
                              [&](const std::string& text) {
                                  return parse_qg_batch(text, qtypes_, opt_.reasoning_on,
                                                        opt_.markers);
                              });
}

AnswerGenerator::AnswerGenerator(CompletionBackend& backend, const PromptTemplate& tpl,
                                 AnswerMode mode, AgentOptions opt)
    : backend_(backend), tpl_(tpl), mode_(mode), opt_(std::move(opt)) {}

Answer AnswerGenerator::step(const std::string& question, const std::string& evidence,
                             const std::string& tag) const {
    PromptBinding binding{{"question", question}};
    if (mode_ == AnswerMode::gold_evidence) {
        if (evidence.empty()) raise(Errc::EvidenceMissing, "gold-evidence mode with empty evidence");
        binding["evidence"] = evidence;
    }
    std::string prompt = tpl_.render(binding);
    return complete_and_parse(
        backend_, prompt, tag, opt_, opt_.max_tokens, ag_stops(), kAgReminder,
        [&](const std::string& text) { return parse_answer(text, opt_.markers); });
}

LabelGenerator::LabelGenerator(CompletionBackend& backend, const PromptTemplate& tpl,
                               const LabelSpace& space, AgentOptions opt)
    : backend_(backend), tpl_(tpl), space_(space), opt_(std::move(opt)) {}

LGOutput LabelGenerator::step(const std::string& claim, const History& history,
                              const std::string& tag) const {
    PromptBinding binding{{"claim", claim},
                          {"history", render_history(history)},
                          {"labels", util::join(space_.labels(), ", ")}};
    std::string prompt = tpl_.render(binding);
    return complete_and_parse(backend_, prompt, tag, opt_, opt_.max_tokens, qg_lg_stops(),
                              kLgReminder,
                              [&](const std::string& text) {
                                  return parse_lg_output(text, space_, opt_.reasoning_on,
                                                         opt_.markers);
                              });
}

const char* to_string(QuestionType t) {
    return t == QuestionType::verification ? "verification" : "inquiry";
}

QuestionType question_type_from_string(const std::string& s) {
    if (s == "verification") return QuestionType::verification;
    if (s == "inquiry") return QuestionType::inquiry;
    raise(Errc::ConfigError, "unknown question type '" + s + "'");
}

}  // namespace rav
