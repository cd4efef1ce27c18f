#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rav/dataset.hpp"
#include "rav/llm_backend.hpp"
#include "rav/prompt.hpp"
#include "rav/types.hpp"

namespace rav {

// Output wire protocol. Only the stop marker is load-bearing for the loop;
// the rest keys the parsers and is reinforced through few-shot examples.
struct Markers {
    std::string reasoning = "Reasoning:";
    std::string question = "Question:";
    std::string answer = "Answer:";
    std::string label = "Label:";
    std::string stop = "stop_iteration";
    std::string abstain = "INSUFFICIENT_EVIDENCE";
};

enum class QtypePolicy { t1_only, t1_and_t2 };
enum class AnswerMode { gold_evidence, pretrained_only };

const char* to_string(QtypePolicy p);
const char* to_string(AnswerMode m);

struct QGOutput {
    std::string reasoning;
    std::optional<Question> question;  // empty means the agent signalled stop

    bool stop() const { return !question.has_value(); }
};

struct QGBatch {
    std::string reasoning;
    std::vector<Question> questions;
};

struct LGOutput {
    std::string reasoning;
    std::string label;  // canonical, member of the active space
};

struct AgentOptions {
    int max_reasks = 2;  // re-asks after the first failed parse
    double temperature = 0.0;
    int max_tokens = 512;
    bool reasoning_on = true;
    Markers markers;
};

// Untagged questions: a leading Did/Is/Was/Does/Has/Are marks verification,
// anything else is inquiry.
QuestionType classify_question(std::string_view text);

// Lowercases, maps spaces/underscores to hyphens, strips punctuation, then
// matches: exact first, then unique label-substring (longest occurrences
// claim their span, so "mostly true" never also counts as "true"). Two or
// more distinct label mentions are ambiguous.
std::string normalize_label(std::string_view raw, const LabelSpace& space);

// Deterministic parsers over raw model text. Kept free and pure so fuzzing
// and replay can exercise them directly.
QGOutput parse_qg_output(const std::string& raw, QtypePolicy qtypes,
                         bool reasoning_expected, const Markers& m = {});
QGBatch parse_qg_batch(const std::string& raw, QtypePolicy qtypes,
                       bool reasoning_expected, const Markers& m = {});
Answer parse_answer(const std::string& raw, const Markers& m = {});
LGOutput parse_lg_output(const std::string& raw, const LabelSpace& space,
                         bool reasoning_expected, const Markers& m = {});

// Instruction fragment bound to the {question_types} placeholder.
std::string qtype_instruction(QtypePolicy p);

// Agents are stateless over (template, backend); per-trajectory state lives
// in the caller's History. A parse failure re-asks with a format reminder at
// most max_reasks times, then the error propagates.
class QuestionGenerator {
public:
    QuestionGenerator(CompletionBackend& backend, const PromptTemplate& tpl,
                      QtypePolicy qtypes, AgentOptions opt);

    // Iterative step. `must_continue` appends a nudge telling the agent it
    // may not stop yet (used when the stop came before min_questions).
    QGOutput step(const std::string& claim, const History& history,
                  const std::string& tag, bool must_continue = false) const;

    // All-at-once decomposition from the bare claim.
    QGBatch generate_all(const std::string& claim, const std::string& tag) const;

private:
    CompletionBackend& backend_;
    const PromptTemplate& tpl_;
    QtypePolicy qtypes_;
    AgentOptions opt_;
};

class AnswerGenerator {
public:
    AnswerGenerator(CompletionBackend& backend, const PromptTemplate& tpl,
                    AnswerMode mode, AgentOptions opt);

    // Evidence must be non-empty in gold mode; it is never sent in
    // pretrained-only mode.
    Answer step(const std::string& question, const std::string& evidence,
                const std::string& tag) const;

private:
    CompletionBackend& backend_;
    const PromptTemplate& tpl_;
    AnswerMode mode_;
    AgentOptions opt_;
};

class LabelGenerator {
public:
    LabelGenerator(CompletionBackend& backend, const PromptTemplate& tpl,
                   const LabelSpace& space, AgentOptions opt);

    LGOutput step(const std::string& claim, const History& history,
                  const std::string& tag) const;

private:
    CompletionBackend& backend_;
    const PromptTemplate& tpl_;
    const LabelSpace& space_;
    AgentOptions opt_;
};

}  // namespace rav
