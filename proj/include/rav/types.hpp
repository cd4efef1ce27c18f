#pragma once

#include <string>
#include <vector>

namespace rav {

// Verification questions are true/false answerable and pin down a complete
// <entity, relationship, entity> triple; inquiry questions ask for an entity
// or a relationship.
enum class QuestionType { verification, inquiry };

const char* to_string(QuestionType t);
QuestionType question_type_from_string(const std::string& s);

struct Question {
    std::string text;
    QuestionType qtype = QuestionType::verification;

    bool operator==(const Question&) const = default;
};

struct Answer {
    std::string text;
    bool abstained = false;  // evidence did not contain the answer

    bool operator==(const Answer&) const = default;
};

struct QAPair {
    Question question;
    Answer answer;

    bool operator==(const QAPair&) const = default;
};

// Ordered question/answer pairs accumulated over one trajectory.
using History = std::vector<QAPair>;

}  // namespace rav
