#pragma once

#include <stdexcept>
#include <string>

namespace rav {

// One error domain for the whole library. Tests and callers branch on the
// code; the message carries context (line numbers, tags, field names).
enum class Errc {
    // dataset
    MalformedLine,
    MissingField,
    UnknownLabel,
    TargetNotInSpace,
    SizesExceedDataset,
    DuplicateId,
    // prompt
    MissingPlaceholder,
    UnknownPlaceholder,
    BadTemplate,
    // llm backend
    Transport,
    RateLimited,
    AuthFailed,
    ContextOverflow,
    UnscriptedTag,
    InvalidRequest,
    // agents
    ParseFailure,
    EmptyQuestionList,
    EvidenceMissing,
    UnmappableLabel,
    // pipeline
    NoSuccessfulTrajectory,
    // metrics
    UnknownClaimId,
    DuplicateClaimId,
    MissingPrediction,
    DegenerateDistribution,
    IdMismatch,
    MissingCategory,
    // cli / io
    ConfigError,
    IoError,
};

const char* errc_name(Errc c);

class RavError : public std::runtime_error {
public:
    RavError(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw RavError(code, message);
}

}  // namespace rav
