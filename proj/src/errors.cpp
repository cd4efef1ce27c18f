#include "rav/errors.hpp"

namespace rav {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::MissingField: return "MissingField";
        case Errc::UnknownLabel: return "UnknownLabel";
        case Errc::TargetNotInSpace: return "TargetNotInSpace";
        case Errc::SizesExceedDataset: return "SizesExceedDataset";
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::MissingPlaceholder: return "MissingPlaceholder";
        case Errc::UnknownPlaceholder: return "UnknownPlaceholder";
        case Errc::BadTemplate: return "BadTemplate";
        case Errc::Transport: return "Transport";
        case Errc::RateLimited: return "RateLimited";
        case Errc::AuthFailed: return "AuthFailed";
        case Errc::ContextOverflow: return "ContextOverflow";
        case Errc::UnscriptedTag: return "UnscriptedTag";
        case Errc::InvalidRequest: return "InvalidRequest";
        case Errc::ParseFailure: return "ParseFailure";
        case Errc::EmptyQuestionList: return "EmptyQuestionList";
        case Errc::EvidenceMissing: return "EvidenceMissing";
        case Errc::UnmappableLabel: return "UnmappableLabel";
        case Errc::NoSuccessfulTrajectory: return "NoSuccessfulTrajectory";
        case Errc::UnknownClaimId: return "UnknownClaimId";
        case Errc::DuplicateClaimId: return "DuplicateClaimId";
        case Errc::MissingPrediction: return "MissingPrediction";
        case Errc::DegenerateDistribution: return "DegenerateDistribution";
        case Errc::IdMismatch: return "IdMismatch";
        case Errc::MissingCategory: return "MissingCategory";
        case Errc::ConfigError: return "ConfigError";
        case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace rav
