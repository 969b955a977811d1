#pragma once

#include <stdexcept>
#include <string>

namespace histax {

// One code per failure mode named in the module contracts.
enum class ErrorCode {
    // taxonomy
    UnknownParent,
    DuplicateId,
    DomainMismatch,
    UnknownNode,
    NoCommonRoot,
    WouldCreateCycle,
    EmptyTaxonomy,
    // providers
    ProviderUnavailable,
    TemplateMissing,
    MalformedResponse,
    MissingFixture,
    EmptyInput,
    DimensionMismatch,
    ZeroVector,
    // ingest
    FileMissing,
    SchemaViolation,
    // pipelines
    AllExtractorsFailed,
    NonConvergence,
    InvalidEdit,
    // metrics
    EmptyEventSet,
    EmptyMatchedSet,
    DegenerateInput,
    // config / io
    ConfigInvalid,
    IoFailure,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownParent:       return "UnknownParent";
        case ErrorCode::DuplicateId:         return "DuplicateId";
        case ErrorCode::DomainMismatch:      return "DomainMismatch";
        case ErrorCode::UnknownNode:         return "UnknownNode";
        case ErrorCode::NoCommonRoot:        return "NoCommonRoot";
        case ErrorCode::WouldCreateCycle:    return "WouldCreateCycle";
        case ErrorCode::EmptyTaxonomy:       return "EmptyTaxonomy";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::TemplateMissing:     return "TemplateMissing";
        case ErrorCode::MalformedResponse:   return "MalformedResponse";
        case ErrorCode::MissingFixture:      return "MissingFixture";
        case ErrorCode::EmptyInput:          return "EmptyInput";
        case ErrorCode::DimensionMismatch:   return "DimensionMismatch";
        case ErrorCode::ZeroVector:          return "ZeroVector";
        case ErrorCode::FileMissing:         return "FileMissing";
        case ErrorCode::SchemaViolation:     return "SchemaViolation";
        case ErrorCode::AllExtractorsFailed: return "AllExtractorsFailed";
        case ErrorCode::NonConvergence:      return "NonConvergence";
        case ErrorCode::InvalidEdit:         return "InvalidEdit";
        case ErrorCode::EmptyEventSet:       return "EmptyEventSet";
        case ErrorCode::EmptyMatchedSet:     return "EmptyMatchedSet";
        case ErrorCode::DegenerateInput:     return "DegenerateInput";
        case ErrorCode::ConfigInvalid:       return "ConfigInvalid";
        case ErrorCode::IoFailure:           return "IoFailure";
    }
    return "UnknownError";
}

} // namespace histax
