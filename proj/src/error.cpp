#include "gapcoref/error.hpp"

namespace gapcoref {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::OffsetMismatch: return "OffsetMismatch";
    case ErrorCode::BothCorefTrue: return "BothCorefTrue";
    case ErrorCode::UnknownPronoun: return "UnknownPronoun";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidUtf8: return "InvalidUtf8";
    case ErrorCode::DuplicateToken: return "DuplicateToken";
    case ErrorCode::MissingSpecialToken: return "MissingSpecialToken";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::FirstSegmentTooLong: return "FirstSegmentTooLong";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::BadRange: return "BadRange";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingExample: return "MissingExample";
    case ErrorCode::PronounNotFound: return "PronounNotFound";
    case ErrorCode::AnswerTruncated: return "AnswerTruncated";
    case ErrorCode::EmptySpan: return "EmptySpan";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CoverageMismatch: return "CoverageMismatch";
    case ErrorCode::EmptyGenderSubset: return "EmptyGenderSubset";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadConfig:
    case ErrorCode::BadRange:
      return 2;
    case ErrorCode::NumericFailure:
    case ErrorCode::DegenerateLabels:
      return 4;
    default:
      return 3;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace gapcoref
