#pragma once

#include <stdexcept>
#include <string>

namespace gapcoref {

enum class ErrorCode {
  // Data ingestion.
  MalformedRow,
  OffsetMismatch,
  BothCorefTrue,
  UnknownPronoun,
  TooFewRecords,
  DuplicateId,
  InvalidUtf8,
  // Tokenization.
  DuplicateToken,
  MissingSpecialToken,
  NoOverlap,
  FirstSegmentTooLong,
  // Encoder and embedding files.
  SequenceTooLong,
  BadRange,
  CorruptHeader,
  DimensionMismatch,
  MissingExample,
  // Pipelines.
  PronounNotFound,
  AnswerTruncated,
  EmptySpan,
  DegenerateLabels,
  ShapeMismatch,
  // Evaluation.
  CoverageMismatch,
  EmptyGenderSubset,
  // Plumbing.
  BadConfig,
  Io,
  CorruptCheckpoint,
  NumericFailure,
};

const char* to_string(ErrorCode code);

// Process exit code for a failure of this kind: 2 usage/config, 3 data or
// coverage, 4 numeric.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gapcoref
