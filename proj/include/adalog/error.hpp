#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adalog {

/// Machine-readable error classes. The CLI prints the class name on failure.
enum class ErrorKind {
  EmptyAfterCleaning,
  EmptyCorpus,
  UnknownId,
  ShapeMismatch,
  NonFiniteActivation,
  NoMaskedPositions,
  NonFiniteGradient,
  DivergenceDetected,
  VocabMismatch,
  EmptyScores,
  NonFiniteScore,
  CheckpointMismatch,
  LengthMismatch,
  NoAnomaliesInTruth,
  TooFewLogs,
  LeakageDetected,
  MissingInput,
  DigestMismatch,
  ConfigInvalid,
  FormatError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace adalog
