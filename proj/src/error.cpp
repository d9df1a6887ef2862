#include "adalog/error.hpp"

namespace adalog {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorKind::NoMaskedPositions: return "NoMaskedPositions";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::VocabMismatch: return "VocabMismatch";
    case ErrorKind::EmptyScores: return "EmptyScores";
    case ErrorKind::NonFiniteScore: return "NonFiniteScore";
    case ErrorKind::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NoAnomaliesInTruth: return "NoAnomaliesInTruth";
    case ErrorKind::TooFewLogs: return "TooFewLogs";
    case ErrorKind::LeakageDetected: return "LeakageDetected";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::DigestMismatch: return "DigestMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

}  // namespace adalog
