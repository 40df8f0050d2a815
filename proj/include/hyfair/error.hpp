#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyfair {

enum class ErrorCode {
  // hypergraph-core
  EmptyHyperedge,
  NodeIdOutOfRange,
  // corpus-ingest
  ParseError,
  InvariantViolation,
  UnknownSeed,
  EmptySession,
  // neural-kernels
  ShapeMismatch,
  HeadDivisibility,
  EmptySelection,
  DisconnectedLoss,
  // contrastive-interest
  NoMentions,
  BatchTooSmall,
  ZeroVector,
  // recommender
  MissingView,
  LabelOutOfRange,
  KTooLarge,
  MissingGroundTruth,
  // response-decoder
  EmptyVocabulary,
  TargetOutOfRange,
  NGramTooLong,
  // fairness-metrics
  UnknownItem,
  EmptyProfile,
  EmptyLists,
  // harness
  ConfigError,
  IoError,
  NonFiniteLoss,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyHyperedge: return "EmptyHyperedge";
    case ErrorCode::NodeIdOutOfRange: return "NodeIdOutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::UnknownSeed: return "UnknownSeed";
    case ErrorCode::EmptySession: return "EmptySession";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::HeadDivisibility: return "HeadDivisibility";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::DisconnectedLoss: return "DisconnectedLoss";
    case ErrorCode::NoMentions: return "NoMentions";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::MissingView: return "MissingView";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::NGramTooLong: return "NGramTooLong";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::EmptyProfile: return "EmptyProfile";
    case ErrorCode::EmptyLists: return "EmptyLists";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

// Process exit codes used by the CLI: 2 config, 3 data, 4 numerical abort.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
      return 2;
    case ErrorCode::NonFiniteLoss:
      return 4;
    default:
      return 3;
  }
}

}  // namespace hyfair
