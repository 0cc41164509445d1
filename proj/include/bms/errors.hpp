#pragma once

#include <stdexcept>
#include <string>

namespace bms {

enum class ErrorCode {
  MissingValue,
  NotFound,
  SchemaMismatch,
  IoError,
  InvalidTime,
  InvalidAmount,
  NoLabels,
  RuleError,
  ShapeError,
  GraphError,
  EmptyBehavior,
  DegenerateLabels,
  EmptyEval,
  EmptyHistory,
  InvalidK,
  TooManyNodes,
  InfeasibleConfig,
  EmptyInput,
  MissingEmbedding,
  NumericFailure,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidTime: return "InvalidTime";
    case ErrorCode::InvalidAmount: return "InvalidAmount";
    case ErrorCode::NoLabels: return "NoLabels";
    case ErrorCode::RuleError: return "RuleError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::GraphError: return "GraphError";
    case ErrorCode::EmptyBehavior: return "EmptyBehavior";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::EmptyEval: return "EmptyEval";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::TooManyNodes: return "TooManyNodes";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bms
