#pragma once

#include <stdexcept>
#include <string>

namespace nullfold {

enum class ErrorKind {
  Expression,
  Configuration,
  DegenerateMetric,
  Signature,
  InvalidWarp,
  IntegrationFailure,
  NotSpacelike,
  FrameDegeneracy,
  Conditioning,
  FrameContinuity,
  NonCompactDomain,
  ChartMetadata,
  TransportInconsistency,
  InvalidRescale,
  Io,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

  // Errors caused by the input rather than by the numerics.
  bool is_configuration() const;

 private:
  ErrorKind kind_;
};

class ExpressionError : public Error {
 public:
  enum class Reason { Syntax, UnknownFunction, Arity, UnknownIdentifier, Evaluation };
  ExpressionError(Reason reason, std::size_t offset, const std::string& message)
      : Error(ErrorKind::Expression, message), reason_(reason), offset_(offset) {}
  Reason reason() const { return reason_; }
  std::size_t offset() const { return offset_; }

 private:
  Reason reason_;
  std::size_t offset_;
};

class IntegrationFailure : public Error {
 public:
  IntegrationFailure(double last_valid, const std::string& message)
      : Error(ErrorKind::IntegrationFailure, message), last_valid_(last_valid) {}
  double last_valid() const { return last_valid_; }

 private:
  double last_valid_;
};

}  // namespace nullfold
