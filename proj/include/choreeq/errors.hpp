#pragma once

#include <stdexcept>
#include <string>

namespace choreeq {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input-side failures (malformed JSON, schema violations, bad dimensions).
class ParseError : public Error {
public:
  using Error::Error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

// Non-finite disutility coefficients get their own type so callers can
// distinguish them from structural validation failures.
class InfiniteDisutilityError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class NegativeInput : public Error {
public:
  using Error::Error;
};

class NonpositiveEntry : public Error {
public:
  using Error::Error;
};

// CES gradients are undefined at the origin for rho > 1.
class GradientSingularity : public Error {
public:
  using Error::Error;
};

// Inner optimization failed to reach its tolerance within the iteration cap.
class SolverStall : public Error {
public:
  using Error::Error;
};

class IterationCapExceeded : public Error {
public:
  explicit IterationCapExceeded(const std::string& msg, std::string partial_trace_csv = "")
      : Error(msg), partial_trace(std::move(partial_trace_csv)) {}
  // CSV-formatted rows observed before the cap was hit; lets callers persist
  // a trace even when the run did not converge.
  std::string partial_trace;
};

class DegenerateDirection : public Error {
public:
  using Error::Error;
};

// Allocation recovery from a certificate had residual above tolerance.
class InfeasibleRecovery : public Error {
public:
  using Error::Error;
};

class ZeroColumn : public Error {
public:
  using Error::Error;
};

class ZeroPrices : public Error {
public:
  using Error::Error;
};

class GridTooLarge : public Error {
public:
  using Error::Error;
};

class UnsupportedDims : public Error {
public:
  using Error::Error;
};

// Search procedures (e.g. the infeasible-start bisection) gave up.
class SearchFailed : public Error {
public:
  using Error::Error;
};

// Generator ranges that are empty, non-positive where positivity is
// required, or otherwise unusable.
class InvalidRange : public ValidationError {
public:
  using ValidationError::ValidationError;
};

}  // namespace choreeq
