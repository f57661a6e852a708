#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace squeezelab {

enum class ErrorKind {
  InvalidParameter,
  TruncationOverflow,
  TruncationUnreliable,
  ZeroMean,
  EmptyHerald,
  UndefinedK,
  Conditioning,
  DimMismatch,
  InvalidData,
  UnreliableMC,
  CalibrationFailure,
  OutOfRange,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a truncated constructor leaves more probability outside the
/// support than the configured tolerance.
class TruncationOverflow : public Error {
 public:
  TruncationOverflow(double tail_mass, double tolerance);

  double tail_mass() const noexcept { return tail_mass_; }
  double tolerance() const noexcept { return tolerance_; }

 private:
  double tail_mass_;
  double tolerance_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace squeezelab
