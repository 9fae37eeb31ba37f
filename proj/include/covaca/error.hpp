#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace covaca {

/// Failure categories raised by the library. Every thrown covaca::Error
/// carries exactly one of these.
enum class Errc {
  NotPositiveDefinite,
  LinearlyDependentColumn,
  NoConvergence,
  NotSPSD,
  DomainError,
  PivotVanished,
  SingularInterpolationMatrix,
  TruncationEmpty,
  DomainMismatch,
  CholeskyFailure,
  RhoTooLarge,
  OrderViolated,
  RefusesLargeN,
  InvalidArgument,
  ParseError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace covaca
