#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isostable {

enum class ErrorKind {
  NonFiniteField,
  NoConvergence,
  SingularJacobian,
  RepeatedEigenvalue,
  MixedStability,
  Nonhyperbolic,
  RealLeadingEigenvalue,
  Escaped,
  Stalled,
  DegenerateSpan,
  ZeroProjection,
  ZeroMagnitude,
  Diverged,
  GuardTriggered,
  Experimental,
  SubtractionLoss,
  InvalidArgument,
  Config,
  Io,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it to an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace isostable
