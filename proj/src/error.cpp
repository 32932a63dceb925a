#include "isostable/error.hpp"

namespace isostable {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonFiniteField: return "NonFiniteField";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::RepeatedEigenvalue: return "RepeatedEigenvalue";
    case ErrorKind::MixedStability: return "MixedStability";
    case ErrorKind::Nonhyperbolic: return "Nonhyperbolic";
    case ErrorKind::RealLeadingEigenvalue: return "RealLeadingEigenvalue";
    case ErrorKind::Escaped: return "Escaped";
    case ErrorKind::Stalled: return "Stalled";
    case ErrorKind::DegenerateSpan: return "DegenerateSpan";
    case ErrorKind::ZeroProjection: return "ZeroProjection";
    case ErrorKind::ZeroMagnitude: return "ZeroMagnitude";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::GuardTriggered: return "GuardTriggered";
    case ErrorKind::Experimental: return "Experimental";
    case ErrorKind::SubtractionLoss: return "SubtractionLoss";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace isostable
