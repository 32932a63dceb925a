#pragma once

#include <iosfwd>
#include <random>
#include <string>

#include "config.hpp"

namespace isostable::cli {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kConfigError = 2, kNumericFailure = 3 };

struct CommandOptions {
  std::string output;
  std::string field;
  unsigned threads = 0;
  bool timestamp = true;
};

int cmd_fixed_point(const RunConfig& config, std::ostream& out);
int cmd_spectrum(const RunConfig& config, std::ostream& out);
/// CSV t,x1..xn to `opts.output`, or to `out` when no path is given.
int cmd_trajectory(const RunConfig& config, const CommandOptions& opts, std::ostream& out);
int cmd_field(const RunConfig& config, const CommandOptions& opts, std::ostream& out);
int cmd_contour(const RunConfig& config, const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// One JSON object per check on `out`; exit 0 iff every check passes.
int cmd_validate(const RunConfig& config, std::ostream& out);

[[nodiscard]] json spectrum_to_json(const Spectrum& spectrum);

/// Stable matrix with eigenvalues chosen at random (real parts in
/// [-2, -0.2], distinct modes separated by at least `separation`) and
/// eigenvectors from a well-conditioned random basis. `basis` receives the
/// unit-norm eigenvectors, slowest first, with conjugate pairs adjacent.
struct RandomLinearSystem {
  Matrix a;
  ComplexVector eigenvalues;
  ComplexMatrix basis;
};

[[nodiscard]] RandomLinearSystem random_stable_system(std::mt19937_64& rng, int dim, double separation,
                                                      bool allow_complex = true);

}  // namespace isostable::cli
