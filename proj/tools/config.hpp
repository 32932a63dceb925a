#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isostable/field.hpp"

namespace isostable::cli {

using json = nlohmann::json;

struct ModelConfig {
  std::string name;
  std::map<std::string, double> params;
  std::optional<Matrix> matrix;
  std::optional<DomainBox> domain;
};

struct TrajectoryConfig {
  Vector initial_state;
  std::vector<double> times;
};

struct FieldConfig {
  GridSpec grid;
  Quantity quantity = Quantity::Magnitude;
};

struct AnchorCheck {
  double v = 0.0;
  double v_prime = 0.0;
  double expected = 0.0;
  double rel_tol = 0.05;
};

struct EqualMagnitudeCheck {
  std::vector<Vector> points;
  double rel_tol = 0.02;
};

struct SemigroupCheck {
  std::vector<Vector> points;
  std::vector<double> times{1.0, 5.0, 10.0};
  double rel_tol = 1e-3;
  double phase_tol = 1e-3;
};

struct IndependenceCheck {
  std::vector<Vector> points;
  double rel_tol = 1e-4;
};

struct LinearizationCheck {
  double radius = 1e-3;
  int samples = 8;
  double rel_tol = 0.01;
  unsigned seed = 1;
};

struct LyapunovCheck {
  std::vector<Vector> points;
  double duration = 20.0;
  double step = 1.0;
  double slope_tol = 1e-3;
};

struct LinearOracleCheck {
  int systems = 10;
  int dim = 3;
  int points = 20;
  double rel_tol = 1e-6;
  unsigned seed = 1;
};

struct ValidateConfig {
  std::vector<AnchorCheck> anchors;
  std::vector<EqualMagnitudeCheck> equal_magnitude;
  std::optional<SemigroupCheck> semigroup;
  std::optional<IndependenceCheck> observable_independence;
  std::optional<LinearizationCheck> linearization;
  std::optional<LyapunovCheck> lyapunov;
  std::optional<LinearOracleCheck> linear_oracle;
};

/// Parsed run configuration. Every block is optional; commands check for
/// the blocks they need.
struct RunConfig {
  std::optional<ModelConfig> model;
  std::optional<Vector> fixed_point_guess;
  /// Guesses for the attractors a field is evaluated against.
  std::vector<Vector> attractors;
  IntegrationOptions integration;
  LaplaceOptions laplace;
  std::optional<TrajectoryConfig> trajectory;
  std::optional<FieldConfig> field;
  std::vector<double> levels;
  std::optional<ValidateConfig> validate;
  json source;
};

/// Throws Error(Config) on malformed input and unknown keys.
[[nodiscard]] RunConfig parse_config(const json& j);
[[nodiscard]] RunConfig load_config(const std::string& path);

/// Throws Error(Config) when the config has no model block.
[[nodiscard]] VectorFieldModel build_model(const RunConfig& config);
/// Default Newton start when the config gives none: the origin.
[[nodiscard]] Vector fixed_point_guess(const RunConfig& config, int dim);

[[nodiscard]] json to_json(const IntegrationOptions& opts);
[[nodiscard]] json to_json(const LaplaceOptions& opts);
[[nodiscard]] json to_json(const ModelConfig& model);
[[nodiscard]] json to_json(const GridSpec& grid);

}  // namespace isostable::cli
