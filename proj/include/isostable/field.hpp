#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isostable/laplace.hpp"

namespace isostable {

/// Regular grid; axis 0 varies fastest in the flattened point order.
struct GridSpec {
  Vector lower;
  Vector upper;
  std::vector<int> resolution;

  [[nodiscard]] int dim() const { return static_cast<int>(resolution.size()); }
  [[nodiscard]] long size() const;
  /// Coordinates of flattened point `index`.
  [[nodiscard]] Vector point(long index) const;
  [[nodiscard]] long flat_index(const std::vector<int>& multi) const;
  [[nodiscard]] double spacing(int axis) const;
  /// lower <= upper, lower < upper wherever resolution > 1, resolution >= 1.
  void validate() const;
};

enum class Quantity { Magnitude, Phase, Tau };

[[nodiscard]] const char* to_string(Quantity q) noexcept;
[[nodiscard]] Quantity quantity_from_string(const std::string& s);

struct PointRecord {
  double magnitude = 0.0;
  std::optional<double> phase;
  double tau = 0.0;
  PointStatus status = PointStatus::Converged;
  /// Index of the attractor whose basin holds the point, -1 when none.
  int basin = -1;
};

struct ScalarField {
  GridSpec grid;
  Quantity quantity = Quantity::Magnitude;
  std::string model;
  std::vector<std::string> fingerprints;
  std::vector<PointRecord> records;

  /// Selected quantity per point; NaN where it is undefined.
  [[nodiscard]] std::vector<double> values() const;
};

struct FieldOptions {
  IntegrationOptions integration;
  LaplaceOptions laplace;
  /// 0 selects the hardware concurrency.
  unsigned threads = 0;
};

/// Evaluates the eigenfunction of each attractor at every grid point; the
/// first attractor whose evaluation is not Diverged claims the point.
/// Output does not depend on the thread count.
[[nodiscard]] ScalarField evaluate_field(const VectorFieldModel& model, const std::vector<Spectrum>& attractors,
                                         const GridSpec& grid, Quantity quantity, const FieldOptions& opts = {});

[[nodiscard]] ScalarField evaluate_field(const VectorFieldModel& model, const Spectrum& spectrum,
                                         const GridSpec& grid, Quantity quantity, const FieldOptions& opts = {});

using Polyline = std::vector<Vector>;

struct ContourLevel {
  double level = 0.0;
  std::vector<Polyline> polylines;  // 2D grids
  std::vector<Vector> points;       // 3D grids
  /// Set when the level lies outside the finite field range.
  bool empty_level = false;
};

struct ContourSet {
  int dim = 2;
  std::vector<ContourLevel> levels;
};

/// Marching squares (2D, asymptotic decider on saddle cells) or edge
/// crossings (3D). Cells touching an undefined value or mixing basins are
/// skipped, and for the phase quantity so are cells spanning more than pi.
[[nodiscard]] ContourSet extract_contours(const ScalarField& field, const std::vector<double>& levels);

/// Plain-array variant used by extract_contours; `basins` may be empty.
[[nodiscard]] ContourSet extract_contours(const GridSpec& grid, const std::vector<double>& values,
                                          const std::vector<double>& levels, bool periodic_phase = false,
                                          std::span<const int> basins = {});

struct LinearizedCoordinates {
  /// y_j = s_j(x); absent where the eigenfunction is not available.
  std::vector<std::optional<std::complex<double>>> y;
  /// z = V y, present only when every y_j is.
  std::optional<Vector> z;
  std::optional<double> r;
  std::optional<double> theta;
  PointStatus status = PointStatus::Converged;
};

[[nodiscard]] LinearizedCoordinates linearize_point(const VectorFieldModel& model, const Spectrum& spectrum,
                                                    const Eigen::Ref<const Vector>& x,
                                                    const IntegrationOptions& opts = {},
                                                    const LaplaceOptions& lopts = {});

/// V(x) = |s_1(x)| for a planar spiral sink or source.
[[nodiscard]] double lyapunov_value(const VectorFieldModel& model, const Spectrum& spectrum,
                                    const Eigen::Ref<const Vector>& x, const IntegrationOptions& opts = {},
                                    const LaplaceOptions& lopts = {});

/// |s_1(x) - s_1(x')|, which contracts by exp(sigma_1 t) along the flow.
[[nodiscard]] double contracting_distance(const VectorFieldModel& model, const Spectrum& spectrum,
                                          const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x_prime,
                                          const IntegrationOptions& opts = {}, const LaplaceOptions& lopts = {});

}  // namespace isostable
