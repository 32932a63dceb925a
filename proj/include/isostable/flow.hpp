#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "isostable/dynamics.hpp"

namespace isostable {

enum class Direction { Forward, Backward };

struct IntegrationOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  /// Averaging horizon T used by the eigenfunction evaluators. When unset
  /// they pick 25 / |sigma_1|, plus (convergence_window + 1) reduced periods
  /// when the leading pair is complex.
  std::optional<double> horizon;
  Direction direction = Direction::Forward;
  /// Defaults to 1e3 times the model's domain diagonal, measured from the
  /// domain center.
  std::optional<double> escape_radius;

  void validate() const;
};

enum class Termination { Completed, Escaped, Stalled };

[[nodiscard]] const char* to_string(Termination t) noexcept;

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  Termination terminated = Termination::Completed;
  Vector escape_point;  // set when terminated == Escaped
};

/// Per-run step control. `abs_tol_decay` makes the absolute tolerance
/// abs_tol * exp(abs_tol_decay * t), which keeps the error of a decaying
/// deviation proportional to its size. While it is active the absolute
/// tolerance never drops below rel_tol * max|y_i|.
struct StepControl {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  double abs_tol_decay = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  double t_end = std::numeric_limits<double>::infinity();
  Vector escape_center;  // empty disables the escape test
  double escape_radius = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
};

/// Adaptive Dormand-Prince 5(4) stepper with FSAL and cubic Hermite dense
/// output over the last accepted step. Steps never pass `t_end`.
class DormandPrince {
 public:
  enum class Status { Running, Finished, Escaped, Stalled };

  DormandPrince(RhsFn rhs, double t0, const Eigen::Ref<const Vector>& y0, StepControl control);

  /// Advances by one accepted step.
  Status step();
  /// Steps until t() >= t_target (or a terminal status).
  Status advance_past(double t_target);

  [[nodiscard]] double t() const { return t_; }
  [[nodiscard]] double t_prev() const { return t_prev_; }
  [[nodiscard]] const Vector& y() const { return y_; }
  [[nodiscard]] const Vector& y_prev() const { return y_prev_; }
  [[nodiscard]] Status status() const { return status_; }
  [[nodiscard]] long accepted_steps() const { return accepted_; }

  /// Hermite interpolant on [t_prev(), t()].
  [[nodiscard]] Vector dense(double t) const;
  void dense(double t, Eigen::Ref<Vector> out) const;

 private:
  double error_norm(double t_new) const;
  double initial_step() const;

  RhsFn rhs_;
  StepControl ctl_;
  double t_ = 0.0;
  double t_prev_ = 0.0;
  double h_ = 0.0;
  Vector y_, y_prev_, f_, f_prev_;
  Vector k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y_new_, err_;
  Status status_ = Status::Running;
  long accepted_ = 0;
};

/// Escape radius in effect for `model` under `opts`.
[[nodiscard]] double effective_escape_radius(const VectorFieldModel& model, const IntegrationOptions& opts);

/// phi(t, x0). Throws Escaped or Stalled.
[[nodiscard]] Vector flow_to(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x0, double t,
                             const IntegrationOptions& opts = {});

/// States at increasing `times` (all >= 0) by dense output. Escape and
/// stalling are reported in `terminated`; states stop at the last sample
/// reached.
[[nodiscard]] Trajectory sample_trajectory(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x0,
                                           const std::vector<double>& times,
                                           const IntegrationOptions& opts = {});

}  // namespace isostable
