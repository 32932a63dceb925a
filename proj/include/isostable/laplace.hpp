#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <utility>

#include "isostable/flow.hpp"
#include "isostable/spectrum.hpp"

namespace isostable {

/// Scalar observable with f(x*) = 0. Either the linear form <g, x - x*> or a
/// user function with its value at x* subtracted and its gradient recorded.
class Observable {
 public:
  using Function = std::function<double(const Eigen::Ref<const Vector>& x)>;

  static Observable linear_form(const Vector& x_star, const Vector& gradient);
  /// Wraps `f`; when `gradient` is not given it is estimated by fourth-order
  /// central differences at x*.
  static Observable from_function(const Vector& x_star, Function f,
                                  const std::optional<Vector>& gradient = std::nullopt);

  [[nodiscard]] double operator()(const Eigen::Ref<const Vector>& x) const;
  /// f(x* + dx)
  [[nodiscard]] double at_offset(const Eigen::Ref<const Vector>& dx) const;

  [[nodiscard]] const Vector& gradient() const { return gradient_; }
  [[nodiscard]] const Vector& center() const { return center_; }
  [[nodiscard]] bool is_linear() const { return !function_; }

  /// Koopman mode <grad f(x*), v> (bilinear, no conjugation).
  [[nodiscard]] std::complex<double> mode(const ComplexVector& v) const;

 private:
  Vector center_;
  Vector gradient_;
  Function function_;
  double offset_ = 0.0;
};

/// Linear form along the first left eigenvector; it has no linear projection
/// onto the faster modes.
[[nodiscard]] Observable default_observable(const Spectrum& spectrum);

/// Throws ZeroProjection unless |<g, v_1>| >= 1e-8 ||g||.
void require_projection(const Observable& f, const Spectrum& spectrum);

struct ObservablePair {
  Observable first;
  Observable second;
};

/// Observables for the strobed complex limit: <g1,a> = <g2,b> = 1 and
/// <g1,b> = <g2,a> = 0. Built from the left eigenvector, g1 = 2 Re vt_1 and
/// g2 = -2 Im vt_1, so both also vanish on every other eigendirection.
/// Throws RealLeadingEigenvalue, DegenerateSpan.
[[nodiscard]] ObservablePair build_observable_pair(const Spectrum& spectrum);

/// Same constraints solved inside span{a, b}: the unique g1, g2 in that
/// plane. Throws DegenerateSpan when the angle between a and b is < 1e-6.
[[nodiscard]] std::pair<Vector, Vector> span_dual_pair(const Vector& a, const Vector& b);

enum class PointStatus { Converged, Diverged, Truncated };

[[nodiscard]] const char* to_string(PointStatus s) noexcept;

struct LaplaceOptions {
  /// Relative change of successive estimates required for convergence.
  double convergence_tol = 1e-6;
  int convergence_window = 3;
  /// The instability guard arms once the relative change stays below this
  /// for `convergence_window` consecutive checkpoints.
  double guard_arm = 1e-4;
  /// Checkpoint spacing for the real limit and the integral form. Defaults
  /// to min(1/|sigma_1|, T/50).
  std::optional<double> checkpoint;
};

/// Eigenfunction data at one point.
///
/// `value` is s_1(x) (real for a real leading eigenvalue), `magnitude` its
/// modulus and `phase` its argument in [0, 2 pi) for a complex pair. `tau`
/// follows exp(sigma_1 tau) = |s_1| (real) or 2|s_1| (complex) and is +inf
/// on the fixed point. Diverged points carry NaN values.
struct EigenfunctionValue {
  std::complex<double> value{0.0, 0.0};
  double magnitude = 0.0;
  std::optional<double> phase;
  double tau = 0.0;
  PointStatus status = PointStatus::Converged;
  double t_stop = 0.0;
  int checkpoints = 0;
};

/// Real leading eigenvalue: limit of exp(-sigma_1 t) f(phi_t x), normalized
/// by the Koopman mode <grad f(x*), v_1>. Throws ZeroProjection and
/// RealLeadingEigenvalue's counterpart InvalidArgument for a complex pair.
[[nodiscard]] EigenfunctionValue eigenfunction_real(const VectorFieldModel& model, const Spectrum& spectrum,
                                                    const Observable& f, const Eigen::Ref<const Vector>& x,
                                                    const IntegrationOptions& opts = {},
                                                    const LaplaceOptions& lopts = {});

[[nodiscard]] EigenfunctionValue eigenfunction_real(const VectorFieldModel& model, const Spectrum& spectrum,
                                                    const Eigen::Ref<const Vector>& x,
                                                    const IntegrationOptions& opts = {},
                                                    const LaplaceOptions& lopts = {});

/// Complex leading pair: iterates the time-T_1 map and tracks
/// exp(-sigma_1 n T_1) (f1 + i f2). Throws RealLeadingEigenvalue.
[[nodiscard]] EigenfunctionValue eigenfunction_complex(const VectorFieldModel& model, const Spectrum& spectrum,
                                                       const Eigen::Ref<const Vector>& x,
                                                       const IntegrationOptions& opts = {},
                                                       const LaplaceOptions& lopts = {});

[[nodiscard]] EigenfunctionValue eigenfunction_complex(const VectorFieldModel& model, const Spectrum& spectrum,
                                                       const ObservablePair& pair,
                                                       const Eigen::Ref<const Vector>& x,
                                                       const IntegrationOptions& opts = {},
                                                       const LaplaceOptions& lopts = {});

/// Dispatches on the leading class with the default observables.
[[nodiscard]] EigenfunctionValue evaluate_eigenfunction(const VectorFieldModel& model, const Spectrum& spectrum,
                                                        const Eigen::Ref<const Vector>& x,
                                                        const IntegrationOptions& opts = {},
                                                        const LaplaceOptions& lopts = {});

struct LaplaceAverage {
  std::complex<double> value{0.0, 0.0};
  PointStatus status = PointStatus::Converged;
  double t_stop = 0.0;
};

/// (1/T) int_0^T f(phi_t x) exp(-lambda_1 t) dt by Gauss-Legendre quadrature
/// over the dense output of each accepted step. Returns the average at the
/// last stable checkpoint. Throws GuardTriggered if the guard fires before
/// any stable estimate exists.
[[nodiscard]] LaplaceAverage laplace_average_integral(const VectorFieldModel& model, const Spectrum& spectrum,
                                                      const Observable& f, const Eigen::Ref<const Vector>& x,
                                                      double horizon, const IntegrationOptions& opts = {},
                                                      const LaplaceOptions& lopts = {});

/// ln(v / v') / sigma_1. Throws ZeroMagnitude.
[[nodiscard]] double tau_difference(double v, double v_prime, double sigma1);
[[nodiscard]] double tau_difference(double v, double v_prime, const Spectrum& spectrum);

/// Data the second-mode average subtracts: f*_{lambda_1}(x) and f(x*).
struct LowerAverages {
  std::complex<double> first_mode{0.0, 0.0};
  double offset = 0.0;
};

enum class GeneralizedStatus { Converged, Experimental };

struct GeneralizedAverage {
  std::complex<double> value{0.0, 0.0};       // f*_{lambda_2}(x)
  std::complex<double> eigenfunction{0.0, 0.0};  // s_2(x) = value / <grad f, v_2>
  std::complex<double> first_mode_residual{0.0, 0.0};
  GeneralizedStatus status = GeneralizedStatus::Converged;
};

/// Second-mode generalized Laplace average
/// (1/T) int_0^T (f(phi_t x) - f(x*) - f*_1 exp(lambda_1 t)) exp(-lambda_2 t) dt.
/// Only j = 2 is supported. Nonlinear models throw Experimental unless
/// `allow_experimental`; SubtractionLoss is thrown when a least-squares fit of
/// the subtracted remainder still carries a first-mode coefficient above
/// 1e-3 of the subtracted term.
[[nodiscard]] GeneralizedAverage generalized_laplace_average(
    const VectorFieldModel& model, const Spectrum& spectrum, const Observable& f,
    const Eigen::Ref<const Vector>& x, int j, const LowerAverages& lower,
    const IntegrationOptions& opts = {}, bool allow_experimental = false);

/// Model and spectrum of the forward-time problem: unchanged for a sink,
/// time-reversed for a source.
[[nodiscard]] std::pair<VectorFieldModel, Spectrum> forward_problem(const VectorFieldModel& model,
                                                                    const Spectrum& spectrum);

}  // namespace isostable
