#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace isostable {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

using RhsFn = std::function<void(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx)>;
using JacobianFn = std::function<void(const Eigen::Ref<const Vector>& x, Eigen::Ref<Matrix> jac)>;
/// F(base + y) - F(base) evaluated without forming base + y, so that tiny
/// deviations keep their relative precision.
using DeviationFn = std::function<void(const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& y,
                                       Eigen::Ref<Vector> dy)>;

/// Axis-aligned box the model is meant to be explored in. Only used for the
/// escape test and as the default plotting window.
struct DomainBox {
  Vector lower;
  Vector upper;

  [[nodiscard]] Vector center() const { return 0.5 * (lower + upper); }
  [[nodiscard]] double diagonal() const { return (upper - lower).norm(); }
};

/// An autonomous vector field x' = F(x). Immutable after construction and
/// safe to share between threads: rhs and jacobian must be reentrant.
struct VectorFieldModel {
  std::string name;
  int dim = 0;
  std::map<std::string, double> params;
  RhsFn rhs;
  JacobianFn jacobian;  // empty when no analytic Jacobian is known
  DeviationFn deviation;  // empty when no exact expansion is known
  DomainBox domain;
  bool linear = false;

  [[nodiscard]] bool has_analytic_jacobian() const { return static_cast<bool>(jacobian); }
};

struct FitzHughNagumoParams {
  double current = 0.05;  // I
  double epsilon = 0.08;
  double gamma = 1.0;
  double a = 1.0;
};

struct LorenzParams {
  double a = 10.0;
  double rho = 0.5;
  double b = 8.0 / 3.0;
};

/// v' = -w - v(v-1)(v-a) + I,  w' = eps (v - gamma w)
[[nodiscard]] VectorFieldModel fitzhugh_nagumo(const FitzHughNagumoParams& p = {});

/// x1' = a(x2-x1),  x2' = x1(rho-x3) - x2,  x3' = x1 x2 - b x3
[[nodiscard]] VectorFieldModel lorenz(const LorenzParams& p = {});

/// x' = A x
[[nodiscard]] VectorFieldModel linear(const Matrix& a);

/// Builtin registry lookup. `matrix` is required for "linear" and rejected
/// otherwise; unknown parameter names are rejected.
[[nodiscard]] VectorFieldModel make_model(const std::string& name,
                                          const std::map<std::string, double>& params,
                                          const std::optional<Matrix>& matrix = std::nullopt);

[[nodiscard]] std::vector<std::string> builtin_model_names();

/// Same field with time reversed, x' = -F(x).
[[nodiscard]] VectorFieldModel time_reversed(const VectorFieldModel& model);

struct FixedPoint {
  Vector location;
  double residual = 0.0;
  int iterations = 0;
};

/// F(x). Throws NonFiniteField when any component is not finite.
[[nodiscard]] Vector evaluate_rhs(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x);

/// Fourth-order central differences, step 1e-5 max(1,|x_i|) per coordinate.
[[nodiscard]] Matrix finite_difference_jacobian(const VectorFieldModel& model,
                                                const Eigen::Ref<const Vector>& x);

/// Analytic Jacobian when the model provides one, finite differences otherwise.
[[nodiscard]] Matrix jacobian_at(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x);

/// Damped Newton iteration on F(x) = 0. Converged when
/// ||F|| <= 1e-12 max(1, ||x||); at most 100 iterations.
[[nodiscard]] FixedPoint find_fixed_point(const VectorFieldModel& model,
                                          const Eigen::Ref<const Vector>& guess);

}  // namespace isostable
