#include "isostable/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "isostable/error.hpp"

namespace isostable {
namespace {

std::string format_point(const Eigen::Ref<const Vector>& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

DomainBox make_box(std::initializer_list<double> lower, std::initializer_list<double> upper) {
  DomainBox box;
  box.lower = Eigen::Map<const Vector>(lower.begin(), static_cast<Eigen::Index>(lower.size()));
  box.upper = Eigen::Map<const Vector>(upper.begin(), static_cast<Eigen::Index>(upper.size()));
  return box;
}

double take(std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  double v = it->second;
  params.erase(it);
  return v;
}

}  // namespace

VectorFieldModel fitzhugh_nagumo(const FitzHughNagumoParams& p) {
  VectorFieldModel m;
  m.name = "fitzhugh_nagumo";
  m.dim = 2;
  m.params = {{"I", p.current}, {"epsilon", p.epsilon}, {"gamma", p.gamma}, {"a", p.a}};
  m.rhs = [p](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) {
    const double v = x[0];
    const double w = x[1];
    dx[0] = -w - v * (v - 1.0) * (v - p.a) + p.current;
    dx[1] = p.epsilon * (v - p.gamma * w);
  };
  m.jacobian = [p](const Eigen::Ref<const Vector>& x, Eigen::Ref<Matrix> j) {
    const double v = x[0];
    j(0, 0) = -(3.0 * v * v - 2.0 * (1.0 + p.a) * v + p.a);
    j(0, 1) = -1.0;
    j(1, 0) = p.epsilon;
    j(1, 1) = -p.epsilon * p.gamma;
  };
  // c(v) = v(v-1)(v-a) expanded about the base point.
  m.deviation = [p](const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& y, Eigen::Ref<Vector> dy) {
    const double v = base[0];
    const double dv = y[0];
    const double slope = 3.0 * v * v - 2.0 * (1.0 + p.a) * v + p.a;
    const double curvature = 3.0 * v - (1.0 + p.a);
    dy[0] = -y[1] - dv * (slope + dv * (curvature + dv));
    dy[1] = p.epsilon * (dv - p.gamma * y[1]);
  };
  m.domain = make_box({-1.0, -1.0}, {2.0, 1.0});
  return m;
}

VectorFieldModel lorenz(const LorenzParams& p) {
  VectorFieldModel m;
  m.name = "lorenz";
  m.dim = 3;
  m.params = {{"a", p.a}, {"rho", p.rho}, {"b", p.b}};
  m.rhs = [p](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) {
    dx[0] = p.a * (x[1] - x[0]);
    dx[1] = x[0] * (p.rho - x[2]) - x[1];
    dx[2] = x[0] * x[1] - p.b * x[2];
  };
  m.jacobian = [p](const Eigen::Ref<const Vector>& x, Eigen::Ref<Matrix> j) {
    j << -p.a, p.a, 0.0,
         p.rho - x[2], -1.0, -x[0],
         x[1], x[0], -p.b;
  };
  m.deviation = [p](const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& y, Eigen::Ref<Vector> dy) {
    dy[0] = p.a * (y[1] - y[0]);
    dy[1] = y[0] * (p.rho - base[2] - y[2]) - base[0] * y[2] - y[1];
    dy[2] = base[0] * y[1] + y[0] * (base[1] + y[1]) - p.b * y[2];
  };
  m.domain = make_box({-20.0, -20.0, -10.0}, {20.0, 20.0, 40.0});
  return m;
}

VectorFieldModel linear(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::InvalidArgument, "linear model needs a non-empty square matrix");
  }
  if (!a.allFinite()) throw Error(ErrorKind::InvalidArgument, "linear model matrix is not finite");
  VectorFieldModel m;
  m.name = "linear";
  m.dim = static_cast<int>(a.rows());
  m.rhs = [a](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) { dx.noalias() = a * x; };
  m.jacobian = [a](const Eigen::Ref<const Vector>&, Eigen::Ref<Matrix> j) { j = a; };
  m.deviation = [a](const Eigen::Ref<const Vector>&, const Eigen::Ref<const Vector>& y, Eigen::Ref<Vector> dy) {
    dy.noalias() = a * y;
  };
  m.domain.lower = Vector::Constant(m.dim, -1.0);
  m.domain.upper = Vector::Constant(m.dim, 1.0);
  m.linear = true;
  return m;
}

std::vector<std::string> builtin_model_names() { return {"fitzhugh_nagumo", "lorenz", "linear"}; }

VectorFieldModel make_model(const std::string& name, const std::map<std::string, double>& params,
                            const std::optional<Matrix>& matrix) {
  auto rest = params;
  VectorFieldModel m;
  if (name == "fitzhugh_nagumo") {
    FitzHughNagumoParams p;
    p.current = take(rest, "I", p.current);
    p.epsilon = take(rest, "epsilon", p.epsilon);
    p.gamma = take(rest, "gamma", p.gamma);
    p.a = take(rest, "a", p.a);
    m = fitzhugh_nagumo(p);
  } else if (name == "lorenz") {
    LorenzParams p;
    p.a = take(rest, "a", p.a);
    p.rho = take(rest, "rho", p.rho);
    p.b = take(rest, "b", p.b);
    m = lorenz(p);
  } else if (name == "linear") {
    if (!matrix) throw Error(ErrorKind::Config, "model 'linear' requires a matrix");
    m = linear(*matrix);
  } else {
    throw Error(ErrorKind::Config, "unknown model '" + name + "'");
  }
  if (matrix && name != "linear") {
    throw Error(ErrorKind::Config, "a matrix is only accepted by the linear model");
  }
  if (!rest.empty()) {
    throw Error(ErrorKind::Config, "unknown parameter '" + rest.begin()->first + "' for model " + name);
  }
  return m;
}

VectorFieldModel time_reversed(const VectorFieldModel& model) {
  VectorFieldModel r = model;
  r.rhs = [f = model.rhs](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) {
    f(x, dx);
    dx = -dx;
  };
  if (model.jacobian) {
    r.jacobian = [j = model.jacobian](const Eigen::Ref<const Vector>& x, Eigen::Ref<Matrix> out) {
      j(x, out);
      out = -out;
    };
  }
  if (model.deviation) {
    r.deviation = [d = model.deviation](const Eigen::Ref<const Vector>& base, const Eigen::Ref<const Vector>& y,
                                        Eigen::Ref<Vector> dy) {
      d(base, y, dy);
      dy = -dy;
    };
  }
  return r;
}

Vector evaluate_rhs(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dim) throw Error(ErrorKind::InvalidArgument, "state dimension mismatch");
  Vector dx(model.dim);
  model.rhs(x, dx);
  if (!dx.allFinite()) throw Error(ErrorKind::NonFiniteField, "rhs not finite at " + format_point(x));
  return dx;
}

Matrix finite_difference_jacobian(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x) {
  const int n = model.dim;
  Matrix j(n, n);
  Vector probe = x;
  for (int i = 0; i < n; ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    auto at = [&](double offset) {
      probe[i] = x[i] + offset;
      return evaluate_rhs(model, probe);
    };
    const Vector fp2 = at(2.0 * h);
    const Vector fp1 = at(h);
    const Vector fm1 = at(-h);
    const Vector fm2 = at(-2.0 * h);
    probe[i] = x[i];
    j.col(i) = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
  }
  return j;
}

Matrix jacobian_at(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dim) throw Error(ErrorKind::InvalidArgument, "state dimension mismatch");
  if (!model.has_analytic_jacobian()) return finite_difference_jacobian(model, x);
  Matrix j(model.dim, model.dim);
  model.jacobian(x, j);
  if (!j.allFinite()) throw Error(ErrorKind::NonFiniteField, "jacobian not finite at " + format_point(x));
  return j;
}

namespace {

// Eigenfunction limits amplify any offset of x* by exp(|sigma_1| t), so the
// converged point is pushed to rounding level with plain Newton steps.
FixedPoint polish(const VectorFieldModel& model, FixedPoint fp) {
  for (int k = 0; k < 4 && fp.residual > 0.0; ++k) {
    Eigen::FullPivLU<Matrix> lu(jacobian_at(model, fp.location));
    if (!lu.isInvertible()) break;
    const Vector trial = fp.location + lu.solve(-evaluate_rhs(model, fp.location));
    if (!trial.allFinite()) break;
    const double r = evaluate_rhs(model, trial).norm();
    if (!(r < fp.residual)) break;
    fp.location = trial;
    fp.residual = r;
    ++fp.iterations;
  }
  return fp;
}

}  // namespace

FixedPoint find_fixed_point(const VectorFieldModel& model, const Eigen::Ref<const Vector>& guess) {
  constexpr int kMaxIterations = 100;
  constexpr double kMinDamping = 0x1p-20;

  Vector x = guess;
  Vector f = evaluate_rhs(model, x);
  double residual = f.norm();
  for (int it = 0; it <= kMaxIterations; ++it) {
    if (residual <= 1e-12 * std::max(1.0, x.norm())) return polish(model, FixedPoint{x, residual, it});
    if (it == kMaxIterations) break;

    Eigen::FullPivLU<Matrix> lu(jacobian_at(model, x));
    if (!lu.isInvertible()) {
      throw Error(ErrorKind::SingularJacobian, "Newton step unsolvable at " + format_point(x));
    }
    const Vector step = lu.solve(-f);
    if (!step.allFinite()) throw Error(ErrorKind::SingularJacobian, "Newton step not finite");

    double damping = 1.0;
    Vector trial = x + step;
    Vector f_trial = evaluate_rhs(model, trial);
    while (f_trial.norm() >= residual && damping > kMinDamping) {
      damping *= 0.5;
      trial = x + damping * step;
      f_trial = evaluate_rhs(model, trial);
    }
    x = trial;
    f = f_trial;
    residual = f.norm();
  }
  throw Error(ErrorKind::NoConvergence,
              "Newton iteration did not converge from " + format_point(guess) +
                  " (residual " + std::to_string(residual) + ")");
}

}  // namespace isostable
