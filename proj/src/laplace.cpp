#include "isostable/laplace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "isostable/error.hpp"

namespace isostable {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Largest exp(-sigma_1 t) used. With an exact deviation form only underflow
// limits the amplification; otherwise rounding of x* + y sets in near 1e15.
constexpr double kMaxAmplificationExact = 1e200;
constexpr double kMaxAmplificationRounded = 1e15;
constexpr double kDefaultHorizonScale = 25.0;

constexpr std::array<double, 5> kGaussNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                               0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                 0.4786286704993665, 0.2369268850561891};

double wrap_phase(double theta) {
  theta = std::fmod(theta, kTwoPi);
  if (theta < 0.0) theta += kTwoPi;
  if (theta >= kTwoPi) theta = 0.0;
  return theta;
}

double amplification_limit(const VectorFieldModel& model) {
  return model.deviation ? kMaxAmplificationExact : kMaxAmplificationRounded;
}

/// y' = F(x* + y) - F(x*) in deviation coordinates; y = 0 is an exact
/// equilibrium when the model supplies its expansion.
RhsFn deviation_rhs(const VectorFieldModel& model, const Vector& x_star) {
  if (model.deviation) {
    return [d = model.deviation, x_star](const Eigen::Ref<const Vector>& y, Eigen::Ref<Vector> dy) {
      d(x_star, y, dy);
    };
  }
  return [f = model.rhs, x_star, buf = Vector(x_star.size())](const Eigen::Ref<const Vector>& y,
                                                              Eigen::Ref<Vector> dy) mutable {
    buf = x_star + y;
    f(buf, dy);
  };
}

StepControl deviation_control(const VectorFieldModel& model, const Spectrum& spectrum,
                              const IntegrationOptions& opts, double t_end) {
  StepControl ctl;
  ctl.rel_tol = opts.rel_tol;
  ctl.abs_tol = opts.abs_tol;
  ctl.abs_tol_decay = spectrum.sigma1();
  ctl.max_step = opts.max_step;
  ctl.t_end = t_end;
  ctl.escape_center = model.domain.center() - spectrum.x_star();
  ctl.escape_radius = effective_escape_radius(model, opts);
  return ctl;
}

double horizon_for(const Spectrum& spectrum, const IntegrationOptions& opts, const LaplaceOptions& lopts = {}) {
  if (opts.horizon) return *opts.horizon;
  double horizon = kDefaultHorizonScale / std::abs(spectrum.sigma1());
  // strobes are coarse; leave room for a full convergence window after the
  // estimate has settled
  if (spectrum.leading_class == LeadingClass::ComplexPair) {
    horizon += (lopts.convergence_window + 1) * reduced_period(spectrum);
  }
  return horizon;
}

/// Convergence and instability bookkeeping over successive estimates.
class EstimateTracker {
 public:
  EstimateTracker(const LaplaceOptions& lopts, double floor) : lopts_(lopts), floor_(floor) {}

  enum class Verdict { Continue, Converged, GuardFired };

  Verdict push(std::complex<double> z, double t) {
    if (!has_prev_) {
      has_prev_ = true;
      prev_ = z;
      prev_t_ = t;
      ++count_;
      return Verdict::Continue;
    }
    const double change = std::abs(z - prev_) / std::max(std::abs(z), floor_);
    ++count_;
    if (change < lopts_.convergence_tol) {
      if (++streak_ >= lopts_.convergence_window) {
        accept(z, t);
        return Verdict::Converged;
      }
    } else {
      streak_ = 0;
      if (armed_ && change > last_change_) return Verdict::GuardFired;  // prev_ is the last stable value
    }
    // A single small change can be a transient coincidence; arm only after
    // a full window of them.
    arm_streak_ = change < lopts_.guard_arm ? arm_streak_ + 1 : 0;
    if (arm_streak_ >= lopts_.convergence_window) armed_ = true;
    last_change_ = change;
    accept(z, t);
    return Verdict::Continue;
  }

  [[nodiscard]] bool has_estimate() const { return has_prev_; }
  [[nodiscard]] std::complex<double> estimate() const { return prev_; }
  [[nodiscard]] double estimate_time() const { return prev_t_; }
  [[nodiscard]] int count() const { return count_; }

 private:
  void accept(std::complex<double> z, double t) {
    prev_ = z;
    prev_t_ = t;
  }

  LaplaceOptions lopts_;
  double floor_;
  bool has_prev_ = false;
  bool armed_ = false;
  int streak_ = 0;
  int arm_streak_ = 0;
  int count_ = 0;
  double last_change_ = std::numeric_limits<double>::infinity();
  std::complex<double> prev_{0.0, 0.0};
  double prev_t_ = 0.0;
};

EigenfunctionValue finish(const Spectrum& spectrum, std::complex<double> s1, PointStatus status, double t_stop,
                          int checkpoints) {
  EigenfunctionValue out;
  out.status = status;
  out.t_stop = t_stop;
  out.checkpoints = checkpoints;
  const bool complex_pair = spectrum.leading_class == LeadingClass::ComplexPair;
  if (status == PointStatus::Diverged) {
    out.value = {kNaN, kNaN};
    out.magnitude = kNaN;
    out.tau = kNaN;
    if (complex_pair) out.phase = kNaN;
    return out;
  }
  out.value = s1;
  out.magnitude = std::abs(s1);
  if (complex_pair) out.phase = wrap_phase(std::arg(s1));
  const double scaled = complex_pair ? 2.0 * out.magnitude : out.magnitude;
  out.tau = out.magnitude == 0.0 ? std::numeric_limits<double>::infinity()
                                 : std::log(scaled) / spectrum.sigma1();
  return out;
}

/// Shared driver of the two limit forms: integrates in deviation
/// coordinates, evaluates `estimate(k, t_k, y)` at t_k = k * spacing and
/// applies the convergence, guard and basin tests.
template <typename Estimator>
EigenfunctionValue run_limit(const VectorFieldModel& model, const Spectrum& spectrum,
                             const Eigen::Ref<const Vector>& x, const IntegrationOptions& opts,
                             const LaplaceOptions& lopts, double spacing, Estimator&& estimate) {
  opts.validate();
  if (x.size() != model.dim) throw Error(ErrorKind::InvalidArgument, "state dimension mismatch");
  const Vector y0 = x - spectrum.x_star();
  if (y0.isZero(0.0)) return finish(spectrum, {0.0, 0.0}, PointStatus::Converged, 0.0, 0);

  const double sigma1 = spectrum.sigma1();
  const double horizon = horizon_for(spectrum, opts, lopts);
  const double t_cap = std::min(horizon, std::log(amplification_limit(model)) / std::abs(sigma1));
  const auto n_checkpoints = static_cast<long>(std::floor(t_cap / spacing * (1.0 + 1e-12)));
  if (n_checkpoints < 1) {
    throw Error(ErrorKind::GuardTriggered, "no checkpoint fits below the amplification limit");
  }
  const double t_end = static_cast<double>(n_checkpoints) * spacing;

  DormandPrince stepper(deviation_rhs(model, spectrum.x_star()), 0.0, y0,
                        deviation_control(model, spectrum, opts, t_end));
  const double floor = 1e-10 * y0.norm() * spectrum.left.col(0).norm();
  EstimateTracker tracker(lopts, floor);
  std::vector<double> distances{y0.norm()};
  Vector y(y0.size());

  for (long k = 1; k <= n_checkpoints; ++k) {
    const double t = static_cast<double>(k) * spacing;
    const auto st = stepper.advance_past(t);
    if (st == DormandPrince::Status::Escaped) {
      return finish(spectrum, {}, PointStatus::Diverged, stepper.t(), tracker.count());
    }
    if (st == DormandPrince::Status::Stalled) {
      if (!tracker.has_estimate()) return finish(spectrum, {}, PointStatus::Diverged, stepper.t(), 0);
      return finish(spectrum, tracker.estimate(), PointStatus::Truncated, tracker.estimate_time(),
                    tracker.count());
    }
    if (k == n_checkpoints || t == stepper.t()) {
      y = stepper.y();
    } else {
      stepper.dense(t, y);
    }
    distances.push_back(y.norm());
    const auto verdict = tracker.push(estimate(k, t, y), t);
    if (verdict == EstimateTracker::Verdict::Converged) {
      return finish(spectrum, tracker.estimate(), PointStatus::Converged, t, tracker.count());
    }
    if (verdict == EstimateTracker::Verdict::GuardFired) {
      return finish(spectrum, tracker.estimate(), PointStatus::Truncated, tracker.estimate_time(),
                    tracker.count());
    }
  }

  // Not converged by the horizon: a trajectory that stopped contracting is
  // outside the basin (or parked on its boundary).
  const std::size_t m = distances.size();
  const double expected = std::exp(0.5 * sigma1 * spacing);
  if (m >= 3 && distances[m - 1] > expected * distances[m - 2] &&
      distances[m - 2] > expected * distances[m - 3]) {
    return finish(spectrum, {}, PointStatus::Diverged, t_end, tracker.count());
  }
  return finish(spectrum, tracker.estimate(), PointStatus::Truncated, t_end, tracker.count());
}

double default_spacing(const Spectrum& spectrum, double horizon, const LaplaceOptions& lopts) {
  if (lopts.checkpoint) {
    if (!(*lopts.checkpoint > 0.0)) throw Error(ErrorKind::InvalidArgument, "checkpoint must be positive");
    return *lopts.checkpoint;
  }
  return std::min(1.0 / std::abs(spectrum.sigma1()), horizon / 50.0);
}

double vector_angle(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  const double angle = std::acos(c);
  return std::min(angle, std::numbers::pi - angle);
}

}  // namespace

// ---------------------------------------------------------------------------
// Observable

Observable Observable::linear_form(const Vector& x_star, const Vector& gradient) {
  if (x_star.size() != gradient.size()) throw Error(ErrorKind::InvalidArgument, "gradient dimension mismatch");
  Observable f;
  f.center_ = x_star;
  f.gradient_ = gradient;
  return f;
}

Observable Observable::from_function(const Vector& x_star, Function fn, const std::optional<Vector>& gradient) {
  if (!fn) throw Error(ErrorKind::InvalidArgument, "observable function is empty");
  Observable f;
  f.center_ = x_star;
  f.offset_ = fn(x_star);
  if (gradient) {
    if (gradient->size() != x_star.size()) throw Error(ErrorKind::InvalidArgument, "gradient dimension mismatch");
    f.gradient_ = *gradient;
  } else {
    f.gradient_.resize(x_star.size());
    Vector probe = x_star;
    for (Eigen::Index i = 0; i < x_star.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(x_star[i]));
      auto at = [&](double off) {
        probe[i] = x_star[i] + off;
        return fn(probe);
      };
      f.gradient_[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      probe[i] = x_star[i];
    }
  }
  f.function_ = std::move(fn);
  return f;
}

double Observable::operator()(const Eigen::Ref<const Vector>& x) const {
  if (function_) return function_(x) - offset_;
  return gradient_.dot(x - center_);
}

double Observable::at_offset(const Eigen::Ref<const Vector>& dx) const {
  if (function_) {
    const Vector x = center_ + dx;
    return function_(x) - offset_;
  }
  return gradient_.dot(dx);
}

std::complex<double> Observable::mode(const ComplexVector& v) const {
  return (gradient_.cast<std::complex<double>>().array() * v.array()).sum();
}

Observable default_observable(const Spectrum& spectrum) {
  return Observable::linear_form(spectrum.x_star(), spectrum.left.col(0).real());
}

void require_projection(const Observable& f, const Spectrum& spectrum) {
  if (!(std::abs(f.mode(spectrum.right.col(0))) >= 1e-8 * f.gradient().norm()) || f.gradient().norm() == 0.0) {
    throw Error(ErrorKind::ZeroProjection, "observable has no projection onto the leading eigenvector");
  }
}

ObservablePair build_observable_pair(const Spectrum& spectrum) {
  if (spectrum.leading_class != LeadingClass::ComplexPair) {
    throw Error(ErrorKind::RealLeadingEigenvalue, "observable pair needs a complex leading pair");
  }
  if (vector_angle(spectrum.a(), spectrum.b()) < 1e-6) {
    throw Error(ErrorKind::DegenerateSpan, "Re v1 and Im v1 are nearly parallel");
  }
  const ComplexVector vt = spectrum.left.col(0);
  return {Observable::linear_form(spectrum.x_star(), 2.0 * vt.real()),
          Observable::linear_form(spectrum.x_star(), -2.0 * vt.imag())};
}

std::pair<Vector, Vector> span_dual_pair(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::InvalidArgument, "a and b differ in dimension");
  if (vector_angle(a, b) < 1e-6) throw Error(ErrorKind::DegenerateSpan, "a and b are nearly parallel");
  // g = B c with B = [a b]; constraints B^T g = e_k give (B^T B) c = e_k.
  Matrix basis(a.size(), 2);
  basis << a, b;
  const Eigen::Matrix2d gram = basis.transpose() * basis;
  const Eigen::Matrix2d inv = gram.inverse();
  return {basis * inv.col(0), basis * inv.col(1)};
}

const char* to_string(PointStatus s) noexcept {
  switch (s) {
    case PointStatus::Converged: return "converged";
    case PointStatus::Diverged: return "diverged";
    case PointStatus::Truncated: return "truncated";
  }
  return "unknown";
}

std::pair<VectorFieldModel, Spectrum> forward_problem(const VectorFieldModel& model, const Spectrum& spectrum) {
  if (spectrum.stability == Stability::Stable) return {model, spectrum};
  return {time_reversed(model), time_reversed(spectrum)};
}

// ---------------------------------------------------------------------------
// Limit forms

EigenfunctionValue eigenfunction_real(const VectorFieldModel& model, const Spectrum& spectrum, const Observable& f,
                                      const Eigen::Ref<const Vector>& x, const IntegrationOptions& opts,
                                      const LaplaceOptions& lopts) {
  if (spectrum.leading_class != LeadingClass::Real) {
    throw Error(ErrorKind::InvalidArgument, "eigenfunction_real needs a real leading eigenvalue");
  }
  require_projection(f, spectrum);
  const auto [fwd_model, fwd] = forward_problem(model, spectrum);
  const double sigma1 = fwd.sigma1();
  const double mode = f.mode(fwd.right.col(0)).real();
  const double spacing = default_spacing(fwd, horizon_for(fwd, opts), lopts);
  return run_limit(fwd_model, fwd, x, opts, lopts, spacing,
                   [&](long, double t, const Vector& y) -> std::complex<double> {
                     return std::exp(-sigma1 * t) * f.at_offset(y) / mode;
                   });
}

EigenfunctionValue eigenfunction_real(const VectorFieldModel& model, const Spectrum& spectrum,
                                      const Eigen::Ref<const Vector>& x, const IntegrationOptions& opts,
                                      const LaplaceOptions& lopts) {
  return eigenfunction_real(model, spectrum, default_observable(spectrum), x, opts, lopts);
}

EigenfunctionValue eigenfunction_complex(const VectorFieldModel& model, const Spectrum& spectrum,
                                         const ObservablePair& pair, const Eigen::Ref<const Vector>& x,
                                         const IntegrationOptions& opts, const LaplaceOptions& lopts) {
  if (spectrum.leading_class != LeadingClass::ComplexPair) {
    throw Error(ErrorKind::RealLeadingEigenvalue, "eigenfunction_complex needs a complex leading pair");
  }
  const auto [fwd_model, fwd] = forward_problem(model, spectrum);
  const Vector a = fwd.a();
  const Vector b = fwd.b();
  const double k1 = pair.first.gradient().dot(a);
  const double k2 = pair.second.gradient().dot(b);
  if (!(std::abs(k1) > 0.0) || !(std::abs(k2) > 0.0) ||
      std::abs(std::abs(k1) - std::abs(k2)) > 1e-8 * std::max(std::abs(k1), std::abs(k2))) {
    throw Error(ErrorKind::ZeroProjection, "observable pair violates |<g1,a>| = |<g2,b>| != 0");
  }
  const double sigma1 = fwd.sigma1();
  const double omega1 = fwd.omega1();
  const double period = reduced_period(fwd);
  // The strobed limit converges to 2 s_1 exp(i n omega_1 T_1).
  return run_limit(fwd_model, fwd, x, opts, lopts, period,
                   [&](long n, double t, const Vector& y) -> std::complex<double> {
                     const double f1 = pair.first.at_offset(y) / k1;
                     const double f2 = pair.second.at_offset(y) / k2;
                     const double rotation = static_cast<double>(n) * omega1 * period;
                     return 0.5 * std::exp(-sigma1 * t) * std::complex<double>(f1, f2) *
                            std::polar(1.0, -rotation);
                   });
}

EigenfunctionValue eigenfunction_complex(const VectorFieldModel& model, const Spectrum& spectrum,
                                         const Eigen::Ref<const Vector>& x, const IntegrationOptions& opts,
                                         const LaplaceOptions& lopts) {
  if (spectrum.leading_class != LeadingClass::ComplexPair) {
    throw Error(ErrorKind::RealLeadingEigenvalue, "eigenfunction_complex needs a complex leading pair");
  }
  const auto [fwd_model, fwd] = forward_problem(model, spectrum);
  return eigenfunction_complex(model, spectrum, build_observable_pair(fwd), x, opts, lopts);
}

EigenfunctionValue evaluate_eigenfunction(const VectorFieldModel& model, const Spectrum& spectrum,
                                          const Eigen::Ref<const Vector>& x, const IntegrationOptions& opts,
                                          const LaplaceOptions& lopts) {
  if (spectrum.leading_class == LeadingClass::Real) return eigenfunction_real(model, spectrum, x, opts, lopts);
  return eigenfunction_complex(model, spectrum, x, opts, lopts);
}

// ---------------------------------------------------------------------------
// Integral forms

namespace {

/// Integrates integrand(t, y) over [0, horizon] on the dense output and calls
/// on_checkpoint(k, t_k, integral, y_k) every `spacing`; the callback returns
/// false to stop. Returns the stepper status at exit.
template <typename Integrand, typename OnCheckpoint>
DormandPrince::Status integrate_along(const VectorFieldModel& model, const Spectrum& spectrum,
                                      const Vector& y0, double horizon, double spacing,
                                      const IntegrationOptions& opts, Integrand&& integrand,
                                      OnCheckpoint&& on_checkpoint) {
  const auto n_checkpoints = std::max<long>(1, static_cast<long>(std::floor(horizon / spacing * (1.0 + 1e-12))));
  const double t_end = static_cast<double>(n_checkpoints) * spacing;
  DormandPrince stepper(deviation_rhs(model, spectrum.x_star()), 0.0, y0,
                        deviation_control(model, spectrum, opts, t_end));
  std::complex<double> integral{0.0, 0.0};
  long next = 1;
  Vector y(y0.size());
  auto quad = [&](double lo, double hi) {
    if (hi <= lo) return;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      const double t = mid + half * kGaussNodes[q];
      stepper.dense(t, y);
      acc += kGaussWeights[q] * integrand(t, y);
    }
    integral += half * acc;
  };
  while (stepper.status() == DormandPrince::Status::Running) {
    const auto st = stepper.step();
    if (st == DormandPrince::Status::Escaped || st == DormandPrince::Status::Stalled) return st;
    double lo = stepper.t_prev();
    while (next <= n_checkpoints && static_cast<double>(next) * spacing <= stepper.t() * (1.0 + 1e-14)) {
      const double tk = next == n_checkpoints ? t_end : static_cast<double>(next) * spacing;
      quad(lo, tk);
      lo = tk;
      stepper.dense(tk, y);
      if (!on_checkpoint(next, tk, integral, y)) return DormandPrince::Status::Finished;
      ++next;
    }
    quad(lo, stepper.t());
  }
  return stepper.status();
}

}  // namespace

LaplaceAverage laplace_average_integral(const VectorFieldModel& model, const Spectrum& spectrum,
                                        const Observable& f, const Eigen::Ref<const Vector>& x, double horizon,
                                        const IntegrationOptions& opts, const LaplaceOptions& lopts) {
  opts.validate();
  if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  if (x.size() != model.dim) throw Error(ErrorKind::InvalidArgument, "state dimension mismatch");
  const auto [fwd_model, fwd] = forward_problem(model, spectrum);
  const Vector y0 = x - fwd.x_star();
  if (y0.isZero(0.0)) return {};

  const std::complex<double> lambda1 = fwd.lambda(0);
  const double t_cap = std::log(amplification_limit(fwd_model)) / std::abs(fwd.sigma1());
  const double t_max = std::min(horizon, t_cap);
  double spacing = fwd.leading_class == LeadingClass::ComplexPair ? reduced_period(fwd)
                                                                  : default_spacing(fwd, horizon, lopts);
  if (lopts.checkpoint) spacing = *lopts.checkpoint;
  if (spacing > t_max) {
    throw Error(ErrorKind::GuardTriggered, "no stable checkpoint below the amplification limit");
  }

  const double floor = 1e-10 * y0.norm() * std::max(1.0, f.gradient().norm());
  EstimateTracker tracker(lopts, floor);
  LaplaceAverage out;
  bool done = false;
  const auto st = integrate_along(
      fwd_model, fwd, y0, t_max, spacing, opts,
      [&](double t, const Vector& y) { return f.at_offset(y) * std::exp(-lambda1 * t); },
      [&](long, double t, std::complex<double> integral, const Vector&) {
        const auto verdict = tracker.push(integral / t, t);
        if (verdict == EstimateTracker::Verdict::Continue) return true;
        out.status = verdict == EstimateTracker::Verdict::Converged ? PointStatus::Converged
                                                                      : PointStatus::Truncated;
        done = true;
        return false;
      });
  if (st == DormandPrince::Status::Escaped) {
    throw Error(ErrorKind::Diverged, "trajectory escaped before the average settled");
  }
  if (!tracker.has_estimate()) throw Error(ErrorKind::GuardTriggered, "no stable estimate");
  if (!done) out.status = PointStatus::Truncated;
  out.value = tracker.estimate();
  out.t_stop = tracker.estimate_time();
  return out;
}

double tau_difference(double v, double v_prime, double sigma1) {
  if (!(v > 0.0) || !(v_prime > 0.0)) throw Error(ErrorKind::ZeroMagnitude, "magnitudes must be positive");
  return std::log(v / v_prime) / sigma1;
}

double tau_difference(double v, double v_prime, const Spectrum& spectrum) {
  const double sigma1 = spectrum.stability == Stability::Stable ? spectrum.sigma1() : -spectrum.sigma1();
  return tau_difference(v, v_prime, sigma1);
}

GeneralizedAverage generalized_laplace_average(const VectorFieldModel& model, const Spectrum& spectrum,
                                               const Observable& f, const Eigen::Ref<const Vector>& x, int j,
                                               const LowerAverages& lower, const IntegrationOptions& opts,
                                               bool allow_experimental) {
  opts.validate();
  if (j != 2) throw Error(ErrorKind::InvalidArgument, "only the second eigenfunction is supported");
  if (spectrum.dim() < 2) throw Error(ErrorKind::InvalidArgument, "system has a single eigenvalue");
  if (!model.linear && !allow_experimental) {
    throw Error(ErrorKind::Experimental, "second-mode averages on nonlinear models carry no accuracy claim");
  }
  const auto [fwd_model, fwd] = forward_problem(model, spectrum);
  GeneralizedAverage out;
  out.status = model.linear ? GeneralizedStatus::Converged : GeneralizedStatus::Experimental;
  const std::complex<double> mode2 = f.mode(fwd.right.col(1));
  const Vector y0 = x - fwd.x_star();
  if (y0.isZero(0.0)) return out;

  const std::complex<double> lambda1 = fwd.lambda(0);
  const std::complex<double> lambda2 = fwd.lambda(1);
  const double t_cap = std::log(amplification_limit(fwd_model)) / std::abs(lambda2.real());
  const double horizon = std::min(opts.horizon.value_or(10.0 / std::abs(lambda2.real())), t_cap);
  const double spacing = horizon / 50.0;

  auto remainder = [&](double t, const Vector& y) {
    return f.at_offset(y) - lower.offset - lower.first_mode * std::exp(lambda1 * t);
  };
  std::vector<std::complex<double>> samples;
  std::vector<double> sample_times;
  std::complex<double> integral{0.0, 0.0};
  const auto st = integrate_along(
      fwd_model, fwd, y0, horizon, spacing, opts,
      [&](double t, const Vector& y) { return remainder(t, y) * std::exp(-lambda2 * t); },
      [&](long, double t, std::complex<double> acc, const Vector& y) {
        samples.push_back(remainder(t, y) * std::exp(-lambda2 * t));
        sample_times.push_back(t);
        integral = acc;
        return true;
      });
  if (st == DormandPrince::Status::Escaped) throw Error(ErrorKind::Diverged, "trajectory escaped");
  if (st == DormandPrince::Status::Stalled) throw Error(ErrorKind::Stalled, "step size underflow");

  out.value = integral / sample_times.back();
  out.eigenfunction = std::abs(mode2) > 0.0 ? out.value / mode2 : std::complex<double>{0.0, 0.0};

  // Scaled remainder ~ alpha exp((lambda_1 - lambda_2) t) + beta: a visible
  // alpha means the first mode was not removed.
  ComplexMatrix design(static_cast<Eigen::Index>(samples.size()), 2);
  Eigen::VectorXcd rhs(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    design(r, 0) = std::exp((lambda1 - lambda2) * sample_times[i]);
    design(r, 1) = 1.0;
    rhs[r] = samples[i];
  }
  const Eigen::VectorXcd coef = design.colPivHouseholderQr().solve(rhs);
  out.first_mode_residual = coef[0];
  const double scale = std::max(std::abs(lower.first_mode), std::abs(coef[1]));
  // On nonlinear models the remainder also carries exp(2 lambda_1 t) terms the
  // fit cannot separate; the residual is reported but not enforced.
  if (model.linear && scale > 0.0 && std::abs(coef[0]) > 1e-3 * scale) {
    throw Error(ErrorKind::SubtractionLoss, "first-mode residual exceeds 1e-3 of the subtracted term");
  }
  return out;
}

}  // namespace isostable
