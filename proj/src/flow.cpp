#include "isostable/flow.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "isostable/error.hpp"

namespace isostable {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

RhsFn directed_rhs(const VectorFieldModel& model, Direction direction) {
  if (direction == Direction::Forward) return model.rhs;
  return [f = model.rhs](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) {
    f(x, dx);
    dx = -dx;
  };
}

StepControl control_for(const VectorFieldModel& model, const IntegrationOptions& opts, double t_end) {
  StepControl ctl;
  ctl.rel_tol = opts.rel_tol;
  ctl.abs_tol = opts.abs_tol;
  ctl.max_step = opts.max_step;
  ctl.t_end = t_end;
  ctl.escape_center = model.domain.center();
  ctl.escape_radius = effective_escape_radius(model, opts);
  return ctl;
}

}  // namespace

void IntegrationOptions::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "integration tolerances must be positive");
  }
  if (!(max_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "max_step must be positive");
  if (horizon && !(*horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be positive");
  if (escape_radius && !(*escape_radius > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "escape_radius must be positive");
  }
}

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::Completed: return "Completed";
    case Termination::Escaped: return "Escaped";
    case Termination::Stalled: return "Stalled";
  }
  return "Unknown";
}

DormandPrince::DormandPrince(RhsFn rhs, double t0, const Eigen::Ref<const Vector>& y0, StepControl control)
    : rhs_(std::move(rhs)), ctl_(std::move(control)), t_(t0), t_prev_(t0), y_(y0), y_prev_(y0) {
  const auto n = y_.size();
  f_.resize(n);
  for (Vector* v : {&k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y_new_, &err_}) v->resize(n);
  rhs_(y_, f_);
  if (!f_.allFinite()) throw Error(ErrorKind::NonFiniteField, "rhs not finite at initial state");
  f_prev_ = f_;
  h_ = initial_step();
  if (t_ >= ctl_.t_end) status_ = Status::Finished;
}

double DormandPrince::error_norm(double t_new) const {
  double atol = ctl_.abs_tol * std::exp(ctl_.abs_tol_decay * t_new);
  // A component sitting near zero while the deviation as a whole does not
  // decay (the orbit left for another attractor) would otherwise force
  // steps down to rounding level.
  if (ctl_.abs_tol_decay != 0.0) atol = std::max(atol, ctl_.rel_tol * y_new_.lpNorm<Eigen::Infinity>());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    const double sc = atol + ctl_.rel_tol * std::max(std::abs(y_[i]), std::abs(y_new_[i]));
    const double r = err_[i] / sc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(y_.size()));
}

double DormandPrince::initial_step() const {
  // Hairer, Norsett & Wanner, starting step heuristic.
  const double atol = ctl_.abs_tol * std::exp(ctl_.abs_tol_decay * t_);
  const Eigen::ArrayXd sc = atol + ctl_.rel_tol * y_.array().abs();
  const double d0 = std::sqrt((y_.array() / sc).square().mean());
  const double d1 = std::sqrt((f_.array() / sc).square().mean());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, ctl_.max_step);
  Vector y1 = y_ + h0 * f_;
  Vector f1(y_.size());
  rhs_(y1, f1);
  const double d2 = std::sqrt(((f1 - f_).array() / sc).square().mean()) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                               : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  double h = std::min(100.0 * h0, h1);
  if (!std::isfinite(h) || h <= 0.0) h = 1e-6;
  return std::min(h, ctl_.max_step);
}

DormandPrince::Status DormandPrince::step() {
  if (status_ != Status::Running) return status_;
  bool rejected = false;
  for (;;) {
    double h = std::min(h_, ctl_.max_step);
    bool last = false;
    if (t_ + h >= ctl_.t_end) {
      h = ctl_.t_end - t_;
      last = true;
    }
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_)) ||
        accepted_ >= ctl_.max_steps) {
      status_ = Status::Stalled;
      return status_;
    }

    tmp_ = y_ + h * a21 * f_;
    rhs_(tmp_, k2_);
    tmp_ = y_ + h * (a31 * f_ + a32 * k2_);
    rhs_(tmp_, k3_);
    tmp_ = y_ + h * (a41 * f_ + a42 * k2_ + a43 * k3_);
    rhs_(tmp_, k4_);
    tmp_ = y_ + h * (a51 * f_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(tmp_, k5_);
    tmp_ = y_ + h * (a61 * f_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(tmp_, k6_);
    y_new_ = y_ + h * (a71 * f_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(y_new_, k7_);
    err_ = h * (e1 * f_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    const double t_new = last ? ctl_.t_end : t_ + h;
    const double err = (y_new_.allFinite() && k7_.allFinite()) ? error_norm(t_new)
                                                             : std::numeric_limits<double>::infinity();
    if (err <= 1.0) {
      t_prev_ = t_;
      y_prev_.swap(y_);
      f_prev_.swap(f_);
      t_ = t_new;
      y_.swap(y_new_);
      f_.swap(k7_);
      ++accepted_;
      double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
      fac = std::clamp(fac, 0.2, rejected ? 1.0 : 5.0);
      h_ = h * fac;
      if (ctl_.escape_center.size() == y_.size() &&
          (y_ - ctl_.escape_center).norm() > ctl_.escape_radius) {
        status_ = Status::Escaped;
      } else if (last) {
        status_ = Status::Finished;
      }
      return status_;
    }
    rejected = true;
    h_ = std::isfinite(err) ? h * std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25 * h;
  }
}

DormandPrince::Status DormandPrince::advance_past(double t_target) {
  while (status_ == Status::Running && t_ < t_target) step();
  return status_;
}

void DormandPrince::dense(double t, Eigen::Ref<Vector> out) const {
  const double h = t_ - t_prev_;
  if (h <= 0.0) {
    out = y_;
    return;
  }
  const double s = (t - t_prev_) / h;
  const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
  const double h10 = s * (1.0 - s) * (1.0 - s);
  const double h01 = s * s * (3.0 - 2.0 * s);
  const double h11 = s * s * (s - 1.0);
  out = h00 * y_prev_ + (h10 * h) * f_prev_ + h01 * y_ + (h11 * h) * f_;
}

Vector DormandPrince::dense(double t) const {
  Vector out(y_.size());
  dense(t, out);
  return out;
}

double effective_escape_radius(const VectorFieldModel& model, const IntegrationOptions& opts) {
  if (opts.escape_radius) return *opts.escape_radius;
  return 1e3 * model.domain.diagonal();
}

Vector flow_to(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x0, double t,
               const IntegrationOptions& opts) {
  opts.validate();
  if (!(t >= 0.0)) throw Error(ErrorKind::InvalidArgument, "flow time must be non-negative");
  if (x0.size() != model.dim) throw Error(ErrorKind::InvalidArgument, "state dimension mismatch");
  if (t == 0.0) return x0;
  DormandPrince stepper(directed_rhs(model, opts.direction), 0.0, x0, control_for(model, opts, t));
  while (stepper.status() == DormandPrince::Status::Running) stepper.step();
  switch (stepper.status()) {
    case DormandPrince::Status::Escaped:
      throw Error(ErrorKind::Escaped, "trajectory left the escape radius at t=" + std::to_string(stepper.t()));
    case DormandPrince::Status::Stalled:
      throw Error(ErrorKind::Stalled, "step size underflow at t=" + std::to_string(stepper.t()));
    default:
      return stepper.y();
  }
}

Trajectory sample_trajectory(const VectorFieldModel& model, const Eigen::Ref<const Vector>& x0,
                             const std::vector<double>& times, const IntegrationOptions& opts) {
  opts.validate();
  if (x0.size() != model.dim) throw Error(ErrorKind::InvalidArgument, "state dimension mismatch");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || (i > 0 && !(times[i] > times[i - 1]))) {
      throw Error(ErrorKind::InvalidArgument, "sample times must be non-negative and strictly increasing");
    }
  }
  Trajectory traj;
  if (times.empty()) return traj;
  DormandPrince stepper(directed_rhs(model, opts.direction), 0.0, x0,
                        control_for(model, opts, times.back()));
  for (double t : times) {
    if (t == 0.0) {
      traj.times.push_back(t);
      traj.states.emplace_back(x0);
      continue;
    }
    const auto st = stepper.advance_past(t);
    if (st == DormandPrince::Status::Escaped) {
      traj.terminated = Termination::Escaped;
      traj.escape_point = stepper.y();
      break;
    }
    if (st == DormandPrince::Status::Stalled) {
      traj.terminated = Termination::Stalled;
      break;
    }
    traj.times.push_back(t);
    traj.states.push_back(t == stepper.t() ? stepper.y() : stepper.dense(t));
  }
  return traj;
}

}  // namespace isostable
