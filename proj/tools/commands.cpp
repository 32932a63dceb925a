#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>

#include "field_io.hpp"
#include "isostable/error.hpp"

namespace isostable::cli {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> to_std(const Vector& v) { return {v.begin(), v.end()}; }

json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

json complex_vector_json(const ComplexVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_json(v[i]));
  return out;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_std(m.row(r).transpose()));
  return rows;
}

json model_json(const VectorFieldModel& m) {
  json j{{"name", m.name},
         {"params", m.params},
         {"domain", {{"lower", to_std(m.domain.lower)}, {"upper", to_std(m.domain.upper)}}}};
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double wrap_signed(double angle) {
  angle = std::remainder(angle, kTwoPi);
  return angle;
}

struct Setup {
  VectorFieldModel model;
  FixedPoint fixed_point;
  Spectrum spectrum;
};

Setup setup(const RunConfig& config) {
  Setup s{build_model(config), {}, {}};
  s.fixed_point = find_fixed_point(s.model, fixed_point_guess(config, s.model.dim));
  s.spectrum = compute_spectrum(s.model, s.fixed_point);
  return s;
}

std::vector<Vector> checked_points(const std::vector<Vector>& pts, int dim) {
  for (const auto& p : pts) {
    if (p.size() != dim) throw Error(ErrorKind::Config, "validation point has the wrong dimension");
  }
  return pts;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

using Check = std::function<json()>;

json run_check(const std::string& name, const Check& check) {
  json j;
  try {
    j = check();
  } catch (const Error& e) {
    j = {{"pass", false}, {"error", e.what()}};
  }
  j["check"] = name;
  return j;
}

json check_anchor(const Spectrum& spectrum, const AnchorCheck& c) {
  const double got = tau_difference(c.v, c.v_prime, spectrum);
  const double err = std::abs(got - c.expected) / std::abs(c.expected);
  return {{"pass", err <= c.rel_tol}, {"v", c.v}, {"v_prime", c.v_prime}, {"tau_difference", got},
          {"expected", c.expected}, {"relative_error", err}, {"tolerance", c.rel_tol}};
}

json check_equal_magnitude(const Setup& s, const RunConfig& config, const EqualMagnitudeCheck& c) {
  std::vector<double> mags;
  bool ok = true;
  for (const auto& x : checked_points(c.points, s.model.dim)) {
    const auto ev = evaluate_eigenfunction(s.model, s.spectrum, x, config.integration, config.laplace);
    ok = ok && ev.status != PointStatus::Diverged;
    mags.push_back(ev.magnitude);
  }
  const auto [lo, hi] = std::minmax_element(mags.begin(), mags.end());
  const double spread = (*hi - *lo) / *hi;
  return {{"pass", ok && spread <= c.rel_tol}, {"magnitudes", mags}, {"relative_spread", spread},
          {"tolerance", c.rel_tol}};
}

json check_semigroup(const Setup& s, const RunConfig& config, const SemigroupCheck& c) {
  const auto [fwd_model, fwd] = forward_problem(s.model, s.spectrum);
  double worst_mag = 0.0;
  double worst_phase = 0.0;
  int evaluated = 0;
  bool ok = true;
  for (const auto& x : checked_points(c.points, s.model.dim)) {
    const auto base = evaluate_eigenfunction(s.model, s.spectrum, x, config.integration, config.laplace);
    if (base.status == PointStatus::Diverged) {
      ok = false;
      continue;
    }
    for (double t : c.times) {
      const Vector xt = flow_to(fwd_model, x, t, config.integration);
      const auto moved = evaluate_eigenfunction(s.model, s.spectrum, xt, config.integration, config.laplace);
      if (moved.status == PointStatus::Diverged) {
        ok = false;
        continue;
      }
      const double expected = base.magnitude * std::exp(fwd.sigma1() * t);
      worst_mag = std::max(worst_mag, std::abs(moved.magnitude - expected) / expected);
      if (base.phase && moved.phase) {
        worst_phase = std::max(worst_phase, std::abs(wrap_signed(*moved.phase - *base.phase - fwd.omega1() * t)));
      }
      ++evaluated;
    }
  }
  ok = ok && worst_mag <= c.rel_tol && worst_phase <= c.phase_tol;
  return {{"pass", ok}, {"pairs", evaluated}, {"max_relative_error", worst_mag}, {"max_phase_error", worst_phase},
          {"tolerance", c.rel_tol}, {"phase_tolerance", c.phase_tol}};
}

json check_independence(const Setup& s, const RunConfig& config, const IndependenceCheck& c) {
  const auto [fwd_model, fwd] = forward_problem(s.model, s.spectrum);
  const Vector x_star = fwd.x_star();
  double worst = 0.0;
  for (const auto& x : checked_points(c.points, s.model.dim)) {
    const auto ref = evaluate_eigenfunction(s.model, s.spectrum, x, config.integration, config.laplace);
    EigenfunctionValue alt;
    if (fwd.leading_class == LeadingClass::Real) {
      // Couples to every mode and carries a quadratic term.
      const Observable f = Observable::from_function(x_star, [x_star](const Eigen::Ref<const Vector>& p) {
        const Vector d = p - x_star;
        return d.sum() + 0.5 * d[0] * d[0];
      });
      alt = eigenfunction_real(s.model, s.spectrum, f, x, config.integration, config.laplace);
    } else {
      const auto [g1, g2] = span_dual_pair(fwd.a(), fwd.b());
      const ObservablePair pair{Observable::linear_form(x_star, g1), Observable::linear_form(x_star, g2)};
      alt = eigenfunction_complex(s.model, s.spectrum, pair, x, config.integration, config.laplace);
    }
    if (ref.status == PointStatus::Diverged || alt.status == PointStatus::Diverged) {
      throw Error(ErrorKind::Diverged, "independence point outside the basin");
    }
    worst = std::max(worst, std::abs(ref.value - alt.value) / std::abs(ref.value));
  }
  return {{"pass", worst <= c.rel_tol}, {"max_relative_difference", worst}, {"tolerance", c.rel_tol}};
}

json check_linearization(const Setup& s, const RunConfig& config, const LinearizationCheck& c) {
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal;
  const auto [fwd_model, fwd] = forward_problem(s.model, s.spectrum);
  const ComplexVector vt = fwd.left.col(0);
  double worst_s1 = 0.0;
  double worst_z = 0.0;
  int with_z = 0;
  for (int k = 0; k < c.samples; ++k) {
    Vector d(s.model.dim);
    for (auto& v : d) v = normal(rng);
    d *= c.radius / d.norm();
    const Vector x = fwd.x_star() + d;
    const auto lc = linearize_point(s.model, s.spectrum, x, config.integration, config.laplace);
    if (!lc.y[0]) throw Error(ErrorKind::Diverged, "linearization point outside the basin");
    worst_s1 = std::max(worst_s1, std::abs(*lc.y[0] - inner(d, vt)) / (d.norm() * vt.norm()));
    if (lc.z) {
      worst_z = std::max(worst_z, (*lc.z - d).norm() / d.norm());
      ++with_z;
    }
  }
  return {{"pass", worst_s1 <= c.rel_tol && worst_z <= c.rel_tol},
          {"max_s1_error", worst_s1},
          {"max_z_error", worst_z},
          {"samples_with_z", with_z},
          {"tolerance", c.rel_tol}};
}

json check_lyapunov(const Setup& s, const RunConfig& config, const LyapunovCheck& c) {
  const auto [fwd_model, fwd] = forward_problem(s.model, s.spectrum);
  double worst = 0.0;
  std::vector<double> slopes;
  const auto steps = static_cast<int>(std::floor(c.duration / c.step + 1e-9));
  for (const auto& x : checked_points(c.points, s.model.dim)) {
    std::vector<double> times;
    for (int k = 0; k <= steps; ++k) times.push_back(k * c.step);
    const auto traj = sample_trajectory(fwd_model, x, times, config.integration);
    if (traj.terminated != Termination::Completed) throw Error(ErrorKind::Diverged, "trajectory did not complete");
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      const double y = std::log(lyapunov_value(s.model, s.spectrum, traj.states[k], config.integration, config.laplace));
      const double t = traj.times[k];
      st += t;
      sy += y;
      stt += t * t;
      sty += t * y;
    }
    const double m = static_cast<double>(traj.states.size());
    const double slope = (m * sty - st * sy) / (m * stt - st * st);
    slopes.push_back(slope);
    worst = std::max(worst, std::abs(slope - fwd.sigma1()));
  }
  return {{"pass", worst <= c.slope_tol}, {"slopes", slopes}, {"sigma1", fwd.sigma1()},
          {"max_slope_error", worst}, {"tolerance", c.slope_tol}};
}

json check_linear_oracle(const RunConfig& config, const LinearOracleCheck& c) {
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < c.systems; ++k) {
    const auto sys = random_stable_system(rng, c.dim, 0.1);
    const VectorFieldModel model = linear(sys.a);
    const Spectrum spectrum = compute_spectrum(model, find_fixed_point(model, Vector::Zero(c.dim)));
    const ComplexMatrix coords = sys.basis.inverse();
    for (int p = 0; p < c.points; ++p) {
      Vector x(c.dim);
      for (auto& v : x) v = unit(rng);
      const double expected = std::abs(coords.row(0).dot(x.cast<std::complex<double>>().conjugate()));
      const auto ev = evaluate_eigenfunction(model, spectrum, x, config.integration, config.laplace);
      worst = std::max(worst, std::abs(ev.magnitude - expected) / expected);
    }
  }
  return {{"pass", worst <= c.rel_tol}, {"systems", c.systems}, {"max_relative_error", worst},
          {"tolerance", c.rel_tol}};
}

}  // namespace

RandomLinearSystem random_stable_system(std::mt19937_64& rng, int dim, double separation, bool allow_complex) {
  std::uniform_real_distribution<double> sigma_dist(-2.0, -0.2);
  std::uniform_real_distribution<double> omega_dist(0.3, 2.0);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal;
  for (;;) {
    std::vector<int> mode_size;
    for (int left = dim; left > 0;) {
      const int size = allow_complex && left >= 2 && coin(rng) ? 2 : 1;
      mode_size.push_back(size);
      left -= size;
    }
    std::vector<double> sigmas;
    for (int attempt = 0; attempt < 1000 && sigmas.size() < mode_size.size(); ++attempt) {
      const double s = sigma_dist(rng);
      if (std::all_of(sigmas.begin(), sigmas.end(), [&](double o) { return std::abs(o - s) >= separation; })) {
        sigmas.push_back(s);
      } else if (attempt % 50 == 49) {
        sigmas.clear();
      }
    }
    if (sigmas.size() < mode_size.size()) continue;
    std::sort(sigmas.begin(), sigmas.end(), std::greater<>());

    RandomLinearSystem sys;
    sys.eigenvalues.resize(dim);
    sys.basis.resize(dim, dim);
    int col = 0;
    for (std::size_t m = 0; m < mode_size.size(); ++m) {
      ComplexVector p(dim);
      for (int i = 0; i < dim; ++i) {
        p[i] = mode_size[m] == 2 ? std::complex<double>(normal(rng), normal(rng)) : std::complex<double>(normal(rng), 0.0);
      }
      p.normalize();
      if (mode_size[m] == 1) {
        sys.eigenvalues[col] = sigmas[m];
        sys.basis.col(col++) = p;
      } else {
        const double omega = omega_dist(rng);
        sys.eigenvalues[col] = {sigmas[m], omega};
        sys.basis.col(col++) = p;
        sys.eigenvalues[col] = {sigmas[m], -omega};
        sys.basis.col(col++) = p.conjugate();
      }
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(sys.basis);
    const auto& sv = svd.singularValues();
    if (sv[dim - 1] <= 0.0 || sv[0] / sv[dim - 1] > 50.0) continue;
    const ComplexMatrix a = sys.basis * sys.eigenvalues.asDiagonal() * sys.basis.inverse();
    sys.a = a.real();
    return sys;
  }
}

json spectrum_to_json(const Spectrum& s) {
  json eig = json::array();
  json right = json::array();
  json left = json::array();
  for (int j = 0; j < s.dim(); ++j) {
    eig.push_back(complex_json(s.lambda(j)));
    right.push_back(complex_vector_json(s.right.col(j)));
    left.push_back(complex_vector_json(s.left.col(j)));
  }
  json j{{"fixed_point", to_std(s.x_star())},
         {"jacobian", matrix_json(s.jacobian)},
         {"eigenvalues", eig},
         {"right_eigenvectors", right},
         {"left_eigenvectors", left},
         {"leading_class", to_string(s.leading_class)},
         {"stability", to_string(s.stability)},
         {"sigma1", s.sigma1()},
         {"omega1", s.omega1()},
         {"a", to_std(s.a())},
         {"b", to_std(s.b())},
         {"fingerprint", fingerprint(s)}};
  if (s.leading_class == LeadingClass::ComplexPair) j["reduced_period"] = reduced_period(s);
  return j;
}

int cmd_fixed_point(const RunConfig& config, std::ostream& out) {
  const VectorFieldModel model = build_model(config);
  std::vector<Vector> guesses = config.attractors;
  if (guesses.empty()) guesses.push_back(fixed_point_guess(config, model.dim));
  json list = json::array();
  for (const auto& g : guesses) {
    if (g.size() != model.dim) throw Error(ErrorKind::Config, "guess has the wrong dimension");
    const FixedPoint fp = find_fixed_point(model, g);
    list.push_back({{"guess", to_std(g)}, {"location", to_std(fp.location)}, {"residual", fp.residual},
                    {"iterations", fp.iterations}});
  }
  out << json{{"model", model_json(model)}, {"fixed_points", list}}.dump(2) << '\n';
  return kOk;
}

int cmd_spectrum(const RunConfig& config, std::ostream& out) {
  if (config.attractors.empty()) {
    const Setup s = setup(config);
    json j{{"model", model_json(s.model)}, {"residual", s.fixed_point.residual}};
    j.update(spectrum_to_json(s.spectrum));
    out << j.dump(2) << '\n';
    return kOk;
  }
  // one entry per attractor, in config order
  const VectorFieldModel model = build_model(config);
  json list = json::array();
  for (const auto& g : config.attractors) {
    if (g.size() != model.dim) throw Error(ErrorKind::Config, "attractor guess has the wrong dimension");
    const FixedPoint fp = find_fixed_point(model, g);
    json j{{"residual", fp.residual}};
    j.update(spectrum_to_json(compute_spectrum(model, fp)));
    list.push_back(std::move(j));
  }
  out << json{{"model", model_json(model)}, {"attractors", list}}.dump(2) << '\n';
  return kOk;
}

int cmd_trajectory(const RunConfig& config, const CommandOptions& opts, std::ostream& out) {
  if (!config.trajectory) throw Error(ErrorKind::Config, "config: missing key 'trajectory'");
  const VectorFieldModel model = build_model(config);
  const auto& tc = *config.trajectory;
  if (tc.initial_state.size() != model.dim) throw Error(ErrorKind::Config, "initial_state has the wrong dimension");
  const Trajectory traj = sample_trajectory(model, tc.initial_state, tc.times, config.integration);
  std::ofstream file;
  if (!opts.output.empty()) {
    file = open_output(opts.output);
  }
  std::ostream& sink = opts.output.empty() ? out : file;
  sink << 't';
  for (int a = 0; a < model.dim; ++a) sink << ",x" << (a + 1);
  sink << '\n';
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    sink << format_double(traj.times[k]);
    for (int a = 0; a < model.dim; ++a) sink << ',' << format_double(traj.states[k][a]);
    sink << '\n';
  }
  if (traj.terminated != Termination::Completed) {
    std::cerr << "warning: trajectory " << to_string(traj.terminated) << " after " << traj.states.size()
              << " samples\n";
  }
  return kOk;
}

int cmd_field(const RunConfig& config, const CommandOptions& opts, std::ostream& out) {
  if (!config.field) throw Error(ErrorKind::Config, "config: missing key 'field'");
  if (opts.output.empty()) throw Error(ErrorKind::Config, "field needs an output path");
  const VectorFieldModel model = build_model(config);
  std::vector<Vector> guesses = config.attractors;
  if (guesses.empty()) guesses.push_back(fixed_point_guess(config, model.dim));
  std::vector<Spectrum> spectra;
  json fixed_points = json::array();
  for (const auto& g : guesses) {
    if (g.size() != model.dim) throw Error(ErrorKind::Config, "attractor guess has the wrong dimension");
    spectra.push_back(compute_spectrum(model, find_fixed_point(model, g)));
    fixed_points.push_back(to_std(spectra.back().x_star()));
  }
  FieldOptions fo{config.integration, config.laplace, opts.threads};
  const auto start = std::chrono::steady_clock::now();
  ScalarField field;
  try {
    field = evaluate_field(model, spectra, config.field->grid, config.field->quantity, fo);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument || e.kind() == ErrorKind::RealLeadingEigenvalue) {
      throw Error(ErrorKind::Config, e.what());
    }
    throw;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  long converged = 0, truncated = 0, diverged = 0;
  for (const auto& r : field.records) {
    if (r.status == PointStatus::Converged) ++converged;
    if (r.status == PointStatus::Truncated) ++truncated;
    if (r.status == PointStatus::Diverged) ++diverged;
  }
  const json counts{{"converged", converged}, {"truncated", truncated}, {"diverged", diverged}};
  json header{{"grid", to_json(field.grid)},
              {"model", model_json(model)},
              {"quantity", to_string(field.quantity)},
              {"fingerprints", field.fingerprints},
              {"fixed_points", fixed_points},
              {"integration", to_json(config.integration)},
              {"laplace", to_json(config.laplace)},
              {"counts", counts}};
  if (opts.timestamp) header["timestamp"] = utc_timestamp();
  const std::string prefix = strip_field_extension(opts.output);
  write_field(prefix, field, header);
  json summary = counts;
  summary["points"] = field.records.size();
  summary["wall_seconds"] = wall;
  summary["csv"] = prefix + ".csv";
  summary["header"] = prefix + ".json";
  out << summary.dump() << '\n';
  return kOk;
}

int cmd_contour(const RunConfig& config, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.field.empty()) throw Error(ErrorKind::Config, "contour needs a field path");
  if (config.levels.empty()) throw Error(ErrorKind::Config, "config: missing key 'levels'");
  const ScalarField field = read_field(opts.field);
  const ContourSet set = extract_contours(field, config.levels);
  const std::string prefix = opts.output.empty() ? strip_field_extension(opts.field) + ".contour" : opts.output;
  json files = json::array();
  for (std::size_t k = 0; k < set.levels.size(); ++k) {
    const auto& level = set.levels[k];
    if (level.empty_level) err << "warning: EmptyLevel: level " << format_double(level.level) << " is outside the field range\n";
    const std::string path = prefix + ".level" + std::to_string(k) + ".json";
    std::ofstream file = open_output(path);
    file << contour_to_json(level, set.dim).dump() << '\n';
    if (!file) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
    const std::size_t count = set.dim == 2 ? level.polylines.size() : level.points.size();
    files.push_back({{"level", level.level}, {"path", path}, {set.dim == 2 ? "polylines" : "points", count},
                     {"empty_level", level.empty_level}});
  }
  out << json{{"contours", files}}.dump() << '\n';
  return kOk;
}

int cmd_validate(const RunConfig& config, std::ostream& out) {
  if (!config.validate) throw Error(ErrorKind::Config, "config: missing key 'validate'");
  const ValidateConfig& v = *config.validate;
  std::vector<json> results;
  const bool needs_model = !v.anchors.empty() || !v.equal_magnitude.empty() || v.semigroup ||
                           v.observable_independence || v.linearization || v.lyapunov;
  if (needs_model) {
    const Setup s = setup(config);
    for (const auto& a : v.anchors) results.push_back(run_check("tau_difference_anchor", [&] { return check_anchor(s.spectrum, a); }));
    for (const auto& e : v.equal_magnitude) {
      results.push_back(run_check("equal_magnitude", [&] { return check_equal_magnitude(s, config, e); }));
    }
    if (v.semigroup) results.push_back(run_check("semigroup", [&] { return check_semigroup(s, config, *v.semigroup); }));
    if (v.observable_independence) {
      results.push_back(run_check("observable_independence",
                                  [&] { return check_independence(s, config, *v.observable_independence); }));
    }
    if (v.linearization) {
      results.push_back(run_check("local_linearization", [&] { return check_linearization(s, config, *v.linearization); }));
    }
    if (v.lyapunov) results.push_back(run_check("lyapunov_decay", [&] { return check_lyapunov(s, config, *v.lyapunov); }));
  }
  if (v.linear_oracle) {
    results.push_back(run_check("linear_oracle", [&] { return check_linear_oracle(config, *v.linear_oracle); }));
  }
  int failed = 0;
  for (const auto& r : results) {
    if (!r.at("pass").get<bool>()) ++failed;
    out << r.dump() << '\n';
  }
  out << json{{"summary", {{"checks", results.size()}, {"failed", failed}}}}.dump() << '\n';
  return failed == 0 ? kOk : kValidationFailure;
}

}  // namespace isostable::cli
