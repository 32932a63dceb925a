#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "isostable/error.hpp"

namespace isostable::cli {
namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::Config, path + ": " + what);
}

/// Object reader that remembers which keys were consumed so leftovers can be
/// reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  [[nodiscard]] const json& at(const std::string& key) {
    if (!has(key)) fail(path_, "missing key '" + key + "'");
    return j_.at(key);
  }

  [[nodiscard]] std::string sub(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key) { return as_number(at(key), sub(key)); }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(sub(key), "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail(sub(key), "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail(path_, "unknown key '" + key + "'");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vector parse_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = Reader::as_number(j[i], path);
  return v;
}

std::vector<double> parse_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(Reader::as_number(v, path));
  return out;
}

std::vector<Vector> parse_points(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of points");
  std::vector<Vector> out;
  for (const auto& p : j) out.push_back(parse_vector(p, path));
  return out;
}

Matrix parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = parse_vector(j[static_cast<std::size_t>(r)], path);
    if (r == 0) m.resize(rows, row.size());
    if (row.size() != m.cols()) fail(path, "rows differ in length");
    m.row(r) = row.transpose();
  }
  return m;
}

ModelConfig parse_model(const json& root, Reader& top) {
  ModelConfig m;
  const json& name = top.at("model");
  if (!name.is_string()) fail("config.model", "expected a model name");
  m.name = name.get<std::string>();
  if (top.has("params")) {
    const json& p = root.at("params");
    if (!p.is_object()) fail("config.params", "expected an object");
    for (const auto& [key, value] : p.items()) m.params[key] = Reader::as_number(value, "config.params." + key);
  }
  if (top.has("matrix")) m.matrix = parse_matrix(root.at("matrix"), "config.matrix");
  if (top.has("domain")) {
    Reader d(root.at("domain"), "config.domain");
    DomainBox box;
    box.lower = parse_vector(d.at("lower"), d.sub("lower"));
    box.upper = parse_vector(d.at("upper"), d.sub("upper"));
    d.finish();
    if (box.lower.size() != box.upper.size() || !(box.lower.array() < box.upper.array()).all()) {
      fail("config.domain", "need lower < upper componentwise");
    }
    m.domain = box;
  }
  return m;
}

IntegrationOptions parse_integration(const json& j) {
  Reader r(j, "config.integration");
  IntegrationOptions o;
  o.rel_tol = r.number("rel_tol", o.rel_tol);
  o.abs_tol = r.number("abs_tol", o.abs_tol);
  o.max_step = r.number("max_step", o.max_step);
  if (r.has("horizon")) o.horizon = r.number("horizon");
  if (r.has("escape_radius")) o.escape_radius = r.number("escape_radius");
  if (r.has("direction")) {
    const std::string d = r.string("direction");
    if (d == "forward") {
      o.direction = Direction::Forward;
    } else if (d == "backward") {
      o.direction = Direction::Backward;
    } else {
      fail(r.sub("direction"), "expected 'forward' or 'backward'");
    }
  }
  r.finish();
  try {
    o.validate();
  } catch (const Error& e) {
    fail("config.integration", e.what());
  }
  return o;
}

LaplaceOptions parse_laplace(const json& j) {
  Reader r(j, "config.laplace");
  LaplaceOptions o;
  o.convergence_tol = r.number("convergence_tol", o.convergence_tol);
  o.convergence_window = r.integer("convergence_window", o.convergence_window);
  o.guard_arm = r.number("guard_arm", o.guard_arm);
  if (r.has("checkpoint")) o.checkpoint = r.number("checkpoint");
  r.finish();
  if (!(o.convergence_tol > 0.0) || o.convergence_window < 1 || !(o.guard_arm > 0.0) ||
      (o.checkpoint && !(*o.checkpoint > 0.0))) {
    fail("config.laplace", "tolerances, window and checkpoint must be positive");
  }
  return o;
}

GridSpec parse_grid(const json& j, const std::string& path) {
  Reader r(j, path);
  GridSpec g;
  g.lower = parse_vector(r.at("lower"), r.sub("lower"));
  g.upper = parse_vector(r.at("upper"), r.sub("upper"));
  const json& res = r.at("resolution");
  if (!res.is_array()) fail(r.sub("resolution"), "expected an array of integers");
  for (const auto& v : res) {
    if (!v.is_number_integer()) fail(r.sub("resolution"), "expected an array of integers");
    g.resolution.push_back(v.get<int>());
  }
  r.finish();
  try {
    g.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return g;
}

ValidateConfig parse_validate(const json& j) {
  Reader r(j, "config.validate");
  ValidateConfig v;
  if (r.has("anchors")) {
    for (const auto& a : j.at("anchors")) {
      Reader ar(a, "config.validate.anchors[]");
      AnchorCheck c;
      c.v = ar.number("v");
      c.v_prime = ar.number("v_prime");
      c.expected = ar.number("expected");
      c.rel_tol = ar.number("rel_tol", c.rel_tol);
      ar.finish();
      v.anchors.push_back(c);
    }
  }
  if (r.has("equal_magnitude")) {
    for (const auto& a : j.at("equal_magnitude")) {
      Reader er(a, "config.validate.equal_magnitude[]");
      EqualMagnitudeCheck c;
      c.points = parse_points(er.at("points"), er.sub("points"));
      c.rel_tol = er.number("rel_tol", c.rel_tol);
      er.finish();
      if (c.points.size() < 2) fail("config.validate.equal_magnitude[]", "need at least two points");
      v.equal_magnitude.push_back(c);
    }
  }
  if (r.has("semigroup")) {
    Reader sr(j.at("semigroup"), "config.validate.semigroup");
    SemigroupCheck c;
    c.points = parse_points(sr.at("points"), sr.sub("points"));
    if (sr.has("times")) c.times = parse_numbers(j.at("semigroup").at("times"), sr.sub("times"));
    c.rel_tol = sr.number("rel_tol", c.rel_tol);
    c.phase_tol = sr.number("phase_tol", c.phase_tol);
    sr.finish();
    v.semigroup = c;
  }
  if (r.has("observable_independence")) {
    Reader ir(j.at("observable_independence"), "config.validate.observable_independence");
    IndependenceCheck c;
    c.points = parse_points(ir.at("points"), ir.sub("points"));
    c.rel_tol = ir.number("rel_tol", c.rel_tol);
    ir.finish();
    v.observable_independence = c;
  }
  if (r.has("linearization")) {
    Reader lr(j.at("linearization"), "config.validate.linearization");
    LinearizationCheck c;
    c.radius = lr.number("radius", c.radius);
    c.samples = lr.integer("samples", c.samples);
    c.rel_tol = lr.number("rel_tol", c.rel_tol);
    c.seed = static_cast<unsigned>(lr.integer("seed", static_cast<int>(c.seed)));
    lr.finish();
    v.linearization = c;
  }
  if (r.has("lyapunov")) {
    Reader lr(j.at("lyapunov"), "config.validate.lyapunov");
    LyapunovCheck c;
    c.points = parse_points(lr.at("points"), lr.sub("points"));
    c.duration = lr.number("duration", c.duration);
    c.step = lr.number("step", c.step);
    c.slope_tol = lr.number("slope_tol", c.slope_tol);
    lr.finish();
    if (!(c.step > 0.0) || !(c.duration >= 2.0 * c.step)) fail("config.validate.lyapunov", "need duration >= 2 step > 0");
    v.lyapunov = c;
  }
  if (r.has("linear_oracle")) {
    Reader lr(j.at("linear_oracle"), "config.validate.linear_oracle");
    LinearOracleCheck c;
    c.systems = lr.integer("systems", c.systems);
    c.dim = lr.integer("dim", c.dim);
    c.points = lr.integer("points", c.points);
    c.rel_tol = lr.number("rel_tol", c.rel_tol);
    c.seed = static_cast<unsigned>(lr.integer("seed", static_cast<int>(c.seed)));
    lr.finish();
    if (c.dim < 2 || c.dim > 6 || c.systems < 1 || c.points < 1) {
      fail("config.validate.linear_oracle", "need 2 <= dim <= 6 and positive counts");
    }
    v.linear_oracle = c;
  }
  r.finish();
  return v;
}

}  // namespace

RunConfig parse_config(const json& j) {
  Reader top(j, "config");
  RunConfig c;
  c.source = j;
  if (top.has("model")) c.model = parse_model(j, top);
  if (top.has("fixed_point_guess")) c.fixed_point_guess = parse_vector(j.at("fixed_point_guess"), "config.fixed_point_guess");
  if (top.has("attractors")) c.attractors = parse_points(j.at("attractors"), "config.attractors");
  if (top.has("integration")) c.integration = parse_integration(j.at("integration"));
  if (top.has("laplace")) c.laplace = parse_laplace(j.at("laplace"));
  if (top.has("trajectory")) {
    Reader tr(j.at("trajectory"), "config.trajectory");
    TrajectoryConfig t;
    t.initial_state = parse_vector(tr.at("initial_state"), tr.sub("initial_state"));
    if (tr.has("times")) {
      t.times = parse_numbers(j.at("trajectory").at("times"), tr.sub("times"));
    }
    if (tr.has("t_end") || tr.has("dt")) {
      if (!t.times.empty()) fail("config.trajectory", "give either times or t_end/dt");
      const double t_end = tr.number("t_end");
      const double dt = tr.number("dt");
      if (!(dt > 0.0) || !(t_end >= 0.0)) fail("config.trajectory", "need dt > 0 and t_end >= 0");
      const auto n = static_cast<long>(std::floor(t_end / dt * (1.0 + 1e-12)));
      for (long k = 0; k <= n; ++k) t.times.push_back(static_cast<double>(k) * dt);
    }
    tr.finish();
    if (t.times.empty()) fail("config.trajectory", "no sample times");
    c.trajectory = t;
  }
  if (top.has("field")) {
    Reader fr(j.at("field"), "config.field");
    FieldConfig f;
    f.grid = parse_grid(fr.at("grid"), fr.sub("grid"));
    if (fr.has("quantity")) {
      try {
        f.quantity = quantity_from_string(fr.string("quantity"));
      } catch (const Error& e) {
        fail(fr.sub("quantity"), e.what());
      }
    }
    fr.finish();
    c.field = f;
  }
  if (top.has("levels")) c.levels = parse_numbers(j.at("levels"), "config.levels");
  if (top.has("validate")) c.validate = parse_validate(j.at("validate"));
  top.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

VectorFieldModel build_model(const RunConfig& run) {
  if (!run.model) fail("config", "missing key 'model'");
  const ModelConfig& config = *run.model;
  VectorFieldModel m;
  try {
    m = make_model(config.name, config.params, config.matrix);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  if (config.domain) {
    if (config.domain->lower.size() != m.dim) fail("config.domain", "dimension differs from the model");
    m.domain = *config.domain;
  }
  return m;
}

Vector fixed_point_guess(const RunConfig& config, int dim) {
  if (!config.fixed_point_guess) return Vector::Zero(dim);
  if (config.fixed_point_guess->size() != dim) fail("config.fixed_point_guess", "dimension differs from the model");
  return *config.fixed_point_guess;
}

json to_json(const IntegrationOptions& opts) {
  json j{{"rel_tol", opts.rel_tol},
         {"abs_tol", opts.abs_tol},
         {"direction", opts.direction == Direction::Forward ? "forward" : "backward"}};
  if (std::isfinite(opts.max_step)) j["max_step"] = opts.max_step;
  if (opts.horizon) j["horizon"] = *opts.horizon;
  if (opts.escape_radius) j["escape_radius"] = *opts.escape_radius;
  return j;
}

json to_json(const LaplaceOptions& opts) {
  json j{{"convergence_tol", opts.convergence_tol},
         {"convergence_window", opts.convergence_window},
         {"guard_arm", opts.guard_arm}};
  if (opts.checkpoint) j["checkpoint"] = *opts.checkpoint;
  return j;
}

json to_json(const ModelConfig& model) {
  json j{{"name", model.name}, {"params", model.params}};
  if (model.matrix) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < model.matrix->rows(); ++r) {
      rows.push_back(std::vector<double>(model.matrix->row(r).begin(), model.matrix->row(r).end()));
    }
    j["matrix"] = rows;
  }
  if (model.domain) {
    j["domain"] = {{"lower", std::vector<double>(model.domain->lower.begin(), model.domain->lower.end())},
                   {"upper", std::vector<double>(model.domain->upper.begin(), model.domain->upper.end())}};
  }
  return j;
}

json to_json(const GridSpec& grid) {
  return {{"lower", std::vector<double>(grid.lower.begin(), grid.lower.end())},
          {"upper", std::vector<double>(grid.upper.begin(), grid.upper.end())},
          {"resolution", grid.resolution}};
}

}  // namespace isostable::cli
