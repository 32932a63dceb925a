#include "isostable/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <thread>

#include "isostable/error.hpp"

namespace isostable {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

PointRecord diverged_record() {
  PointRecord r;
  r.magnitude = kNaN;
  r.tau = kNaN;
  r.status = PointStatus::Diverged;
  return r;
}

PointRecord evaluate_point(const VectorFieldModel& model, const std::vector<Spectrum>& attractors,
                           const Vector& x, const FieldOptions& opts) {
  for (std::size_t a = 0; a < attractors.size(); ++a) {
    EigenfunctionValue ev;
    try {
      ev = evaluate_eigenfunction(model, attractors[a], x, opts.integration, opts.laplace);
    } catch (const Error&) {
      continue;
    }
    if (ev.status == PointStatus::Diverged) continue;
    PointRecord r;
    r.magnitude = ev.magnitude;
    r.phase = ev.phase;
    r.tau = ev.tau;
    r.status = ev.status;
    r.basin = static_cast<int>(a);
    return r;
  }
  return diverged_record();
}

struct Segment {
  long a;
  long b;
};

/// Chains segments sharing edge ids into polylines: open chains first (from
/// their lowest free end), then closed loops, which repeat their first vertex.
std::vector<Polyline> chain_segments(const std::vector<Segment>& segments, const std::map<long, Vector>& points) {
  std::map<long, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    incident[segments[s].a].push_back(s);
    incident[segments[s].b].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  auto walk = [&](long start) {
    Polyline line{points.at(start)};
    long node = start;
    for (;;) {
      std::size_t next = segments.size();
      for (std::size_t s : incident[node]) {
        if (!used[s]) {
          next = s;
          break;
        }
      }
      if (next == segments.size()) break;
      used[next] = true;
      node = segments[next].a == node ? segments[next].b : segments[next].a;
      line.push_back(points.at(node));
    }
    return line;
  };
  std::vector<Polyline> lines;
  for (const auto& [node, segs] : incident) {
    if (segs.size() == 1 && !used[segs.front()]) lines.push_back(walk(node));
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) lines.push_back(walk(segments[s].a));
  }
  return lines;
}

Vector lerp_point(const Vector& p, const Vector& q, double vp, double vq, double level) {
  const double t = (level - vp) / (vq - vp);
  return p + t * (q - p);
}

bool crosses(double vp, double vq, double level) { return (vp >= level) != (vq >= level); }

void contour_2d(const GridSpec& grid, const std::vector<double>& values, bool periodic, std::span<const int> basins,
                ContourLevel& out) {
  const int nx = grid.resolution[0];
  const int ny = grid.resolution[1];
  const double level = out.level;
  auto idx = [nx](int i, int j) { return static_cast<long>(j) * nx + i; };
  auto h_edge = [&](int i, int j) { return 2 * idx(i, j); };
  auto v_edge = [&](int i, int j) { return 2 * idx(i, j) + 1; };

  std::map<long, Vector> points;
  std::vector<Segment> segments;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const std::array<long, 4> corner = {idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)};
      std::array<double, 4> c{};
      bool skip = false;
      for (int k = 0; k < 4; ++k) {
        c[k] = values[corner[k]];
        if (!std::isfinite(c[k])) skip = true;
      }
      if (!basins.empty()) {
        for (int k = 1; k < 4; ++k) skip = skip || basins[corner[k]] != basins[corner[0]];
      }
      if (skip) continue;
      if (periodic && *std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()) >
                          std::numbers::pi) {
        continue;
      }
      // Edges: 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c3-c2), 3 left (c0-c3).
      const std::array<long, 4> edge = {h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)};
      const std::array<std::pair<int, int>, 4> ends = {{{0, 1}, {1, 2}, {3, 2}, {0, 3}}};
      std::array<bool, 4> cut{};
      int n_cut = 0;
      for (int e = 0; e < 4; ++e) {
        const auto [p, q] = ends[e];
        cut[e] = crosses(c[p], c[q], level);
        if (cut[e]) {
          ++n_cut;
          if (!points.contains(edge[e])) {
            points.emplace(edge[e], lerp_point(grid.point(corner[p]), grid.point(corner[q]), c[p], c[q], level));
          }
        }
      }
      if (n_cut == 2) {
        std::array<long, 2> found{};
        int m = 0;
        for (int e = 0; e < 4; ++e) {
          if (cut[e]) found[m++] = edge[e];
        }
        segments.push_back({found[0], found[1]});
      } else if (n_cut == 4) {
        const double denom = c[0] + c[2] - c[1] - c[3];
        const double center = denom != 0.0 ? (c[0] * c[2] - c[1] * c[3]) / denom : 0.25 * (c[0] + c[1] + c[2] + c[3]);
        if ((center >= level) == (c[0] >= level)) {
          segments.push_back({edge[0], edge[1]});
          segments.push_back({edge[2], edge[3]});
        } else {
          segments.push_back({edge[0], edge[3]});
          segments.push_back({edge[1], edge[2]});
        }
      }
    }
  }
  out.polylines = chain_segments(segments, points);
}

void contour_3d(const GridSpec& grid, const std::vector<double>& values, bool periodic, std::span<const int> basins,
                ContourLevel& out) {
  const int nx = grid.resolution[0];
  const int ny = grid.resolution[1];
  const int nz = grid.resolution[2];
  const std::array<std::array<int, 3>, 3> step = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const long p = grid.flat_index({i, j, k});
        for (const auto& d : step) {
          const int i2 = i + d[0];
          const int j2 = j + d[1];
          const int k2 = k + d[2];
          if (i2 >= nx || j2 >= ny || k2 >= nz) continue;
          const long q = grid.flat_index({i2, j2, k2});
          const double vp = values[p];
          const double vq = values[q];
          if (!std::isfinite(vp) || !std::isfinite(vq)) continue;
          if (periodic && std::abs(vp - vq) > std::numbers::pi) continue;
          if (!basins.empty() && basins[p] != basins[q]) continue;
          if (crosses(vp, vq, out.level)) out.points.push_back(lerp_point(grid.point(p), grid.point(q), vp, vq, out.level));
        }
      }
    }
  }
}

}  // namespace

long GridSpec::size() const {
  long n = 1;
  for (int r : resolution) n *= r;
  return n;
}

Vector GridSpec::point(long index) const {
  Vector x(dim());
  for (int a = 0; a < dim(); ++a) {
    const int i = static_cast<int>(index % resolution[a]);
    index /= resolution[a];
    x[a] = resolution[a] == 1 ? lower[a] : lower[a] + i * spacing(a);
  }
  return x;
}

long GridSpec::flat_index(const std::vector<int>& multi) const {
  long index = 0;
  for (int a = dim() - 1; a >= 0; --a) index = index * resolution[a] + multi[a];
  return index;
}

double GridSpec::spacing(int axis) const {
  if (resolution[axis] == 1) return 0.0;
  return (upper[axis] - lower[axis]) / (resolution[axis] - 1);
}

void GridSpec::validate() const {
  if (resolution.empty() || lower.size() != dim() || upper.size() != dim()) {
    throw Error(ErrorKind::InvalidArgument, "grid bounds and resolution differ in dimension");
  }
  for (int a = 0; a < dim(); ++a) {
    if (resolution[a] < 1) throw Error(ErrorKind::InvalidArgument, "grid resolution must be >= 1");
    if (!std::isfinite(lower[a]) || !std::isfinite(upper[a]) || lower[a] > upper[a] ||
        (resolution[a] > 1 && !(lower[a] < upper[a]))) {
      throw Error(ErrorKind::InvalidArgument, "grid bounds need min < max on every sampled axis");
    }
  }
}

const char* to_string(Quantity q) noexcept {
  switch (q) {
    case Quantity::Magnitude: return "magnitude";
    case Quantity::Phase: return "phase";
    case Quantity::Tau: return "tau";
  }
  return "unknown";
}

Quantity quantity_from_string(const std::string& s) {
  if (s == "magnitude") return Quantity::Magnitude;
  if (s == "phase") return Quantity::Phase;
  if (s == "tau") return Quantity::Tau;
  throw Error(ErrorKind::InvalidArgument, "unknown quantity '" + s + "'");
}

std::vector<double> ScalarField::values() const {
  std::vector<double> out(records.size(), kNaN);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.status == PointStatus::Diverged) continue;
    switch (quantity) {
      case Quantity::Magnitude: out[i] = r.magnitude; break;
      case Quantity::Phase: out[i] = r.phase.value_or(kNaN); break;
      case Quantity::Tau: out[i] = r.tau; break;
    }
  }
  return out;
}

ScalarField evaluate_field(const VectorFieldModel& model, const std::vector<Spectrum>& attractors,
                           const GridSpec& grid, Quantity quantity, const FieldOptions& opts) {
  grid.validate();
  opts.integration.validate();
  if (attractors.empty()) throw Error(ErrorKind::InvalidArgument, "no attractor given");
  if (grid.dim() != model.dim) throw Error(ErrorKind::InvalidArgument, "grid and model differ in dimension");
  for (int a = 0; a < grid.dim(); ++a) {
    if (grid.lower[a] < model.domain.lower[a] || grid.upper[a] > model.domain.upper[a]) {
      throw Error(ErrorKind::InvalidArgument, "grid leaves the model domain");
    }
  }
  for (const auto& s : attractors) {
    if (s.dim() != model.dim) throw Error(ErrorKind::InvalidArgument, "spectrum and model differ in dimension");
    if (quantity == Quantity::Phase && s.leading_class != LeadingClass::ComplexPair) {
      throw Error(ErrorKind::RealLeadingEigenvalue, "phase needs a complex leading pair");
    }
  }

  ScalarField field;
  field.grid = grid;
  field.quantity = quantity;
  field.model = model.name;
  for (const auto& s : attractors) field.fingerprints.push_back(fingerprint(s));
  const long n = grid.size();
  field.records.resize(static_cast<std::size_t>(n));

  unsigned threads = opts.threads != 0 ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<long>(threads, n));
  const long block = (n + threads - 1) / threads;
  auto work = [&](long begin, long end) {
    for (long i = begin; i < end; ++i) {
      field.records[static_cast<std::size_t>(i)] = evaluate_point(model, attractors, grid.point(i), opts);
    }
  };
  if (threads <= 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      const long begin = static_cast<long>(t) * block;
      const long end = std::min(n, begin + block);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return field;
}

ScalarField evaluate_field(const VectorFieldModel& model, const Spectrum& spectrum, const GridSpec& grid,
                           Quantity quantity, const FieldOptions& opts) {
  return evaluate_field(model, std::vector<Spectrum>{spectrum}, grid, quantity, opts);
}

ContourSet extract_contours(const GridSpec& grid, const std::vector<double>& values,
                            const std::vector<double>& levels, bool periodic_phase, std::span<const int> basins) {
  grid.validate();
  if (grid.dim() != 2 && grid.dim() != 3) throw Error(ErrorKind::InvalidArgument, "contours need a 2D or 3D grid");
  if (static_cast<long>(values.size()) != grid.size()) {
    throw Error(ErrorKind::InvalidArgument, "value count does not match the grid");
  }
  if (!basins.empty() && basins.size() != values.size()) {
    throw Error(ErrorKind::InvalidArgument, "basin count does not match the grid");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  ContourSet out;
  out.dim = grid.dim();
  for (double level : levels) {
    ContourLevel cl;
    cl.level = level;
    if (!(level >= lo && level <= hi)) {
      cl.empty_level = true;
    } else if (grid.dim() == 2) {
      contour_2d(grid, values, periodic_phase, basins, cl);
    } else {
      contour_3d(grid, values, periodic_phase, basins, cl);
    }
    out.levels.push_back(std::move(cl));
  }
  return out;
}

ContourSet extract_contours(const ScalarField& field, const std::vector<double>& levels) {
  std::vector<int> basins;
  for (const auto& r : field.records) basins.push_back(r.basin);
  return extract_contours(field.grid, field.values(), levels, field.quantity == Quantity::Phase, basins);
}

LinearizedCoordinates linearize_point(const VectorFieldModel& model, const Spectrum& spectrum,
                                      const Eigen::Ref<const Vector>& x, const IntegrationOptions& opts,
                                      const LaplaceOptions& lopts) {
  const int n = spectrum.dim();
  LinearizedCoordinates out;
  out.y.assign(static_cast<std::size_t>(n), std::nullopt);
  const auto ev = evaluate_eigenfunction(model, spectrum, x, opts, lopts);
  out.status = ev.status;
  if (ev.status == PointStatus::Diverged) return out;
  out.y[0] = ev.value;
  if (spectrum.leading_class == LeadingClass::ComplexPair) {
    out.y[1] = std::conj(ev.value);
    out.r = ev.magnitude;
    out.theta = ev.phase;
  } else if (model.linear && n >= 2) {
    const auto [fwd_model, fwd] = forward_problem(model, spectrum);
    const Observable g = Observable::linear_form(fwd.x_star(), fwd.left.col(1).real());
    if (g.gradient().norm() > 0.0 && std::abs(g.mode(fwd.right.col(1))) > 1e-8 * g.gradient().norm()) {
      LowerAverages lower;
      lower.first_mode = g.mode(fwd.right.col(0)) * ev.value;
      out.y[1] = generalized_laplace_average(model, spectrum, g, x, 2, lower, opts).eigenfunction;
    }
  }
  if (std::all_of(out.y.begin(), out.y.end(), [](const auto& v) { return v.has_value(); })) {
    ComplexVector y(n);
    for (int j = 0; j < n; ++j) y[j] = *out.y[static_cast<std::size_t>(j)];
    out.z = (spectrum.right * y).real();
  }
  return out;
}

double lyapunov_value(const VectorFieldModel& model, const Spectrum& spectrum, const Eigen::Ref<const Vector>& x,
                      const IntegrationOptions& opts, const LaplaceOptions& lopts) {
  if (spectrum.dim() != 2 || spectrum.leading_class != LeadingClass::ComplexPair) {
    throw Error(ErrorKind::InvalidArgument, "the single-eigenfunction Lyapunov function needs a planar spiral");
  }
  const auto ev = evaluate_eigenfunction(model, spectrum, x, opts, lopts);
  if (ev.status == PointStatus::Diverged) throw Error(ErrorKind::Diverged, "point outside the basin");
  return ev.magnitude;
}

double contracting_distance(const VectorFieldModel& model, const Spectrum& spectrum,
                            const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x_prime,
                            const IntegrationOptions& opts, const LaplaceOptions& lopts) {
  const auto a = evaluate_eigenfunction(model, spectrum, x, opts, lopts);
  const auto b = evaluate_eigenfunction(model, spectrum, x_prime, opts, lopts);
  if (a.status == PointStatus::Diverged || b.status == PointStatus::Diverged) {
    throw Error(ErrorKind::Diverged, "point outside the basin");
  }
  return std::abs(a.value - b.value);
}

}  // namespace isostable
