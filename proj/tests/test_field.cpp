#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <numbers>
#include <random>

#include "check_kind.hpp"
#include "isostable/field.hpp"
#include "oracles.hpp"

using namespace isostable;

namespace {

constexpr double kPi = std::numbers::pi;

struct Fixture {
  VectorFieldModel model;
  Spectrum spectrum;
};

Fixture fhn(double a) {
  FitzHughNagumoParams p;
  p.a = a;
  Fixture f{fitzhugh_nagumo(p), {}};
  f.spectrum = compute_spectrum(f.model, find_fixed_point(f.model, Vector::Zero(2)));
  return f;
}

Fixture linear_fixture(const Matrix& a) {
  Fixture f{linear(a), {}};
  f.spectrum = compute_spectrum(f.model, find_fixed_point(f.model, Vector::Zero(a.rows())));
  return f;
}

GridSpec square(double lo, double hi, int n) {
  return GridSpec{Vector{{lo, lo}}, Vector{{hi, hi}}, {n, n}};
}

std::vector<double> sample(const GridSpec& g, const std::function<double(const Vector&)>& fn) {
  std::vector<double> v(static_cast<std::size_t>(g.size()));
  for (long i = 0; i < g.size(); ++i) v[static_cast<std::size_t>(i)] = fn(g.point(i));
  return v;
}

std::vector<Vector> all_vertices(const ContourLevel& level) {
  std::vector<Vector> out;
  for (const auto& line : level.polylines) out.insert(out.end(), line.begin(), line.end());
  return out;
}

bool closed(const Polyline& line) { return line.size() > 2 && (line.front() - line.back()).norm() < 1e-12; }

}  // namespace

TEST_CASE("grid indexing") {
  GridSpec g{Vector{{0.0, -1.0, 2.0}}, Vector{{1.0, 1.0, 2.0}}, {3, 5, 1}};
  g.validate();
  CHECK(g.dim() == 3);
  CHECK(g.size() == 15);
  CHECK(g.spacing(0) == doctest::Approx(0.5));
  CHECK(g.spacing(1) == doctest::Approx(0.5));
  // axis 0 fastest
  CHECK(g.point(1)[0] == doctest::Approx(0.5));
  CHECK(g.point(1)[1] == doctest::Approx(-1.0));
  CHECK(g.point(3)[0] == doctest::Approx(0.0));
  CHECK(g.point(3)[1] == doctest::Approx(-0.5));
  CHECK(g.point(14)[2] == 2.0);
  CHECK(g.flat_index({2, 4, 0}) == 14);
  CHECK(g.point(14)[0] == 1.0);
  CHECK(g.point(14)[1] == 1.0);

  CHECK_THROWS_KIND((GridSpec{Vector{{1.0, 0.0}}, Vector{{0.0, 1.0}}, {2, 2}}.validate()), ErrorKind::InvalidArgument);
  CHECK_THROWS_KIND((GridSpec{Vector{{0.0, 0.0}}, Vector{{0.0, 1.0}}, {2, 2}}.validate()), ErrorKind::InvalidArgument);
  CHECK_THROWS_KIND((GridSpec{Vector{{0.0, 0.0}}, Vector{{1.0, 1.0}}, {0, 2}}.validate()), ErrorKind::InvalidArgument);
  CHECK_THROWS_KIND((GridSpec{Vector{{0.0}}, Vector{{1.0, 1.0}}, {2, 2}}.validate()), ErrorKind::InvalidArgument);

  CHECK(quantity_from_string("tau") == Quantity::Tau);
  CHECK(std::string(to_string(Quantity::Phase)) == "phase");
  CHECK_THROWS_KIND(quantity_from_string("angle"), ErrorKind::InvalidArgument);
}

TEST_CASE("linear field matches the eigencoordinate pointwise") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 2 + trial % 2;
    const auto sys = oracle::make_system(rng, n, trial >= 2, true);
    const auto f = linear_fixture(sys.a);
    GridSpec g{Vector::Constant(n, -0.9), Vector::Constant(n, 0.8), std::vector<int>(n, n == 2 ? 7 : 4)};
    const auto field = evaluate_field(f.model, f.spectrum, g, Quantity::Magnitude);
    REQUIRE(field.records.size() == static_cast<std::size_t>(g.size()));
    for (long i = 0; i < g.size(); ++i) {
      const auto& r = field.records[static_cast<std::size_t>(i)];
      const double expected = std::abs(oracle::eigencoordinate(sys, g.point(i), 0));
      CHECK(r.status == PointStatus::Converged);
      CHECK(r.basin == 0);
      CHECK(std::abs(r.magnitude - expected) <= 1e-6 * std::max(expected, 1e-12));
    }
  }
}

TEST_CASE("a grid holding only the fixed point") {
  const auto f = fhn(1.0);
  const Vector xs = f.spectrum.x_star();
  const auto field = evaluate_field(f.model, f.spectrum, GridSpec{xs, xs, {1, 1}}, Quantity::Magnitude);
  REQUIRE(field.records.size() == 1);
  CHECK(field.records[0].magnitude == 0.0);
  CHECK(std::isinf(field.records[0].tau));
  CHECK(field.fingerprints.size() == 1);
}

TEST_CASE("field configuration errors") {
  const auto f = fhn(1.0);
  CHECK_THROWS_KIND(evaluate_field(f.model, f.spectrum, square(-3.0, 0.5, 4), Quantity::Magnitude),
                    ErrorKind::InvalidArgument);
  CHECK_THROWS_KIND(evaluate_field(f.model, f.spectrum, square(-0.5, 0.5, 4), Quantity::Phase),
                    ErrorKind::RealLeadingEigenvalue);
  CHECK_THROWS_KIND(evaluate_field(f.model, std::vector<Spectrum>{}, square(-0.5, 0.5, 4), Quantity::Magnitude),
                    ErrorKind::InvalidArgument);
}

TEST_CASE("field output does not depend on the thread count") {
  const auto f = fhn(0.1);
  const GridSpec g{Vector{{-0.8, -0.6}}, Vector{{1.5, 0.4}}, {9, 7}};
  FieldOptions one;
  one.threads = 1;
  FieldOptions three;
  three.threads = 3;
  const auto a = evaluate_field(f.model, f.spectrum, g, Quantity::Phase, one);
  const auto b = evaluate_field(f.model, f.spectrum, g, Quantity::Phase, three);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(std::memcmp(&a.records[i].magnitude, &b.records[i].magnitude, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.records[i].tau, &b.records[i].tau, sizeof(double)) == 0);
    REQUIRE(a.records[i].phase.has_value());
    CHECK(std::memcmp(&*a.records[i].phase, &*b.records[i].phase, sizeof(double)) == 0);
    CHECK(a.records[i].status == b.records[i].status);
  }
}

TEST_CASE("two sinks split the grid into basins") {
  LorenzParams p;
  p.rho = 2.0;
  const auto model = lorenz(p);
  std::vector<Spectrum> sinks;
  for (double s : {1.0, -1.0}) sinks.push_back(compute_spectrum(model, find_fixed_point(model, Vector{{1.6 * s, 1.6 * s, 1.0}})));
  const GridSpec g{Vector{{-3.0, -3.0, 1.0}}, Vector{{3.0, 3.0, 1.0}}, {4, 4, 1}};
  const auto field = evaluate_field(model, sinks, g, Quantity::Magnitude);
  CHECK(field.fingerprints.size() == 2);
  for (long i = 0; i < g.size(); ++i) {
    const Vector x = g.point(i);
    const auto& r = field.records[static_cast<std::size_t>(i)];
    CHECK(r.basin >= 0);
    // the corners far from the x = y diagonal sit deep in one basin
    if (x[0] + x[1] > 2.0) CHECK(r.basin == 0);
    if (x[0] + x[1] < -2.0) CHECK(r.basin == 1);
    // mirror symmetry (x, y) -> (-x, -y) swaps the basins
    const auto& m = field.records[static_cast<std::size_t>(g.size() - 1 - i)];
    CHECK(m.basin == 1 - r.basin);
    CHECK(m.magnitude == doctest::Approx(r.magnitude).epsilon(1e-6));
  }
}

TEST_CASE("contour of |x| gives two vertical lines") {
  const auto g = square(-1.0, 1.0, 21);
  const auto set = extract_contours(g, sample(g, [](const Vector& x) { return std::abs(x[0]); }), {0.5});
  REQUIRE(set.levels.size() == 1);
  const auto& level = set.levels[0];
  CHECK_FALSE(level.empty_level);
  CHECK(level.polylines.size() == 2);
  for (const auto& line : level.polylines) {
    CHECK_FALSE(closed(line));
    CHECK(line.size() == 21);
    for (const auto& v : line) CHECK(std::abs(std::abs(v[0]) - 0.5) <= g.spacing(0));
  }
}

TEST_CASE("contour vertices of a planar field are exact") {
  const auto g = square(-1.0, 1.0, 13);
  auto plane = [](const Vector& x) { return 0.3 * x[0] - 0.7 * x[1] + 0.1; };
  const auto set = extract_contours(g, sample(g, plane), {-0.4, 0.0, 0.35});
  for (const auto& level : set.levels) {
    const auto vs = all_vertices(level);
    CHECK(!vs.empty());
    for (const auto& v : vs) CHECK(std::abs(plane(v) - level.level) <= 1e-12);
  }
}

TEST_CASE("circle contour closes") {
  const auto g = square(-1.0, 1.0, 41);
  const double h = g.spacing(0);
  const auto set = extract_contours(g, sample(g, [](const Vector& x) { return x.squaredNorm(); }), {0.36});
  const auto& level = set.levels[0];
  REQUIRE(level.polylines.size() == 1);
  const auto& line = level.polylines[0];
  CHECK(closed(line));
  // linear interpolation of r^2 across a cell is off by at most h^2 / 4
  for (const auto& v : line) CHECK(std::abs(v.squaredNorm() - 0.36) <= 0.25 * h * h + 1e-12);
}

TEST_CASE("saddle cells follow the asymptotic decider") {
  const GridSpec g = square(0.0, 1.0, 2);
  auto endpoints = [](const Polyline& line) {
    std::vector<Vector> e{line.front(), line.back()};
    std::sort(e.begin(), e.end(), [](const Vector& a, const Vector& b) { return a[0] < b[0]; });
    return e;
  };
  SUBCASE("low saddle separates the high corners") {
    // f(0,0)=1, f(1,0)=0, f(0,1)=0, f(1,1)=0.8; bilinear saddle 0.8/1.8 < 0.5
    const auto set = extract_contours(g, {1.0, 0.0, 0.0, 0.8}, {0.5});
    REQUIRE(set.levels[0].polylines.size() == 2);
    bool cut_origin = false;
    bool cut_far = false;
    for (const auto& line : set.levels[0].polylines) {
      const auto e = endpoints(line);
      if ((e[0] - Vector{{0.0, 0.5}}).norm() < 1e-12 && (e[1] - Vector{{0.5, 0.0}}).norm() < 1e-12) cut_origin = true;
      if ((e[0] - Vector{{0.625, 1.0}}).norm() < 1e-12 && (e[1] - Vector{{1.0, 0.625}}).norm() < 1e-12) cut_far = true;
    }
    CHECK(cut_origin);
    CHECK(cut_far);
  }
  SUBCASE("high saddle joins the high corners") {
    // f(1,1)=1.2 lifts the saddle value to 1.2/2.2 > 0.5
    const auto set = extract_contours(g, {1.0, 0.0, 0.0, 1.2}, {0.5});
    REQUIRE(set.levels[0].polylines.size() == 2);
    for (const auto& line : set.levels[0].polylines) {
      const auto e = endpoints(line);
      // each segment runs from the left or bottom edge to the top or right edge
      const bool bottom_right = std::abs(e[0][1]) < 1e-12 && std::abs(e[1][0] - 1.0) < 1e-12;
      const bool left_top = std::abs(e[0][0]) < 1e-12 && std::abs(e[1][1] - 1.0) < 1e-12;
      CHECK((bottom_right || left_top));
    }
  }
}

TEST_CASE("levels outside the range are flagged empty") {
  const auto g = square(-1.0, 1.0, 5);
  const auto set = extract_contours(g, sample(g, [](const Vector& x) { return x[0]; }), {-2.0, 0.25, 1.5});
  REQUIRE(set.levels.size() == 3);
  CHECK(set.levels[0].empty_level);
  CHECK(set.levels[0].polylines.empty());
  CHECK_FALSE(set.levels[1].empty_level);
  CHECK(set.levels[2].empty_level);
}

TEST_CASE("undefined values and basin changes are masked") {
  const auto g = square(-1.0, 1.0, 21);
  auto values = sample(g, [](const Vector& x) { return x.squaredNorm(); });
  // knock out the node at (0.6, 0)
  const long hole = g.flat_index({16, 10});
  values[static_cast<std::size_t>(hole)] = std::numeric_limits<double>::quiet_NaN();
  const auto set = extract_contours(g, values, {0.36});
  const auto& level = set.levels[0];
  REQUIRE(level.polylines.size() == 1);
  CHECK_FALSE(closed(level.polylines[0]));
  const Vector center = g.point(hole);
  for (const auto& v : all_vertices(level)) {
    CHECK((v - center).lpNorm<Eigen::Infinity>() >= g.spacing(0) - 1e-12);
  }

  // a field continuous across x = 0 but with the basin label flipping there
  const auto linear_values = sample(g, [](const Vector& x) { return x[0]; });
  std::vector<int> basins(static_cast<std::size_t>(g.size()));
  for (long i = 0; i < g.size(); ++i) basins[static_cast<std::size_t>(i)] = g.point(i)[0] < 0.0 ? 0 : 1;
  const auto split = extract_contours(g, linear_values, {-0.05, 0.5}, false, basins);
  CHECK(split.levels[0].polylines.empty());
  CHECK(split.levels[1].polylines.size() == 1);
}

TEST_CASE("phase contours skip the branch cut") {
  const auto g = square(-1.0, 1.0, 40);
  const auto values = sample(g, [](const Vector& x) {
    const double a = std::atan2(x[1], x[0]);
    return a < 0.0 ? a + 2.0 * kPi : a;
  });
  for (double level : {0.3, 6.0}) {
    const auto set = extract_contours(g, values, {level}, true);
    const auto vs = all_vertices(set.levels[0]);
    CHECK(vs.size() > 10);
    for (const auto& v : vs) {
      if (v.norm() < 2.0 * g.spacing(0)) continue;
      const double a = std::atan2(v[1], v[0]);
      CHECK(std::abs(std::remainder(a - level, 2.0 * kPi)) < 0.1);
    }
  }
}

TEST_CASE("3D contours sample a sphere") {
  const GridSpec g{Vector::Constant(3, -1.0), Vector::Constant(3, 1.0), {15, 15, 15}};
  const auto set = extract_contours(g, sample(g, [](const Vector& x) { return x.norm(); }), {0.6});
  CHECK(set.dim == 3);
  const auto& pts = set.levels[0].points;
  CHECK(pts.size() > 100);
  std::array<int, 8> octants{};
  for (const auto& p : pts) {
    CHECK(std::abs(p.norm() - 0.6) <= 0.5 * g.spacing(0));
    octants[static_cast<std::size_t>((p[0] > 0) + 2 * (p[1] > 0) + 4 * (p[2] > 0))]++;
  }
  for (int c : octants) CHECK(c > 0);
}

TEST_CASE("action-angle coordinates of a linear spiral") {
  const Matrix a{{-0.3, 1.1}, {-0.9, -0.2}};
  const auto f = linear_fixture(a);
  REQUIRE(f.spectrum.leading_class == LeadingClass::ComplexPair);
  const double sigma = f.spectrum.sigma1();
  const double omega = f.spectrum.omega1();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int k = 0; k < 5; ++k) {
    const Vector x{{u(rng), u(rng)}};
    const auto base = linearize_point(f.model, f.spectrum, x);
    REQUIRE(base.r);
    REQUIRE(base.theta);
    REQUIRE(base.z);
    // z = V y recovers the state exactly for a linear system
    CHECK((*base.z - x).norm() <= 1e-6 * x.norm());
    for (double t : {0.7, 2.5}) {
      const Vector xt = oracle::expm(a * t) * x;
      const auto moved = linearize_point(f.model, f.spectrum, xt);
      CHECK(std::abs(*moved.r - *base.r * std::exp(sigma * t)) <= 1e-8 * *base.r);
      CHECK(std::abs(std::remainder(*moved.theta - *base.theta - omega * t, 2.0 * kPi)) <= 1e-8);
    }
  }
}

TEST_CASE("real linear systems get both eigencoordinates") {
  const Matrix a{{-0.4, 0.3}, {0.0, -1.3}};
  const auto f = linear_fixture(a);
  const Vector x{{0.5, -0.4}};
  const auto lc = linearize_point(f.model, f.spectrum, x);
  REQUIRE(lc.y[0]);
  REQUIRE(lc.y[1]);
  REQUIRE(lc.z);
  CHECK_FALSE(lc.r);
  CHECK((*lc.z - x).norm() <= 1e-4 * x.norm());
}

TEST_CASE("near the fixed point z approximates the deviation") {
  const auto f = fhn(0.1);
  const Vector xs = f.spectrum.x_star();
  for (int k = 0; k < 8; ++k) {
    const double angle = 2.0 * kPi * k / 8.0;
    const Vector d = 1e-3 * Vector{{std::cos(angle), std::sin(angle)}};
    const auto lc = linearize_point(f.model, f.spectrum, xs + d);
    REQUIRE(lc.z);
    CHECK((*lc.z - d).norm() <= 1e-2 * d.norm());
  }
  // nonlinear real case: s_2 is not available, so neither is z
  const auto r = fhn(1.0);
  const auto lr = linearize_point(r.model, r.spectrum, r.spectrum.x_star() + Vector{{1e-3, 0.0}});
  CHECK(lr.y[0]);
  CHECK_FALSE(lr.y[1]);
  CHECK_FALSE(lr.z);
}

TEST_CASE("Lyapunov function decays at rate sigma_1") {
  const auto f = fhn(0.1);
  CHECK(lyapunov_value(f.model, f.spectrum, f.spectrum.x_star()) == 0.0);
  const Vector x0{{0.7688, -0.5779}};
  const auto traj = sample_trajectory(f.model, x0, {0.0, 10.0, 20.0, 30.0});
  std::vector<double> logs;
  for (const auto& x : traj.states) logs.push_back(std::log(lyapunov_value(f.model, f.spectrum, x)));
  for (std::size_t k = 1; k < logs.size(); ++k) {
    CHECK(std::abs((logs[k] - logs[0]) / traj.times[k] - f.spectrum.sigma1()) <= 1e-3);
  }
  const auto r = fhn(1.0);
  CHECK_THROWS_KIND(lyapunov_value(r.model, r.spectrum, Vector{{0.1, 0.1}}), ErrorKind::InvalidArgument);
}

TEST_CASE("eigenfunction distance contracts exactly") {
  const Matrix a{{-0.3, 1.1}, {-0.9, -0.2}};
  const auto f = linear_fixture(a);
  const Vector x{{0.6, -0.2}};
  const Vector xp{{-0.3, 0.5}};
  const double d0 = contracting_distance(f.model, f.spectrum, x, xp);
  for (double t : {1.0, 4.0}) {
    const Matrix e = oracle::expm(a * t);
    const double dt = contracting_distance(f.model, f.spectrum, e * x, e * xp);
    CHECK(dt == doctest::Approx(d0 * std::exp(f.spectrum.sigma1() * t)).epsilon(1e-6));
  }
}

TEST_CASE("contour points flow onto the scaled level") {
  const auto f = fhn(1.0);
  const Vector xs = f.spectrum.x_star();
  const GridSpec g{xs - Vector::Constant(2, 0.08), xs + Vector::Constant(2, 0.08), {33, 33}};
  const auto field = evaluate_field(f.model, f.spectrum, g, Quantity::Magnitude);
  const double level = 0.03;
  const auto set = extract_contours(field, {level});
  const auto vs = all_vertices(set.levels[0]);
  REQUIRE(vs.size() > 10);
  const double dt = 2.0;
  const double target = level * std::exp(f.spectrum.sigma1() * dt);
  for (std::size_t k = 0; k < vs.size(); k += vs.size() / 8) {
    const Vector moved = flow_to(f.model, vs[k], dt);
    const double m = evaluate_eigenfunction(f.model, f.spectrum, moved).magnitude;
    CHECK(std::abs(m - target) <= 1e-3 * target);
  }
}
