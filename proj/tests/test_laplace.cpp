#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "check_kind.hpp"
#include "isostable/laplace.hpp"
#include "oracles.hpp"

using namespace isostable;

namespace {

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

double wrap(double angle) { return std::remainder(angle, 2.0 * std::numbers::pi); }

}  // namespace

TEST_CASE("linear systems reproduce the eigencoordinate") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + trial % 2;
    const auto sys = oracle::make_system(rng, n, trial % 3 == 0, true);
    const auto f = linear_fixture(sys.a);
    for (int k = 0; k < 5; ++k) {
      Vector x(n);
      for (auto& v : x) v = u(rng);
      const auto ev = evaluate_eigenfunction(f.model, f.spectrum, x);
      const double expected = std::abs(oracle::eigencoordinate(sys, x, 0));
      CHECK(ev.status == PointStatus::Converged);
      CHECK(std::abs(ev.magnitude - expected) <= 1e-6 * expected);
      const double scaled = f.spectrum.leading_class == LeadingClass::ComplexPair ? 2.0 * expected : expected;
      CHECK(ev.tau == doctest::Approx(std::log(scaled) / f.spectrum.sigma1()).epsilon(1e-6));
    }
  }
}

TEST_CASE("fixed point has zero magnitude and infinite tau") {
  for (double a : {1.0, 0.1}) {
    const auto f = fhn(a);
    const auto ev = evaluate_eigenfunction(f.model, f.spectrum, f.spectrum.x_star());
    CHECK(ev.magnitude == 0.0);
    CHECK(std::isinf(ev.tau));
    CHECK(ev.status == PointStatus::Converged);
  }
}

TEST_CASE("source eigenfunction uses the reversed flow") {
  const auto f = linear_fixture(Matrix{{0.5, 0.0}, {0.0, 1.2}});
  CHECK(f.spectrum.stability == Stability::Unstable);
  const Vector x{{0.3, -0.4}};
  const auto ev = evaluate_eigenfunction(f.model, f.spectrum, x);
  CHECK(ev.magnitude == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(tau_difference(0.3, 0.6, f.spectrum) == doctest::Approx(std::log(2.0) / 0.5));
}

TEST_CASE("semigroup property on fitzhugh-nagumo") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (double a : {1.0, 0.1}) {
    const auto f = fhn(a);
    IntegrationOptions opts;
    if (a == 1.0) opts.horizon = 150.0;
    for (int k = 0; k < 6; ++k) {
      const Vector x = f.spectrum.x_star() + Vector{{u(rng), u(rng)}};
      const auto base = evaluate_eigenfunction(f.model, f.spectrum, x, opts);
      REQUIRE(base.status == PointStatus::Converged);
      for (double t : {1.0, 5.0}) {
        const auto moved = evaluate_eigenfunction(f.model, f.spectrum, flow_to(f.model, x, t), opts);
        CHECK(std::abs(moved.magnitude / (base.magnitude * std::exp(f.spectrum.sigma1() * t)) - 1.0) < 1e-5);
        if (base.phase) CHECK(std::abs(wrap(*moved.phase - *base.phase - f.spectrum.omega1() * t)) < 1e-5);
      }
    }
  }
}

TEST_CASE("observable independence") {
  const auto f = fhn(1.0);
  IntegrationOptions opts;
  opts.horizon = 150.0;
  const Vector xs = f.spectrum.x_star();
  const auto quad = Observable::from_function(xs, [xs](const Eigen::Ref<const Vector>& p) {
    const Vector d = p - xs;
    return 2.0 * d[0] - d[1] + d[0] * d[1];
  });
  CHECK(quad.gradient()[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(quad.gradient()[1] == doctest::Approx(-1.0).epsilon(1e-9));
  for (const Vector& x : {Vector{{0.5, 0.3}}, Vector{{-0.6, -0.2}}}) {
    const auto a = eigenfunction_real(f.model, f.spectrum, x, opts);
    const auto b = eigenfunction_real(f.model, f.spectrum, quad, x, opts);
    CHECK(std::abs(a.value - b.value) <= 1e-5 * std::abs(a.value));
  }

  const auto g = fhn(0.1);
  const auto [g1, g2] = span_dual_pair(g.spectrum.a(), g.spectrum.b());
  const ObservablePair pair{Observable::linear_form(g.spectrum.x_star(), g1),
                            Observable::linear_form(g.spectrum.x_star(), g2)};
  const Vector x{{0.4, 0.2}};
  const auto a = eigenfunction_complex(g.model, g.spectrum, x);
  const auto b = eigenfunction_complex(g.model, g.spectrum, pair, x);
  CHECK(std::abs(a.value - b.value) <= 1e-8 * std::abs(a.value));
}

TEST_CASE("observable pair constraints") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = oracle::make_system(rng, 3, true, true);
    const auto f = linear_fixture(sys.a);
    const auto pair = build_observable_pair(f.spectrum);
    const Vector a = f.spectrum.a();
    const Vector b = f.spectrum.b();
    CHECK(pair.first.gradient().dot(a) == doctest::Approx(1.0));
    CHECK(pair.second.gradient().dot(b) == doctest::Approx(1.0));
    CHECK(std::abs(pair.first.gradient().dot(b)) < 1e-10);
    CHECK(std::abs(pair.second.gradient().dot(a)) < 1e-10);
    const auto [g1, g2] = span_dual_pair(a, b);
    CHECK(g1.dot(a) == doctest::Approx(1.0));
    CHECK(g2.dot(b) == doctest::Approx(1.0));
    CHECK(std::abs(g1.dot(b)) < 1e-10);
    CHECK(std::abs(g2.dot(a)) < 1e-10);
  }
  CHECK_THROWS_KIND(span_dual_pair(Vector{{1.0, 2.0}}, Vector{{2.0, 4.0}}), ErrorKind::DegenerateSpan);
  CHECK_THROWS_KIND(build_observable_pair(fhn(1.0).spectrum), ErrorKind::RealLeadingEigenvalue);
  CHECK_THROWS_KIND(eigenfunction_complex(fhn(1.0).model, fhn(1.0).spectrum, Vector{{0.1, 0.1}}),
                    ErrorKind::RealLeadingEigenvalue);
}

TEST_CASE("observable without leading projection is rejected") {
  const auto f = linear_fixture(Matrix{{-1.0, 0.0}, {0.0, -2.0}});
  const auto g = Observable::linear_form(Vector::Zero(2), Vector{{0.0, 1.0}});
  CHECK_THROWS_KIND(eigenfunction_real(f.model, f.spectrum, g, Vector{{0.1, 0.1}}), ErrorKind::ZeroProjection);
}

TEST_CASE("paper anchors for tau differences") {
  CHECK(std::abs(tau_difference(0.17, 1.74, fhn(1.0).spectrum) / 12.0 - 1.0) < 0.05);
  CHECK(std::abs(tau_difference(0.051, 0.10, fhn(0.1).spectrum) / 16.0 - 1.0) < 0.05);
  CHECK_THROWS_KIND(tau_difference(0.0, 1.0, -0.5), ErrorKind::ZeroMagnitude);
  CHECK_THROWS_KIND(tau_difference(1.0, -1.0, -0.5), ErrorKind::ZeroMagnitude);
}

TEST_CASE("integral form matches the finite-horizon closed form") {
  // x' = diag(-0.5, -1.5) x, f = x1 + x2: the running average has a closed form.
  const auto f = linear_fixture(Matrix{{-0.5, 0.0}, {0.0, -1.5}});
  const auto g = Observable::linear_form(Vector::Zero(2), Vector{{1.0, 1.0}});
  const Vector x{{0.7, -0.4}};
  for (double horizon : {4.0, 20.0}) {
    LaplaceOptions lo;
    lo.checkpoint = horizon;
    const auto avg = laplace_average_integral(f.model, f.spectrum, g, x, horizon, {}, lo);
    const double expected = x[0] + x[1] * (std::exp(-1.0 * horizon) - 1.0) / (-1.0 * horizon);
    CHECK(avg.value.real() == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(avg.value.imag()) < 1e-12);
  }
  // default observable removes the fast mode entirely
  const auto exact = laplace_average_integral(f.model, f.spectrum, default_observable(f.spectrum), x, 30.0);
  CHECK(exact.value.real() == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(exact.status == PointStatus::Converged);
}

TEST_CASE("integral form on a spiral") {
  const auto f = linear_fixture(Matrix{{-0.2, 1.0}, {-1.0, -0.2}});
  const Vector x{{0.6, 0.1}};
  const auto g = default_observable(f.spectrum);
  const auto avg = laplace_average_integral(f.model, f.spectrum, g, x, 200.0);
  const auto ev = evaluate_eigenfunction(f.model, f.spectrum, x);
  // f*_{lambda_1} = <g, v_1> s_1
  CHECK(std::abs(avg.value - g.mode(f.spectrum.right.col(0)) * ev.value) < 1e-3 * std::abs(avg.value));
}

TEST_CASE("guard and truncation") {
  const auto f = fhn(1.0);
  IntegrationOptions short_run;
  short_run.horizon = 20.0;
  const auto ev = evaluate_eigenfunction(f.model, f.spectrum, Vector{{0.5, 0.3}}, short_run);
  CHECK(ev.status == PointStatus::Truncated);
  CHECK(std::isfinite(ev.magnitude));

  LaplaceOptions huge;
  huge.checkpoint = 1e4;
  CHECK_THROWS_KIND(evaluate_eigenfunction(f.model, f.spectrum, Vector{{0.5, 0.3}}, {}, huge),
                    ErrorKind::GuardTriggered);
  CHECK_THROWS_KIND(laplace_average_integral(f.model, f.spectrum, default_observable(f.spectrum),
                                             Vector{{0.5, 0.3}}, 50.0, {}, huge),
                    ErrorKind::GuardTriggered);
}

TEST_CASE("points outside the basin are diverged") {
  LorenzParams p;
  p.rho = 2.0;
  const auto model = lorenz(p);
  const auto plus = compute_spectrum(model, find_fixed_point(model, Vector{{1.6, 1.6, 1.0}}));
  const auto minus = compute_spectrum(model, find_fixed_point(model, Vector{{-1.6, -1.6, 1.0}}));
  const Vector near_minus = minus.x_star() + Vector{{0.1, -0.05, 0.02}};
  IntegrationOptions opts;
  opts.horizon = 30.0;
  const auto wrong = evaluate_eigenfunction(model, plus, near_minus, opts);
  CHECK(wrong.status == PointStatus::Diverged);
  CHECK(std::isnan(wrong.magnitude));
  const auto right = evaluate_eigenfunction(model, minus, near_minus, opts);
  CHECK(right.status == PointStatus::Converged);

  // escape
  const auto saddle = linear_fixture(Matrix{{-1.0, 0.0}, {0.0, -0.5}});
  VectorFieldModel blowup = saddle.model;
  blowup.rhs = [](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) {
    dx[0] = -x[0] + x[0] * x[0] * x[0];
    dx[1] = -0.5 * x[1];
  };
  blowup.deviation = nullptr;
  blowup.linear = false;
  const auto esc = evaluate_eigenfunction(blowup, saddle.spectrum, Vector{{1.5, 0.1}});
  CHECK(esc.status == PointStatus::Diverged);
}

TEST_CASE("second eigenfunction of linear systems") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + trial % 2;
    const auto sys = oracle::make_system(rng, n, false, true);
    const auto f = linear_fixture(sys.a);
    const auto g = Observable::linear_form(Vector::Zero(n), f.spectrum.left.col(1).real());
    const Vector x{{u(rng), u(rng), u(rng)}};
    const Vector xn = x.head(n);
    const auto first = evaluate_eigenfunction(f.model, f.spectrum, xn);
    LowerAverages lower;
    lower.first_mode = g.mode(f.spectrum.right.col(0)) * first.value;
    const auto avg = generalized_laplace_average(f.model, f.spectrum, g, xn, 2, lower);
    const double expected = std::abs(oracle::eigencoordinate(sys, xn, 1));
    CHECK(std::abs(std::abs(avg.eigenfunction) - expected) <= 1e-4 * std::max(expected, 1e-3));
    CHECK(avg.status == GeneralizedStatus::Converged);
  }
}

TEST_CASE("second eigenfunction errors") {
  const auto f = linear_fixture(Matrix{{-0.3, 0.0}, {0.0, -1.0}});
  const Vector x{{0.5, 0.5}};
  const auto g = Observable::linear_form(Vector::Zero(2), Vector{{1.0, 1.0}});
  CHECK_THROWS_KIND(generalized_laplace_average(f.model, f.spectrum, g, x, 3, {}), ErrorKind::InvalidArgument);
  // the first mode was not subtracted
  CHECK_THROWS_KIND(generalized_laplace_average(f.model, f.spectrum, g, x, 2, {}), ErrorKind::SubtractionLoss);
  LowerAverages lower;
  lower.first_mode = 0.5;
  const auto ok = generalized_laplace_average(f.model, f.spectrum, g, x, 2, lower);
  CHECK(ok.eigenfunction.real() == doctest::Approx(0.5).epsilon(1e-6));

  const auto n = fhn(1.0);
  const auto gn = default_observable(n.spectrum);
  CHECK_THROWS_KIND(generalized_laplace_average(n.model, n.spectrum, gn, Vector{{0.1, 0.1}}, 2, {}),
                    ErrorKind::Experimental);
  LowerAverages nl;
  nl.first_mode = gn.mode(n.spectrum.right.col(0)) *
                  evaluate_eigenfunction(n.model, n.spectrum, Vector{{0.1, 0.1}}).value;
  const auto exp = generalized_laplace_average(n.model, n.spectrum, gn, Vector{{0.1, 0.1}}, 2, nl, {}, true);
  CHECK(exp.status == GeneralizedStatus::Experimental);
}
