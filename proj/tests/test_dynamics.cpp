#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "check_kind.hpp"
#include "isostable/dynamics.hpp"
#include "oracles.hpp"

using namespace isostable;

TEST_CASE("fitzhugh-nagumo fixed point matches bisection") {
  for (double a : {1.0, 0.1}) {
    FitzHughNagumoParams p;
    p.a = a;
    const auto model = fitzhugh_nagumo(p);
    const auto fp = find_fixed_point(model, Vector::Zero(2));
    const double v = oracle::fhn_fixed_v(p.current, p.gamma, a, -0.5, 0.5);
    CHECK(fp.location[0] == doctest::Approx(v).epsilon(1e-14));
    CHECK(fp.location[1] == doctest::Approx(v / p.gamma).epsilon(1e-14));
    CHECK(fp.residual <= 1e-15);
  }
}

TEST_CASE("lorenz equilibria match closed form") {
  LorenzParams p;
  p.rho = 2.0;
  const auto model = lorenz(p);
  for (int sign : {1, -1}) {
    const auto expected = oracle::lorenz_sink(p.rho, p.b, sign);
    const auto fp = find_fixed_point(model, Vector{{1.5 * sign, 1.5 * sign, 1.2}});
    for (int i = 0; i < 3; ++i) CHECK(fp.location[i] == doctest::Approx(expected[i]).epsilon(1e-13));
  }
  const auto origin = find_fixed_point(lorenz(), Vector{{0.1, -0.1, 0.05}});
  CHECK(origin.location.norm() < 1e-14);
}

TEST_CASE("analytic jacobians agree with finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  FitzHughNagumoParams fp;
  fp.a = 0.1;
  LorenzParams lp;
  lp.rho = 2.0;
  for (const auto& model : {fitzhugh_nagumo(), fitzhugh_nagumo(fp), lorenz(), lorenz(lp)}) {
    REQUIRE(model.has_analytic_jacobian());
    for (int k = 0; k < 20; ++k) {
      Vector x(model.dim);
      for (auto& v : x) v = 3.0 * u(rng);
      const Matrix exact = jacobian_at(model, x);
      const Matrix fd = finite_difference_jacobian(model, x);
      CHECK((exact - fd).norm() <= 1e-7 * std::max(1.0, exact.norm()));
    }
  }
}

TEST_CASE("linear model is x' = A x") {
  const Matrix a{{-1.0, 2.0}, {0.5, -3.0}};
  const auto model = linear(a);
  CHECK(model.linear);
  const Vector x{{0.3, -0.7}};
  CHECK((evaluate_rhs(model, x) - a * x).norm() < 1e-15);
  CHECK((jacobian_at(model, x) - a).norm() == 0.0);
}

TEST_CASE("registry rejects unknown models and parameters") {
  CHECK_THROWS_KIND(make_model("duffing", {}), ErrorKind::Config);
  CHECK_THROWS_KIND(make_model("lorenz", {{"sigma", 10.0}}), ErrorKind::Config);
  CHECK_THROWS_KIND(make_model("linear", {}), ErrorKind::Config);
  CHECK_THROWS_KIND(make_model("lorenz", {}, Matrix::Identity(3, 3)), ErrorKind::Config);
  const auto m = make_model("fitzhugh_nagumo", {{"a", 0.1}});
  CHECK(m.params.at("a") == 0.1);
  CHECK(m.params.at("I") == 0.05);
}

TEST_CASE("time reversal negates the field and its jacobian") {
  const auto model = lorenz();
  const auto rev = time_reversed(model);
  const Vector x{{1.0, -2.0, 3.0}};
  CHECK((evaluate_rhs(rev, x) + evaluate_rhs(model, x)).norm() == 0.0);
  CHECK((jacobian_at(rev, x) + jacobian_at(model, x)).norm() == 0.0);
}

TEST_CASE("non-finite field values are reported") {
  VectorFieldModel m;
  m.name = "bad";
  m.dim = 1;
  m.rhs = [](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) { dx[0] = std::log(x[0]); };
  m.domain = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  CHECK_THROWS_KIND(evaluate_rhs(m, Vector::Constant(1, -1.0)), ErrorKind::NonFiniteField);
}

TEST_CASE("newton reports a field without zeros") {
  VectorFieldModel m;
  m.name = "no_zero";
  m.dim = 1;
  m.rhs = [](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> dx) { dx[0] = 1.0 + x[0] * x[0]; };
  m.domain = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  bool thrown = false;
  try {
    (void)find_fixed_point(m, Vector::Constant(1, 0.5));
  } catch (const Error& e) {
    thrown = true;
    CHECK((e.kind() == ErrorKind::NoConvergence || e.kind() == ErrorKind::SingularJacobian));
  }
  CHECK(thrown);
}
