#include <doctest.h>

#include <cmath>

#include "relaxbv/density.hpp"
#include "relaxbv/errors.hpp"
#include "relaxbv/expression.hpp"

using namespace relaxbv;

namespace {
const Point2 kX{0.0, 0.0};
const YosidaContext kCtx{1.0, 0.0, 0.0};

double hat(const SurfaceDensity& d, double p) { return yosida_eval(d, kCtx, kX, Value{p}); }

/// Brute-force inf_q tau(q) + sigma|p - q| on a fine grid.
double brute_hat(const SurfaceDensity& d, double p, double sigma = 1.0) {
  double best = d(kX, Value{p});
  for (int i = -40000; i <= 40000; ++i) {
    const double q = i * 1e-4;
    best = std::min(best, d(kX, Value{q}) + sigma * std::abs(p - q));
  }
  return best;
}
}  // namespace

TEST_SUITE("density") {
  TEST_CASE("builtin evaluation") {
    CHECK(eval_density(SurfaceDensity::linear(-0.8), kX, Value{2.0}) == doctest::Approx(-1.6));
    CHECK(eval_density(SurfaceDensity::absolute(2.0), kX, Value{-3.0}) == doctest::Approx(6.0));
    CHECK(eval_density(SurfaceDensity::quadratic(), kX, Value{0.5}) == doctest::Approx(0.25));
    CHECK(eval_density(SurfaceDensity::quadratic(2), kX, Value{3.0, 4.0}) == doctest::Approx(25.0));
    CHECK(eval_density(SurfaceDensity::linear(Value{1.0, -2.0}), kX, Value{3.0, 1.0}) == doctest::Approx(1.0));
  }

  TEST_CASE("evaluation rejects bad arguments") {
    CHECK_THROWS_AS(eval_density(SurfaceDensity::linear(1.0), kX, Value{NAN}), PreconditionError);
    CHECK_THROWS_AS(eval_density(SurfaceDensity::linear(1.0), kX, Value{1.0, 2.0}), PreconditionError);
    const auto checked = SurfaceDensity::linear(1.0).with_boundary_check([](Point2 x) { return std::abs(x.y); }, 1e-9);
    CHECK_NOTHROW(eval_density(checked, {0.3, 0.0}, Value{1.0}));
    CHECK_THROWS_AS(eval_density(checked, {0.3, 0.5}, Value{1.0}), PreconditionError);
  }

  TEST_CASE("lower bound verification") {
    const Point2 xs[] = {kX};
    const auto grid = sample_grid(xs, -10.0, 10.0, 201);
    CHECK(verify_lower_bound(SurfaceDensity::linear(-0.8), grid).holds);
    CHECK(verify_lower_bound(SurfaceDensity::quadratic(), grid).holds);
    const auto bad = SurfaceDensity::linear(-2.0).with_lower_bound(LowerBoundData::constant(0.0, 1.0));
    const auto r = verify_lower_bound(bad, grid);
    CHECK_FALSE(r.holds);
    CHECK(r.worst_violation == doctest::Approx(-10.0));
    CHECK(r.samples == 201);
  }

  TEST_CASE("yosida closed forms and fixed points") {
    CHECK(hat(SurfaceDensity::linear(-0.5), 3.0) == doctest::Approx(-1.5));
    CHECK(hat(SurfaceDensity::quadratic(), 1.0) == doctest::Approx(0.75));
    CHECK(hat(SurfaceDensity::quadratic(), 0.3) == doctest::Approx(0.09));
    CHECK(hat(SurfaceDensity::absolute(2.0), 1.0) == doctest::Approx(1.0));
    CHECK(hat(SurfaceDensity::absolute(0.5), -2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(hat(SurfaceDensity::linear(-2.0), 0.0), UnboundedBelow);
    CHECK_THROWS_AS(hat(SurfaceDensity::absolute(-1.5), 0.0), UnboundedBelow);
  }

  TEST_CASE("yosida grid search agrees with brute force") {
    const auto table = SurfaceDensity::tabulated({-1.0, 0.0, 1.0}, {2.0, -1.0, 3.0});
    const auto expr = SurfaceDensity::expression(Expression::parse("max(-0.4*p, p*p - 1)"));
    for (double p : {-2.5, -1.0, -0.2, 0.0, 0.7, 1.9}) {
      CHECK(hat(table, p) == doctest::Approx(brute_hat(table, p)).epsilon(1e-6));
      CHECK(hat(expr, p) == doctest::Approx(brute_hat(expr, p)).epsilon(1e-4));
      CHECK(hat(expr, p) <= brute_hat(expr, p) + 1e-9);
    }
  }

  TEST_CASE("yosida transform is sigma-Lipschitz and below tau") {
    const auto d = SurfaceDensity::expression(Expression::parse("p*p*p*p - 2*p*p"));
    for (double p = -3.0; p <= 3.0; p += 0.25) {
      const double a = hat(d, p), b = hat(d, p + 0.25);
      CHECK(std::abs(a - b) <= 0.25 + 1e-9);
      CHECK(a <= d(kX, Value{p}) + 1e-12);
    }
  }

  TEST_CASE("search radius") {
    CHECK(yosida_radius(SurfaceDensity::absolute(0.5), 1.0, kX, Value{0.0}) == doctest::Approx(1.0));
    CHECK(yosida_radius(SurfaceDensity::linear(0.0), 1.0, kX, Value{1.0}) == doctest::Approx(3.0));
    CHECK_THROWS_AS(yosida_radius(SurfaceDensity::linear(1.0), 1.0, kX, Value{0.0}), DegenerateMargin);
    CHECK_THROWS_AS(yosida_radius(SurfaceDensity::linear(0.0), 1.0, kX, Value{0.0}, 0.5), DegenerateMargin);
  }

  TEST_CASE("upper envelope") {
    const auto neg = SurfaceDensity::tabulated({0.0}, {-5.0});
    for (double p : {-7.0, 0.0, 2.5}) CHECK(upper_envelope_T(neg, kX, Value{p}) == doctest::Approx(0.0));
    CHECK(upper_envelope_T(SurfaceDensity::quadratic(), kX, Value{1.0}) == doctest::Approx(9.0));
    CHECK(upper_envelope_T(SurfaceDensity::linear(1.0), kX, Value{0.0}) == doctest::Approx(3.0));
    const auto d = SurfaceDensity::quadratic();
    for (double p = -4.0; p <= 4.0; p += 0.5) CHECK(upper_envelope_T(d, kX, Value{p}) >= d(kX, Value{p}));
    double s = 0.0;
    for (int j = 0; j < 8; ++j) s += envelope_weight(j, 2.3);
    CHECK(s == doctest::Approx(1.0));
  }

  TEST_CASE("Lipschitz ladder") {
    // 0 for p <= 0, -1 for p > 0: upper semicontinuous.
    const auto step = SurfaceDensity::steps({0.0}, {0.0, -1.0});
    CHECK(step(kX, Value{0.0}) == 0.0);
    CHECK(step.regularity() == Regularity::NormalIntegrand);
    CHECK(lip_upper_approx(step, 2, kX, Value{0.25}) == doctest::Approx(-0.5).epsilon(1e-3));
    double prev = 1e300;
    for (int k = 1; k <= 64; k *= 2) {
      const double v = lip_upper_approx(step, k, kX, Value{0.25});
      CHECK(v <= prev + 1e-9);
      prev = v;
    }
    CHECK(prev == doctest::Approx(-1.0).epsilon(1e-3));
    const auto smooth = SurfaceDensity::linear(0.5);
    CHECK(lip_upper_approx(smooth, 4, kX, Value{0.7}) == doctest::Approx(0.35).epsilon(1e-3));
  }

  TEST_CASE("tables and steps") {
    const auto t = SurfaceDensity::tabulated({0.0, 1.0}, {0.0, 2.0});
    CHECK(t(kX, Value{0.5}) == doctest::Approx(1.0));
    CHECK(t(kX, Value{-3.0}) == doctest::Approx(0.0));
    CHECK(t(kX, Value{5.0}) == doctest::Approx(2.0));
    CHECK(*t.lipschitz_modulus() == doctest::Approx(2.0));
    const auto s = SurfaceDensity::steps({-1.0, 1.0}, {1.0, -2.0, 3.0});
    CHECK(s(kX, Value{-1.0}) == 1.0);
    CHECK(s(kX, Value{1.0}) == 3.0);
    CHECK(s(kX, Value{0.0}) == -2.0);
    CHECK_THROWS_AS(SurfaceDensity::steps({1.0, 0.0}, {0.0, 1.0, 2.0}), PreconditionError);
    const auto snap = tabulate(SurfaceDensity::quadratic(), kX, -2.0, 2.0, 0.5);
    CHECK(snap(kX, Value{1.5}) == doctest::Approx(2.25));
  }

  TEST_CASE("expressions") {
    const Expression e = Expression::parse("max(x1, 2*p) - sqrt(abs(x2)) + 2^3");
    CHECK(e.evaluate(1.0, 3.0, -4.0) == doctest::Approx(9.0));
    CHECK(e.depends_on_x());
    CHECK(Expression::parse(e.to_string()).evaluate(0.3, 0.1, 0.7) == e.evaluate(0.3, 0.1, 0.7));
    CHECK(Expression::parse("-p^2").evaluate(3.0, 0, 0) == doctest::Approx(-9.0));
    CHECK(Expression::parse("min(1, 2, -3)").evaluate(0, 0, 0) == -3.0);
    try {
      (void)Expression::parse("p + * 2");
      FAIL("no error");
    } catch (const ParseError& err) {
      CHECK(err.offset() == 4);
    }
    CHECK_THROWS_AS(Expression::parse("foo(p)"), ParseError);
    CHECK_THROWS_AS(Expression::parse("(p"), ParseError);
    CHECK_THROWS_AS(Expression::parse(""), ParseError);
  }

  TEST_CASE("estimated lower bound is flagged") {
    const auto d = SurfaceDensity::expression(Expression::parse("0.5*abs(p) - 1"));
    CHECK(d.lower_bound().estimated);
    CHECK(d.lower_bound().c_sup == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(d.lower_bound().L_sup <= 1e-9);
  }
}
