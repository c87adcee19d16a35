#include <doctest.h>

#include <cmath>
#include <numbers>

#include "relaxbv/errors.hpp"
#include "relaxbv/relaxation.hpp"

using namespace relaxbv;
using std::numbers::pi;

TEST_SUITE("relaxation") {
  TEST_CASE("family names") {
    CHECK(parse_family("E1") == Family::E1);
    CHECK(std::string(to_string(Family::LOG1D)) == "LOG1D");
    CHECK_THROWS_AS(parse_family("E3"), SchemaError);
  }

  TEST_CASE("E1 energies are constant in n") {
    SequenceSpec s{Family::E1, -0.8, 1.0, {4, 8, 16}};
    const auto r = counterexample_energy(s, 1.0 / 512);
    REQUIRE(r.per_n.size() == 3);
    for (double e : r.per_n) CHECK(e == doctest::Approx(std::sqrt(2.0) - 1.6).epsilon(1e-12));
    REQUIRE(r.per_n_grid.size() == 3);
    CHECK(r.per_n_grid[2] == doctest::Approx(r.per_n[2]).epsilon(0.03));
    CHECK(r.energy_of_limit == 0.0);
    CHECK_FALSE(r.flags.empty());
  }

  TEST_CASE("E2 energies approach 3 pi") {
    SequenceSpec s{Family::E2, 2.0, 1.0, {8, 32, 128}};
    const auto r = counterexample_energy(s);
    const double n = 32, rn = (n - 1) / n;
    CHECK(r.per_n[1] == doctest::Approx(pi * rn * rn + (n - 1) * pi * (1 - rn * rn)).epsilon(1e-9));
    CHECK(r.per_n[2] == doctest::Approx(3 * pi).epsilon(0.02));
    CHECK(r.per_n[0] < r.per_n[1]);
    CHECK(r.energy_of_limit == doctest::Approx(5 * pi));
    CHECK(r.limit_of_sequence - r.energy_of_limit == doctest::Approx(-2 * pi).epsilon(0.01));
  }

  TEST_CASE("LOG1D energies vanish") {
    SequenceSpec s{Family::LOG1D, 1.0, 1.0, {10, 100, 1000}};
    const auto r = counterexample_energy(s, 1e-4);
    for (double e : r.per_n) CHECK(e == 0.0);
    for (double e : r.per_n_grid) CHECK(std::abs(e) < 1e-2);
    CHECK(r.limit_off_bv);
    CHECK(std::isinf(r.energy_of_limit));
  }

  TEST_CASE("lower semicontinuity violations") {
    const YosidaContext ctx{};
    SequenceSpec s{Family::E1, -0.9, 1.0, {4, 8, 16}};
    auto v = detect_lsc_violation(s, catalog_density(Family::E1, -0.9), ctx);
    CHECK(v.violated);
    CHECK(v.gap == doctest::Approx(std::sqrt(2.0) - 1.8).epsilon(1e-9));
    s.lambda = -0.5;
    v = detect_lsc_violation(s, catalog_density(Family::E1, -0.5), ctx);
    CHECK_FALSE(v.violated);
    SequenceSpec l{Family::LOG1D, 1.0, 1.0, {10, 100}};
    v = detect_lsc_violation(l, catalog_density(Family::LOG1D, 1.0), ctx);
    CHECK(v.liminf_energy == 0.0);
    CHECK(v.limit_off_bv);
    // F(log) is infinite, so the finite liminf breaks lower semicontinuity.
    CHECK(v.violated);
  }

  TEST_CASE("E1 threshold") {
    const YosidaContext ctx{};
    auto at = [&](double lambda) {
      SequenceSpec s{Family::E1, lambda, 1.0, {4, 8}};
      return detect_lsc_violation(s, catalog_density(Family::E1, lambda), ctx).violated;
    };
    CHECK_FALSE(at(-0.70));
    CHECK(at(-0.71));
  }

  TEST_CASE("relaxed energy and admissibility") {
    const YosidaContext ctx{};
    const auto sq = PolygonalDomain::unit_square();
    const auto lat = Lattice::build(sq, 1.0 / 128);
    const auto zero = GridField::constant(lat, Value{0.0});
    auto r = relaxed_energy(zero, SurfaceDensity::linear(-0.5), ctx, sq);
    CHECK(r.energy.total == doctest::Approx(0.0));
    CHECK(r.representation_claimed);
    r = relaxed_energy(zero, SurfaceDensity::linear(-0.9), ctx, sq);
    CHECK(r.energy.total == doctest::Approx(0.0));
    CHECK_FALSE(r.representation_claimed);
    CHECK_FALSE(r.warnings.empty());

    const auto disk = PolygonalDomain::regular_polygon(256);
    const auto dl = Lattice::build(disk, 1.0 / 256);
    const auto u = GridField::sample(dl, [](Point2 x) { return Value{norm(x)}; });
    r = relaxed_energy(u, SurfaceDensity::absolute(1.0), ctx, disk);
    CHECK(r.admissibility.verdict == Verdict::C2Clause);
    CHECK(r.energy.total == doctest::Approx(3 * pi).epsilon(0.03));
  }

  TEST_CASE("representation gaps on the square") {
    const YosidaContext ctx{};
    const auto sq = PolygonalDomain::unit_square();
    const auto lat = Lattice::build(sq, 1.0 / 128);
    const auto zero = GridField::constant(lat, Value{0.0});
    RepresentationOptions opt;
    opt.budget = 32;
    auto r = verify_representation(zero, SurfaceDensity::linear(-0.5), ctx, sq, opt);
    CHECK(r.upper_gap <= 0.05);
    CHECK(r.lower_gap >= -0.05);
    CHECK(r.candidates_evaluated > 0);
    r = verify_representation(zero, SurfaceDensity::linear(-0.9), ctx, sq, opt);
    CHECK(r.lower_gap < -0.2);
    CHECK(r.verdict == Verdict::Inadmissible);
  }
}
