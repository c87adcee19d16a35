#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "relaxbv/errors.hpp"
#include "relaxbv/io.hpp"
#include "relaxbv/scenario.hpp"

using namespace relaxbv;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "relaxbv_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

Scenario make(const Json& j) { return scenario_from_json(j); }
}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("density specifications") {
    const Point2 x{0.2, 0.0};
    auto d = parse_density_spec("absolute:2.0");
    CHECK(d.kind() == DensityKind::Absolute);
    CHECK(d.lambda() == 2.0);
    d = parse_density_spec("linear:-0.5");
    CHECK(d(x, Value{2.0}) == doctest::Approx(-1.0));
    d = parse_density_spec("linear:1,-2");
    CHECK(d.dim() == 2);
    CHECK(parse_density_spec("quadratic:2").dim() == 2);
    d = parse_density_spec("table:-1,1;0,0;1,2");
    CHECK(d(x, Value{0.5}) == doctest::Approx(1.0));
    d = parse_density_spec("steps:0;0;-1");
    CHECK(d(x, Value{0.0}) == 0.0);
    CHECK(d(x, Value{0.1}) == -1.0);

    d = parse_density_spec("0.5*abs(p) - 1");
    CHECK(d.kind() == DensityKind::Expression);
    const Point2 xs[] = {x};
    const auto with_data = d.with_lower_bound(LowerBoundData::constant(1.0, 0.5));
    CHECK(verify_lower_bound(with_data, sample_grid(xs, -50, 50, 1001)).holds);
    d = parse_density_spec("p*p - 1 @ c=1 L=0");
    CHECK_FALSE(d.lower_bound().estimated);
    CHECK(d.lower_bound().c_sup == 1.0);
  }

  TEST_CASE("density specification errors") {
    try {
      (void)parse_density_spec("\xce\xbbp");
      FAIL("no error");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
    CHECK_THROWS_AS(parse_density_spec("linear:"), ParseError);
    CHECK_THROWS_AS(parse_density_spec("absolute:x"), ParseError);
    CHECK_THROWS_AS(parse_density_spec("table:1,2;0,3"), ParseError);
    CHECK_THROWS_AS(parse_density_spec("p1 + p2"), UnsupportedArity);
    CHECK_THROWS_AS(parse_density_spec("p @ c=1"), ParseError);
  }

  TEST_CASE("spec text round trip") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    const Point2 x{0.3, 0.0};
    for (int i = 0; i < 1000; ++i) {
      SurfaceDensity d = SurfaceDensity::linear(0.0);
      switch (i % 5) {
        case 0: d = SurfaceDensity::linear(U(rng)); break;
        case 1: d = SurfaceDensity::absolute(U(rng)); break;
        case 2: d = SurfaceDensity::quadratic(); break;
        case 3: {
          const double a = U(rng);
          d = SurfaceDensity::tabulated({a, a + 1.0, a + 2.5}, {U(rng), U(rng), U(rng)});
          break;
        }
        case 4: d = SurfaceDensity::steps({U(rng)}, {U(rng), U(rng)}); break;
      }
      const auto back = parse_density_spec(d.spec());
      CHECK(back.kind() == d.kind());
      const double p = U(rng);
      CHECK(back(x, Value{p}) == d(x, Value{p}));
    }
  }

  TEST_CASE("strict scenario schema") {
    const Scenario s = make({{"task", "qgeom"}, {"domain", "square"}});
    CHECK(s.task == Task::Qgeom);
    CHECK(s.sigma == 1.0);
    CHECK_THROWS_AS(make({{"task", "qgeom"}, {"colour", 1}}), SchemaError);
    CHECK_THROWS_AS(make({{"task", "fly"}}), SchemaError);
    CHECK_THROWS_AS(make({{"task", "qgeom"}, {"sigma", -1.0}}), SchemaError);
    CHECK_THROWS_AS(make({{"task", "qgeom"}, {"h", "small"}}), SchemaError);
    CHECK_THROWS_AS(make({{"task", "qgeom"}, {"domain", "no/such/file.json"}}), SchemaError);
    CHECK_THROWS_AS(make({{"task", "solve"}, {"params", {{"ns", {4}}}}}), SchemaError);
    CHECK_THROWS_AS(make({{"task", "solve"}, {"params", {{"bulk", "gravity"}}}}), SchemaError);
    CHECK_THROWS_AS(make({{"task", "counterexample"}, {"params", {{"ns", {1}}}}}), SchemaError);
    CHECK_NOTHROW(make({{"task", "counterexample"}, {"params", {{"family", "E2"}, {"ns", {4, 8}}}}}));
  }

  TEST_CASE("scenario hash") {
    const Json j = {{"task", "energy"}, {"density", "linear:-0.5"}, {"h", 0.0625}};
    const auto a = make(j), b = make(j);
    CHECK(scenario_hash(a) == scenario_hash(b));
    CHECK(hash_hex(scenario_hash(a)).size() == 16);
    auto c = a;
    c.sigma = 1.5;
    CHECK(scenario_hash(c) != scenario_hash(a));
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    const auto back = make(scenario_to_json(a));
    CHECK(scenario_hash(back) == scenario_hash(a));
  }

  TEST_CASE("qgeom task") {
    const auto dir = scratch("qgeom");
    auto s = make({{"task", "qgeom"}, {"domain", "square"}});
    s.output_dir = dir.string();
    std::ostringstream log;
    const Json r = run_scenario(s, log);
    CHECK(r["Q"].get<double>() == doctest::Approx(1.41421356).epsilon(1e-8));
    CHECK(r["corners"] == 4);
    CHECK(fs::exists(dir / "qgeom.json"));
    CHECK(r["meta"]["version"] == kVersion);
  }

  TEST_CASE("energy task with a zero field") {
    const auto dir = scratch("energy");
    auto s = make({{"task", "energy"}, {"density", "linear:-0.4"}, {"h", 1.0 / 32}, {"params", {{"field", 0}}}});
    s.output_dir = dir.string();
    std::ostringstream log;
    const Json r = run_scenario(s, log);
    CHECK(r["F"]["total"].get<double>() == 0.0);
    CHECK(r["H"]["total"].get<double>() == 0.0);
  }

  TEST_CASE("counterexample sweep") {
    const auto dir = scratch("sweep");
    auto s = make({{"task", "counterexample"},
                   {"params", {{"family", "E1"}, {"lambda_min", -1.0}, {"lambda_max", 0.0}, {"lambda_step", 0.05}}}});
    s.output_dir = dir.string();
    std::ostringstream log;
    const Json r = run_scenario(s, log);
    CHECK(r["rows"].size() == 21);
    CHECK(count_lines(dir / "counterexample.csv") == 22);
    std::ifstream in(dir / "counterexample.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "lambda,n,energy,gap,violated");
    int flips = 0;
    std::string prev;
    double flip_at = 0.0;
    while (std::getline(in, line)) {
      const std::string flag = line.substr(line.rfind(',') + 1);
      if (!prev.empty() && flag != prev) {
        ++flips;
        flip_at = std::stod(line.substr(0, line.find(',')));
      }
      prev = flag;
    }
    CHECK(flips == 1);
    CHECK(std::abs(flip_at + std::sqrt(0.5)) <= 0.05);
  }

  TEST_CASE("determinism") {
    const Json j = {{"task", "relax-verify"},
                    {"density", "linear:-0.5"},
                    {"h", 1.0 / 32},
                    {"params", {{"fields", {"x1"}}, {"budget", 8}}}};
    std::string first;
    for (int run = 0; run < 2; ++run) {
      const auto dir = scratch("det" + std::to_string(run));
      auto s = make(j);
      s.output_dir = dir.string();
      std::ostringstream log;
      run_scenario(s, log);
      const std::string text = read_text((dir / "relax-verify.csv").string());
      CHECK(text.rfind("field,H,F,upper_gap,lower_gap", 0) == 0);
      if (run == 0) first = text;
      else CHECK(text == first);
    }
  }

  TEST_CASE("solve task writes a field and a report") {
    const auto dir = scratch("solve");
    auto s = make({{"task", "solve"},
                   {"density", "linear:-0.5"},
                   {"h", 1.0 / 16},
                   {"params", {{"bulk", "fidelity"}, {"target", "x1"}}}});
    s.output_dir = dir.string();
    std::ostringstream log;
    const Json r = run_scenario(s, log);
    CHECK(fs::exists(dir / "solve_field.json"));
    CHECK(fs::exists(dir / "solve_field.bin"));
    CHECK(fs::exists(dir / "solve.json"));
    CHECK(r["converged"] == true);
    const auto lat = Lattice::build(PolygonalDomain::unit_square(), 1.0 / 16);
    const GridField u = read_field((dir / "solve_field.json").string(), lat);
    CHECK(u.max_abs() == doctest::Approx(r["max_abs_u"].get<double>()));
  }

  TEST_CASE("guarded runs write error.json") {
    const auto dir = scratch("error");
    auto s = make({{"task", "yosida"}, {"density", "2*q"}});
    s.output_dir = dir.string();
    std::ostringstream log, err;
    CHECK(run_scenario_guarded(s, log, err) == 2);
    const Json e = Json::parse(read_text((dir / "error.json").string()));
    CHECK(e["error"]["kind"] == "ParseError");
    CHECK(e["error"]["offset"] == 2);
  }

  TEST_CASE("field files round trip") {
    const auto dir = scratch("field");
    const auto lat = Lattice::build(PolygonalDomain::l_shape(), 1.0 / 24);
    const auto u = GridField::sample(lat, [](Point2 x) { return Value{std::sin(7 * x.x) * x.y + 1e-17}; });
    for (auto enc : {FieldEncoding::Csv, FieldEncoding::Binary}) {
      const std::string stem = (dir / (enc == FieldEncoding::Csv ? "c" : "b")).string();
      write_field(u, stem, enc);
      const GridField v = read_field(stem + ".json", lat);
      CHECK(v.data() == u.data());
    }
    const auto other = Lattice::build(PolygonalDomain::unit_square(), 1.0 / 24);
    CHECK_THROWS_AS(read_field((dir / "c.json").string(), other), SchemaError);
    const auto runs = mask_rle(*lat);
    CHECK(mask_from_rle(runs, lat->cells()) == lat->mask());
  }

  TEST_CASE("domain files") {
    const auto dom = parse_domain(R"({"name": "tri", "vertices": [[0,0],[1,0],[0,1]]})");
    CHECK(dom.area() == doctest::Approx(0.5));
    const auto back = domain_from_json(domain_to_json(dom));
    CHECK(back.vertices() == dom.vertices());
    try {
      (void)parse_domain(R"({"vertices": [[0,0],[1,"a"],[0,1]]})");
      FAIL("no error");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("vertices[1][1]") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_domain("{\"vertices\": [[0,0],"), SchemaError);
    CHECK_THROWS_AS(parse_domain(R"({"vertices": [[0,0],[1,0],[0,1]], "extra": 1})"), SchemaError);
    CHECK(builtin_domain("disk64").size() == 64);
    CHECK(builtin_domain("disk64").smooth());
    CHECK_THROWS_AS(builtin_domain("hexagon"), SchemaError);
  }

  TEST_CASE("number formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(number(2.5) == 2.5);
  }
}
