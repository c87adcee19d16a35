// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "relaxbv/density.hpp"
#include "relaxbv/errors.hpp"
#include "relaxbv/extension.hpp"
#include "relaxbv/geometry.hpp"
#include "relaxbv/grid.hpp"
#include "relaxbv/relaxation.hpp"
#include "relaxbv/solver.hpp"

using namespace relaxbv;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

/// Appends a failed check to the outcome.
void require(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + ("failed: " + what);
  }
}

void note(Outcome& o, const std::string& what) { o.detail += (o.detail.empty() ? "" : "; ") + what; }

/// Huber form of the quadratic transform at sigma = 1.
double huber(double p) { return std::abs(p) <= 0.5 ? p * p : std::abs(p) - 0.25; }

Outcome criterion1() {
  Outcome o;
  const YosidaContext ctx{};
  const Point2 x{0.5, 0.0};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = -5.0 + 10.0 * i / 999.0;
    worst = std::max(worst, std::abs(yosida_eval(SurfaceDensity::quadratic(), ctx, x, Value{p}) - huber(p)));
  }
  require(o, worst <= 1e-3, "quadratic formula");
  note(o, fmt("quadratic max err %.2e", worst));

  // Fixed points, evaluated through the generic grid search.
  double fixed = 0.0;
  const SurfaceDensity lip[] = {
      SurfaceDensity::expression(Expression::parse("-0.5*p")),
      SurfaceDensity::expression(Expression::parse("0.7*abs(p - 1) - 0.3*p")),
      SurfaceDensity::tabulated({-1.0, 0.0, 2.0}, {1.0, 0.2, 1.0}),
  };
  for (const auto& d : lip) {
    for (int i = 0; i < 1000; ++i) {
      const double p = -4.0 + 8.0 * i / 999.0;
      fixed = std::max(fixed, std::abs(yosida_eval(d, ctx, x, Value{p}) - d(x, Value{p})));
    }
  }
  require(o, fixed <= 1e-6, "fixed point");
  note(o, fmt("fixed-point max err %.2e", fixed));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const double lambda = -0.8, oracle = std::sqrt(2.0) + 2.0 * lambda;
  SequenceSpec s{Family::E1, lambda, 1.0, {4, 8, 16}};
  const auto r = counterexample_energy(s, 1.0 / 512);
  double exact_err = 0.0, grid_rel = 0.0;
  for (std::size_t i = 0; i < r.per_n.size(); ++i) {
    exact_err = std::max(exact_err, std::abs(r.per_n[i] - oracle));
    grid_rel = std::max(grid_rel, std::abs(r.per_n_grid[i] - oracle) / std::abs(oracle));
  }
  require(o, exact_err <= 1e-12, "exact energy constant");
  require(o, grid_rel <= 0.03, "grid within 3%");
  note(o, fmt("exact %.6f", r.per_n[0]) + fmt(", grid worst rel err %.3f", grid_rel));
  const YosidaContext ctx{};
  for (double lam : {-0.75, -0.65}) {
    SequenceSpec t{Family::E1, lam, 1.0, {4, 8, 16}};
    const bool v = detect_lsc_violation(t, catalog_density(Family::E1, lam), ctx).violated;
    require(o, v == (lam < -std::sqrt(0.5)), fmt("violation flag at %.2f", lam));
  }
  return o;
}

Outcome criterion3() {
  Outcome o;
  const double lambda = 2.0, oracle = -2.0 * pi * (lambda - 1.0);
  SequenceSpec s{Family::E2, lambda, 1.0, {64}};
  const auto r = counterexample_energy(s, 1.0 / 512);
  const double gap_grid = r.per_n_grid.back() - r.energy_of_limit;
  const double gap_exact = r.per_n.back() - r.energy_of_limit;
  const double rel = std::abs(gap_grid - oracle) / std::abs(oracle);
  require(o, rel <= 0.05, "grid gap within 5%");
  note(o, fmt("grid gap %.4f", gap_grid) + fmt(" (rel err %.3f)", rel) + fmt(", closed-form gap %.4f", gap_exact) +
              fmt(", oracle %.4f", oracle));
  const YosidaContext ctx{};
  for (double lam : {0.9, 1.0, 1.1}) {
    SequenceSpec t{Family::E2, lam, 1.0, {16, 32, 64}};
    const bool v = detect_lsc_violation(t, catalog_density(Family::E2, lam), ctx).violated;
    require(o, v == (lam > 1.0), fmt("violation flag at %.1f", lam));
  }
  return o;
}

Outcome criterion4() {
  Outcome o;
  SequenceSpec s{Family::LOG1D, 1.0, 1.0, {10, 100, 1000}};
  const auto r = counterexample_energy(s, 1e-4);
  double grid = 0.0;
  for (std::size_t i = 0; i < r.per_n.size(); ++i) {
    require(o, r.per_n[i] == 0.0, "closed form is zero");
    grid = std::max(grid, std::abs(r.per_n_grid[i]));
  }
  require(o, grid <= 1e-2, "grid within 1e-2");
  note(o, fmt("grid max |F| %.2e at 10^4 cells", grid));
  return o;
}

Outcome criterion5() {
  Outcome o;
  require(o, std::abs(corner_q(pi / 2) - std::sqrt(2.0)) <= 1e-12, "corner_q(pi/2)");
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double th = 0.1 + (pi - 0.2) * (i + 0.5) / 50.0;
    worst = std::max(worst, std::abs(wedge_cut_ratio(th, 0.1) - corner_q(th)));
  }
  require(o, worst <= 1e-10, "wedge ratio");
  const auto sq = PolygonalDomain::unit_square();
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (admissibility_check(sq, SurfaceDensity::linear(mid), 1.0, 1e-12).admissible() ? lo : hi) = mid;
  }
  require(o, std::abs(lo - std::sqrt(0.5)) <= 1e-4, "admissibility threshold");
  note(o, fmt("wedge max err %.1e", worst) + fmt(", threshold %.6f", lo));
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto lat = Lattice::build(PolygonalDomain::unit_square(), 1.0 / 512);
  const GridField zero(lat, 1);
  const double tp = 2.0 * pi;
  const std::vector<std::pair<const char*, std::function<double(Point2)>>> corpus{
      {"1", [](Point2) { return 1.0; }},
      {"x1", [](Point2 x) { return x.x; }},
      {"x2", [](Point2 x) { return x.y; }},
      {"x1-x2", [](Point2 x) { return x.x - x.y; }},
      {"x1*x2", [](Point2 x) { return x.x * x.y; }},
      {"sin(2pi x1)", [tp](Point2 x) { return std::sin(tp * x.x); }},
      {"cos(2pi x2)", [tp](Point2 x) { return std::cos(tp * x.y); }},
      {"sin(2pi(x1+x2))", [tp](Point2 x) { return std::sin(tp * (x.x + x.y)); }},
      {"exp(x1)-1.5", [](Point2 x) { return std::exp(x.x) - 1.5; }},
      {"|x1-0.5|", [](Point2 x) { return std::abs(x.x - 0.5); }},
      {"sign(x1-0.5)", [](Point2 x) { return x.x < 0.5 ? -1.0 : 1.0; }},
      {"x1^2-x2^2", [](Point2 x) { return x.x * x.x - x.y * x.y; }},
      {"max(x1,x2)-0.5", [](Point2 x) { return std::max(x.x, x.y) - 0.5; }},
      {"sin(4pi x1)cos(2pi x2)", [tp](Point2 x) { return std::sin(2 * tp * x.x) * std::cos(tp * x.y); }},
      {"(x1-0.3)^3", [](Point2 x) { return std::pow(x.x - 0.3, 3); }},
      {"bump", [](Point2 x) { return 1.0 / (1.0 + 10.0 * ((x.x - .5) * (x.x - .5) + (x.y - .5) * (x.y - .5))); }},
      {"2 sign(x2-0.3)", [](Point2 x) { return x.y < 0.3 ? -2.0 : 2.0; }},
      {"tanh(10(x1-0.5))", [](Point2 x) { return std::tanh(10.0 * (x.x - 0.5)); }},
      {"cos(6pi x1)", [tp](Point2 x) { return std::cos(3 * tp * x.x); }},
      {"1{x1<0.25}+0.5", [](Point2 x) { return (x.x < 0.25 ? 1.0 : 0.0) + 0.5; }},
  };
  double worst_l1 = 0.0, worst_grad = 0.0;
  std::string worst_name;
  for (const auto& [name, f] : corpus) {
    TraceSample g = trace_extract(zero);
    for (auto& e : g.entries) e.value = Value{f(e.x)};
    const auto r = extend_boundary_data(g, 0.1, lat);
    worst_l1 = std::max(worst_l1, r.l1_ratio);
    if (r.grad_ratio > worst_grad) worst_grad = r.grad_ratio, worst_name = name;
    require(o, r.l1_ratio <= 0.1 * 1.05, std::string("l1 ratio of ") + name);
    require(o, r.grad_ratio <= 1.1 + 0.15, std::string("grad ratio of ") + name);
  }
  note(o, fmt("20 members, max l1_ratio %.4f", worst_l1) + fmt(", max grad_ratio %.4f", worst_grad) + " (" +
              worst_name + ")");
  return o;
}

struct Pair {
  const char* name;
  PolygonalDomain dom;
  SurfaceDensity d;
};

Outcome criterion7() {
  Outcome o;
  const YosidaContext ctx{};
  const std::vector<Pair> pairs{
      {"square/linear -0.5", PolygonalDomain::unit_square(), SurfaceDensity::linear(-0.5)},
      {"square/absolute 2", PolygonalDomain::unit_square(), SurfaceDensity::absolute(2.0)},
      {"l_shape/quadratic", PolygonalDomain::l_shape(), SurfaceDensity::quadratic()},
      {"disk/linear 0.9", PolygonalDomain::regular_polygon(256), SurfaceDensity::linear(0.9)},
      {"square/max(-0.4p,p^2-1)", PolygonalDomain::unit_square(),
       SurfaceDensity::expression(Expression::parse("max(-0.4*p, p*p - 1)"))},
  };
  const std::vector<std::pair<const char*, std::function<double(Point2)>>> fields{
      {"0", [](Point2) { return 0.0; }},
      {"x1", [](Point2 x) { return x.x; }},
      {"x1*x2+0.5", [](Point2 x) { return x.x * x.y + 0.5; }},
      {"|x-(0.3,0.2)|", [](Point2 x) { return std::hypot(x.x - 0.3, x.y - 0.2); }},
      {"0.8*1{x1<0.5}", [](Point2 x) { return x.x < 0.5 ? 0.8 : 0.0; }},
  };
  RepresentationOptions opt;
  opt.budget = 64;
  double worst = 0.0;
  std::string worst_case;
  int inadmissible = 0;
  for (const auto& pr : pairs) {
    const auto lat = Lattice::build(pr.dom, 1.0 / 256);
    for (const auto& [fname, f] : fields) {
      const auto u = GridField::sample(lat, [&f](Point2 x) { return Value{f(x)}; });
      const auto r = verify_representation(u, pr.d, ctx, pr.dom, opt);
      if (r.verdict == Verdict::Inadmissible) ++inadmissible;
      const double tol = 0.05 * (1.0 + std::abs(r.H));
      const double score = std::max(r.upper_gap, -r.lower_gap) / tol;
      if (score > worst) worst = score, worst_case = std::string(pr.name) + " u=" + fname;
      require(o, r.upper_gap <= tol, std::string(pr.name) + " u=" + fname + fmt(" upper %.4f", r.upper_gap));
      require(o, r.lower_gap >= -tol, std::string(pr.name) + " u=" + fname + fmt(" lower %.4f", r.lower_gap));
    }
  }
  require(o, inadmissible == 0, "all pairs admissible");
  note(o, "25 cases, worst |gap|/tol " + fmt("%.3f", worst) + " (" + worst_case + ")");
  return o;
}

/// Random test fields for the trace inequality.
GridField random_field(const LatticePtr& lat, const PolygonalDomain& dom, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Point2 lo = dom.bbox_min(), hi = dom.bbox_max();
  const double span = std::max(hi.x - lo.x, hi.y - lo.y);
  auto rand_point = [&] { return Point2{lo.x + (hi.x - lo.x) * U(rng), lo.y + (hi.y - lo.y) * U(rng)}; };
  const double amp = 0.2 + 3.0 * U(rng);
  switch (static_cast<int>(U(rng) * 5.0)) {
    case 0: {
      // Sum of three plane waves plus an offset.
      double a[3], kx[3], ky[3], ph[3];
      for (int m = 0; m < 3; ++m) {
        a[m] = amp * (U(rng) - 0.5);
        kx[m] = 4.0 * pi * (U(rng) - 0.5) / span;
        ky[m] = 4.0 * pi * (U(rng) - 0.5) / span;
        ph[m] = 2.0 * pi * U(rng);
      }
      const double off = amp * (U(rng) - 0.5);
      return GridField::sample(lat, [=](Point2 x) {
        double v = off;
        for (int m = 0; m < 3; ++m) v += a[m] * std::sin(kx[m] * x.x + ky[m] * x.y + ph[m]);
        return Value{v};
      });
    }
    case 1: {
      // Half-plane indicator.
      const double th = 2.0 * pi * U(rng);
      const Point2 n{std::cos(th), std::sin(th)}, c = rand_point();
      return GridField::sample(lat, [=](Point2 x) { return Value{dot(x - c, n) < 0.0 ? amp : 0.0}; });
    }
    case 2: {
      // Triangle cut at a vertex, scaled like the wedge counterexample.
      const std::size_t v = static_cast<std::size_t>(U(rng) * dom.size()) % dom.size();
      const double edge = std::min(dom.edge_length(v), dom.edge_length((v + dom.size() - 1) % dom.size()));
      /// At least four cells wide so the cut is resolved.
      const double r = std::max(4.0 * lat->h(), (0.02 + 0.3 * U(rng)) * edge);
      const Point2 p = dom.vertex(v);
      const Point2 a = p + dom.tangent(v) * r, b = p - dom.tangent((v + dom.size() - 1) % dom.size()) * r;
      if (cross(a - p, b - p) <= 0.0) return GridField::constant(lat, Value{amp});
      return GridField::convex_indicator(lat, {p, a, b}, amp / r);
    }
    case 3: {
      // Gaussian bump centred on the boundary.
      const Point2 c = dom.point_at(dom.perimeter() * U(rng));
      const double w = 0.02 + 0.2 * U(rng);
      return GridField::sample(lat, [=](Point2 x) {
        const Point2 d = x - c;
        return Value{amp * std::exp(-dot(d, d) / (2 * w * w))};
      });
    }
    default: {
      // Power of the distance to a random point.
      const Point2 c = rand_point();
      const double alpha = 0.5 + 1.5 * U(rng);
      return GridField::sample(lat, [=](Point2 x) { return Value{amp * std::pow(norm(x - c), alpha)}; });
    }
  }
}

struct TraceStats {
  double trace, tv, l1;
};

std::vector<TraceStats> trace_corpus(const LatticePtr& lat, const PolygonalDomain& dom, int count,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TraceStats> out;
  for (int i = 0; i < count; ++i) {
    const auto u = random_field(lat, dom, rng);
    out.push_back({trace_extract(u).integral_abs(), tv_grid(u), l1_norm(u)});
  }
  return out;
}

Outcome criterion8() {
  Outcome o;
  struct Case {
    const char* name;
    PolygonalDomain dom;
    double coef;
    int count;
  };
  const auto disk = PolygonalDomain::regular_polygon(256);
  const std::vector<Case> cases{
      {"square", PolygonalDomain::unit_square(), domain_Q(PolygonalDomain::unit_square()) + 0.1, 67},
      {"l_shape", PolygonalDomain::l_shape(), domain_Q(PolygonalDomain::l_shape()) + 0.1, 67},
      {"disk", disk, domain_Q(disk) + 0.1, 66},
      {"disk (coefficient 1)", disk, 1.0, 66},
  };
  int total = 0;
  for (const auto& c : cases) {
    const auto lat = Lattice::build(c.dom, 1.0 / 128);
    /// C is the largest ratio on a five times larger calibration corpus drawn
    /// with another seed.
    double C = 0.0;
    for (const auto& s : trace_corpus(lat, c.dom, 5 * c.count, 1001)) {
      if (s.l1 > 0.0) C = std::max(C, (s.trace - c.coef * s.tv) / s.l1);
    }
    int violations = 0;
    double worst = 0.0;
    const auto eval = trace_corpus(lat, c.dom, c.count, 2024);
    for (const auto& s : eval) {
      if (s.trace > c.coef * s.tv + C * s.l1 + 1e-9 * (1.0 + s.trace)) ++violations;
      if (s.l1 > 0.0) worst = std::max(worst, (s.trace - c.coef * s.tv) / s.l1);
    }
    if (std::string(c.name) != "disk (coefficient 1)") total += static_cast<int>(eval.size());
    require(o, violations == 0, std::string(c.name) + " violations " + std::to_string(violations));
    note(o, std::string(c.name) + fmt(" C=%.3f", C) + fmt(" (corpus max %.3f)", worst));
  }
  note(o, std::to_string(total) + " fields");
  return o;
}

Outcome criterion9() {
  Outcome o;
  SolverConfig cfg;
  cfg.h = 1.0 / 128;
  cfg.iters = 5000;
  BulkTerm bulk{BulkKind::Capillarity, 1.0, {}};
  const auto r = minimize_energy(PolygonalDomain::unit_square(), SurfaceDensity::linear(0.5), YosidaContext{}, bulk, cfg);
  const auto dg = diagnostics(r.state);
  require(o, r.report.total <= 1e-3, "energy <= 1e-3");
  require(o, r.residual < 1e-6, "residual < 1e-6");
  require(o, dg.dual_feasibility_max <= r.state.dual_bound + 1e-12, "dual feasibility");
  note(o, fmt("energy %.5f", r.report.total) + fmt(", residual %.2e", r.residual) + ", iterations " +
              std::to_string(r.state.iterations) + fmt(", max|xi| %.6f", dg.dual_feasibility_max));
  return o;
}

Outcome criterion10() {
  Outcome o;
  // tau = 0 for p <= 0, -1 for p > 0.
  const auto step = SurfaceDensity::steps({0.0}, {0.0, -1.0});
  const Point2 x0{0.5, 0.0};
  const int ks[] = {1, 2, 4, 8, 16, 32, 64};
  int mono_fail = 0, bound_fail = 0, checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const double p = -3.0 + 6.0 * (i + 0.5) / 1000.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int k : ks) {
      const double v = lip_upper_approx(step, k, x0, Value{p});
      if (v > prev + 1e-12) ++mono_fail;
      prev = v;
      /// Continuity points farther than 1/k from the jump.
      if (std::abs(p) >= 1.0 / k) {
        ++checked;
        if (std::abs(v - step(x0, Value{p})) > 2.0 / k + 1e-12) ++bound_fail;
      }
    }
  }
  require(o, mono_fail == 0, "tau_k decreasing");
  require(o, bound_fail == 0, "|tau_k - tau| <= 2/k");
  note(o, std::to_string(checked) + " ladder checks");

  const YosidaContext ctx{};
  /// Exact table: tau_64 is piecewise linear with kinks at 0 and 1/64.
  const auto tau64 = tabulate(lip_upper_density(step, 64), x0, -4.0, 4.0, 1.0 / 4096);
  const auto lat = Lattice::build(PolygonalDomain::unit_square(), 1.0 / 256);
  const std::vector<std::pair<const char*, std::function<double(Point2)>>> fields{
      {"0", [](Point2) { return 0.0; }},
      {"x1", [](Point2 x) { return x.x; }},
      {"x1*x2+0.5", [](Point2 x) { return x.x * x.y + 0.5; }},
      {"|x-(0.3,0.2)|", [](Point2 x) { return std::hypot(x.x - 0.3, x.y - 0.2); }},
      {"0.8*1{x1<0.5}", [](Point2 x) { return x.x < 0.5 ? 0.8 : 0.0; }},
  };
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, f] : fields) {
    const auto u = GridField::sample(lat, [&f](Point2 x) { return Value{f(x)}; });
    const auto tr = trace_extract(u);
    auto hat_of = [&](const SurfaceDensity& d) {
      return contact_energy(tr, [&](Point2 x, const Value& p) { return yosida_eval(d, ctx, x, p); });
    };
    const double gap = std::abs(hat_of(tau64) - hat_of(step));
    if (gap > worst) worst = gap, worst_name = name;
  }
  require(o, worst <= 1e-2, "integral of hat(tau_64) within 1e-2");
  note(o, fmt("max |int hat tau_64 - int hat tau| %.4f", worst) + " (u=" + worst_name + ")");
  /// hat(tau_k) - hat(tau) = 1/k on traces in [-1 + 1/k, 0], so u = 0 gives perimeter/k.
  note(o, fmt("closed-form gap for u=0 is 4/64 = %.4f", 4.0 / 64));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
    double limit_s;  // 0: no runtime limit
  };
  const Entry entries[] = {
      {1, "Yosida closed forms", criterion1, 1.0},
      {2, "E1 reproduction", criterion2, 30.0},
      {3, "E2 reproduction", criterion3, 60.0},
      {4, "1-D log example", criterion4, 0.0},
      {5, "geometry", criterion5, 0.0},
      {6, "extension bounds", criterion6, 120.0},
      {7, "representation sandwich", criterion7, 0.0},
      {8, "trace inequality", criterion8, 0.0},
      {9, "capillarity solver", criterion9, 60.0},
      {10, "normal-integrand ladder", criterion10, 0.0},
  };
  int failed = 0;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  for (const auto& e : entries) {
    if (!only.empty() && std::find(only.begin(), only.end(), e.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (e.limit_s > 0.0 && secs > e.limit_s) require(o, false, fmt("runtime above %.0f s", e.limit_s));
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", e.id, e.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed;
}
