#include "relaxbv/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

#include "relaxbv/errors.hpp"

namespace relaxbv {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDiskSides = 256;
constexpr int kCircleNodes = 1024;
constexpr int kSegmentNodes = 64;

/// Midpoint rule for a constant trace value on a straight boundary piece.
double segment_integral(Point2 a, Point2 b, const std::function<double(Point2)>& f) {
  const double len = norm(b - a);
  CompensatedSum s;
  for (int k = 0; k < kSegmentNodes; ++k) s += len / kSegmentNodes * f(a + (b - a) * ((k + 0.5) / kSegmentNodes));
  return s.value();
}

/// Integral over the unit circle.
double circle_integral(const std::function<double(Point2)>& f) {
  CompensatedSum s;
  for (int k = 0; k < kCircleNodes; ++k) {
    const double t = 2.0 * kPi * (k + 0.5) / kCircleNodes;
    s += 2.0 * kPi / kCircleNodes * f({std::cos(t), std::sin(t)});
  }
  return s.value();
}

/// Integral over the boundary of the unit square with trace v on the legs
/// [0, leg] of the two edges through the origin and 0 elsewhere.
double square_contact(const std::function<double(Point2, const Value&)>& tau, double leg, double v) {
  double s = 0.0;
  s += segment_integral({0, 0}, {leg, 0}, [&](Point2 x) { return tau(x, Value{v}); });
  s += segment_integral({leg, 0}, {1, 0}, [&](Point2 x) { return tau(x, Value{0.0}); });
  s += segment_integral({1, 0}, {1, 1}, [&](Point2 x) { return tau(x, Value{0.0}); });
  s += segment_integral({1, 1}, {0, 1}, [&](Point2 x) { return tau(x, Value{0.0}); });
  s += segment_integral({0, 1}, {0, leg}, [&](Point2 x) { return tau(x, Value{0.0}); });
  s += segment_integral({0, leg}, {0, 0}, [&](Point2 x) { return tau(x, Value{v}); });
  return s;
}

double e2_tv(int n) {
  const double r = (n - 1.0) / n;
  return kPi * r * r + (n - 1.0) * kPi * (1.0 - r * r);
}

/// Cell average of max(log x, -log n) (n = 0: log x) over [a, b].
double log_cell_average(double a, double b, double n) {
  auto F = [](double x) { return x > 0.0 ? x * std::log(x) - x : 0.0; };
  const double cut = n > 0.0 ? 1.0 / n : 0.0;
  const double floor_v = n > 0.0 ? -std::log(n) : 0.0;
  if (b <= cut) return floor_v;
  if (a >= cut) return (F(b) - F(a)) / (b - a);
  return (floor_v * (cut - a) + F(b) - F(cut)) / (b - a);
}

/// H-side integrals are -inf when the Yosida transform is unbounded below.
double or_minus_inf(const std::function<double()>& f) {
  try {
    return f();
  } catch (const UnboundedBelow&) {
    return -kInf;
  }
}

void require_scalar(const SurfaceDensity& d) {
  if (d.dim() != 1) throw UnsupportedArity("catalog families are scalar");
}

}  // namespace

const char* to_string(Family f) {
  switch (f) {
    case Family::E1: return "E1";
    case Family::E2: return "E2";
    case Family::LOG1D: return "LOG1D";
  }
  return "E1";
}

Family parse_family(const std::string& name) {
  if (name == "E1") return Family::E1;
  if (name == "E2") return Family::E2;
  if (name == "LOG1D") return Family::LOG1D;
  throw SchemaError("unknown family '" + name + "' (expected E1, E2 or LOG1D)");
}

PolygonalDomain catalog_domain(Family f) {
  switch (f) {
    case Family::E1: return PolygonalDomain::unit_square();
    case Family::E2: return PolygonalDomain::regular_polygon(kDiskSides);
    case Family::LOG1D: break;
  }
  throw PreconditionError("LOG1D lives on an interval, not a polygon");
}

SurfaceDensity catalog_density(Family f, double lambda) {
  switch (f) {
    case Family::E1: return SurfaceDensity::linear(lambda);
    case Family::E2: return SurfaceDensity::absolute(lambda);
    case Family::LOG1D: return SurfaceDensity::linear(1.0);
  }
  return SurfaceDensity::linear(lambda);
}

LatticePtr catalog_lattice(Family f, double h) {
  if (f == Family::LOG1D) return Lattice::interval(0.0, 1.0, static_cast<std::size_t>(std::llround(1.0 / h)));
  return Lattice::build(catalog_domain(f), h);
}

GridField realize_member(Family f, int n, const LatticePtr& lattice) {
  if (n < 2) throw PreconditionError("sequence index must be >= 2");
  switch (f) {
    case Family::E1: {
      const double a = 1.0 / n;
      GridField u = GridField::convex_indicator(lattice, {{0, 0}, {a, 0}, {0, a}}, n);
      ExactData e;
      e.jumps.push_back({{a, 0}, {0, a}, static_cast<double>(n)});
      e.trace = {{{0, 0}, {a, 0}, Value{double(n)}}, {{a, 0}, {1, 0}, Value{0.0}}, {{1, 0}, {1, 1}, Value{0.0}},
                 {{1, 1}, {0, 1}, Value{0.0}},         {{0, 1}, {0, a}, Value{0.0}}, {{0, a}, {0, 0}, Value{double(n)}}};
      u.set_exact(std::move(e));
      return u;
    }
    case Family::E2:
      return GridField::sample(
          lattice, [n](Point2 x) { const double r = norm(x); return Value{std::min(r, (n - 1.0) * (1.0 - r))}; }, 1, 2);
    case Family::LOG1D: {
      GridField u(lattice, 1);
      const double h = lattice->h();
      for (std::size_t i = 0; i < lattice->cells(); ++i) u.set(i, Value{log_cell_average(i * h, (i + 1) * h, n)});
      return u;
    }
  }
  return GridField(lattice, 1);
}

GridField realize_limit(Family f, const LatticePtr& lattice) {
  switch (f) {
    case Family::E1: return GridField(lattice, 1);
    case Family::E2: return GridField::sample(lattice, [](Point2 x) { return Value{norm(x)}; }, 1, 2);
    case Family::LOG1D: {
      GridField u(lattice, 1);
      const double h = lattice->h();
      for (std::size_t i = 0; i < lattice->cells(); ++i) u.set(i, Value{log_cell_average(i * h, (i + 1) * h, 0.0)});
      return u;
    }
  }
  return GridField(lattice, 1);
}

double member_energy_exact(Family f, int n, const SurfaceDensity& d, double sigma) {
  require_scalar(d);
  if (n < 2) throw PreconditionError("sequence index must be >= 2");
  auto tau = [&d](Point2 x, const Value& p) { return d(x, p); };
  switch (f) {
    case Family::E1:
      return sigma * std::sqrt(2.0) + square_contact(tau, 1.0 / n, n);
    case Family::E2:
      return sigma * e2_tv(n) + circle_integral([&](Point2 x) { return d(x, Value{0.0}); });
    case Family::LOG1D: {
      const double ln = std::log(static_cast<double>(n));
      return sigma * ln + d({0.0, 0.0}, Value{-ln}) + d({1.0, 0.0}, Value{0.0});
    }
  }
  return 0.0;
}

CounterexampleResult counterexample_energy(const SequenceSpec& spec, std::optional<double> grid_h) {
  if (spec.ns.empty()) throw PreconditionError("counterexample needs at least one index");
  const SurfaceDensity d = catalog_density(spec.family, spec.lambda);
  const double sigma = spec.sigma, lambda = spec.lambda;
  const YosidaContext ctx{sigma, 0.0, 0.0};
  CounterexampleResult r;
  r.ns = spec.ns;
  for (int n : spec.ns) r.per_n.push_back(member_energy_exact(spec.family, n, d, sigma));
  LatticePtr lat;
  if (grid_h) {
    lat = catalog_lattice(spec.family, *grid_h);
    for (int n : spec.ns) {
      const GridField u = realize_member(spec.family, n, lat);
      r.per_n_grid.push_back(energy_F(u, d, sigma, EnergyMode::Grid).total);
    }
  }
  auto hat = [&](Point2 x, const Value& p) { return yosida_eval(d, ctx, x, p); };
  switch (spec.family) {
    case Family::E1:
      r.limit_of_sequence = sigma * std::sqrt(2.0) + 2.0 * lambda;
      r.energy_of_limit = 0.0;
      r.energy_of_limit_H = or_minus_inf([&] { return square_contact(hat, 0.5, 0.0); });
      r.flags.push_back("sign_convention: derived energy sqrt(2)*sigma + 2*lambda; the variant sqrt(2) - 2*lambda "
                        "appears in print");
      break;
    case Family::E2:
      r.limit_of_sequence = 3.0 * kPi * sigma;
      r.energy_of_limit = sigma * kPi + circle_integral([&](Point2 x) { return d(x, Value{1.0}); });
      r.energy_of_limit_H =
          or_minus_inf([&] { return sigma * kPi + circle_integral([&](Point2 x) { return hat(x, Value{1.0}); }); });
      r.flags.push_back("gap_constant: derived limit gap 2*pi*(sigma - lambda); the variant 2*(1 - lambda) appears "
                        "in print");
      break;
    case Family::LOG1D:
      // sigma log n + lambda(-log n) with lambda = 1.
      r.limit_of_sequence = sigma == 1.0 ? 0.0 : (sigma > 1.0 ? kInf : -kInf);
      r.energy_of_limit = kInf;
      r.energy_of_limit_H = kInf;
      r.limit_off_bv = true;
      r.flags.push_back("limit_off_bv: log x has infinite variation on (0,1); limit energies reported as +inf");
      break;
  }
  return r;
}

ViolationReport detect_lsc_violation(const SequenceSpec& spec, const SurfaceDensity& d, const YosidaContext& ctx,
                                     double tol) {
  require_scalar(d);
  const double sigma = ctx.sigma;
  std::vector<double> energies;
  for (int n : spec.ns) energies.push_back(member_energy_exact(spec.family, n, d, sigma));
  if (energies.empty()) throw PreconditionError("detect_lsc_violation needs at least one index");

  ViolationReport r;
  auto tau = [&d](Point2 x, const Value& p) { return d(x, p); };
  auto hat = [&](Point2 x, const Value& p) { return yosida_eval(d, ctx, x, p); };
  const bool catalog_kind = (spec.family == Family::E1 && d.kind() == DensityKind::Linear) ||
                            (spec.family == Family::E2 && d.kind() == DensityKind::Absolute) ||
                            (spec.family == Family::LOG1D && d.kind() == DensityKind::Linear);
  // Catalog densities have closed-form limits; otherwise the tail minimum.
  const std::size_t half = energies.size() / 2;
  double tail = *std::min_element(energies.begin() + static_cast<long>(half), energies.end());
  switch (spec.family) {
    case Family::E1:
      r.liminf_energy = catalog_kind ? sigma * std::sqrt(2.0) + 2.0 * d.lambda() : tail;
      r.limit_energy_F = square_contact(tau, 0.5, 0.0);
      r.limit_energy_H = or_minus_inf([&] { return square_contact(hat, 0.5, 0.0); });
      break;
    case Family::E2:
      r.liminf_energy = catalog_kind ? 3.0 * kPi * sigma : tail;
      r.limit_energy_F = sigma * kPi + circle_integral([&](Point2 x) { return d(x, Value{1.0}); });
      r.limit_energy_H =
          or_minus_inf([&] { return sigma * kPi + circle_integral([&](Point2 x) { return hat(x, Value{1.0}); }); });
      break;
    case Family::LOG1D: {
      if (catalog_kind) {
        const double slope = sigma - d.lambda();
        r.liminf_energy = slope == 0.0 ? 0.0 : (slope > 0.0 ? kInf : -kInf);
      } else {
        r.liminf_energy = tail;
      }
      r.limit_energy_F = kInf;
      r.limit_energy_H = kInf;
      r.limit_off_bv = true;
      break;
    }
  }
  r.violated = r.liminf_energy < r.limit_energy_F - tol;
  r.below_relaxation = r.liminf_energy < r.limit_energy_H - tol;
  r.gap = r.liminf_energy - r.limit_energy_F;
  return r;
}

RelaxedEnergy relaxed_energy(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx,
                             const PolygonalDomain& dom, double epsilon0) {
  RelaxedEnergy r;
  r.admissibility = admissibility_check(dom, d, ctx.sigma, epsilon0);
  r.representation_claimed = r.admissibility.admissible();
  if (!r.representation_claimed) {
    r.warnings.push_back("inadmissible configuration: H is returned but the representation is not claimed");
  }
  r.energy = energy_H(u, d, ctx);
  return r;
}

// ---------------------------------------------------------------------------
// Representation harness

namespace {

double tail_minimum(const std::vector<double>& e) {
  return *std::min_element(e.begin() + static_cast<long>(e.size() / 2), e.end());
}

struct Family_ {
  std::string name;
  std::function<std::optional<GridField>(int)> member;  // nullopt: member skipped
};

/// Limit of a sampled sequence at doubling indices. Monotone sequences are
/// extrapolated from their last two members assuming an O(1/n) tail;
/// others use the tail minimum.
double liminf_estimate(const std::vector<int>& ns, const std::vector<double>& e) {
  const std::size_t m = e.size();
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < m; ++i) {
    inc = inc && e[i] >= e[i - 1];
    dec = dec && e[i] <= e[i - 1];
  }
  if (m >= 2 && (inc || dec) && ns[m - 1] == 2 * ns[m - 2]) return 2.0 * e[m - 1] - e[m - 2];
  return tail_minimum(e);
}

}  // namespace

RepresentationReport verify_representation(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx,
                                           const PolygonalDomain& dom, const RepresentationOptions& opt) {
  if (opt.budget < 4) throw PreconditionError("representation budget must be >= 4");
  const LatticePtr& lat = u.lattice();
  if (!lat->domain()) throw PreconditionError("verify_representation needs a 2-D field");
  const double h = lat->h();
  const double sigma = ctx.sigma;
  RepresentationReport rep;
  rep.verdict = admissibility_check(dom, d, sigma, opt.epsilon0).verdict;
  rep.H = energy_H(u, d, ctx, EnergyMode::Grid).total;
  rep.F = energy_F(u, d, sigma, EnergyMode::Grid).total;
  auto F = [&](const GridField& v) {
    ++rep.candidates_evaluated;
    return energy_F(v, d, sigma, EnergyMode::Grid).total;
  };

  // Upper bound: recovery sequences built on optimal boundary values.
  const TraceSample p = optimal_boundary_values(u, d, ctx, opt.boundary_eps);
  std::vector<int> up_n;
  std::vector<double> up_e;
  for (int n = 4; n <= opt.budget; n *= 2) {
    try {
      up_e.push_back(F(recovery_sequence(u, p, n)));
      up_n.push_back(n);
    } catch (const LayerTooThin&) {
      ++rep.members_skipped;
    }
  }
  rep.upper_gap = kInf;
  rep.upper_gap_raw = kInf;
  if (!up_e.empty()) {
    rep.upper_n = up_n.back();
    rep.upper_gap_raw = up_e.back() - rep.H;
    rep.upper_gap = rep.upper_gap_raw;
    const std::size_t m = up_e.size();
    if (m >= 2 && up_n[m - 1] == 2 * up_n[m - 2]) rep.upper_gap = 2.0 * up_e[m - 1] - up_e[m - 2] - rep.H;
  }

  // Lower bound: candidate families converging to u in L1.
  std::vector<Family_> families;
  std::vector<int> ns;
  for (int n = std::max(2, opt.budget / 8); n <= opt.budget; n *= 2) ns.push_back(n);

  const double leg0 = std::min(1.0, dom.shortest_edge());
  for (const CornerRecord& c : dom.corners()) {
    if (c.theta >= kPi) continue;
    const Point2 v = dom.vertex(c.vertex);
    const Point2 e1 = dom.tangent(c.vertex);
    const Point2 e0 = dom.tangent(c.vertex + dom.size() - 1) * -1.0;
    for (double sgn : {1.0, -1.0}) {
      families.push_back({"wedge@v" + std::to_string(c.vertex) + (sgn > 0 ? "+" : "-"),
                          [&, v, e0, e1, sgn](int n) -> std::optional<GridField> {
                            const double a = leg0 / n;
                            if (a < 4.0 * h) return std::nullopt;
                            return u + GridField::convex_indicator(lat, {v, v + e1 * a, v + e0 * a}, sgn / a);
                          }});
    }
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, dom.perimeter());
  for (int k = 0; k < opt.bump_points; ++k) {
    const Point2 x0 = dom.point_at(unif(rng));
    for (double sgn : {1.0, -1.0}) {
      families.push_back({"bump@" + std::to_string(k) + (sgn > 0 ? "+" : "-"),
                          [&, x0, sgn](int n) -> std::optional<GridField> {
                            const double r = 1.0 / n;
                            if (r < 2.0 * h) return std::nullopt;
                            return u + GridField::sample(lat, [=](Point2 x) {
                                     const Point2 dx = x - x0;
                                     return Value{sgn / r * std::exp(-dot(dx, dx) / (r * r))};
                                   });
                          }});
    }
  }

  const int dim = u.dim();
  std::vector<std::pair<std::string, TraceSample>> targets;
  for (double t : {0.0, 1.0, -1.0}) {
    Value target = Value::zeros(dim);
    target[0] = t;
    TraceSample tr = trace_extract(u);
    for (auto& e : tr.entries) e.value = target;
    targets.push_back({"ramp->" + std::to_string(static_cast<int>(t)), tr});
  }
  targets.push_back({"ramp->optimal", p});
  for (const auto& [name, tr] : targets) {
    families.push_back({name, [&, tr](int n) -> std::optional<GridField> {
                          try {
                            return recovery_sequence(u, tr, n);
                          } catch (const LayerTooThin&) {
                            return std::nullopt;
                          }
                        }});
  }

  for (double sgn : {1.0, -1.0}) {
    families.push_back({std::string("shift") + (sgn > 0 ? "+" : "-"), [&, sgn](int n) -> std::optional<GridField> {
                          Value c = Value::zeros(dim);
                          c[0] = sgn / n;
                          return u + GridField::constant(lat, c);
                        }});
  }

  rep.lower_gap = kInf;
  rep.lower_gap_raw = kInf;
  rep.lower_gap_vs_F = kInf;
  for (const auto& fam : families) {
    std::vector<double> energies;
    std::vector<int> used;
    for (int n : ns) {
      const auto v = fam.member(n);
      if (!v) {
        ++rep.members_skipped;
        continue;
      }
      energies.push_back(F(*v));
      used.push_back(n);
    }
    if (energies.empty()) continue;
    rep.lower_gap_raw = std::min(rep.lower_gap_raw, tail_minimum(energies) - rep.H);
    const double li = liminf_estimate(used, energies);
    if (li - rep.H < rep.lower_gap) {
      rep.lower_gap = li - rep.H;
      rep.worst_candidate = fam.name;
    }
    rep.lower_gap_vs_F = std::min(rep.lower_gap_vs_F, li - rep.F);
  }
  return rep;
}

}  // namespace relaxbv
