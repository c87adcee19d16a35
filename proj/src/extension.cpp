#include "relaxbv/extension.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relaxbv/errors.hpp"

namespace relaxbv {

namespace {

constexpr double kLadderFactor = 0.7;
constexpr double kMinCellsPerLayer = 8.0;
constexpr int kMaxLadder = 24;

/// Periodic boundary data on arclength with a compact triweight mollifier.
class ArcData {
 public:
  ArcData(const TraceSample& g, double period) : period_(period) {
    if (g.entries.empty()) throw PreconditionError("boundary data is empty");
    dim_ = g.entries.front().value.dim();
    for (const auto& e : g.entries) {
      arc_.push_back(e.arclength);
      w_.push_back(e.weight);
      vals_.push_back(e.value);
    }
    for (std::size_t i = 1; i < arc_.size(); ++i)
      if (arc_[i] < arc_[i - 1]) throw PreconditionError("boundary data must be ordered by arclength");
  }

  Value nearest(double a) const {
    a = wrap(a);
    const auto it = std::lower_bound(arc_.begin(), arc_.end(), a);
    std::size_t hi = it == arc_.end() ? 0 : static_cast<std::size_t>(it - arc_.begin());
    std::size_t lo = hi == 0 ? arc_.size() - 1 : hi - 1;
    return circ(arc_[hi] - a) <= circ(a - arc_[lo]) ? vals_[hi] : vals_[lo];
  }

  /// Weighted mean of the data under K((a - s)/rho).
  Value mollified(double a, double rho) const {
    if (rho <= 0.0) return nearest(a);
    a = wrap(a);
    Value acc = Value::zeros(dim_);
    double mass = 0.0;
    auto add = [&](std::size_t i, double d) {
      const double r = d / rho;
      if (r >= 1.0) return;
      const double k = 1.0 - r * r;
      const double wk = w_[i] * k * k * k;
      acc = acc + vals_[i] * wk;
      mass += wk;
    };
    if (2.0 * rho >= period_) {
      for (std::size_t i = 0; i < arc_.size(); ++i) add(i, circ(arc_[i] - a));
    } else {
      const std::size_t n = arc_.size();
      const std::size_t start = static_cast<std::size_t>(std::lower_bound(arc_.begin(), arc_.end(), wrap(a - rho)) - arc_.begin());
      const double left = wrap(a - rho);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = (start + k) % n;
        if (wrap(arc_[i] - left) > 2.0 * rho) break;
        add(i, circ(arc_[i] - a));
      }
    }
    if (mass <= 0.0) return nearest(a);
    return acc * (1.0 / mass);
  }

 private:
  double wrap(double a) const {
    a = std::fmod(a, period_);
    return a < 0.0 ? a + period_ : a;
  }
  double circ(double d) const {
    d = std::abs(std::fmod(d, period_));
    return std::min(d, period_ - d);
  }

  double period_;
  int dim_ = 1;
  std::vector<double> arc_, w_;
  std::vector<Value> vals_;
};

GridField build_layer(const ArcData& data, const LatticePtr& lat, int dim, double delta, double h_shift,
                      double kappa) {
  GridField w(lat, dim);
  const auto& map = lat->boundary_map();
  for (std::size_t idx : lat->masked_cells()) {
    const double s = std::max(0.0, map[idx].distance - h_shift);
    if (s >= delta) continue;
    w.set(idx, data.mollified(map[idx].arclength, kappa * s) * (1.0 - s / delta));
  }
  return w;
}

}  // namespace

ExtensionResult extend_boundary_data(const TraceSample& g, double eps, const LatticePtr& lattice,
                                     const ExtensionOptions& options) {
  if (!lattice) throw PreconditionError("extension needs a lattice");
  if (lattice->one_d()) throw PreconditionError("extension is defined on 2-D lattices only");
  if (!(eps > 0.0) || eps > 1.0) throw PreconditionError("extension needs eps in (0, 1]");
  if (!(options.kappa >= 0.0)) throw PreconditionError("kappa must be nonnegative");
  if (g.entries.size() != lattice->probes().size()) throw PreconditionError("boundary data does not match the lattice");
  const PolygonalDomain& dom = *lattice->domain();
  const double h = lattice->h();
  const int dim = g.entries.front().value.dim();

  ExtensionResult res;
  res.boundary_mass = g.integral_abs();
  if (res.boundary_mass == 0.0) {
    res.field = GridField(lattice, dim);
    res.delta = options.delta.value_or(0.0);
    return res;
  }

  const double h_shift = lattice->probe_depth();
  /// Vertices of a smooth-flagged polygon are not corners.
  const double half_edge = dom.smooth() ? std::numeric_limits<double>::infinity() : 0.5 * dom.shortest_edge();
  std::vector<double> ladder;
  if (options.delta) {
    if (!(*options.delta > 0.0)) throw PreconditionError("delta must be positive");
    if (*options.delta < kMinCellsPerLayer * h) {
      throw LayerTooThin("layer width " + std::to_string(*options.delta) + " is below 8h = " +
                         std::to_string(kMinCellsPerLayer * h));
    }
    ladder.push_back(*options.delta);
    if (*options.delta > half_edge) {
      res.corner_overlap = true;
      res.warnings.push_back("CornerOverlap: delta exceeds half the shortest edge");
    }
  } else {
    double dmax = 2.0 * (eps - h_shift);
    if (dmax > half_edge) {
      dmax = half_edge;
      res.corner_overlap = true;
      res.warnings.push_back("CornerOverlap: delta clamped to half the shortest edge");
    }
    if (dmax < kMinCellsPerLayer * h) {
      throw LayerTooThin("largest admissible layer width " + std::to_string(dmax) + " is below 8h = " +
                         std::to_string(kMinCellsPerLayer * h));
    }
    for (double d = dmax; d >= kMinCellsPerLayer * h && static_cast<int>(ladder.size()) < kMaxLadder;
         d *= kLadderFactor)
      ladder.push_back(d);
  }

  const ArcData data(g, dom.perimeter());
  double best_excess = std::numeric_limits<double>::infinity();
  for (double delta : ladder) {
    GridField w = build_layer(data, lattice, dim, delta, h_shift, options.kappa);
    const double l1 = l1_norm(w) / res.boundary_mass;
    const double grad = tv_grid(w) / res.boundary_mass;
    ++res.ladder_steps;
    const double excess = std::max(grad - (1.0 + eps), l1 - eps);
    if (excess < best_excess) {
      best_excess = excess;
      res.field = std::move(w);
      res.l1_ratio = l1;
      res.grad_ratio = grad;
      res.delta = delta;
    }
    if (excess <= 0.0) break;
  }
  res.bounds_met = best_excess <= 0.0;
  if (!res.bounds_met) res.warnings.push_back("no layer width met both extension bounds; best one returned");
  return res;
}

GridField recovery_sequence(const GridField& u, const TraceSample& p, int n, const ExtensionOptions& options,
                            ExtensionResult* info) {
  if (n < 1) throw PreconditionError("recovery_sequence: n must be >= 1");
  const TraceSample g = p.minus(trace_extract(u));
  ExtensionResult ext = extend_boundary_data(g, 1.0 / n, u.lattice(), options);
  GridField out = u + ext.field;
  if (info) *info = std::move(ext);
  return out;
}

BoundaryChoice optimal_boundary_value(const SurfaceDensity& d, const YosidaContext& ctx, Point2 x, const Value& t,
                                      double eps) {
  if (!(eps > 0.0)) throw PreconditionError("eps must be positive");
  const double sigma = ctx.sigma;
  auto phi = [&](const Value& q) { return d(x, q) + sigma * distance(t, q); };
  const auto lip = d.lipschitz_modulus();
  const bool steps = d.regularity() == Regularity::NormalIntegrand;
  if (lip && *lip <= sigma && !steps) return {t, d(x, t)};
  if (d.kind() == DensityKind::Absolute && d.lambda() > sigma) return {Value::zeros(t.dim()), sigma * t.norm()};
  if (d.kind() == DensityKind::Quadratic) {
    const double r = t.norm();
    const Value q = r <= 0.5 * sigma ? t : t * (0.5 * sigma / r);
    return {q, phi(q)};
  }
  if (d.kind() == DensityKind::Linear || d.kind() == DensityKind::Absolute) {
    // |lambda| > sigma for linear, lambda < -sigma for absolute: no minimizer.
    throw UnboundedBelow("optimal boundary values: the Yosida transform is unbounded below");
  }

  const double R = yosida_radius(d, sigma, x, t);
  const double step = eps / (4.0 * sigma);
  BoundaryChoice best{t, phi(t)};
  if (t.dim() == 1) {
    const double lo = std::min(-R, t.scalar()), hi = std::max(R, t.scalar());
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
    for (std::size_t i = 0; i <= n; ++i) {
      const Value q{std::min(hi, lo + static_cast<double>(i) * step)};
      const double v = phi(q);
      if (v < best.value) best = {q, v};
    }
    for (double b : d.breakpoints()) {
      for (double q : {b, std::nextafter(b, -1e300), std::nextafter(b, 1e300)}) {
        if (q < lo || q > hi) continue;
        const double v = phi(Value{q});
        if (v < best.value) best = {Value{q}, v};
      }
    }
  } else {
    const auto n = static_cast<long>(std::ceil(R / std::max(step, R / 200.0)));
    const double s = R / static_cast<double>(n);
    for (long i = -n; i <= n; ++i) {
      for (long j = -n; j <= n; ++j) {
        const Value q{i * s, j * s};
        const double v = phi(q);
        if (v < best.value) best = {q, v};
      }
    }
  }
  return best;
}

TraceSample optimal_boundary_values(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx,
                                    double eps) {
  TraceSample tr = trace_extract(u);
  for (auto& e : tr.entries) e.value = optimal_boundary_value(d, ctx, e.x, e.value, eps).q;
  return tr;
}

}  // namespace relaxbv
