#include "relaxbv/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>

#include "relaxbv/errors.hpp"

namespace relaxbv {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxValueDim) throw PreconditionError("value dimension must be 1 or 2");
}

}  // namespace

LowerBoundData LowerBoundData::constant(double c, double L) {
  if (!(c >= 0.0) || !(L >= 0.0)) throw PreconditionError("lower bound data c and L must be nonnegative");
  LowerBoundData b;
  b.c = [c](Point2) { return c; };
  b.L = [L](Point2) { return L; };
  b.c_sup = c;
  b.L_sup = L;
  return b;
}

SurfaceDensity SurfaceDensity::linear(double lambda) { return linear(Value{lambda}); }

SurfaceDensity SurfaceDensity::linear(const Value& coefficient) {
  SurfaceDensity d;
  d.kind_ = DensityKind::Linear;
  d.dim_ = coefficient.dim();
  d.coefficient_ = coefficient;
  d.bound_ = LowerBoundData::constant(0.0, coefficient.norm());
  d.lipschitz_ = coefficient.norm();
  d.label_ = "linear";
  return d;
}

SurfaceDensity SurfaceDensity::absolute(double lambda, int dim) {
  check_dim(dim);
  SurfaceDensity d;
  d.kind_ = DensityKind::Absolute;
  d.dim_ = dim;
  d.coefficient_ = Value{lambda};
  // lambda|p| >= 0 when lambda >= 0, so the tight bound has L = 0.
  d.bound_ = LowerBoundData::constant(0.0, lambda >= 0.0 ? 0.0 : -lambda);
  d.lipschitz_ = std::abs(lambda);
  d.label_ = "absolute";
  return d;
}

SurfaceDensity SurfaceDensity::quadratic(int dim) {
  check_dim(dim);
  SurfaceDensity d;
  d.kind_ = DensityKind::Quadratic;
  d.dim_ = dim;
  d.bound_ = LowerBoundData::constant(0.0, 0.0);
  d.label_ = "quadratic";
  return d;
}

SurfaceDensity SurfaceDensity::tabulated(std::vector<double> knots, std::vector<double> values) {
  if (knots.empty() || knots.size() != values.size()) throw PreconditionError("table needs equally many knots and values");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1])) throw PreconditionError("table knots must be strictly increasing");
  SurfaceDensity d;
  d.kind_ = DensityKind::Tabulated;
  double lo = *std::min_element(values.begin(), values.end());
  double slope = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i)
    slope = std::max(slope, std::abs(values[i] - values[i - 1]) / (knots[i] - knots[i - 1]));
  d.bound_ = LowerBoundData::constant(std::max(0.0, -lo), 0.0);
  d.lipschitz_ = slope;
  d.breaks_ = std::move(knots);
  d.values_ = std::move(values);
  d.label_ = "table";
  return d;
}

SurfaceDensity SurfaceDensity::steps(std::vector<double> breaks, std::vector<double> levels) {
  if (levels.size() != breaks.size() + 1) throw PreconditionError("steps need one more level than breaks");
  for (std::size_t i = 1; i < breaks.size(); ++i)
    if (!(breaks[i] > breaks[i - 1])) throw PreconditionError("step breaks must be strictly increasing");
  SurfaceDensity d;
  d.kind_ = DensityKind::Tabulated;
  d.regularity_ = Regularity::NormalIntegrand;
  d.step_table_ = true;
  double lo = *std::min_element(levels.begin(), levels.end());
  d.bound_ = LowerBoundData::constant(std::max(0.0, -lo), 0.0);
  d.breaks_ = std::move(breaks);
  d.values_ = std::move(levels);
  d.label_ = "steps";
  return d;
}

SurfaceDensity SurfaceDensity::expression(Expression expr, std::optional<LowerBoundData> bound,
                                          std::optional<double> lipschitz) {
  SurfaceDensity d;
  d.kind_ = DensityKind::Expression;
  d.x_independent_ = !expr.depends_on_x();
  d.expr_ = std::make_shared<const Expression>(std::move(expr));
  d.lipschitz_ = lipschitz;
  d.label_ = d.expr_->to_string();
  if (bound) {
    d.bound_ = std::move(*bound);
  } else {
    const auto e = d.expr_;
    const std::vector<Point2> xs = d.x_independent_
                                       ? std::vector<Point2>{{0.0, 0.0}}
                                       : std::vector<Point2>{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {-1, 0}, {0, -1}, {-1, -1}};
    d.bound_ = estimate_lower_bound([e](Point2 x, const Value& p) { return e->evaluate(p.scalar(), x.x, x.y); }, xs);
  }
  return d;
}

SurfaceDensity SurfaceDensity::composed(std::function<double(Point2, const Value&)> fn, LowerBoundData bound,
                                        Regularity regularity, int dim, std::string label, bool x_independent) {
  check_dim(dim);
  SurfaceDensity d;
  d.kind_ = DensityKind::Composed;
  d.regularity_ = regularity;
  d.dim_ = dim;
  d.fn_ = std::move(fn);
  d.bound_ = std::move(bound);
  d.label_ = std::move(label);
  d.x_independent_ = x_independent;
  return d;
}

SurfaceDensity SurfaceDensity::with_lower_bound(LowerBoundData bound) const {
  SurfaceDensity d = *this;
  d.bound_ = std::move(bound);
  return d;
}

SurfaceDensity SurfaceDensity::with_boundary_check(std::function<double(Point2)> distance, double tol) const {
  SurfaceDensity d = *this;
  d.boundary_distance_ = std::move(distance);
  d.boundary_tol_ = tol;
  return d;
}

double SurfaceDensity::raw(Point2 x, const Value& p) const {
  switch (kind_) {
    case DensityKind::Linear:
      return dot(coefficient_, p);
    case DensityKind::Absolute:
      return coefficient_[0] * p.norm();
    case DensityKind::Quadratic: {
      const double r = p.norm();
      return r * r;
    }
    case DensityKind::Tabulated: {
      const double s = p.scalar();
      if (step_table_) {
        const auto it = std::lower_bound(breaks_.begin(), breaks_.end(), s);
        const auto i = static_cast<std::size_t>(it - breaks_.begin());
        if (it != breaks_.end() && *it == s) return std::max(values_[i], values_[i + 1]);
        return values_[i];
      }
      if (s <= breaks_.front()) return values_.front();
      if (s >= breaks_.back()) return values_.back();
      const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
      const auto i = static_cast<std::size_t>(it - breaks_.begin());
      const double t = (s - breaks_[i - 1]) / (breaks_[i] - breaks_[i - 1]);
      return values_[i - 1] + t * (values_[i] - values_[i - 1]);
    }
    case DensityKind::Expression:
      return expr_->evaluate(p.scalar(), x.x, x.y);
    case DensityKind::Composed:
      return fn_(x, p);
  }
  return 0.0;
}

double SurfaceDensity::operator()(Point2 x, const Value& p) const {
  const double v = raw(x, p);
  if (std::isnan(v)) throw PreconditionError("density '" + label_ + "' evaluates to NaN");
  return v < kNegativeInfinitySentinel ? kNegativeInfinitySentinel : v;
}

void SurfaceDensity::check_boundary(Point2 x) const {
  if (!boundary_distance_) return;
  const double dist = boundary_distance_(x);
  if (dist > boundary_tol_) {
    throw PreconditionError("evaluation point (" + fmt(x.x) + ", " + fmt(x.y) + ") is " + fmt(dist) +
                            " away from the boundary");
  }
}

std::string SurfaceDensity::spec() const {
  switch (kind_) {
    case DensityKind::Linear:
      if (dim_ == 1) return "linear:" + fmt(coefficient_[0]);
      return "linear:" + fmt(coefficient_[0]) + "," + fmt(coefficient_[1]);
    case DensityKind::Absolute:
      return "absolute:" + fmt(coefficient_[0]) + (dim_ == 2 ? ":2" : "");
    case DensityKind::Quadratic:
      return dim_ == 2 ? "quadratic:2" : "quadratic";
    case DensityKind::Tabulated: {
      std::string s;
      if (step_table_) {
        s = "steps:" + fmt(values_[0]);
        for (std::size_t i = 0; i < breaks_.size(); ++i) s += ";" + fmt(breaks_[i]) + ";" + fmt(values_[i + 1]);
      } else {
        s = "table:";
        for (std::size_t i = 0; i < breaks_.size(); ++i) s += (i ? ";" : "") + fmt(breaks_[i]) + "," + fmt(values_[i]);
      }
      return s;
    }
    case DensityKind::Expression: {
      std::string s = expr_->to_string();
      if (!bound_.estimated) s += " @ c=" + fmt(bound_.c_sup) + " L=" + fmt(bound_.L_sup);
      if (lipschitz_) s += (bound_.estimated ? " @ lip=" : " lip=") + fmt(*lipschitz_);
      return s;
    }
    case DensityKind::Composed:
      break;
  }
  throw PreconditionError("composed density '" + label_ + "' has no text form");
}

double eval_density(const SurfaceDensity& d, Point2 x, const Value& p) {
  if (!p.finite()) throw PreconditionError("density argument p is not finite");
  if (p.dim() != d.dim()) throw PreconditionError("density argument has the wrong dimension");
  d.check_boundary(x);
  return d(x, p);
}

std::vector<DensitySample> sample_grid(std::span<const Point2> xs, double p_min, double p_max, std::size_t count) {
  if (xs.empty() || count == 0) throw PreconditionError("sample grid must be nonempty");
  std::vector<DensitySample> out;
  out.reserve(xs.size() * count);
  for (const Point2& x : xs) {
    for (std::size_t i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      out.push_back({x, Value{p_min + t * (p_max - p_min)}});
    }
  }
  return out;
}

LowerBoundReport verify_lower_bound(const SurfaceDensity& d, std::span<const DensitySample> samples, double tol) {
  if (samples.empty()) throw PreconditionError("verify_lower_bound needs at least one sample");
  LowerBoundReport rep;
  rep.worst_violation = std::numeric_limits<double>::infinity();
  const auto& b = d.lower_bound();
  for (const auto& s : samples) {
    const double slack = eval_density(d, s.x, s.p) + b.c(s.x) + b.L(s.x) * s.p.norm();
    if (slack < rep.worst_violation) {
      rep.worst_violation = slack;
      rep.worst = s;
    }
  }
  rep.samples = samples.size();
  rep.holds = rep.worst_violation >= -tol;
  return rep;
}

LowerBoundData estimate_lower_bound(const std::function<double(Point2, const Value&)>& tau, std::span<const Point2> xs,
                                    double p_range) {
  constexpr int kSamples = 4001;
  double L = 0.0;
  for (const Point2& x : xs) {
    for (int i = 0; i < kSamples; ++i) {
      const double p = -p_range + 2.0 * p_range * i / (kSamples - 1);
      if (std::abs(p) < 0.5 * p_range) continue;
      const double v = tau(x, Value{p});
      if (std::isfinite(v)) L = std::max(L, -v / std::abs(p));
    }
  }
  double c = 0.0;
  for (const Point2& x : xs) {
    for (int i = 0; i < kSamples; ++i) {
      const double p = -p_range + 2.0 * p_range * i / (kSamples - 1);
      const double v = tau(x, Value{p});
      if (std::isfinite(v)) c = std::max(c, -v - L * std::abs(p));
    }
  }
  LowerBoundData b = LowerBoundData::constant(c, L);
  b.estimated = true;
  return b;
}

// ---------------------------------------------------------------------------
// Yosida transform

bool yosida_has_closed_form(const SurfaceDensity& d) {
  return d.kind() == DensityKind::Linear || d.kind() == DensityKind::Absolute || d.kind() == DensityKind::Quadratic;
}

double yosida_radius(const SurfaceDensity& d, double sigma, Point2 x, const Value& p, double eta_cap) {
  if (!(sigma > 0.0)) throw PreconditionError("sigma must be positive");
  const auto& b = d.lower_bound();
  const double margin = sigma - b.L_sup;
  if (margin < kRadiusMargin) {
    throw DegenerateMargin("sigma - ||L|| = " + fmt(margin) + " is below the margin " + fmt(kRadiusMargin));
  }
  const double pn = p.norm();
  double R = (b.c(x) + d(x, p) + 1.0 + 2.0 * sigma * pn) / margin;
  R = std::max(R, pn + 1.0);
  if (R > eta_cap) throw DegenerateMargin("search radius " + fmt(R) + " exceeds the cap " + fmt(eta_cap));
  return R;
}

namespace {

double closed_form_yosida(const SurfaceDensity& d, double sigma, const Value& p) {
  switch (d.kind()) {
    case DensityKind::Linear: {
      if (d.coefficient().norm() > sigma) {
        throw UnboundedBelow("linear density with |lambda| = " + fmt(d.coefficient().norm()) + " > sigma");
      }
      return dot(d.coefficient(), p);
    }
    case DensityKind::Absolute: {
      const double lambda = d.lambda();
      if (lambda < -sigma) throw UnboundedBelow("absolute density with lambda < -sigma");
      return (lambda >= 0.0 ? std::min(lambda, sigma) : lambda) * p.norm();
    }
    case DensityKind::Quadratic: {
      const double r = p.norm();
      return r <= 0.5 * sigma ? r * r : sigma * r - 0.25 * sigma * sigma;
    }
    default:
      break;
  }
  return 0.0;
}

struct ScalarMin {
  double q = 0.0;
  double value = std::numeric_limits<double>::infinity();
};

/// Minimizes f over a uniform grid on [lo, hi] plus `extra` points, then
/// refines twice around the best grid point.
template <class F>
ScalarMin grid_minimize(F&& f, double lo, double hi, double step, std::span<const double> extra,
                        std::size_t* best_index = nullptr, std::size_t* count = nullptr) {
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  ScalarMin best;
  std::size_t bi = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double q = i == n ? hi : lo + static_cast<double>(i) * step;
    const double v = f(q);
    if (v < best.value) {
      best = {q, v};
      bi = i;
    }
  }
  if (best_index) *best_index = bi;
  if (count) *count = n + 1;
  for (double q : extra) {
    if (q < lo || q > hi) continue;
    const double v = f(q);
    if (v < best.value) best = {q, v};
  }
  double width = step;
  for (int round = 0; round < 2; ++round) {
    const double c = best.q;
    constexpr int kSub = 64;
    for (int i = 0; i <= kSub; ++i) {
      const double q = std::clamp(c - width + 2.0 * width * i / kSub, lo, hi);
      const double v = f(q);
      if (v < best.value) best = {q, v};
    }
    width = 2.0 * width / kSub;
  }
  return best;
}

}  // namespace

double yosida_eval(const SurfaceDensity& d, const YosidaContext& ctx, Point2 x, const Value& p) {
  if (!p.finite()) throw PreconditionError("yosida_eval: p is not finite");
  if (!(ctx.sigma > 0.0)) throw PreconditionError("sigma must be positive");
  if (yosida_has_closed_form(d)) return closed_form_yosida(d, ctx.sigma, p);

  const double sigma = ctx.sigma;
  const double R = ctx.search_radius > 0.0 ? ctx.search_radius : yosida_radius(d, sigma, x, p);
  const double step = ctx.q_grid_step > 0.0 ? ctx.q_grid_step : std::max(1e-4, R / 2000.0);
  const double at_p = d(x, p);

  if (p.dim() == 1) {
    const double ps = p.scalar();
    auto phi = [&](double q) { return d(x, Value{q}) + sigma * std::abs(ps - q); };
    std::vector<double> extra;
    for (double b : d.breakpoints()) {
      extra.push_back(b);
      extra.push_back(std::nextafter(b, -1e300));
      extra.push_back(std::nextafter(b, 1e300));
    }
    std::size_t bi = 0, cnt = 0;
    const double lo = std::min(-R, ps), hi = std::max(R, ps);
    const ScalarMin m = grid_minimize(phi, lo, hi, step, extra, &bi, &cnt);
    // Descent at the edge of the search interval means tau decreases faster
    // than sigma|q|: the infimum is -infinity.
    constexpr double kSlopeMargin = 1e-6;
    if (bi == 0 && (phi(lo) - phi(lo + step)) / step > kSlopeMargin && m.q <= lo + step) {
      throw UnboundedBelow("Yosida transform unbounded below (descent at q = " + fmt(lo) + ")");
    }
    if (bi + 1 == cnt && (phi(hi) - phi(hi - step)) / step < -kSlopeMargin && m.q >= hi - step) {
      throw UnboundedBelow("Yosida transform unbounded below (descent at q = " + fmt(hi) + ")");
    }
    return std::min(m.value, at_p);
  }

  // M = 2: coarse product grid on the disk |q| <= R, then local refinement.
  constexpr int kAxis = 400;
  const double h2 = std::max(step, 2.0 * R / kAxis);
  double best = at_p;
  Value bq = p;
  auto phi2 = [&](double a, double b) {
    const Value q{a, b};
    return d(x, q) + sigma * distance(p, q);
  };
  for (int i = 0; i <= kAxis; ++i) {
    for (int j = 0; j <= kAxis; ++j) {
      const double a = -R + h2 * i, b = -R + h2 * j;
      if (a * a + b * b > R * R) continue;
      const double v = phi2(a, b);
      if (v < best) {
        best = v;
        bq = Value{a, b};
      }
    }
  }
  double w = h2;
  for (int round = 0; round < 3; ++round) {
    const Value c = bq;
    for (int i = -8; i <= 8; ++i) {
      for (int j = -8; j <= 8; ++j) {
        const double v = phi2(c[0] + w * i / 8.0, c[1] + w * j / 8.0);
        if (v < best) {
          best = v;
          bq = Value{c[0] + w * i / 8.0, c[1] + w * j / 8.0};
        }
      }
    }
    w /= 8.0;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Upper envelope and Lipschitz approximation ladder

double envelope_weight(int j, double r) {
  if (j == 1) return r <= 1.0 ? 1.0 : std::max(0.0, 2.0 - r);
  return std::max(0.0, 1.0 - std::abs(r - j));
}

UpperEnvelope::UpperEnvelope(const SurfaceDensity& d, Point2 x) : d_(&d), x_(x) {
  m_.push_back(std::max(0.0, d(x, Value::zeros(d.dim()))));
}

double UpperEnvelope::M(int j) const {
  constexpr int kPerUnit1d = 10000;
  constexpr int kPerUnit2d = 200;
  while (static_cast<int>(m_.size()) <= j) {
    const int r = static_cast<int>(m_.size());
    double sup = m_.back();
    if (d_->dim() == 1) {
      for (int side = -1; side <= 1; side += 2) {
        for (int i = 0; i <= kPerUnit1d; ++i) {
          const double q = side * (r - 1 + static_cast<double>(i) / kPerUnit1d);
          sup = std::max(sup, (*d_)(x_, Value{q}));
        }
      }
      for (double b : d_->breakpoints())
        if (std::abs(b) <= r) sup = std::max(sup, (*d_)(x_, Value{b}));
    } else {
      const int n = kPerUnit2d * r;
      for (int i = -n; i <= n; ++i) {
        for (int k = -n; k <= n; ++k) {
          const double a = static_cast<double>(i) / kPerUnit2d, b = static_cast<double>(k) / kPerUnit2d;
          const double rr = std::hypot(a, b);
          if (rr > r || rr < r - 1) continue;
          sup = std::max(sup, (*d_)(x_, Value{a, b}));
        }
      }
    }
    m_.push_back(sup);
  }
  return m_[static_cast<std::size_t>(j)];
}

double UpperEnvelope::operator()(const Value& p) const {
  const double r = p.norm();
  if (r <= 1.0) return M(3);
  const int j = static_cast<int>(std::floor(r));
  return envelope_weight(j, r) * M(j + 2) + envelope_weight(j + 1, r) * M(j + 3);
}

double upper_envelope_T(const SurfaceDensity& d, Point2 x, const Value& p) {
  if (!p.finite()) throw PreconditionError("upper_envelope_T: p is not finite");
  return UpperEnvelope(d, x)(p);
}

namespace {

constexpr double kLadderRadiusCap = 1e3;

double lip_upper_with(const SurfaceDensity& d, const UpperEnvelope& env, int k, Point2 x, const Value& p) {
  if (k < 1) throw PreconditionError("lip_upper_approx: k must be >= 1");
  const double Tp = env(p);
  const double tp = d(x, p) - Tp;
  // Any q improving on q = p has k|p - q| <= t(q) - t(p) <= -t(p).
  const double r = std::min(-tp / k, kLadderRadiusCap);
  double best = tp;
  if (r <= 0.0) return best + Tp;
  auto t = [&](const Value& q) { return d(x, q) - env(q); };
  if (p.dim() == 1) {
    const double ps = p.scalar();
    auto neg = [&](double q) { return -(t(Value{q}) - k * std::abs(ps - q)); };
    std::vector<double> extra;
    for (double b : d.breakpoints()) extra.push_back(b);
    const ScalarMin m = grid_minimize(neg, ps - r, ps + r, std::max(r / 2000.0, 1e-12), extra);
    best = std::max(best, -m.value);
  } else {
    constexpr int kAxis = 120;
    for (int i = -kAxis; i <= kAxis; ++i) {
      for (int j = -kAxis; j <= kAxis; ++j) {
        const double a = r * i / kAxis, b = r * j / kAxis;
        if (a * a + b * b > r * r) continue;
        const Value q{p[0] + a, p[1] + b};
        best = std::max(best, t(q) - k * std::hypot(a, b));
      }
    }
  }
  return best + Tp;
}

}  // namespace

double lip_upper_approx(const SurfaceDensity& d, int k, Point2 x, const Value& p) {
  if (!p.finite()) throw PreconditionError("lip_upper_approx: p is not finite");
  UpperEnvelope env(d, x);
  return lip_upper_with(d, env, k, x, p);
}

SurfaceDensity lip_upper_density(const SurfaceDensity& d, int k) {
  if (k < 1) throw PreconditionError("lip_upper_density: k must be >= 1");
  struct Cache {
    std::mutex mu;
    std::map<std::pair<double, double>, std::unique_ptr<UpperEnvelope>> envs;
  };
  auto base = std::make_shared<const SurfaceDensity>(d);
  auto cache = std::make_shared<Cache>();
  auto fn = [base, cache, k](Point2 x, const Value& p) {
    const Point2 key = base->x_independent() ? Point2{0.0, 0.0} : x;
    const UpperEnvelope* env = nullptr;
    {
      std::lock_guard<std::mutex> lock(cache->mu);
      auto& slot = cache->envs[{key.x, key.y}];
      if (!slot) slot = std::make_unique<UpperEnvelope>(*base, x);
      env = slot.get();
    }
    return lip_upper_with(*base, *env, k, x, p);
  };
  // tau_k >= tau, so tau's lower bound still applies.
  return SurfaceDensity::composed(fn, d.lower_bound(), Regularity::Caratheodory, d.dim(),
                                  d.label() + "#k=" + std::to_string(k), d.x_independent());
}

SurfaceDensity tabulate(const SurfaceDensity& d, Point2 x, double p_min, double p_max, double step) {
  if (d.dim() != 1) throw UnsupportedArity("tabulate: only scalar densities can be tabulated");
  if (!(p_max > p_min) || !(step > 0.0)) throw PreconditionError("tabulate: invalid range");
  const auto n = static_cast<std::size_t>(std::ceil((p_max - p_min) / step));
  std::vector<double> knots(n + 1), vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    knots[i] = i == n ? p_max : p_min + static_cast<double>(i) * step;
    vals[i] = d(x, Value{knots[i]});
  }
  return SurfaceDensity::tabulated(std::move(knots), std::move(vals));
}

}  // namespace relaxbv
