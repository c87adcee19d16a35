#include "relaxbv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "relaxbv/errors.hpp"

namespace relaxbv {

namespace {

constexpr double kPrimalBias = 10.0;

constexpr double kGolden = 0.6180339887498949;

template <class F>
double golden_section(F&& f, double lo, double hi, int rounds = 80) {
  double a = lo, b = hi;
  double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < rounds && b - a > 1e-14 * (1.0 + std::abs(a)); ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

/// Minimizer of f on [lo, hi]: uniform scan, then golden refinement around
/// the best node; never worse than the point `keep`.
template <class F>
double scan_minimize(F&& f, double lo, double hi, int nodes, double keep) {
  double best = keep, best_v = f(keep);
  const double step = (hi - lo) / nodes;
  if (!(step > 0.0)) return best;
  double node = lo;
  for (int i = 0; i <= nodes; ++i) {
    const double q = lo + i * step;
    const double v = f(q);
    if (v < best_v) {
      best_v = v;
      best = q;
      node = q;
    }
  }
  if (best != keep || node != lo) {
    const double q = golden_section(f, std::max(lo, best - step), std::min(hi, best + step));
    if (f(q) < best_v) best = q;
  }
  return best;
}

/// Closed-form proximal maps of s * tau_hat for the builtin kinds.
bool closed_prox(const SurfaceDensity& d, double sigma, double s, double v, double* q) {
  switch (d.kind()) {
    case DensityKind::Linear: {
      const double lambda = d.lambda();
      if (std::abs(lambda) > sigma) throw UnboundedBelow("linear density with |lambda| > sigma");
      *q = v - s * lambda;
      return true;
    }
    case DensityKind::Absolute: {
      const double lambda = d.lambda();
      if (lambda < -sigma) throw UnboundedBelow("absolute density with lambda < -sigma");
      const double mu = std::min(lambda, sigma);
      const double sign = v < 0.0 ? -1.0 : 1.0;
      *q = mu >= 0.0 ? sign * std::max(0.0, std::abs(v) - s * mu) : sign * (std::abs(v) - s * mu);
      return true;
    }
    case DensityKind::Quadratic: {
      const double a = std::abs(v);
      const double sign = v < 0.0 ? -1.0 : 1.0;
      *q = a <= 0.5 * sigma * (1.0 + 2.0 * s) ? v / (1.0 + 2.0 * s) : sign * (a - s * sigma);
      return true;
    }
    default: return false;
  }
}

bool closed_convex(const SurfaceDensity& d) {
  return !(d.kind() == DensityKind::Absolute && d.lambda() < 0.0);
}

/// tau_hat(x, .) as a uniform piecewise-linear table with linear
/// extrapolation.
class HatTable {
 public:
  HatTable(const SurfaceDensity& d, const YosidaContext& ctx, Point2 x, double R, int points) : lo_(-R) {
    step_ = 2.0 * R / (points - 1);
    v_.resize(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) v_[static_cast<std::size_t>(i)] = yosida_eval(d, ctx, x, Value{lo_ + i * step_});
  }
  double operator()(double q) const {
    const double r = (q - lo_) / step_;
    const auto n = static_cast<long>(v_.size());
    long i = static_cast<long>(std::floor(r));
    i = std::clamp(i, 0L, n - 2);
    const double f = r - static_cast<double>(i);
    return v_[static_cast<std::size_t>(i)] * (1.0 - f) + v_[static_cast<std::size_t>(i + 1)] * f;
  }
  bool convex(double tol) const {
    for (std::size_t i = 1; i + 1 < v_.size(); ++i)
      if (v_[i - 1] - 2.0 * v_[i] + v_[i + 1] < -tol) return false;
    return true;
  }
  double range() const { return -lo_; }

 private:
  double lo_, step_ = 1.0;
  std::vector<double> v_;
};

/// Contact term of one boundary cell: sum of w_p tau_hat(x_p, q).
struct ContactCell {
  std::size_t cell = 0;
  double weight = 0.0;
  Point2 x;
  std::vector<std::pair<const HatTable*, double>> parts;
};

class ContactModel {
 public:
  ContactModel(const SurfaceDensity& d, const YosidaContext& ctx, const Lattice& lat, double range)
      : d_(d), sigma_(ctx.sigma) {
    closed_ = yosida_has_closed_form(d);
    std::map<std::size_t, std::size_t> slot;
    for (const auto& p : lat.probes()) {
      auto [it, fresh] = slot.emplace(p.cell, cells_.size());
      if (fresh) cells_.push_back({p.cell, 0.0, p.x, {}});
      cells_[it->second].weight += p.weight;
    }
    if (closed_) {
      convex_ = closed_convex(d);
      // Surface the unbounded case before iterating.
      (void)yosida_eval(d, ctx, lat.probes().front().x, Value{0.0});
      return;
    }
    if (d.x_independent()) {
      tables_.emplace_back(d, ctx, lat.probes().front().x, range, 4001);
      for (auto& c : cells_) c.parts.push_back({&tables_.front(), c.weight});
    } else {
      tables_.reserve(lat.probes().size());
      for (const auto& p : lat.probes()) tables_.emplace_back(d, ctx, p.x, range, 201);
      std::map<std::size_t, std::size_t> where;
      for (std::size_t i = 0; i < cells_.size(); ++i) where[cells_[i].cell] = i;
      for (std::size_t k = 0; k < lat.probes().size(); ++k) {
        const auto& p = lat.probes()[k];
        cells_[where[p.cell]].parts.push_back({&tables_[k], p.weight});
      }
    }
    convex_ = std::all_of(tables_.begin(), tables_.end(), [](const HatTable& t) { return t.convex(1e-9); });
  }

  const std::vector<ContactCell>& cells() const { return cells_; }
  bool convex() const { return convex_; }
  double range() const { return tables_.empty() ? std::numeric_limits<double>::infinity() : tables_.front().range(); }

  double value(const ContactCell& c, double q) const {
    if (closed_) return c.weight * yosida_eval(d_, {sigma_, 0.0, 0.0}, c.x, Value{q});
    double s = 0.0;
    for (const auto& [t, w] : c.parts) s += w * (*t)(q);
    return s;
  }

  /// argmin value(c, q) + (q - m)^2 / (2 s).
  double prox(const ContactCell& c, double s, double m) const {
    double q = m;
    if (closed_ && closed_prox(d_, sigma_, s * c.weight, m, &q)) return q;
    const double reach = s * sigma_ * c.weight;
    auto f = [&](double z) { return value(c, z) + (z - m) * (z - m) / (2.0 * s); };
    if (convex_) return golden_section(f, m - reach, m + reach);
    return scan_minimize(f, m - reach, m + reach, 200, m);
  }

 private:
  const SurfaceDensity& d_;
  double sigma_;
  bool closed_ = false;
  bool convex_ = true;
  std::vector<ContactCell> cells_;
  std::vector<HatTable> tables_;
};

/// Forward-difference gradient with Neumann closure and its adjoint.
class GradOperator {
 public:
  explicit GradOperator(const Lattice& lat) : nx_(lat.nx()), inv_h_(1.0 / lat.h()), active_(lat.masked_cells()) {
    const auto& mask = lat.mask();
    right_.assign(lat.cells(), 0);
    up_.assign(lat.cells(), 0);
    for (std::size_t idx : active_) {
      const std::size_t i = idx % nx_, j = idx / nx_;
      right_[idx] = i + 1 < nx_ && mask[idx + 1];
      up_[idx] = j + 1 < lat.ny() && mask[idx + nx_];
    }
  }

  double gx(const std::vector<double>& u, std::size_t idx) const {
    return right_[idx] ? (u[idx + 1] - u[idx]) * inv_h_ : 0.0;
  }
  double gy(const std::vector<double>& u, std::size_t idx) const {
    return up_[idx] ? (u[idx + nx_] - u[idx]) * inv_h_ : 0.0;
  }

  /// (K^T y)_idx.
  double adjoint(const std::vector<double>& y, std::size_t idx) const {
    double s = 0.0;
    if (right_[idx]) s -= y[2 * idx];
    if (up_[idx]) s -= y[2 * idx + 1];
    if (idx % nx_ > 0 && right_[idx - 1]) s += y[2 * (idx - 1)];
    if (idx >= nx_ && up_[idx - nx_]) s += y[2 * (idx - nx_) + 1];
    return s * inv_h_;
  }

  const std::vector<std::size_t>& active() const { return active_; }

 private:
  std::size_t nx_;
  double inv_h_;
  const std::vector<std::size_t>& active_;
  std::vector<unsigned char> right_, up_;
};

/// prox of s f* with f*(y) = -sqrt(1 - |y|^2), applied radially.
void area_dual_prox(double s, double& y1, double& y2) {
  const double r = std::hypot(y1, y2);
  if (r == 0.0) return;
  auto g = [s, r](double rho) { return s * rho / std::sqrt(1.0 - rho * rho) + rho - r; };
  double lo = 0.0, hi = std::min(r, std::nextafter(1.0, 0.0));
  double rho = std::min(r / (1.0 + s), hi);
  for (int it = 0; it < 60; ++it) {
    const double gv = g(rho);
    if (gv > 0.0) hi = rho;
    else lo = rho;
    const double c = 1.0 - rho * rho;
    const double dg = s / (c * std::sqrt(c)) + 1.0;
    double next = rho - gv / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - rho) <= 1e-16 + 1e-15 * rho) {
      rho = next;
      break;
    }
    rho = next;
  }
  y1 *= rho / r;
  y2 *= rho / r;
}

}  // namespace

const char* to_string(BulkKind k) {
  switch (k) {
    case BulkKind::None: return "none";
    case BulkKind::Fidelity: return "fidelity";
    case BulkKind::Capillarity: return "capillarity";
  }
  return "?";
}

BulkKind parse_bulk(const std::string& name) {
  if (name == "none") return BulkKind::None;
  if (name == "fidelity") return BulkKind::Fidelity;
  if (name == "capillarity") return BulkKind::Capillarity;
  throw SchemaError("unknown bulk term '" + name + "' (expected none, fidelity or capillarity)");
}

double prox_contact(const SurfaceDensity& d, const YosidaContext& ctx, Point2 x, double t, double v) {
  if (!(t > 0.0)) throw PreconditionError("prox_contact: t must be positive");
  if (d.dim() != 1) throw UnsupportedArity("prox_contact handles scalar densities only");
  if (d.kind() == DensityKind::Linear || d.kind() == DensityKind::Absolute) {
    double q = v;
    closed_prox(d, ctx.sigma, t, v, &q);
    return q;
  }
  auto f = [&](double q) { return yosida_eval(d, ctx, x, Value{q}) + (q - v) * (q - v) / (2.0 * t); };
  const double reach = t * ctx.sigma;
  return scan_minimize(f, v - reach, v + reach, 2000, v);
}

SolverResult minimize_energy(const PolygonalDomain& dom, const SurfaceDensity& d, const YosidaContext& ctx,
                             const BulkTerm& bulk, const SolverConfig& config) {
  if (config.iters < 2) throw PreconditionError("solver needs at least 2 iterations");
  if (!(config.h > 0.0)) throw PreconditionError("grid spacing must be positive");
  if (!(config.step_scale > 0.0)) throw PreconditionError("step_scale must be positive");
  if (!(ctx.sigma > 0.0)) throw PreconditionError("sigma must be positive");
  if (d.dim() != 1) throw UnsupportedArity("the solver handles scalar fields only");
  if (bulk.kind == BulkKind::None && !config.allow_no_bulk) {
    throw PreconditionError("no volume term: the energy may be unbounded or constant; set allow_no_bulk to override");
  }
  if (bulk.kind == BulkKind::Fidelity && !(bulk.alpha > 0.0)) {
    throw PreconditionError("fidelity weight alpha must be positive");
  }

  const LatticePtr lat = Lattice::build(dom, config.h);
  const Lattice& L = *lat;
  const double h = L.h(), h2 = h * h;
  const GradOperator K(L);
  const auto& active = K.active();
  const bool area = bulk.kind == BulkKind::Capillarity;
  const double alpha = bulk.kind == BulkKind::None ? 0.0 : (area ? 2.0 : bulk.alpha);

  std::vector<double> f(L.cells(), 0.0);
  double f_max = 0.0;
  if (bulk.kind == BulkKind::Fidelity && bulk.target) {
    for (std::size_t idx : active) {
      f[idx] = bulk.target(L.center(idx));
      f_max = std::max(f_max, std::abs(f[idx]));
    }
  }

  SolverResult res;
  const ContactModel contact(d, ctx, L, 16.0 + 2.0 * f_max);
  res.nonconvex_boundary = !contact.convex();
  if (res.nonconvex_boundary) {
    res.warnings.push_back("NonconvexBoundaryTerm: the boundary term is nonconvex; the result is a stationary point");
  }
  std::vector<long> contact_of(L.cells(), -1);
  for (std::size_t i = 0; i < contact.cells().size(); ++i) contact_of[contact.cells()[i].cell] = static_cast<long>(i);

  const double dual_bound = area ? 1.0 : ctx.sigma;
  const double normK = std::sqrt(8.0) / h;
  const double scale = std::sqrt(config.step_scale);
  double t, s, theta;
  enum class Scheme { Basic, Linear } scheme;
  if (area) {
    // G is 2-strongly convex (u^2 term), the dual area term 1-strongly convex.
    const double gamma = alpha, delta = 1.0;
    const double mu = 2.0 * std::sqrt(gamma * delta) / normK * scale;
    t = mu / (2.0 * gamma);
    s = mu / (2.0 * delta);
    theta = 1.0 / (1.0 + mu);
    scheme = Scheme::Linear;
  } else if (alpha > 0.0) {
    /// Constant steps with a primal step ten times the balanced one.
    t = kPrimalBias * scale / normK;
    s = scale / (kPrimalBias * normK);
    theta = 1.0;
    scheme = Scheme::Basic;
  } else {
    t = s = scale / normK;
    theta = 1.0;
    scheme = Scheme::Basic;
  }
  res.algorithm = scheme == Scheme::Linear ? "linear" : "basic";

  std::vector<double> u(L.cells(), 0.0), u_prev(L.cells(), 0.0), u_bar(L.cells(), 0.0);
  std::vector<double> y(2 * L.cells(), 0.0);

  auto energy = [&](const std::vector<double>& v) {
    CompensatedSum e;
    for (std::size_t idx : active) {
      const double g1 = K.gx(v, idx), g2 = K.gy(v, idx);
      e += area ? h2 * std::sqrt(1.0 + g1 * g1 + g2 * g2) : ctx.sigma * h2 * std::hypot(g1, g2);
      const double r = v[idx] - f[idx];
      e += h2 * 0.5 * alpha * r * r;
    }
    for (const auto& c : contact.cells()) e += contact.value(c, v[c.cell]);
    return e.value();
  };

  SolverState& st = res.state;
  st.dual_bound = dual_bound;
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < config.iters; ++it) {
    for (std::size_t idx : active) {
      double y1 = y[2 * idx] + s * K.gx(u_bar, idx);
      double y2 = y[2 * idx + 1] + s * K.gy(u_bar, idx);
      if (area) {
        area_dual_prox(s, y1, y2);
      } else {
        const double r = std::hypot(y1, y2);
        if (r > dual_bound) {
          y1 *= dual_bound / r;
          y2 *= dual_bound / r;
        }
      }
      y[2 * idx] = y1;
      y[2 * idx + 1] = y2;
    }
    u_prev.swap(u);
    const double t_eff = 1.0 / (1.0 / t + alpha);
    for (std::size_t idx : active) {
      const double v = u_prev[idx] - t * K.adjoint(y, idx);
      const double m = (v / t + alpha * f[idx]) * t_eff;
      const long ci = contact_of[idx];
      u[idx] = ci < 0 ? m : contact.prox(contact.cells()[static_cast<std::size_t>(ci)], t_eff / h2, m);
    }
    double diff = 0.0;
    for (std::size_t idx : active) {
      const double dlt = u[idx] - u_prev[idx];
      diff += h2 * dlt * dlt;
    }
    residual = std::sqrt(diff) / t;
    for (std::size_t idx : active) u_bar[idx] = u[idx] + theta * (u[idx] - u_prev[idx]);
    st.t_primal = t;
    st.t_dual = s;
    st.energy_history.push_back(energy(u));
    st.residual_history.push_back(residual);
    if (!std::isfinite(st.energy_history.back())) {
      ++it;
      res.warnings.push_back("iterates diverged");
      break;
    }
    if (it >= 1 && residual <= config.tol) {
      ++it;
      break;
    }
  }
  st.iterations = it;
  res.converged = residual <= config.tol;
  res.residual = residual;

  GridField field(lat, 1);
  for (std::size_t idx : active) field.data()[idx] = u[idx];
  st.u = field;
  st.xi = std::move(y);
  res.u = field;

  if (field.max_abs() > contact.range()) {
    res.warnings.push_back("iterate left the tabulated range of the boundary term");
  }

  EnergyReport& rep = res.report;
  rep.validity = Validity::GridEstimate;
  CompensatedSum grad_term, bulk_term;
  for (std::size_t idx : active) {
    const double g1 = K.gx(u, idx), g2 = K.gy(u, idx);
    grad_term += area ? h2 * std::sqrt(1.0 + g1 * g1 + g2 * g2) : ctx.sigma * h2 * std::hypot(g1, g2);
    const double r = u[idx] - f[idx];
    bulk_term += h2 * 0.5 * alpha * r * r;
  }
  rep.tv_term = grad_term.value();
  rep.bulk_term = bulk_term.value();
  rep.per_edge.assign(dom.size(), 0.0);
  rep.contact_term = contact_energy(
      trace_extract(field), [&](Point2 x, const Value& p) { return yosida_eval(d, ctx, x, p); }, &rep.per_edge);
  rep.notes.push_back(std::string("algorithm: ") + res.algorithm);
  if (area) rep.notes.push_back("area term handled exactly; beta not used");
  rep.finalize();
  res.warnings.insert(res.warnings.end(), rep.notes.begin(), rep.notes.end());
  return res;
}

Diagnostics diagnostics(const SolverState& state) {
  if (state.iterations < 2 || state.energy_history.size() < 2) {
    throw PreconditionError("diagnostics need at least 2 iterations");
  }
  Diagnostics dg;
  dg.energy_curve = state.energy_history;
  dg.residual_curve = state.residual_history;
  for (std::size_t i = 0; i + 1 < state.xi.size(); i += 2) {
    dg.dual_feasibility_max = std::max(dg.dual_feasibility_max, std::hypot(state.xi[i], state.xi[i + 1]));
  }
  constexpr std::size_t kBurnIn = 10, kWindow = 5;
  const auto& e = state.energy_history;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t start = kBurnIn; start + kWindow <= e.size(); start += kWindow) {
    double mean = 0.0;
    for (std::size_t k = start; k < start + kWindow; ++k) mean += e[k];
    mean /= kWindow;
    if (!std::isfinite(mean) || (std::isfinite(prev) && mean > prev + 1e-9 * (1.0 + std::abs(prev)))) {
      ++dg.monotonicity_violations;
    }
    prev = mean;
  }
  dg.monotone = dg.monotonicity_violations == 0;
  return dg;
}

}  // namespace relaxbv
