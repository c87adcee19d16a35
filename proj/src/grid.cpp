#include "relaxbv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "relaxbv/errors.hpp"

namespace relaxbv {

// ---------------------------------------------------------------------------
// Lattice

LatticePtr Lattice::build(const PolygonalDomain& dom, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw PreconditionError("grid spacing must be positive");
  const Point2 lo = dom.bbox_min(), hi = dom.bbox_max();
  const double nxd = std::ceil((hi.x - lo.x) / h - 1e-9), nyd = std::ceil((hi.y - lo.y) / h - 1e-9);
  if (nxd * nyd > 2.0e7) throw PreconditionError("grid too fine: more than 2e7 cells");
  auto lat = std::make_shared<Lattice>();
  lat->h_ = h;
  lat->nx_ = static_cast<std::size_t>(nxd);
  lat->ny_ = static_cast<std::size_t>(nyd);
  lat->origin_ = lo;
  lat->domain_ = std::make_shared<const PolygonalDomain>(dom);
  lat->mask_.assign(lat->cells(), 0);

  // Scanline fill of cell centres.
  const auto& v = dom.vertices();
  const std::size_t nv = v.size();
  std::vector<double> xs;
  for (std::size_t j = 0; j < lat->ny_; ++j) {
    const double y = lo.y + (static_cast<double>(j) + 0.5) * h;
    xs.clear();
    for (std::size_t e = 0; e < nv; ++e) {
      const Point2 a = v[e], b = v[(e + 1) % nv];
      if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Centres strictly between the crossings.
      const double i0 = std::ceil((xs[k] - lo.x) / h - 0.5);
      const double i1 = std::floor((xs[k + 1] - lo.x) / h - 0.5);
      for (double i = std::max(0.0, i0); i <= std::min(i1, nxd - 1.0); i += 1.0) {
        const double cx = lo.x + (i + 0.5) * h;
        if (cx > xs[k] && cx < xs[k + 1]) lat->mask_[lat->index(static_cast<std::size_t>(i), j)] = 1;
      }
    }
  }
  for (std::size_t idx = 0; idx < lat->cells(); ++idx)
    if (lat->mask_[idx]) lat->active_.push_back(idx);
  if (lat->active_.empty()) throw GeometryError("grid has no cell inside the domain");

  // 4-connectivity of the mask.
  std::vector<unsigned char> seen(lat->cells(), 0);
  std::deque<std::size_t> queue{lat->active_.front()};
  seen[lat->active_.front()] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const std::size_t c = queue.front();
    queue.pop_front();
    ++reached;
    const std::size_t i = c % lat->nx_, j = c / lat->nx_;
    const std::size_t nb[4] = {i > 0 ? c - 1 : npos, i + 1 < lat->nx_ ? c + 1 : npos,
                               j > 0 ? c - lat->nx_ : npos, j + 1 < lat->ny_ ? c + lat->nx_ : npos};
    for (std::size_t n : nb) {
      if (n != npos && lat->mask_[n] && !seen[n]) {
        seen[n] = 1;
        queue.push_back(n);
      }
    }
  }
  if (reached != lat->active_.size()) {
    throw GeometryError("mask is disconnected at h = " + std::to_string(h));
  }

  // Boundary probes: segments of length <= h, read at depth h/2 inside.
  for (std::size_t e = 0; e < nv; ++e) {
    const double len = dom.edge_length(e);
    const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(len / h - 1e-9)));
    const Point2 a = dom.edge_start(e), b = dom.edge_end(e);
    const Point2 nrm = dom.outward_normal(e);
    for (std::size_t k = 0; k < m; ++k) {
      const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
      TraceProbe p;
      p.x = a + (b - a) * t;
      p.normal = nrm;
      p.weight = len / static_cast<double>(m);
      p.edge = e;
      p.arclength = dom.vertex_arclength(e) + t * len;
      const Point2 probe = p.x - nrm * (0.5 * h);
      std::size_t c = lat->locate(probe);
      if (c == npos || !lat->mask_[c]) c = lat->nearest_masked(probe);
      if (c == npos) throw GeometryError("no masked cell near boundary point; grid too coarse");
      p.cell = c;
      lat->probe_depth_ = std::max(lat->probe_depth_, dom.boundary_distance(lat->center(c)));
      lat->probes_.push_back(p);
    }
  }
  return lat;
}

LatticePtr Lattice::interval(double a, double b, std::size_t cells) {
  if (!(b > a) || cells < 2) throw PreconditionError("interval lattice needs a < b and at least 2 cells");
  auto lat = std::make_shared<Lattice>();
  lat->one_d_ = true;
  lat->a_ = a;
  lat->b_ = b;
  lat->h_ = (b - a) / static_cast<double>(cells);
  lat->nx_ = cells;
  lat->ny_ = 1;
  lat->origin_ = {a, -0.5 * lat->h_};
  lat->mask_.assign(cells, 1);
  lat->active_.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) lat->active_[i] = i;
  TraceProbe left, right;
  left.x = {a, 0.0};
  left.normal = {-1.0, 0.0};
  left.weight = 1.0;
  left.edge = 0;
  left.cell = 0;
  right.x = {b, 0.0};
  right.normal = {1.0, 0.0};
  right.weight = 1.0;
  right.edge = 1;
  right.arclength = 1.0;
  right.cell = cells - 1;
  lat->probes_ = {left, right};
  lat->probe_depth_ = 0.5 * lat->h_;
  return lat;
}

const std::vector<CellProjection>& Lattice::boundary_map() const {
  std::call_once(map_once_, [this] {
    map_.assign(cells(), CellProjection{});
    for (std::size_t idx : active_) {
      const Point2 c = center(idx);
      if (one_d_) {
        const bool left = c.x - a_ <= b_ - c.x;
        map_[idx] = {left ? c.x - a_ : b_ - c.x, left ? 0.0 : 1.0, left ? std::size_t{0} : std::size_t{1}};
      } else {
        const BoundaryProjection p = domain_->project(c);
        map_[idx] = {p.distance, p.arclength, p.edge};
      }
    }
  });
  return map_;
}

Point2 Lattice::center(std::size_t idx) const {
  const std::size_t i = idx % nx_, j = idx / nx_;
  if (one_d_) return {a_ + (static_cast<double>(i) + 0.5) * h_, 0.0};
  return {origin_.x + (static_cast<double>(i) + 0.5) * h_, origin_.y + (static_cast<double>(j) + 0.5) * h_};
}

std::size_t Lattice::locate(Point2 x) const {
  const double fi = std::floor((x.x - origin_.x) / h_);
  const double fj = one_d_ ? 0.0 : std::floor((x.y - origin_.y) / h_);
  if (fi < 0 || fj < 0 || fi >= static_cast<double>(nx_) || fj >= static_cast<double>(ny_)) return npos;
  return index(static_cast<std::size_t>(fi), static_cast<std::size_t>(fj));
}

std::size_t Lattice::nearest_masked(Point2 x, int rings) const {
  const auto ci = static_cast<long>(std::floor((x.x - origin_.x) / h_));
  const auto cj = static_cast<long>(std::floor((x.y - origin_.y) / h_));
  std::size_t best = npos;
  double best_d = std::numeric_limits<double>::infinity();
  for (long dj = -rings; dj <= rings; ++dj) {
    for (long di = -rings; di <= rings; ++di) {
      const long i = ci + di, j = cj + dj;
      if (i < 0 || j < 0 || i >= static_cast<long>(nx_) || j >= static_cast<long>(ny_)) continue;
      const std::size_t idx = index(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (!mask_[idx]) continue;
      const double d = norm(center(idx) - x);
      if (d < best_d) {
        best_d = d;
        best = idx;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// GridField

GridField::GridField(LatticePtr lattice, int dim) : lattice_(std::move(lattice)), dim_(dim) {
  if (!lattice_) throw PreconditionError("field needs a lattice");
  if (dim < 1 || dim > kMaxValueDim) throw PreconditionError("field dimension must be 1 or 2");
  data_.assign(lattice_->cells() * static_cast<std::size_t>(dim), 0.0);
}

GridField GridField::constant(LatticePtr lattice, const Value& c) {
  GridField f(std::move(lattice), c.dim());
  for (std::size_t idx : f.lattice_->masked_cells()) f.set(idx, c);
  return f;
}

GridField GridField::sample(LatticePtr lattice, const std::function<Value(Point2)>& fn, int dim, int supersample) {
  if (supersample < 1) throw PreconditionError("supersample must be >= 1");
  GridField f(std::move(lattice), dim);
  const Lattice& L = *f.lattice_;
  const double h = L.h();
  const int sy = L.one_d() ? 1 : supersample;
  const double inv = 1.0 / (supersample * sy);
  for (std::size_t idx : L.masked_cells()) {
    const Point2 c = L.center(idx);
    if (supersample == 1) {
      f.set(idx, fn(c));
      continue;
    }
    Value acc = Value::zeros(dim);
    for (int a = 0; a < supersample; ++a) {
      for (int b = 0; b < sy; ++b) {
        const Point2 x{c.x + h * ((a + 0.5) / supersample - 0.5),
                       L.one_d() ? c.y : c.y + h * ((b + 0.5) / sy - 0.5)};
        acc = acc + fn(x);
      }
    }
    f.set(idx, acc * inv);
  }
  return f;
}

GridField GridField::convex_indicator(LatticePtr lattice, const std::vector<Point2>& polygon, double height) {
  GridField f(std::move(lattice), 1);
  const Lattice& L = *f.lattice_;
  if (L.one_d()) throw PreconditionError("convex_indicator needs a 2-D lattice");
  Point2 lo = polygon.front(), hi = polygon.front();
  for (const Point2& p : polygon) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double h = L.h();
  const Point2 o = L.origin();
  const auto i0 = static_cast<long>(std::max(0.0, std::floor((lo.x - o.x) / h)));
  const auto j0 = static_cast<long>(std::max(0.0, std::floor((lo.y - o.y) / h)));
  const auto i1 = std::min(static_cast<long>(L.nx()) - 1, static_cast<long>(std::floor((hi.x - o.x) / h)));
  const auto j1 = std::min(static_cast<long>(L.ny()) - 1, static_cast<long>(std::floor((hi.y - o.y) / h)));
  for (long j = j0; j <= j1; ++j) {
    for (long i = i0; i <= i1; ++i) {
      const std::size_t idx = L.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (!L.masked(idx)) continue;
      const Point2 clo{o.x + i * h, o.y + j * h};
      const double frac = box_polygon_overlap(clo, clo + Point2{h, h}, polygon) / (h * h);
      f.data_[idx] = height * frac;
    }
  }
  return f;
}

Value GridField::at(std::size_t idx) const {
  if (dim_ == 1) return Value{data_[idx]};
  return Value{data_[2 * idx], data_[2 * idx + 1]};
}

void GridField::set(std::size_t idx, const Value& v) {
  if (v.dim() != dim_) throw PreconditionError("value dimension does not match the field");
  for (int k = 0; k < dim_; ++k) data_[idx * dim_ + k] = v[k];
}

void GridField::check_compatible(const GridField& o) const {
  if (lattice_ != o.lattice_ && (lattice_->cells() != o.lattice_->cells() || lattice_->h() != o.lattice_->h() ||
                                 lattice_->mask() != o.lattice_->mask())) {
    throw PreconditionError("fields live on different lattices");
  }
  if (dim_ != o.dim_) throw PreconditionError("fields have different value dimensions");
}

GridField GridField::operator+(const GridField& o) const {
  check_compatible(o);
  GridField r(lattice_, dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] = data_[i] + o.data_[i];
  return r;
}

GridField GridField::operator-(const GridField& o) const {
  check_compatible(o);
  GridField r(lattice_, dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] = data_[i] - o.data_[i];
  return r;
}

GridField GridField::operator*(double s) const {
  GridField r(lattice_, dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] = data_[i] * s;
  return r;
}

double GridField::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool GridField::finite() const {
  for (std::size_t idx : lattice_->masked_cells())
    for (int k = 0; k < dim_; ++k)
      if (!std::isfinite(data_[idx * dim_ + k])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Traces

double TraceSample::total_weight() const {
  CompensatedSum s;
  for (const auto& e : entries) s += e.weight;
  return s.value();
}

double TraceSample::integral_abs() const {
  CompensatedSum s;
  for (const auto& e : entries) s += e.weight * e.value.norm();
  return s.value();
}

TraceSample TraceSample::minus(const TraceSample& o) const {
  if (o.entries.size() != entries.size()) throw PreconditionError("trace samples do not match");
  TraceSample r = *this;
  for (std::size_t i = 0; i < entries.size(); ++i) r.entries[i].value = entries[i].value - o.entries[i].value;
  return r;
}

TraceSample trace_extract(const GridField& u) {
  TraceSample tr;
  const auto& probes = u.lattice()->probes();
  tr.entries.reserve(probes.size());
  for (const auto& p : probes) tr.entries.push_back({p.x, p.normal, p.weight, u.at(p.cell), p.edge, p.arclength});
  return tr;
}

double contact_energy(const TraceSample& tr, const std::function<double(Point2, const Value&)>& tau,
                      std::vector<double>* per_edge) {
  CompensatedSum s;
  for (const auto& e : tr.entries) {
    const double c = e.weight * tau(e.x, e.value);
    s += c;
    if (per_edge) {
      if (per_edge->size() <= e.edge) per_edge->resize(e.edge + 1, 0.0);
      (*per_edge)[e.edge] += c;
    }
  }
  return s.value();
}

// ---------------------------------------------------------------------------
// Energies

const char* to_string(Validity v) {
  return v == Validity::ExactClosedForm ? "exact_closed_form" : "grid_estimate";
}

void EnergyReport::finalize() {
  total = tv_infinite ? std::numeric_limits<double>::infinity() : tv_term + contact_term + bulk_term;
}

double tv_grid(const GridField& u) {
  const Lattice& L = *u.lattice();
  const std::size_t nx = L.nx(), ny = L.ny();
  const int M = u.dim();
  const auto& d = u.data();
  const auto& mask = L.mask();
  // measure * |diff / h| = h^(dim-1) * |diff|
  const double scale = L.one_d() ? 1.0 : L.h();
  CompensatedSum s;
  for (std::size_t idx : L.masked_cells()) {
    const std::size_t i = idx % nx, j = idx / nx;
    const bool right = i + 1 < nx && mask[idx + 1];
    const bool up = j + 1 < ny && mask[idx + nx];
    double sq = 0.0;
    for (int k = 0; k < M; ++k) {
      const double base = d[idx * M + k];
      if (right) {
        const double d1 = d[(idx + 1) * M + k] - base;
        sq += d1 * d1;
      }
      if (up) {
        const double d2 = d[(idx + nx) * M + k] - base;
        sq += d2 * d2;
      }
    }
    if (sq > 0.0) s += scale * std::sqrt(sq);
  }
  return s.value();
}

double tv_exact_pc(const std::vector<JumpSegment>& jumps) {
  CompensatedSum s;
  for (const auto& j : jumps) s += norm(j.b - j.a) * std::abs(j.height);
  return s.value();
}

namespace {

constexpr int kPieceSubdivisions = 64;

double exact_contact(const GridField& u, const std::function<double(Point2, const Value&)>& tau,
                     std::vector<double>& per_edge) {
  const PolygonalDomain* dom = u.lattice()->domain();
  CompensatedSum s;
  for (const auto& piece : u.exact()->trace) {
    const double len = norm(piece.b - piece.a);
    if (len == 0.0) continue;
    for (int k = 0; k < kPieceSubdivisions; ++k) {
      const Point2 mid = piece.a + (piece.b - piece.a) * ((k + 0.5) / kPieceSubdivisions);
      const double c = len / kPieceSubdivisions * tau(mid, piece.value);
      s += c;
      if (dom) {
        const std::size_t e = dom->project(mid).edge;
        if (per_edge.size() <= e) per_edge.resize(e + 1, 0.0);
        per_edge[e] += c;
      }
    }
  }
  return s.value();
}

bool use_exact(const GridField& u, EnergyMode mode) {
  if (mode == EnergyMode::Exact && !u.exact()) throw PreconditionError("field carries no exact jump data");
  return mode != EnergyMode::Grid && u.exact().has_value();
}

EnergyReport surface_energy(const GridField& u, double sigma, EnergyMode mode,
                            const std::function<double(Point2, const Value&)>& tau) {
  if (!(sigma > 0.0)) throw PreconditionError("sigma must be positive");
  EnergyReport r;
  if (const PolygonalDomain* dom = u.lattice()->domain()) r.per_edge.assign(dom->size(), 0.0);
  else r.per_edge.assign(2, 0.0);
  if (use_exact(u, mode)) {
    r.validity = Validity::ExactClosedForm;
    r.tv_term = sigma * tv_exact_pc(u.exact()->jumps);
    r.contact_term = exact_contact(u, tau, r.per_edge);
  } else {
    r.validity = Validity::GridEstimate;
    r.tv_term = sigma * tv_grid(u);
    r.contact_term = contact_energy(trace_extract(u), tau, &r.per_edge);
  }
  r.finalize();
  return r;
}

}  // namespace

EnergyReport energy_F(const GridField& u, const SurfaceDensity& d, double sigma, EnergyMode mode) {
  if (u.dim() != d.dim()) throw PreconditionError("field and density dimensions differ");
  EnergyReport r = surface_energy(u, sigma, mode, [&d](Point2 x, const Value& p) { return eval_density(d, x, p); });
  if (r.contact_term <= kNegativeInfinitySentinel) r.notes.push_back("contact term reached the -infinity sentinel");
  return r;
}

EnergyReport energy_H(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx, EnergyMode mode) {
  if (u.dim() != d.dim()) throw PreconditionError("field and density dimensions differ");
  return surface_energy(u, ctx.sigma, mode,
                        [&d, &ctx](Point2 x, const Value& p) { return yosida_eval(d, ctx, x, p); });
}

EnergyReport energy_capillarity(const GridField& u, double nu) {
  if (u.dim() != 1) throw PreconditionError("capillarity needs a scalar field");
  const Lattice& L = *u.lattice();
  const std::size_t nx = L.nx(), ny = L.ny();
  const auto& d = u.data();
  const auto& mask = L.mask();
  const double h = L.h(), meas = L.cell_measure();
  CompensatedSum area, bulk;
  for (std::size_t idx : L.masked_cells()) {
    const std::size_t i = idx % nx, j = idx / nx;
    const double d1 = i + 1 < nx && mask[idx + 1] ? (d[idx + 1] - d[idx]) / h : 0.0;
    const double d2 = j + 1 < ny && mask[idx + nx] ? (d[idx + nx] - d[idx]) / h : 0.0;
    area += meas * std::sqrt(1.0 + d1 * d1 + d2 * d2);
    bulk += meas * d[idx] * d[idx];
  }
  EnergyReport r;
  r.validity = Validity::GridEstimate;
  r.tv_term = area.value();
  r.bulk_term = bulk.value();
  if (const PolygonalDomain* dom = L.domain()) r.per_edge.assign(dom->size(), 0.0);
  r.contact_term = contact_energy(trace_extract(u), [nu](Point2, const Value& p) { return nu * p.scalar(); },
                                  &r.per_edge);
  r.finalize();
  return r;
}

double l1_distance(const GridField& u, const GridField& v) {
  const Lattice& L = *u.lattice();
  const Lattice& K = *v.lattice();
  if (L.cells() != K.cells() || L.h() != K.h() || L.mask() != K.mask()) {
    throw PreconditionError("l1_distance: fields have different masks or spacing");
  }
  if (u.dim() != v.dim()) throw PreconditionError("l1_distance: value dimensions differ");
  CompensatedSum s;
  for (std::size_t idx : L.masked_cells()) s += L.cell_measure() * distance(u.at(idx), v.at(idx));
  return s.value();
}

double l1_norm(const GridField& u) {
  const Lattice& L = *u.lattice();
  CompensatedSum s;
  for (std::size_t idx : L.masked_cells()) s += L.cell_measure() * u.at(idx).norm();
  return s.value();
}

double box_polygon_overlap(Point2 lo, Point2 hi, const std::vector<Point2>& convex) {
  // Clip the box by each edge of the (counterclockwise) convex polygon.
  std::vector<Point2> poly{lo, {hi.x, lo.y}, hi, {lo.x, hi.y}};
  std::vector<Point2> next;
  double orient = 0.0;
  for (std::size_t i = 0; i < convex.size(); ++i) orient += cross(convex[i], convex[(i + 1) % convex.size()]);
  const double sgn = orient >= 0.0 ? 1.0 : -1.0;
  for (std::size_t e = 0; e < convex.size() && !poly.empty(); ++e) {
    const Point2 a = convex[e], b = convex[(e + 1) % convex.size()];
    auto side = [&](Point2 p) { return sgn * cross(b - a, p - a); };
    next.clear();
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Point2 p = poly[k], q = poly[(k + 1) % poly.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0.0) next.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) next.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    poly.swap(next);
  }
  if (poly.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) a += cross(poly[k], poly[(k + 1) % poly.size()]);
  return std::abs(0.5 * a);
}

}  // namespace relaxbv
