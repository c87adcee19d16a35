#include "relaxbv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "relaxbv/errors.hpp"

namespace relaxbv {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAngleTol = 1e-12;

double signed_area(const std::vector<Point2>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
  auto orient = [](Point2 p, Point2 q, Point2 r) { return cross(q - p, r - p); };
  auto on_segment = [](Point2 p, Point2 q, Point2 r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
           r.y <= std::max(p.y, q.y);
  };
  const double d1 = orient(c, d, a), d2 = orient(c, d, b), d3 = orient(a, b, c), d4 = orient(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

}  // namespace

PolygonalDomain PolygonalDomain::from_vertices(std::vector<Point2> v, DomainOptions options) {
  if (v.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i].x) || !std::isfinite(v[i].y)) {
      throw GeometryError("vertex " + std::to_string(i) + " is not finite");
    }
  }
  const double area = signed_area(v);
  if (area == 0.0) throw GeometryError("polygon has zero area");
  if (area < 0.0) {
    std::reverse(v.begin(), v.end());
    if (!options.angle_override.empty()) std::reverse(options.angle_override.begin(), options.angle_override.end());
  }
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] == v[(i + 1) % n]) throw GeometryError("edge " + std::to_string(i) + " has zero length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
        throw GeometryError("edges " + std::to_string(i) + " and " + std::to_string(j) + " intersect");
      }
    }
  }
  if (!options.angle_override.empty() && options.angle_override.size() != n) {
    throw GeometryError("angle override needs one entry per vertex");
  }

  PolygonalDomain d;
  d.vertices_ = std::move(v);
  d.smooth_ = options.smooth;
  d.name_ = options.name;
  d.lengths_.resize(n);
  d.cumulative_.resize(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    d.lengths_[i] = norm(d.vertex(i + 1) - d.vertex(i));
    d.cumulative_[i + 1] = d.cumulative_[i] + d.lengths_[i];
  }
  d.perimeter_ = d.cumulative_[n];

  d.lo_ = d.hi_ = d.vertices_[0];
  for (const Point2& p : d.vertices_) {
    d.lo_ = {std::min(d.lo_.x, p.x), std::min(d.lo_.y, p.y)};
    d.hi_ = {std::max(d.hi_.x, p.x), std::max(d.hi_.y, p.y)};
  }

  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 ein = d.vertex(i) - d.vertex(i + n - 1);
    const Point2 eout = d.vertex(i + 1) - d.vertex(i);
    const double turn = std::atan2(cross(ein, eout), dot(ein, eout));
    double theta = kPi - turn;
    if (!options.angle_override.empty() && options.angle_override[i]) theta = *options.angle_override[i];
    if (!(theta > kAngleTol) || !(theta < 2.0 * kPi - kAngleTol)) {
      throw GeometryError("vertex " + std::to_string(i) + " is a cusp (interior angle " + std::to_string(theta) + ")");
    }
    CornerRecord r;
    r.vertex = i;
    r.theta = theta;
    r.slope = 1.0 / std::tan(0.5 * theta);
    r.q = corner_q(theta);
    d.records_.push_back(r);
    if (std::abs(theta - kPi) > kAngleTol) lip = std::max(lip, std::abs(r.slope));
  }
  d.lipschitz_ = options.lipschitz_override.value_or(lip);
  if (!(d.lipschitz_ >= 0.0)) throw GeometryError("Lipschitz constant must be nonnegative");
  return d;
}

PolygonalDomain PolygonalDomain::unit_square() {
  DomainOptions o;
  o.name = "square";
  return from_vertices({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, o);
}

PolygonalDomain PolygonalDomain::l_shape() {
  DomainOptions o;
  o.name = "lshape";
  return from_vertices({{0, 0}, {1, 0}, {1, 0.5}, {0.5, 0.5}, {0.5, 1}, {0, 1}}, o);
}

PolygonalDomain PolygonalDomain::regular_polygon(int n, double r, Point2 c, bool smooth) {
  if (n < 3) throw GeometryError("regular polygon needs n >= 3");
  if (!(r > 0.0)) throw GeometryError("regular polygon needs r > 0");
  std::vector<Point2> v;
  v.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    v.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  DomainOptions o;
  o.smooth = smooth;
  o.name = "disk" + std::to_string(n);
  return from_vertices(std::move(v), o);
}

Point2 PolygonalDomain::tangent(std::size_t e) const { return (edge_end(e) - edge_start(e)) * (1.0 / lengths_[e]); }

Point2 PolygonalDomain::outward_normal(std::size_t e) const {
  const Point2 t = tangent(e);
  return {t.y, -t.x};
}

double PolygonalDomain::area() const { return signed_area(vertices_); }

double PolygonalDomain::shortest_edge() const { return *std::min_element(lengths_.begin(), lengths_.end()); }

std::vector<CornerRecord> PolygonalDomain::corners() const {
  std::vector<CornerRecord> out;
  for (const auto& r : records_)
    if (std::abs(r.theta - kPi) > kAngleTol) out.push_back(r);
  return out;
}

bool PolygonalDomain::contains(Point2 x) const {
  bool inside = false;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = vertices_[i], b = vertices_[j];
    if ((a.y > x.y) != (b.y > x.y) && x.x < (b.x - a.x) * (x.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

BoundaryProjection PolygonalDomain::project(Point2 x) const {
  BoundaryProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < vertices_.size(); ++e) {
    const Point2 a = edge_start(e);
    const Point2 ab = edge_end(e) - a;
    const double t = std::clamp(dot(x - a, ab) / dot(ab, ab), 0.0, 1.0);
    const Point2 p = a + ab * t;
    const double dist = norm(x - p);
    if (dist < best.distance) {
      best = {p, e, t, cumulative_[e] + t * lengths_[e], dist};
    }
  }
  return best;
}

std::size_t PolygonalDomain::edge_at(double s) const {
  s = std::fmod(s, perimeter_);
  if (s < 0.0) s += perimeter_;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const auto e = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return std::min(e, vertices_.size() - 1);
}

Point2 PolygonalDomain::point_at(double s) const {
  s = std::fmod(s, perimeter_);
  if (s < 0.0) s += perimeter_;
  const std::size_t e = edge_at(s);
  const double t = std::clamp((s - cumulative_[e]) / lengths_[e], 0.0, 1.0);
  return edge_start(e) + (edge_end(e) - edge_start(e)) * t;
}

double corner_q(double theta) {
  if (!(theta > 0.0) || !(theta < 2.0 * kPi)) throw PreconditionError("corner_q: angle must lie in (0, 2 pi)");
  if (theta >= kPi) return 1.0;
  return 1.0 / std::sin(0.5 * theta);
}

double domain_Q(const PolygonalDomain& dom) {
  double q = 1.0;
  for (const auto& r : dom.vertex_records()) q = std::max(q, r.q);
  return q;
}

double wedge_cut_ratio(double theta, double a) {
  if (!(theta > 0.0) || !(theta < kPi)) throw PreconditionError("wedge_cut_ratio: angle must lie in (0, pi)");
  if (!(a > 0.0)) throw PreconditionError("wedge_cut_ratio: cut depth must be positive");
  // Legs a along both edges; the interior side is the chord between their ends.
  const Point2 e1{1.0, 0.0};
  const Point2 e2{std::cos(theta), std::sin(theta)};
  const double chord = norm(e1 * a - e2 * a);
  return 2.0 * a / chord;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::C2Clause: return "C2_clause";
    case Verdict::AlmostC1Clause: return "almost_C1_clause";
    case Verdict::LipschitzGammaClause: return "lipschitz_gamma_clause";
    case Verdict::Inadmissible: return "inadmissible";
  }
  return "inadmissible";
}

AdmissibilityReport admissibility_check(const PolygonalDomain& dom, const SurfaceDensity& d, double sigma,
                                        double epsilon0) {
  if (!(sigma > 0.0)) throw PreconditionError("sigma must be positive");
  if (!(epsilon0 >= 0.0) || !(epsilon0 < 0.5)) throw PreconditionError("epsilon0 must lie in [0, 1/2)");
  AdmissibilityReport rep;
  rep.sigma = sigma;
  rep.epsilon0 = epsilon0;
  const double budget = (1.0 - 2.0 * epsilon0) * sigma;
  const double step = dom.shortest_edge() / 16.0;
  const auto& L = d.lower_bound().L;
  double max_L = 0.0;
  rep.min_slack = std::numeric_limits<double>::infinity();
  double max_q = 1.0;
  for (std::size_t e = 0; e < dom.size(); ++e) {
    const auto m = static_cast<std::size_t>(std::ceil(dom.edge_length(e) / step - 1e-9));
    for (std::size_t k = 0; k < m; ++k) {
      AdmissibilityPoint pt;
      pt.corner = k == 0;
      pt.x = dom.edge_start(e) + (dom.edge_end(e) - dom.edge_start(e)) * (static_cast<double>(k) / m);
      pt.q = pt.corner ? dom.vertex_records()[e].q : 1.0;
      pt.L = L(pt.x);
      pt.product = pt.L * pt.q;
      pt.slack = budget - pt.product;
      rep.min_slack = std::min(rep.min_slack, pt.slack);
      max_L = std::max(max_L, pt.L);
      max_q = std::max(max_q, pt.q);
      rep.per_point.push_back(pt);
    }
  }
  const auto gamma = d.lipschitz_modulus();
  rep.min_gamma_slack = gamma ? budget - *gamma * max_q : -std::numeric_limits<double>::infinity();

  if (dom.smooth() && max_L <= sigma) {
    rep.verdict = Verdict::C2Clause;
  } else if (epsilon0 > 0.0 && rep.min_slack >= 0.0) {
    rep.verdict = Verdict::AlmostC1Clause;
  } else if (epsilon0 > 0.0 && rep.min_gamma_slack >= 0.0) {
    rep.verdict = Verdict::LipschitzGammaClause;
  } else {
    rep.verdict = Verdict::Inadmissible;
  }
  return rep;
}

EmmerResult emmer_check(double nu, const PolygonalDomain& dom) {
  const double L = dom.lipschitz_constant();
  EmmerResult r;
  r.bound = 1.0 / std::sqrt(1.0 + L * L);
  r.passes = std::abs(nu) < r.bound;
  return r;
}

}  // namespace relaxbv
