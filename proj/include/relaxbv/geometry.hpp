#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "relaxbv/density.hpp"
#include "relaxbv/value.hpp"

namespace relaxbv {

/// Interior angle at a polygon vertex with its wedge data.
struct CornerRecord {
  std::size_t vertex = 0;
  double theta = 0.0;   // interior angle in (0, 2 pi)
  double slope = 0.0;   // cot(theta / 2)
  double q = 1.0;       // corner_q(theta)
};

struct DomainOptions {
  bool smooth = false;
  /// Replaces the computed L of the boundary when set.
  std::optional<double> lipschitz_override;
  /// Per-vertex interior angle overrides (radians); empty or one per vertex.
  std::vector<std::optional<double>> angle_override;
  std::string name;
};

/// Nearest-point projection onto the boundary.
struct BoundaryProjection {
  Point2 point;
  std::size_t edge = 0;
  double t = 0.0;          // position along the edge in [0, 1]
  double arclength = 0.0;  // from vertex 0, counterclockwise
  double distance = 0.0;
};

/// Simple counterclockwise polygon. Clockwise input is reversed.
class PolygonalDomain {
 public:
  static PolygonalDomain from_vertices(std::vector<Point2> vertices, DomainOptions options = {});
  static PolygonalDomain unit_square();
  /// Hexagon (0,0),(1,0),(1,.5),(.5,.5),(.5,1),(0,1).
  static PolygonalDomain l_shape();
  /// Regular n-gon of circumradius r centred at c; `smooth` marks it as a
  /// stand-in for a C2 disk.
  static PolygonalDomain regular_polygon(int n, double r = 1.0, Point2 c = {0.0, 0.0}, bool smooth = true);

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  Point2 vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
  Point2 edge_start(std::size_t e) const { return vertex(e); }
  Point2 edge_end(std::size_t e) const { return vertex(e + 1); }
  double edge_length(std::size_t e) const { return lengths_[e]; }
  /// Unit tangent of edge e (counterclockwise).
  Point2 tangent(std::size_t e) const;
  /// Unit outward normal of edge e.
  Point2 outward_normal(std::size_t e) const;
  double perimeter() const { return perimeter_; }
  double area() const;
  double shortest_edge() const;
  /// Arclength of vertex i from vertex 0.
  double vertex_arclength(std::size_t i) const { return cumulative_[i]; }

  /// One record per vertex, including flat ones.
  const std::vector<CornerRecord>& vertex_records() const { return records_; }
  /// Vertices whose interior angle differs from pi.
  std::vector<CornerRecord> corners() const;

  bool smooth() const { return smooth_; }
  const std::string& name() const { return name_; }
  /// max |cot(theta/2)| over corners, or the override.
  double lipschitz_constant() const { return lipschitz_; }

  Point2 bbox_min() const { return lo_; }
  Point2 bbox_max() const { return hi_; }

  bool contains(Point2 x) const;
  BoundaryProjection project(Point2 x) const;
  double boundary_distance(Point2 x) const { return project(x).distance; }
  /// Boundary point at arclength s (taken modulo the perimeter).
  Point2 point_at(double s) const;
  /// Edge index containing arclength s.
  std::size_t edge_at(double s) const;

 private:
  std::vector<Point2> vertices_;
  std::vector<double> lengths_;
  std::vector<double> cumulative_;
  std::vector<CornerRecord> records_;
  double perimeter_ = 0.0;
  double lipschitz_ = 0.0;
  bool smooth_ = false;
  std::string name_;
  Point2 lo_, hi_;
};

/// Trace constant of a wedge of opening theta: 1/sin(theta/2) below pi, else 1.
double corner_q(double theta);

/// sup of q over the boundary: max(1, max corner_q).
double domain_Q(const PolygonalDomain& dom);

/// Ratio boundary length / interior perimeter of the isosceles triangle cut
/// with legs a at a corner of opening theta.
double wedge_cut_ratio(double theta, double a);

enum class Verdict { C2Clause, AlmostC1Clause, LipschitzGammaClause, Inadmissible };
const char* to_string(Verdict v);

struct AdmissibilityPoint {
  Point2 x;
  double L = 0.0;
  double q = 1.0;
  double product = 0.0;
  double slack = 0.0;
  bool corner = false;
};

struct AdmissibilityReport {
  std::vector<AdmissibilityPoint> per_point;
  Verdict verdict = Verdict::Inadmissible;
  double epsilon0 = 0.0;
  double sigma = 1.0;
  double min_slack = 0.0;        // (1 - 2 eps0) sigma - L q
  double min_gamma_slack = 0.0;  // (1 - 2 eps0) sigma - gamma q; -inf without gamma
  bool admissible() const { return verdict != Verdict::Inadmissible; }
};

AdmissibilityReport admissibility_check(const PolygonalDomain& dom, const SurfaceDensity& d, double sigma,
                                        double epsilon0);

struct EmmerResult {
  bool passes = false;
  double bound = 1.0;
};

EmmerResult emmer_check(double nu, const PolygonalDomain& dom);

}  // namespace relaxbv
