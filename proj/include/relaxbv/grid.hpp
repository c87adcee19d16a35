#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "relaxbv/density.hpp"
#include "relaxbv/geometry.hpp"
#include "relaxbv/value.hpp"

namespace relaxbv {

/// Boundary sample of a lattice: a point on the boundary, the arc-length
/// weight it carries, and the masked cell its trace is read from.
struct TraceProbe {
  Point2 x;
  Point2 normal;
  double weight = 0.0;
  std::size_t edge = 0;
  double arclength = 0.0;
  std::size_t cell = 0;
};

/// Projection of a cell centre onto the boundary.
struct CellProjection {
  double distance = 0.0;
  double arclength = 0.0;
  std::size_t edge = 0;
};

/// Masked rectangular lattice over a polygonal domain, or a 1-D interval
/// stored as a single row. Cell (i, j) has centre origin + ((i+.5)h, (j+.5)h)
/// and index j * nx + i.
class Lattice {
 public:
  static std::shared_ptr<const Lattice> build(const PolygonalDomain& dom, double h);
  static std::shared_ptr<const Lattice> interval(double a, double b, std::size_t cells);

  bool one_d() const { return one_d_; }
  double h() const { return h_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t cells() const { return nx_ * ny_; }
  Point2 origin() const { return origin_; }
  std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
  Point2 center(std::size_t idx) const;
  bool masked(std::size_t idx) const { return mask_[idx] != 0; }
  const std::vector<unsigned char>& mask() const { return mask_; }
  const std::vector<std::size_t>& masked_cells() const { return active_; }
  /// h^2 in 2-D, h in 1-D.
  double cell_measure() const { return one_d_ ? h_ : h_ * h_; }
  /// Cell containing x, or npos.
  std::size_t locate(Point2 x) const;
  /// Nearest masked cell to x within `rings` cells, or npos.
  std::size_t nearest_masked(Point2 x, int rings = 3) const;
  const std::vector<TraceProbe>& probes() const { return probes_; }
  /// Null for 1-D lattices.
  const PolygonalDomain* domain() const { return domain_ ? domain_.get() : nullptr; }
  /// Boundary projection of every masked cell centre (computed once).
  const std::vector<CellProjection>& boundary_map() const;
  /// Largest boundary distance of a probe cell centre.
  double probe_depth() const { return probe_depth_; }
  /// Interval end points for 1-D lattices.
  double a() const { return a_; }
  double b() const { return b_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  bool one_d_ = false;
  double h_ = 0.0;
  std::size_t nx_ = 0, ny_ = 0;
  Point2 origin_;
  double a_ = 0.0, b_ = 0.0;
  std::vector<unsigned char> mask_;
  std::vector<std::size_t> active_;
  std::vector<TraceProbe> probes_;
  std::shared_ptr<const PolygonalDomain> domain_;
  double probe_depth_ = 0.0;
  mutable std::once_flag map_once_;
  mutable std::vector<CellProjection> map_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

/// Straight jump of a piecewise-constant field.
struct JumpSegment {
  Point2 a, b;
  double height = 0.0;
};

/// Boundary segment on which an exact field has constant trace.
struct TracePiece {
  Point2 a, b;
  Value value;
};

/// Analytic description of a piecewise-constant field.
struct ExactData {
  std::vector<JumpSegment> jumps;
  std::vector<TracePiece> trace;
};

/// Cell values of u in R^M on a lattice. Unmasked cells hold zeros.
class GridField {
 public:
  GridField() = default;
  GridField(LatticePtr lattice, int dim = 1);

  static GridField constant(LatticePtr lattice, const Value& c);
  /// Cell averages of f on an s x s sub-grid of each cell.
  static GridField sample(LatticePtr lattice, const std::function<Value(Point2)>& f, int dim = 1,
                          int supersample = 1);
  /// Exact cell averages of height * indicator(convex polygon).
  static GridField convex_indicator(LatticePtr lattice, const std::vector<Point2>& polygon, double height);

  const LatticePtr& lattice() const { return lattice_; }
  int dim() const { return dim_; }
  double h() const { return lattice_->h(); }
  std::size_t cells() const { return lattice_->cells(); }

  Value at(std::size_t idx) const;
  void set(std::size_t idx, const Value& v);
  double component(std::size_t idx, int k) const { return data_[idx * dim_ + k]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  const std::optional<ExactData>& exact() const { return exact_; }
  void set_exact(ExactData e) { exact_ = std::move(e); }
  void clear_exact() { exact_.reset(); }

  /// Pointwise sum; exact data is dropped.
  GridField operator+(const GridField& o) const;
  GridField operator-(const GridField& o) const;
  GridField operator*(double s) const;
  double max_abs() const;
  bool finite() const;

 private:
  void check_compatible(const GridField& o) const;

  LatticePtr lattice_;
  int dim_ = 1;
  std::vector<double> data_;
  std::optional<ExactData> exact_;
};

struct TraceEntry {
  Point2 x;
  Point2 normal;
  double weight = 0.0;
  Value value;
  std::size_t edge = 0;
  double arclength = 0.0;
};

struct TraceSample {
  std::vector<TraceEntry> entries;
  double total_weight() const;
  /// sum w |value|
  double integral_abs() const;
  /// Entrywise difference; both samples must share probes.
  TraceSample minus(const TraceSample& o) const;
};

enum class Validity { ExactClosedForm, GridEstimate };
const char* to_string(Validity v);

enum class EnergyMode { Auto, Grid, Exact };

struct EnergyReport {
  double tv_term = 0.0;
  double contact_term = 0.0;
  double bulk_term = 0.0;
  double total = 0.0;
  std::vector<double> per_edge;
  Validity validity = Validity::GridEstimate;
  /// Set when the variation is infinite (field off BV); total is then +inf.
  bool tv_infinite = false;
  std::vector<std::string> notes;

  void finalize();
};

/// Isotropic TV with forward differences; a difference towards an unmasked
/// cell is zero. Frobenius norm for M > 1.
double tv_grid(const GridField& u);
/// sum length * |height|.
double tv_exact_pc(const std::vector<JumpSegment>& jumps);

TraceSample trace_extract(const GridField& u);

double contact_energy(const TraceSample& tr, const std::function<double(Point2, const Value&)>& tau,
                      std::vector<double>* per_edge = nullptr);

EnergyReport energy_F(const GridField& u, const SurfaceDensity& d, double sigma, EnergyMode mode = EnergyMode::Auto);
EnergyReport energy_H(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx,
                      EnergyMode mode = EnergyMode::Auto);
EnergyReport energy_capillarity(const GridField& u, double nu);

/// sum measure * |u - v| over masked cells.
double l1_distance(const GridField& u, const GridField& v);
double l1_norm(const GridField& u);

/// Area of the intersection of an axis-aligned box with a convex polygon.
double box_polygon_overlap(Point2 lo, Point2 hi, const std::vector<Point2>& convex);

}  // namespace relaxbv
