#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relaxbv/expression.hpp"
#include "relaxbv/value.hpp"

namespace relaxbv {

/// Values below this are reported as -infinity. Normal integrands may take
/// the value -inf pointwise; the library clamps instead of propagating it.
inline constexpr double kNegativeInfinitySentinel = -1e15;

enum class DensityKind { Linear, Absolute, Quadratic, Tabulated, Expression, Composed };
enum class Regularity { Caratheodory, NormalIntegrand };

using BoundaryFunction = std::function<double(Point2)>;

/// Data of the affine lower bound  tau(x,p) >= -c(x) - L(x)|p|.
struct LowerBoundData {
  BoundaryFunction c;
  BoundaryFunction L;
  double c_sup = 0.0;
  double L_sup = 0.0;
  bool estimated = false;

  static LowerBoundData constant(double c, double L);
};

/// Contact integrand tau(x, p) on the boundary of the domain.
class SurfaceDensity {
 public:
  /// tau = lambda * p.
  static SurfaceDensity linear(double lambda);
  /// tau = <a, p> for a vector coefficient a (M = a.dim()).
  static SurfaceDensity linear(const Value& coefficient);
  /// tau = lambda * |p|.
  static SurfaceDensity absolute(double lambda, int dim = 1);
  /// tau = |p|^2.
  static SurfaceDensity quadratic(int dim = 1);
  /// Piecewise-linear interpolation of (knots, values), constant outside.
  static SurfaceDensity tabulated(std::vector<double> knots, std::vector<double> values);
  /// Piecewise-constant: levels[i] on (breaks[i-1], breaks[i]); at a break
  /// the larger neighbouring level (upper semicontinuous).
  static SurfaceDensity steps(std::vector<double> breaks, std::vector<double> levels);
  /// Scalar expression in p, x1, x2. Without lower-bound data the bound is
  /// estimated by sampling and flagged as estimated.
  static SurfaceDensity expression(Expression expr, std::optional<LowerBoundData> bound = std::nullopt,
                                   std::optional<double> lipschitz = std::nullopt);
  /// Arbitrary callable; used for derived densities (approximation ladder).
  static SurfaceDensity composed(std::function<double(Point2, const Value&)> fn, LowerBoundData bound,
                                 Regularity regularity, int dim, std::string label, bool x_independent = true);

  DensityKind kind() const { return kind_; }
  Regularity regularity() const { return regularity_; }
  int dim() const { return dim_; }
  double lambda() const { return coefficient_[0]; }
  const Value& coefficient() const { return coefficient_; }
  const LowerBoundData& lower_bound() const { return bound_; }
  /// Global Lipschitz constant of p -> tau(x,p) when known.
  std::optional<double> lipschitz_modulus() const { return lipschitz_; }
  bool x_independent() const { return x_independent_; }
  /// Points where tau(x, .) may jump (tabulated kinds only).
  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<double>& table_values() const { return values_; }
  const std::string& label() const { return label_; }

  SurfaceDensity with_lower_bound(LowerBoundData bound) const;
  /// Rejects evaluation points farther than tol from the boundary.
  SurfaceDensity with_boundary_check(std::function<double(Point2)> distance, double tol) const;

  /// Throws PreconditionError when x is farther than the tolerance from the
  /// boundary (no-op without a boundary check).
  void check_boundary(Point2 x) const;

  /// tau(x, p), clamped at kNegativeInfinitySentinel.
  double operator()(Point2 x, const Value& p) const;

  /// Text accepted by parse_density_spec that reproduces this density.
  std::string spec() const;

 private:
  double raw(Point2 x, const Value& p) const;

  DensityKind kind_ = DensityKind::Linear;
  Regularity regularity_ = Regularity::Caratheodory;
  int dim_ = 1;
  Value coefficient_{0.0};
  std::vector<double> breaks_;  // knots (Tabulated) or breaks (steps)
  std::vector<double> values_;
  bool step_table_ = false;
  std::shared_ptr<const Expression> expr_;
  std::function<double(Point2, const Value&)> fn_;
  LowerBoundData bound_;
  std::optional<double> lipschitz_;
  bool x_independent_ = true;
  std::string label_;
  std::function<double(Point2)> boundary_distance_;
  double boundary_tol_ = 0.0;
};

/// Evaluates tau(x, p); rejects non-finite p.
double eval_density(const SurfaceDensity& d, Point2 x, const Value& p);

struct DensitySample {
  Point2 x;
  Value p;
};

/// Cartesian product of boundary points and `count` equispaced scalar p.
std::vector<DensitySample> sample_grid(std::span<const Point2> xs, double p_min, double p_max, std::size_t count);

struct LowerBoundReport {
  bool holds = true;
  double worst_violation = 0.0;  // most negative slack tau + c + L|p|
  DensitySample worst;
  std::size_t samples = 0;
};

LowerBoundReport verify_lower_bound(const SurfaceDensity& d, std::span<const DensitySample> samples,
                                    double tol = 1e-12);

/// Estimates constant (c, L) by sampling p in [-p_range, p_range] at xs.
LowerBoundData estimate_lower_bound(const std::function<double(Point2, const Value&)>& tau,
                                    std::span<const Point2> xs, double p_range = 100.0);

struct YosidaContext {
  double sigma = 1.0;
  double search_radius = 0.0;  // 0: from yosida_radius
  double q_grid_step = 0.0;    // 0: max(1e-4, R/2000)
};

/// Margin below which sigma - ||L|| is treated as zero.
inline constexpr double kRadiusMargin = 1e-6;
inline constexpr double kDefaultRadiusCap = 1e6;

/// Radius R such that every q with tau(x,q) + sigma|p-q| <= tau(x,p) + 1
/// satisfies |q| <= R.
double yosida_radius(const SurfaceDensity& d, double sigma, Point2 x, const Value& p,
                     double eta_cap = kDefaultRadiusCap);

/// inf_q tau(x,q) + sigma|p - q|. Closed forms for the builtin kinds,
/// otherwise a grid search over |q| <= R followed by local refinement.
double yosida_eval(const SurfaceDensity& d, const YosidaContext& ctx, Point2 x, const Value& p);

/// True when yosida_eval uses an exact formula for this density.
bool yosida_has_closed_form(const SurfaceDensity& d);

/// Piecewise-linear partition of unity on the annuli {j-1 < |p| < j+1}.
double envelope_weight(int j, double r);

/// Upper envelope T(x,p) = sum_j M_{j+2}(x) psi_j(|p|) with
/// M_j(x) = max(sup_{|q|<=j} tau(x,q), 0). Caches M_j for one x.
class UpperEnvelope {
 public:
  UpperEnvelope(const SurfaceDensity& d, Point2 x);
  double M(int j) const;
  double operator()(const Value& p) const;

 private:
  const SurfaceDensity* d_;
  Point2 x_;
  mutable std::vector<double> m_;  // m_[j] = M_j, m_[0] = max(tau(x,0), 0)
};

double upper_envelope_T(const SurfaceDensity& d, Point2 x, const Value& p);

/// tau_k = t_k + T with t = tau - T and t_k(p) = sup_q t(q) - k|p - q|.
double lip_upper_approx(const SurfaceDensity& d, int k, Point2 x, const Value& p);

/// tau_k wrapped as a density (caches the envelope for x-independent tau).
SurfaceDensity lip_upper_density(const SurfaceDensity& d, int k);

/// Snapshot of tau(x, .) as a piecewise-linear table on [p_min, p_max].
SurfaceDensity tabulate(const SurfaceDensity& d, Point2 x, double p_min, double p_max, double step);

}  // namespace relaxbv
