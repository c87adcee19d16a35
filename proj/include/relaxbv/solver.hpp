#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relaxbv/density.hpp"
#include "relaxbv/geometry.hpp"
#include "relaxbv/grid.hpp"

namespace relaxbv {

/// Volume term of the discrete energy.
///   None:        no volume term (needs SolverConfig::allow_no_bulk).
///   Fidelity:    alpha/2 (u - f)^2 with sigma TV as the gradient term.
///   Capillarity: u^2 with the area integrand sqrt(1 + |Du|^2).
enum class BulkKind { None, Fidelity, Capillarity };
const char* to_string(BulkKind k);
BulkKind parse_bulk(const std::string& name);

struct BulkTerm {
  BulkKind kind = BulkKind::Fidelity;
  double alpha = 1.0;
  /// Fidelity target; zero when unset.
  std::function<double(Point2)> target;
};

struct SolverConfig {
  double h = 1.0 / 128.0;
  int iters = 5000;
  double tol = 1e-6;
  /// Area smoothing parameter; the area term is handled exactly, so this is
  /// only echoed in reports.
  double beta = 1e-3;
  /// Multiplies t_primal * t_dual * ||K||^2 (1 is the stability bound).
  double step_scale = 1.0;
  bool allow_no_bulk = false;
};

struct SolverState {
  GridField u;
  /// Dual field, two components per cell.
  std::vector<double> xi;
  double t_primal = 0.0;
  double t_dual = 0.0;
  /// Bound on |xi| enforced by the dual step.
  double dual_bound = 1.0;
  int iterations = 0;
  std::vector<double> energy_history;
  std::vector<double> residual_history;
};

struct SolverResult {
  GridField u;
  EnergyReport report;
  double residual = 0.0;
  bool converged = false;
  /// "basic" (constant steps) or "linear" (strongly convex on both sides).
  std::string algorithm;
  bool nonconvex_boundary = false;
  bool beta_used = false;
  std::vector<std::string> warnings;
  SolverState state;
};

/// Primal-dual minimization of  G(u) + sum_edges tau_hat(x, Tr u)  plus
/// sigma TV(u) or the area term, starting from u = 0.
SolverResult minimize_energy(const PolygonalDomain& dom, const SurfaceDensity& d, const YosidaContext& ctx,
                             const BulkTerm& bulk, const SolverConfig& config = {});

/// argmin_q tau_hat(x,q) + |q - v|^2 / (2t) for scalar q.
double prox_contact(const SurfaceDensity& d, const YosidaContext& ctx, Point2 x, double t, double v);

struct Diagnostics {
  std::vector<double> energy_curve;
  std::vector<double> residual_curve;
  double dual_feasibility_max = 0.0;
  /// Increases of the 5-iterate window mean after iteration 10.
  int monotonicity_violations = 0;
  bool monotone = true;
};

Diagnostics diagnostics(const SolverState& state);

}  // namespace relaxbv
