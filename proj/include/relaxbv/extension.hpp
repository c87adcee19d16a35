#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relaxbv/density.hpp"
#include "relaxbv/grid.hpp"

namespace relaxbv {

struct ExtensionOptions {
  /// Tangential mollification scale per unit depth.
  double kappa = 0.5;
  /// Fixed layer width; unset selects it from the delta ladder.
  std::optional<double> delta;
};

struct ExtensionResult {
  GridField field;
  double l1_ratio = 0.0;    // int |w| / int |g|
  double grad_ratio = 0.0;  // TV(w) / int |g|
  double delta = 0.0;
  double boundary_mass = 0.0;  // int |g|
  bool corner_overlap = false;
  int ladder_steps = 0;
  bool bounds_met = true;
  std::vector<std::string> warnings;
};

/// Boundary-layer field w = phi(s/delta) * G_{kappa s}(g)(pi(x)) with s the
/// depth below the probe cells, phi(s) = max(0, 1 - s), pi the nearest-point
/// projection and G a tangential mollifier in arclength.
ExtensionResult extend_boundary_data(const TraceSample& g, double eps, const LatticePtr& lattice,
                                     const ExtensionOptions& options = {});

/// u + extend(p - Tr u, 1/n).
GridField recovery_sequence(const GridField& u, const TraceSample& p, int n, const ExtensionOptions& options = {},
                            ExtensionResult* info = nullptr);

/// Per-sample minimizer of tau(x,q) + sigma|t - q| with t = Tr u.
TraceSample optimal_boundary_values(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx,
                                    double eps);

/// Minimizer and value of q -> tau(x,q) + sigma|t - q| for one sample.
struct BoundaryChoice {
  Value q;
  double value = 0.0;
};
BoundaryChoice optimal_boundary_value(const SurfaceDensity& d, const YosidaContext& ctx, Point2 x, const Value& t,
                                      double eps);

}  // namespace relaxbv
