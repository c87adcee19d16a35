#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relaxbv/density.hpp"
#include "relaxbv/extension.hpp"
#include "relaxbv/geometry.hpp"
#include "relaxbv/grid.hpp"

namespace relaxbv {

/// Counterexample families.
///   E1:    u_n = n on {x1 + x2 < 1/n} in the unit square, limit 0.
///   E2:    u_n = min(|x|, (n-1)(1-|x|)) in the unit disk, limit |x|.
///   LOG1D: u_n = max(log x, -log n) on (0,1), limit log x (not BV).
enum class Family { E1, E2, LOG1D };
const char* to_string(Family f);
Family parse_family(const std::string& name);

struct SequenceSpec {
  Family family = Family::E1;
  double lambda = 0.0;
  double sigma = 1.0;
  std::vector<int> ns{4, 8, 16, 32};
};

/// Domain of a 2-D family (the disk is a flagged 256-gon).
PolygonalDomain catalog_domain(Family f);
/// Contact density of a family: linear lambda (E1), absolute lambda (E2),
/// linear 1 (LOG1D).
SurfaceDensity catalog_density(Family f, double lambda);
/// Lattice for a family at spacing h (LOG1D: 1/h cells on (0,1)).
LatticePtr catalog_lattice(Family f, double h);

/// Member n realized on a lattice; E1 carries its exact jump set.
GridField realize_member(Family f, int n, const LatticePtr& lattice);
/// Limit field (LOG1D: log x cell averages).
GridField realize_limit(Family f, const LatticePtr& lattice);

/// Analytic F(u_n) for density d.
double member_energy_exact(Family f, int n, const SurfaceDensity& d, double sigma);

struct CounterexampleResult {
  std::vector<int> ns;
  std::vector<double> per_n;       // analytic
  std::vector<double> per_n_grid;  // empty unless a grid was requested
  double limit_of_sequence = 0.0;
  double energy_of_limit = 0.0;    // F(limit), +inf off BV
  double energy_of_limit_H = 0.0;  // H(limit), +inf off BV
  bool limit_off_bv = false;
  std::vector<std::string> flags;
};

CounterexampleResult counterexample_energy(const SequenceSpec& spec, std::optional<double> grid_h = std::nullopt);

struct ViolationReport {
  double liminf_energy = 0.0;
  double limit_energy_F = 0.0;
  double limit_energy_H = 0.0;
  /// liminf < F(limit) - tol.
  bool violated = false;
  /// liminf < H(limit) - tol (the relaxation itself would be wrong).
  bool below_relaxation = false;
  /// liminf - F(limit).
  double gap = 0.0;
  bool limit_off_bv = false;
};

ViolationReport detect_lsc_violation(const SequenceSpec& spec, const SurfaceDensity& d, const YosidaContext& ctx,
                                     double tol = 1e-9);

struct RelaxedEnergy {
  EnergyReport energy;
  AdmissibilityReport admissibility;
  bool representation_claimed = false;
  std::vector<std::string> warnings;
};

RelaxedEnergy relaxed_energy(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx,
                             const PolygonalDomain& dom, double epsilon0 = 0.1);

/// Sequence limits are estimated from members at doubling n: monotone
/// sequences by extrapolation 2 e(n) - e(n/2), others by the tail minimum.
struct RepresentationReport {
  double H = 0.0;
  double F = 0.0;
  double upper_gap = 0.0;      // lim F(recovery_n) - H
  double upper_gap_raw = 0.0;  // F(recovery_n) - H at the largest feasible n
  int upper_n = 0;
  double lower_gap = 0.0;       // min over candidate families of liminf F - H
  double lower_gap_raw = 0.0;   // same with tail minima
  double lower_gap_vs_F = 0.0;  // liminf F - F(u)
  std::string worst_candidate;
  std::size_t candidates_evaluated = 0;
  std::size_t members_skipped = 0;
  Verdict verdict = Verdict::Inadmissible;
};

struct RepresentationOptions {
  int budget = 64;           // largest sequence index
  std::uint64_t seed = 1;
  double epsilon0 = 0.1;
  double boundary_eps = 1e-3;  // accuracy of the optimal boundary values
  int bump_points = 4;
};

RepresentationReport verify_representation(const GridField& u, const SurfaceDensity& d, const YosidaContext& ctx,
                                           const PolygonalDomain& dom, const RepresentationOptions& options = {});

}  // namespace relaxbv
