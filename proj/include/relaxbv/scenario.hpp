#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relaxbv/density.hpp"
#include "relaxbv/io.hpp"

namespace relaxbv {

/// Density text (docs/density_grammar.md):
///   linear:<l> | linear:<a>,<b> | absolute:<l>[:2] | quadratic[:2]
///   table:<p>,<v>;<p>,<v>... | steps:<v0>;<b1>;<v1>;...
///   <expression> [@ c=<c> L=<L>] [lip=<lip>]
/// Errors carry the byte offset of the offending character.
SurfaceDensity parse_density_spec(std::string_view text);

enum class Task { Yosida, Qgeom, Energy, Counterexample, RelaxVerify, ExtendVerify, Solve };
const char* to_string(Task t);
Task parse_task(const std::string& name);

struct Scenario {
  Task task = Task::Qgeom;
  /// Builtin name (square, l_shape, disk<n>) or a path to a domain file.
  std::string domain = "square";
  std::string density = "linear:0";
  /// False: solve with capillarity uses nu * Tr u as the contact term.
  bool density_given = false;
  double sigma = 1.0;
  double epsilon0 = 0.1;
  double nu = 0.0;
  std::uint64_t seed = 1;
  double h = 1.0 / 128.0;
  std::string output_dir = "out";
  /// Task parameters; keys are checked against the task's schema.
  Json params = Json::object();
  /// Directory used to resolve relative file paths.
  std::string base_dir = ".";
};

/// Strict: unknown keys, wrong types and out-of-range values raise
/// SchemaError before any computation.
Scenario scenario_from_json(const Json& j, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);
Json scenario_to_json(const Scenario& s);
/// FNV-1a of the canonical scenario JSON (sorted keys, compact).
std::uint64_t scenario_hash(const Scenario& s);
std::string hash_hex(std::uint64_t h);

/// Validates task parameters against the schema of s.task.
void validate_params(const Scenario& s);

/// Runs the task and writes its artifacts under s.output_dir. Returns the
/// main report (also written as <task>.json).
Json run_scenario(const Scenario& s, std::ostream& log);

/// run_scenario with errors turned into <output_dir>/error.json and a
/// nonzero status.
int run_scenario_guarded(const Scenario& s, std::ostream& log, std::ostream& err);

}  // namespace relaxbv
