#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relaxbv/errors.hpp"
#include "relaxbv/io.hpp"
#include "relaxbv/scenario.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> grid;
  std::optional<std::string> out;
  std::optional<std::string> domain, density;
  std::optional<double> sigma, epsilon0, nu;
  std::vector<std::string> params;
};

/// key=value; the value is read as JSON when it parses, else as a string.
void set_param(relaxbv::Json& params, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw relaxbv::SchemaError("--param expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
  relaxbv::Json v = relaxbv::Json::parse(value, nullptr, false);
  params[key] = v.is_discarded() ? relaxbv::Json(value) : v;
}

int run(const std::string& task, const Flags& f) {
  relaxbv::Json j = relaxbv::Json::object();
  std::string base = ".";
  if (!f.config.empty()) {
    try {
      j = relaxbv::Json::parse(relaxbv::read_text(f.config));
    } catch (const relaxbv::Json::parse_error& e) {
      throw relaxbv::SchemaError(f.config + ": JSON syntax error at byte " + std::to_string(e.byte));
    }
    if (!j.is_object()) throw relaxbv::SchemaError(f.config + ": expected an object");
    const auto parent = std::filesystem::path(f.config).parent_path();
    if (!parent.empty()) base = parent.string();
    if (j.contains("task") && j["task"] != task) {
      throw relaxbv::SchemaError(f.config + ": scenario task '" + j["task"].dump() + "' does not match subcommand '" +
                                 task + "'");
    }
  }
  j["task"] = task;
  if (f.domain) j["domain"] = *f.domain;
  if (f.density) j["density"] = *f.density;
  if (f.sigma) j["sigma"] = *f.sigma;
  if (f.epsilon0) j["epsilon0"] = *f.epsilon0;
  if (f.nu) j["nu"] = *f.nu;
  if (f.seed) j["seed"] = *f.seed;
  if (f.grid) j["h"] = *f.grid;
  if (!f.params.empty()) {
    if (!j.contains("params")) j["params"] = relaxbv::Json::object();
    for (const auto& kv : f.params) set_param(j["params"], kv);
  }
  relaxbv::Scenario s = relaxbv::scenario_from_json(j, base);
  if (f.out) s.output_dir = *f.out;
  return relaxbv::run_scenario_guarded(s, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relaxation of BV energies with contact terms: experiment runner"};
  app.set_version_flag("--version", relaxbv::kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "Scenario file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "Seed for randomized candidate pools");
  app.add_option("--grid", f.grid, "Grid spacing h");
  app.add_option("--out", f.out, "Output directory");

  const std::vector<std::pair<std::string, std::string>> tasks{
      {"yosida", "Tabulate tau and its Yosida transform"},
      {"qgeom", "Trace constants, corner data and admissibility of a domain"},
      {"energy", "Energies F and H of a field"},
      {"counterexample", "Catalog sequences and lower-semicontinuity sweeps"},
      {"relax-verify", "Upper and lower gaps of the relaxed energy"},
      {"extend-verify", "Boundary-layer extension bounds"},
      {"solve", "Primal-dual minimization"},
  };
  std::string chosen;
  for (const auto& [name, help] : tasks) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--domain", f.domain, "square, l_shape, disk<n> or a domain file");
    sub->add_option("--density", f.density, "Density specification");
    sub->add_option("--sigma", f.sigma, "Variation weight sigma");
    sub->add_option("--epsilon0", f.epsilon0, "Admissibility margin");
    sub->add_option("--nu", f.nu, "Capillarity contact coefficient");
    sub->add_option("--param", f.params, "Task parameter key=value (repeatable)");
    sub->callback([&chosen, n = name] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return run(chosen, f);
  } catch (const relaxbv::Error& e) {
    relaxbv::Json err;
    err["error"] = {{"kind", e.kind()}, {"message", e.what()}};
    err["version"] = relaxbv::kVersion;
    std::cerr << err.dump(2) << "\n";
    return 2;
  }
}
