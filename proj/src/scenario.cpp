#include "relaxbv/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <regex>
#include <set>

#include "relaxbv/errors.hpp"
#include "relaxbv/expression.hpp"

namespace relaxbv {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- densities

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

/// Cursor over the density text; offsets refer to the full input.
class SpecReader {
 public:
  SpecReader(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

  double number() {
    skip_space();
    const char* b = text_.data() + pos_;
    const char* e = text_.data() + text_.size();
    if (b < e && *b == '+') ++b;
    double v = 0.0;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || !std::isfinite(v)) throw ParseError("expected a finite number", pos_);
    pos_ = static_cast<std::size_t>(res.ptr - text_.data());
    skip_space();
    return v;
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
  }
  bool done() {
    skip_space();
    return pos_ >= text_.size();
  }
  void finish() {
    if (!done()) throw ParseError("unexpected trailing text", pos_);
  }
  std::size_t pos() const { return pos_; }

 private:
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }
  std::string_view text_;
  std::size_t pos_;
};

int dimension_suffix(SpecReader& r) {
  if (!r.accept(':')) return 1;
  const std::size_t at = r.pos();
  const double m = r.number();
  if (m != 1.0 && m != 2.0) throw ParseError("dimension must be 1 or 2", at);
  return static_cast<int>(m);
}

SurfaceDensity parse_expression_spec(std::string_view text) {
  const std::size_t at = text.find('@');
  const std::string_view body = text.substr(0, at);
  static const std::regex kVectorVar(R"(\bp[12]\b|\bp\s*\[)");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(body.begin(), body.end(), m, kVectorVar)) {
    throw UnsupportedArity("expression densities are scalar (M = 1); vector component used at offset " +
                           std::to_string(m.position(0)));
  }
  Expression expr = Expression::parse(body);
  if (at == std::string_view::npos) return SurfaceDensity::expression(std::move(expr));

  std::optional<double> c, L, lip;
  std::size_t pos = at + 1;
  while (true) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos >= text.size()) break;
    const std::size_t key_start = pos;
    while (pos < text.size() && text[pos] != '=' && !is_space(text[pos])) ++pos;
    const std::string_view key = text.substr(key_start, pos - key_start);
    if (pos >= text.size() || text[pos] != '=') throw ParseError("expected key=value", key_start);
    ++pos;
    std::size_t end = pos;
    while (end < text.size() && !is_space(text[end])) ++end;
    SpecReader r(text.substr(0, end), pos);
    const double v = r.number();
    r.finish();
    if (v < 0.0) throw ParseError("annotation values must be nonnegative", pos);
    std::optional<double>* slot = key == "c" ? &c : key == "L" ? &L : key == "lip" ? &lip : nullptr;
    if (!slot) throw ParseError("unknown annotation '" + std::string(key) + "' (expected c, L or lip)", key_start);
    if (*slot) throw ParseError("duplicate annotation '" + std::string(key) + "'", key_start);
    *slot = v;
    pos = end;
  }
  if (c.has_value() != L.has_value()) throw ParseError("c and L must be declared together", at);
  std::optional<LowerBoundData> bound;
  if (c) bound = LowerBoundData::constant(*c, *L);
  return SurfaceDensity::expression(std::move(expr), std::move(bound), lip);
}

}  // namespace

SurfaceDensity parse_density_spec(std::string_view text) {
  std::size_t start = 0;
  while (start < text.size() && is_space(text[start])) ++start;
  if (start == text.size()) throw ParseError("empty density specification", 0);
  const std::string_view rest = text.substr(start);
  auto starts = [&](std::string_view prefix) { return rest.substr(0, prefix.size()) == prefix; };

  if (starts("linear:")) {
    SpecReader r(text, start + 7);
    const double a = r.number();
    if (r.accept(',')) {
      const double b = r.number();
      r.finish();
      return SurfaceDensity::linear(Value{a, b});
    }
    r.finish();
    return SurfaceDensity::linear(a);
  }
  if (starts("absolute:")) {
    SpecReader r(text, start + 9);
    const double lambda = r.number();
    const int dim = dimension_suffix(r);
    r.finish();
    return SurfaceDensity::absolute(lambda, dim);
  }
  if (starts("quadratic") && (rest.size() == 9 || rest[9] == ':' || is_space(rest[9]))) {
    SpecReader r(text, start + 9);
    const int dim = dimension_suffix(r);
    r.finish();
    return SurfaceDensity::quadratic(dim);
  }
  if (starts("table:")) {
    SpecReader r(text, start + 6);
    std::vector<double> knots, values;
    do {
      const std::size_t at = r.pos();
      knots.push_back(r.number());
      r.expect(',');
      values.push_back(r.number());
      if (knots.size() > 1 && !(knots.back() > knots[knots.size() - 2])) {
        throw ParseError("table knots must increase", at);
      }
    } while (r.accept(';'));
    r.finish();
    return SurfaceDensity::tabulated(std::move(knots), std::move(values));
  }
  if (starts("steps:")) {
    SpecReader r(text, start + 6);
    std::vector<double> breaks, levels{r.number()};
    while (r.accept(';')) {
      const std::size_t at = r.pos();
      breaks.push_back(r.number());
      if (breaks.size() > 1 && !(breaks.back() > breaks[breaks.size() - 2])) {
        throw ParseError("step breaks must increase", at);
      }
      r.expect(';');
      levels.push_back(r.number());
    }
    r.finish();
    return SurfaceDensity::steps(std::move(breaks), std::move(levels));
  }
  return parse_expression_spec(text);
}

// ---------------------------------------------------------------- scenarios

const char* to_string(Task t) {
  switch (t) {
    case Task::Yosida: return "yosida";
    case Task::Qgeom: return "qgeom";
    case Task::Energy: return "energy";
    case Task::Counterexample: return "counterexample";
    case Task::RelaxVerify: return "relax-verify";
    case Task::ExtendVerify: return "extend-verify";
    case Task::Solve: return "solve";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  for (Task t : {Task::Yosida, Task::Qgeom, Task::Energy, Task::Counterexample, Task::RelaxVerify,
                 Task::ExtendVerify, Task::Solve}) {
    if (name == to_string(t)) return t;
  }
  throw SchemaError("unknown task '" + name +
                    "' (expected yosida, qgeom, energy, counterexample, relax-verify, extend-verify or solve)");
}

namespace {

double get_real(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path + ": number is not finite");
  return v;
}

std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path + ": expected a string");
  return j.get<std::string>();
}

bool is_builtin_domain(const std::string& name) {
  if (name == "square" || name == "l_shape") return true;
  return std::regex_match(name, std::regex("disk[0-9]+"));
}

/// Typed access to one task's parameters with range checks.
class Params {
 public:
  Params(const Json& j, std::string task) : j_(j), task_(std::move(task)) {}

  bool has(const char* key) const { return j_.contains(key); }
  std::string path(const char* key) const { return "params." + std::string(key); }

  double real(const char* key, double def, double lo, double hi, bool open_lo = false) const {
    if (!has(key)) return def;
    const double v = get_real(j_.at(key), path(key));
    if (v < lo || v > hi || (open_lo && v == lo)) {
      throw SchemaError(path(key) + ": " + format_double(v) + " is outside " + (open_lo ? "(" : "[") +
                        format_double(lo) + ", " + format_double(hi) + "]");
    }
    return v;
  }
  long integer(const char* key, long def, long lo, long hi) const {
    if (!has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) throw SchemaError(path(key) + ": expected an integer");
    const long x = v.get<long>();
    if (x < lo || x > hi) throw SchemaError(path(key) + ": " + std::to_string(x) + " is outside the allowed range");
    return x;
  }
  std::string string(const char* key, std::string def, std::initializer_list<const char*> allowed = {}) const {
    if (!has(key)) return def;
    std::string v = get_string(j_.at(key), path(key));
    if (allowed.size() && std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return v == a; })) {
      throw SchemaError(path(key) + ": unsupported value '" + v + "'");
    }
    return v;
  }
  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) throw SchemaError(path(key) + ": expected a boolean");
    return j_.at(key).get<bool>();
  }
  std::vector<double> reals(const char* key, std::vector<double> def) const {
    if (!has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_array() || v.empty()) throw SchemaError(path(key) + ": expected a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_real(v[i], path(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  std::vector<std::string> strings(const char* key, std::vector<std::string> def) const {
    if (!has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_array() || v.empty()) throw SchemaError(path(key) + ": expected a nonempty array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_string(v[i], path(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  std::vector<int> ints(const char* key, std::vector<int> def, int lo) const {
    if (!has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_array() || v.empty()) throw SchemaError(path(key) + ": expected a nonempty array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long>() < lo) {
        throw SchemaError(path(key) + "[" + std::to_string(i) + "]: expected an integer >= " + std::to_string(lo));
      }
      out.push_back(v[i].get<int>());
    }
    return out;
  }

 private:
  const Json& j_;
  std::string task_;
};

const std::map<Task, std::set<std::string>>& param_keys() {
  static const std::map<Task, std::set<std::string>> keys{
      {Task::Yosida, {"p_min", "p_max", "count", "x", "ladder_k"}},
      {Task::Qgeom, {"per_point"}},
      {Task::Energy, {"field", "mode", "functional", "supersample"}},
      {Task::Counterexample, {"family", "lambdas", "lambda_min", "lambda_max", "lambda_step", "ns", "grid_h"}},
      {Task::RelaxVerify, {"fields", "budget", "bump_points", "boundary_eps"}},
      {Task::ExtendVerify, {"data", "eps", "kappa", "delta"}},
      {Task::Solve, {"bulk", "alpha", "target", "iters", "tol", "beta", "step_scale", "allow_no_bulk", "field_format"}},
  };
  return keys;
}

std::string resolve(const Scenario& s, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(s.base_dir) / p).string();
}

struct YosidaParams {
  double lo = -3.0, hi = 3.0;
  long count = 601, k = 0;
  std::optional<Point2> x;
};

YosidaParams yosida_params(const Json& j) {
  const Params p(j, "yosida");
  YosidaParams y;
  y.lo = p.real("p_min", -3.0, -1e6, 1e6);
  y.hi = p.real("p_max", 3.0, -1e6, 1e6);
  if (!(y.hi > y.lo)) throw SchemaError("params.p_max: must exceed p_min");
  y.count = p.integer("count", 601, 2, 1000000);
  y.k = p.integer("ladder_k", 0, 0, 1000000);
  if (p.has("x")) {
    const auto v = p.reals("x", {});
    if (v.size() != 2) throw SchemaError("params.x: expected [x1, x2]");
    y.x = Point2{v[0], v[1]};
  }
  return y;
}

bool qgeom_params(const Json& j) { return Params(j, "qgeom").boolean("per_point", false); }

/// Expressions in x1, x2 (fields, boundary data, targets).
std::vector<std::string> expressions(const Params& p, const char* key, std::vector<std::string> def) {
  auto v = p.strings(key, std::move(def));
  for (const auto& text : v) (void)Expression::parse(text);
  return v;
}

struct EnergyParams {
  int supersample = 1;
  EnergyMode mode = EnergyMode::Grid;
  std::string functional = "both";
  Json field = 0.0;
};

EnergyParams energy_params(const Json& j) {
  const Params p(j, "energy");
  EnergyParams e;
  e.supersample = static_cast<int>(p.integer("supersample", 1, 1, 16));
  const std::string mode = p.string("mode", "grid", {"auto", "grid", "exact"});
  e.mode = mode == "auto" ? EnergyMode::Auto : mode == "exact" ? EnergyMode::Exact : EnergyMode::Grid;
  e.functional = p.string("functional", "both", {"F", "H", "both"});
  if (p.has("field")) {
    e.field = j.at("field");
    if (e.field.is_string()) (void)Expression::parse(e.field.get<std::string>());
    const bool file = e.field.is_object() && e.field.size() == 1 && e.field.contains("file") &&
                      e.field["file"].is_string();
    if (!e.field.is_number() && !e.field.is_string() && !file) {
      throw SchemaError("params.field: expected a number, an expression string or {\"file\": path}");
    }
  }
  return e;
}

struct CounterexampleParams {
  SequenceSpec spec;
  std::vector<double> lambdas;
  std::optional<double> grid_h;
};

CounterexampleParams counterexample_params(const Json& j) {
  const Params p(j, "counterexample");
  CounterexampleParams c;
  c.spec.family = parse_family(p.string("family", "E1", {"E1", "E2", "LOG1D"}));
  c.spec.ns = p.ints("ns", c.spec.ns, 2);
  if (p.has("lambdas")) {
    if (p.has("lambda_min") || p.has("lambda_max") || p.has("lambda_step")) {
      throw SchemaError("params.lambdas: give either a list or a min/max/step range");
    }
    c.lambdas = p.reals("lambdas", {});
  } else {
    const Family f = c.spec.family;
    const bool log = f == Family::LOG1D;
    const double lo = p.real("lambda_min", log ? 0.0 : -1.0, -1e3, 1e3);
    const double hi = p.real("lambda_max", log ? 0.0 : (f == Family::E2 ? 2.0 : 0.0), -1e3, 1e3);
    const double step = p.real("lambda_step", 0.05, 0.0, 1e3, true);
    if (hi < lo) throw SchemaError("params.lambda_max: must be >= lambda_min");
    const long n = std::lround(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (n > 100000) throw SchemaError("params.lambda_step: more than 100000 sweep values");
    /// Snapped to 12 decimals.
    for (long i = 0; i < n; ++i) c.lambdas.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  if (p.has("grid_h")) c.grid_h = p.real("grid_h", 0.0, 0.0, 0.5, true);
  return c;
}

struct RelaxParams {
  RepresentationOptions opt;
  std::vector<std::string> fields;
};

RelaxParams relax_params(const Json& j) {
  const Params p(j, "relax-verify");
  RelaxParams r;
  r.opt.budget = static_cast<int>(p.integer("budget", 64, 8, 4096));
  r.opt.bump_points = static_cast<int>(p.integer("bump_points", 4, 0, 64));
  r.opt.boundary_eps = p.real("boundary_eps", 1e-3, 0.0, 1.0, true);
  r.fields = expressions(p, "fields", {"0", "x1", "x1*x2"});
  return r;
}

struct ExtendParams {
  double eps = 0.1;
  ExtensionOptions opt;
  std::vector<std::string> data;
};

ExtendParams extend_params(const Json& j) {
  const Params p(j, "extend-verify");
  ExtendParams e;
  e.eps = p.real("eps", 0.1, 0.0, 1.0, true);
  e.opt.kappa = p.real("kappa", 0.5, 0.0, 10.0);
  if (p.has("delta")) e.opt.delta = p.real("delta", 0.0, 0.0, 10.0, true);
  e.data = expressions(p, "data", {"1", "x1 - x2", "max(x1, x2) - 0.5"});
  return e;
}

struct SolveParams {
  BulkKind kind = BulkKind::Capillarity;
  double alpha = 1.0;
  std::optional<std::string> target;
  SolverConfig cfg;
  std::string format = "binary";
};

SolveParams solve_params(const Json& j) {
  const Params p(j, "solve");
  SolveParams s;
  s.kind = parse_bulk(p.string("bulk", "capillarity", {"none", "fidelity", "capillarity"}));
  s.alpha = p.real("alpha", 1.0, 0.0, 1e6, true);
  if (p.has("target")) {
    s.target = p.string("target", "0");
    (void)Expression::parse(*s.target);
  }
  s.cfg.iters = static_cast<int>(p.integer("iters", 5000, 2, 10000000));
  s.cfg.tol = p.real("tol", 1e-6, 0.0, 1.0);
  s.cfg.beta = p.real("beta", 1e-3, 0.0, 1.0);
  s.cfg.step_scale = p.real("step_scale", 1.0, 0.0, 1e3, true);
  s.cfg.allow_no_bulk = p.boolean("allow_no_bulk", false);
  s.format = p.string("field_format", "binary", {"binary", "csv"});
  return s;
}

}  // namespace

void validate_params(const Scenario& s) {
  if (!s.params.is_object()) throw SchemaError("params: expected an object");
  const auto& allowed = param_keys().at(s.task);
  for (const auto& [key, _] : s.params.items()) {
    if (!allowed.count(key)) {
      throw SchemaError("params." + key + ": unknown key for task " + std::string(to_string(s.task)));
    }
  }
  switch (s.task) {
    case Task::Yosida: (void)yosida_params(s.params); break;
    case Task::Qgeom: (void)qgeom_params(s.params); break;
    case Task::Energy: (void)energy_params(s.params); break;
    case Task::Counterexample: (void)counterexample_params(s.params); break;
    case Task::RelaxVerify: (void)relax_params(s.params); break;
    case Task::ExtendVerify: (void)extend_params(s.params); break;
    case Task::Solve: (void)solve_params(s.params); break;
  }
}

Scenario scenario_from_json(const Json& j, const std::string& base_dir) {
  if (!j.is_object()) throw SchemaError("scenario: expected an object");
  static const std::set<std::string> kKeys{"task",  "domain", "density", "sigma",      "epsilon0",
                                           "nu",    "seed",   "h",       "output_dir", "params"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw SchemaError(key + ": unknown scenario key");
  }
  Scenario s;
  s.base_dir = base_dir;
  if (!j.contains("task")) throw SchemaError("task: missing");
  s.task = parse_task(get_string(j["task"], "task"));
  if (j.contains("domain")) s.domain = get_string(j["domain"], "domain");
  if (j.contains("density")) {
    s.density = get_string(j["density"], "density");
    s.density_given = true;
  }
  if (j.contains("sigma")) s.sigma = get_real(j["sigma"], "sigma");
  if (j.contains("epsilon0")) s.epsilon0 = get_real(j["epsilon0"], "epsilon0");
  if (j.contains("nu")) s.nu = get_real(j["nu"], "nu");
  if (j.contains("h")) s.h = get_real(j["h"], "h");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw SchemaError("seed: expected a nonnegative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) s.output_dir = resolve(s, get_string(j["output_dir"], "output_dir"));
  if (j.contains("params")) s.params = j["params"];
  if (!(s.sigma > 0.0)) throw SchemaError("sigma: must be positive");
  if (!(s.epsilon0 >= 0.0 && s.epsilon0 < 0.5)) throw SchemaError("epsilon0: must lie in [0, 0.5)");
  if (!(s.h > 0.0 && s.h <= 0.5)) throw SchemaError("h: must lie in (0, 0.5]");
  if (!is_builtin_domain(s.domain) && !fs::exists(resolve(s, s.domain))) {
    throw SchemaError("domain: file '" + resolve(s, s.domain) + "' does not exist");
  }
  validate_params(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw SchemaError(path + ": JSON syntax error at byte " + std::to_string(e.byte));
  }
  const fs::path parent = fs::path(path).parent_path();
  return scenario_from_json(j, parent.empty() ? "." : parent.string());
}

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["task"] = to_string(s.task);
  j["domain"] = s.domain;
  j["density"] = s.density;
  j["sigma"] = s.sigma;
  j["epsilon0"] = s.epsilon0;
  j["nu"] = s.nu;
  j["seed"] = s.seed;
  j["h"] = s.h;
  j["params"] = s.params;
  return j;
}

std::uint64_t scenario_hash(const Scenario& s) { return fnv1a(scenario_to_json(s).dump()); }

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- tasks

namespace {

struct Run {
  const Scenario& s;
  std::ostream& log;
  Json meta;

  std::string out(const std::string& name) const { return (fs::path(s.output_dir) / name).string(); }

  Json stamp(Json report) const {
    report["meta"] = meta;
    return report;
  }
  void write_json(const std::string& name, const Json& j) const {
    write_text(out(name), j.dump(2) + "\n");
    log << "wrote " << out(name) << "\n";
  }
  void write(const std::string& name, const std::string& text) const {
    write_text(out(name), text);
    log << "wrote " << out(name) << "\n";
  }

  PolygonalDomain domain() const {
    if (is_builtin_domain(s.domain)) return builtin_domain(s.domain);
    return load_domain(resolve(s, s.domain));
  }
  YosidaContext ctx() const { return {s.sigma, 0.0, 0.0}; }
};

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string line;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) line += ",";
    first = false;
    line += c;
  }
  return line + "\n";
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::function<double(Point2)> field_function(const std::string& text) {
  auto e = std::make_shared<const Expression>(Expression::parse(text));
  return [e](Point2 x) { return e->evaluate(0.0, x.x, x.y); };
}

GridField load_field_param(const Run& r, const Json& spec, const LatticePtr& lat, int supersample) {
  if (spec.is_number()) return GridField::constant(lat, Value{get_real(spec, "params.field")});
  if (spec.is_string()) {
    auto f = field_function(spec.get<std::string>());
    return GridField::sample(lat, [f](Point2 x) { return Value{f(x)}; }, 1, supersample);
  }
  if (spec.is_object() && spec.size() == 1 && spec.contains("file")) {
    return read_field(resolve(r.s, get_string(spec["file"], "params.field.file")), lat);
  }
  throw SchemaError("params.field: expected a number, an expression string or {\"file\": path}");
}

Json task_yosida(const Run& r) {
  const YosidaParams p = yosida_params(r.s.params);
  const SurfaceDensity d = parse_density_spec(r.s.density);
  if (d.dim() != 1) throw UnsupportedArity("yosida task tabulates scalar densities");
  const PolygonalDomain dom = r.domain();
  const double lo = p.lo, hi = p.hi;
  const long count = p.count, k = p.k;
  const Point2 x = p.x.value_or(dom.point_at(0.0));
  std::string csv = k > 0 ? "p,tau,tau_hat,tau_k\n" : "p,tau,tau_hat\n";
  std::string dat = "# p tau_hat\n";
  double max_gap = 0.0;
  for (long i = 0; i < count; ++i) {
    const double q = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    const double tau = d(x, Value{q});
    const double hat = yosida_eval(d, r.ctx(), x, Value{q});
    max_gap = std::max(max_gap, tau - hat);
    std::string line = format_double(q) + "," + format_double(tau) + "," + format_double(hat);
    if (k > 0) line += "," + format_double(lip_upper_approx(d, static_cast<int>(k), x, Value{q}));
    csv += line + "\n";
    dat += format_double(q) + " " + format_double(hat) + "\n";
  }
  r.write("yosida.csv", csv);
  r.write("yosida.dat", dat);
  Json j;
  j["density"] = d.spec();
  j["x"] = {x.x, x.y};
  j["count"] = count;
  j["closed_form"] = yosida_has_closed_form(d);
  j["max_tau_minus_hat"] = max_gap;
  j["lower_bound"] = {{"c", d.lower_bound().c_sup}, {"L", d.lower_bound().L_sup},
                      {"estimated", d.lower_bound().estimated}};
  return j;
}

Json task_qgeom(const Run& r) {
  const bool per_point = qgeom_params(r.s.params);
  const PolygonalDomain dom = r.domain();
  Json j;
  j["Q"] = domain_Q(dom);
  const auto corners = dom.corners();
  j["corners"] = corners.size();
  Json list = Json::array();
  for (const auto& c : corners) {
    list.push_back({{"vertex", c.vertex}, {"point", {dom.vertex(c.vertex).x, dom.vertex(c.vertex).y}}, {"theta", c.theta}, {"q", c.q}, {"slope", c.slope}});
  }
  j["corner_list"] = list;
  j["L"] = dom.lipschitz_constant();
  j["smooth"] = dom.smooth();
  j["emmer"] = to_json(emmer_check(r.s.nu, dom));
  j["emmer"]["nu"] = r.s.nu;
  const SurfaceDensity d = parse_density_spec(r.s.density);
  j["admissibility"] = to_json(admissibility_check(dom, d, r.s.sigma, r.s.epsilon0), per_point);
  return j;
}

Json task_energy(const Run& r) {
  const EnergyParams p = energy_params(r.s.params);
  const PolygonalDomain dom = r.domain();
  const SurfaceDensity d = parse_density_spec(r.s.density);
  const LatticePtr lat = Lattice::build(dom, r.s.h);
  const GridField u = load_field_param(r, p.field, lat, p.supersample);
  const EnergyMode mode = p.mode;
  const std::string& which = p.functional;
  Json j;
  if (which != "H") j["F"] = to_json(energy_F(u, d, r.s.sigma, mode));
  if (which != "F") j["H"] = to_json(energy_H(u, d, r.ctx(), mode));
  j["density"] = d.spec();
  return j;
}

Json task_counterexample(const Run& r) {
  CounterexampleParams p = counterexample_params(r.s.params);
  SequenceSpec& spec = p.spec;
  spec.sigma = r.s.sigma;
  const std::vector<double>& lambdas = p.lambdas;
  const std::optional<double> grid_h = p.grid_h;

  std::string csv = "lambda,n,energy,gap,violated\n";
  std::string dat = "# lambda gap\n";
  Json rows = Json::array();
  for (double lambda : lambdas) {
    spec.lambda = lambda;
    const SurfaceDensity d = catalog_density(spec.family, lambda);
    const CounterexampleResult res = counterexample_energy(spec, grid_h);
    const ViolationReport v = detect_lsc_violation(spec, d, r.ctx());
    const int n = spec.ns.back();
    csv += csv_line({format_double(lambda), std::to_string(n), format_double(res.per_n.back()), format_double(v.gap),
                     v.violated ? "1" : "0"});
    dat += format_double(lambda) + " " + format_double(v.gap) + "\n";
    Json row;
    row["lambda"] = lambda;
    row["sequence"] = to_json(res);
    row["violation"] = to_json(v);
    rows.push_back(row);
  }
  r.write("counterexample.csv", csv);
  r.write("counterexample.dat", dat);
  Json j;
  j["family"] = to_string(spec.family);
  j["rows"] = rows;
  return j;
}

Json task_relax_verify(const Run& r) {
  const RelaxParams p = relax_params(r.s.params);
  const PolygonalDomain dom = r.domain();
  const SurfaceDensity d = parse_density_spec(r.s.density);
  const LatticePtr lat = Lattice::build(dom, r.s.h);
  RepresentationOptions opt = p.opt;
  opt.epsilon0 = r.s.epsilon0;
  opt.seed = r.s.seed;
  const auto& fields = p.fields;
  std::string csv = "field,H,F,upper_gap,lower_gap,lower_gap_vs_F,verdict\n";
  Json rows = Json::array();
  for (const auto& text : fields) {
    auto f = field_function(text);
    const GridField u = GridField::sample(lat, [f](Point2 x) { return Value{f(x)}; }, 1, 1);
    const RepresentationReport rep = verify_representation(u, d, r.ctx(), dom, opt);
    csv += csv_line({csv_text(text), format_double(rep.H), format_double(rep.F), format_double(rep.upper_gap),
                     format_double(rep.lower_gap), format_double(rep.lower_gap_vs_F), to_string(rep.verdict)});
    Json row = to_json(rep);
    row["field"] = text;
    rows.push_back(row);
  }
  r.write("relax-verify.csv", csv);
  Json j;
  j["density"] = d.spec();
  j["admissibility"] = to_json(admissibility_check(dom, d, r.s.sigma, r.s.epsilon0));
  j["rows"] = rows;
  return j;
}

Json task_extend_verify(const Run& r) {
  const ExtendParams p = extend_params(r.s.params);
  const PolygonalDomain dom = r.domain();
  const LatticePtr lat = Lattice::build(dom, r.s.h);
  const double eps = p.eps;
  const ExtensionOptions& opt = p.opt;
  const auto& data = p.data;
  const GridField zero(lat, 1);
  std::string csv = "data,l1_ratio,grad_ratio,delta,bounds_met\n";
  Json rows = Json::array();
  for (const auto& text : data) {
    auto f = field_function(text);
    TraceSample g = trace_extract(zero);
    for (auto& e : g.entries) e.value = Value{f(e.x)};
    const ExtensionResult res = extend_boundary_data(g, eps, lat, opt);
    csv += csv_line({csv_text(text), format_double(res.l1_ratio), format_double(res.grad_ratio),
                     format_double(res.delta), res.bounds_met ? "1" : "0"});
    Json row = to_json(res);
    row["data"] = text;
    rows.push_back(row);
  }
  r.write("extend-verify.csv", csv);
  Json j;
  j["eps"] = eps;
  j["kappa"] = opt.kappa;
  j["rows"] = rows;
  return j;
}

Json task_solve(const Run& r) {
  const SolveParams p = solve_params(r.s.params);
  const PolygonalDomain dom = r.domain();
  BulkTerm bulk;
  bulk.kind = p.kind;
  bulk.alpha = p.alpha;
  if (p.target) bulk.target = field_function(*p.target);
  SolverConfig cfg = p.cfg;
  cfg.h = r.s.h;
  const std::string& format = p.format;
  // Capillarity contact defaults to nu * Tr u.
  const SurfaceDensity d = bulk.kind == BulkKind::Capillarity && !r.s.density_given
                               ? SurfaceDensity::linear(r.s.nu)
                               : parse_density_spec(r.s.density);
  const SolverResult res = minimize_energy(dom, d, r.ctx(), bulk, cfg);
  const Diagnostics dg = diagnostics(res.state);
  write_field(res.u, r.out("solve_field"), format == "csv" ? FieldEncoding::Csv : FieldEncoding::Binary);
  r.log << "wrote " << r.out("solve_field") << ".json\n";
  std::string e = "# iteration energy\n", q = "# iteration residual\n";
  for (std::size_t i = 0; i < dg.energy_curve.size(); ++i) {
    e += std::to_string(i + 1) + " " + format_double(dg.energy_curve[i]) + "\n";
    q += std::to_string(i + 1) + " " + format_double(dg.residual_curve[i]) + "\n";
  }
  r.write("solve_energy.dat", e);
  r.write("solve_residual.dat", q);
  Json j;
  j["density"] = d.spec();
  j["bulk"] = to_string(bulk.kind);
  j["report"] = to_json(res.report);
  j["residual"] = number(res.residual);
  j["converged"] = res.converged;
  j["algorithm"] = res.algorithm;
  j["iterations"] = res.state.iterations;
  j["t_primal"] = res.state.t_primal;
  j["t_dual"] = res.state.t_dual;
  j["beta"] = cfg.beta;
  j["beta_used"] = res.beta_used;
  j["nonconvex_boundary"] = res.nonconvex_boundary;
  j["warnings"] = res.warnings;
  j["diagnostics"] = to_json(dg);
  j["max_abs_u"] = res.u.max_abs();
  if (bulk.kind == BulkKind::Capillarity) j["emmer"] = to_json(emmer_check(r.s.nu, dom));
  return j;
}

}  // namespace

Json run_scenario(const Scenario& s, std::ostream& log) {
  validate_params(s);
  Run r{s, log, Json::object()};
  r.meta["scenario_hash"] = hash_hex(scenario_hash(s));
  r.meta["h"] = s.h;
  r.meta["version"] = kVersion;
  r.meta["seed"] = s.seed;
  r.meta["task"] = to_string(s.task);
  Json report;
  switch (s.task) {
    case Task::Yosida: report = task_yosida(r); break;
    case Task::Qgeom: report = task_qgeom(r); break;
    case Task::Energy: report = task_energy(r); break;
    case Task::Counterexample: report = task_counterexample(r); break;
    case Task::RelaxVerify: report = task_relax_verify(r); break;
    case Task::ExtendVerify: report = task_extend_verify(r); break;
    case Task::Solve: report = task_solve(r); break;
  }
  report = r.stamp(report);
  r.write_json(std::string(to_string(s.task)) + ".json", report);
  return report;
}

int run_scenario_guarded(const Scenario& s, std::ostream& log, std::ostream& err) {
  Json e;
  try {
    run_scenario(s, log);
    return 0;
  } catch (const ParseError& ex) {
    e["error"] = {{"kind", ex.kind()}, {"message", ex.what()}, {"offset", ex.offset()}};
  } catch (const Error& ex) {
    e["error"] = {{"kind", ex.kind()}, {"message", ex.what()}};
  } catch (const std::exception& ex) {
    e["error"] = {{"kind", "InternalError"}, {"message", ex.what()}};
  }
  e["task"] = to_string(s.task);
  e["scenario_hash"] = hash_hex(scenario_hash(s));
  e["version"] = kVersion;
  err << e.dump(2) << "\n";
  try {
    write_text((fs::path(s.output_dir) / "error.json").string(), e.dump(2) + "\n");
  } catch (const Error& io) {
    err << io.what() << "\n";
  }
  return 2;
}

}  // namespace relaxbv
