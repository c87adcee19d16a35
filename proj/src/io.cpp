#include "relaxbv/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relaxbv/errors.hpp"

namespace relaxbv {

namespace fs = std::filesystem;

namespace {

double require_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path + ": number is not finite");
  return v;
}

std::string join_path(const std::string& stem, const char* ext) { return stem + ext; }

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error("cannot create directory " + p.parent_path().string() + ": " + ec.message());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("write to " + path + " failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PolygonalDomain domain_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("domain: expected an object");
  static const char* const kKeys[] = {"name", "vertices", "smooth_flag", "angle_overrides", "lipschitz_override"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw SchemaError("domain." + key + ": unknown key");
    }
  }
  if (!j.contains("vertices")) throw SchemaError("domain.vertices: missing");
  const Json& vs = j.at("vertices");
  if (!vs.is_array()) throw SchemaError("domain.vertices: expected an array");
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const std::string path = "domain.vertices[" + std::to_string(i) + "]";
    if (!vs[i].is_array() || vs[i].size() != 2) throw SchemaError(path + ": expected [x, y]");
    pts.push_back({require_number(vs[i][0], path + "[0]"), require_number(vs[i][1], path + "[1]")});
  }
  DomainOptions opt;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw SchemaError("domain.name: expected a string");
    opt.name = j["name"].get<std::string>();
  }
  if (j.contains("smooth_flag")) {
    if (!j["smooth_flag"].is_boolean()) throw SchemaError("domain.smooth_flag: expected a boolean");
    opt.smooth = j["smooth_flag"].get<bool>();
  }
  if (j.contains("lipschitz_override")) {
    const double L = require_number(j["lipschitz_override"], "domain.lipschitz_override");
    if (L < 0.0) throw SchemaError("domain.lipschitz_override: must be nonnegative");
    opt.lipschitz_override = L;
  }
  if (j.contains("angle_overrides")) {
    const Json& ao = j["angle_overrides"];
    if (!ao.is_object()) throw SchemaError("domain.angle_overrides: expected an object keyed by vertex index");
    opt.angle_override.assign(pts.size(), std::nullopt);
    for (const auto& [key, val] : ao.items()) {
      const std::string path = "domain.angle_overrides." + key;
      std::size_t idx = 0;
      const auto res = std::from_chars(key.data(), key.data() + key.size(), idx);
      if (res.ec != std::errc() || res.ptr != key.data() + key.size()) throw SchemaError(path + ": key is not an index");
      if (idx >= pts.size()) throw SchemaError(path + ": vertex index out of range");
      const double theta = require_number(val, path);
      if (!(theta > 0.0) || theta >= 2.0 * M_PI) throw SchemaError(path + ": angle must lie in (0, 2 pi)");
      opt.angle_override[idx] = theta;
    }
  }
  try {
    return PolygonalDomain::from_vertices(std::move(pts), std::move(opt));
  } catch (const GeometryError& e) {
    throw GeometryError(std::string("domain.vertices: ") + e.what());
  }
}

PolygonalDomain parse_domain(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("domain: JSON syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return domain_from_json(j);
}

PolygonalDomain load_domain(const std::string& path) {
  try {
    return parse_domain(read_text(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  } catch (const GeometryError& e) {
    throw GeometryError(path + ": " + e.what());
  }
}

Json domain_to_json(const PolygonalDomain& dom) {
  Json j;
  j["name"] = dom.name();
  Json vs = Json::array();
  for (const Point2& v : dom.vertices()) vs.push_back({v.x, v.y});
  j["vertices"] = vs;
  j["smooth_flag"] = dom.smooth();
  return j;
}

PolygonalDomain builtin_domain(const std::string& name) {
  if (name == "square") return PolygonalDomain::unit_square();
  if (name == "l_shape") return PolygonalDomain::l_shape();
  if (name.rfind("disk", 0) == 0) {
    int n = 0;
    const char* b = name.data() + 4;
    const auto res = std::from_chars(b, name.data() + name.size(), n);
    if (res.ec == std::errc() && res.ptr == name.data() + name.size() && n >= 3) return PolygonalDomain::regular_polygon(n);
  }
  throw SchemaError("unknown domain '" + name + "' (expected square, l_shape, disk<n> or a domain file)");
}

std::vector<std::size_t> mask_rle(const Lattice& lattice) {
  std::vector<std::size_t> runs;
  unsigned char cur = 0;
  std::size_t len = 0;
  for (unsigned char m : lattice.mask()) {
    const unsigned char v = m ? 1 : 0;
    if (v != cur) {
      runs.push_back(len);
      cur = v;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  return runs;
}

std::vector<unsigned char> mask_from_rle(const std::vector<std::size_t>& runs, std::size_t cells) {
  std::vector<unsigned char> mask;
  mask.reserve(cells);
  unsigned char cur = 0;
  for (std::size_t r : runs) {
    if (mask.size() + r > cells) throw SchemaError("mask_rle: runs exceed the cell count");
    mask.insert(mask.end(), r, cur);
    cur ^= 1;
  }
  if (mask.size() != cells) throw SchemaError("mask_rle: runs do not cover the lattice");
  return mask;
}

void write_field(const GridField& u, const std::string& stem, FieldEncoding encoding) {
  const Lattice& L = *u.lattice();
  const int M = u.dim();
  const fs::path data_path = join_path(stem, encoding == FieldEncoding::Csv ? ".csv" : ".bin");
  Json hdr;
  hdr["format"] = "relaxbv-field";
  hdr["version"] = kVersion;
  hdr["h"] = L.h();
  hdr["M"] = M;
  hdr["nx"] = L.nx();
  hdr["ny"] = L.ny();
  hdr["origin"] = {L.origin().x, L.origin().y};
  hdr["one_d"] = L.one_d();
  hdr["mask_rle"] = mask_rle(L);
  hdr["encoding"] = encoding == FieldEncoding::Csv ? "csv" : "binary-f64le";
  hdr["data_file"] = data_path.filename().string();
  hdr["masked_cells"] = L.masked_cells().size();

  if (encoding == FieldEncoding::Csv) {
    std::string s = "i,j";
    for (int k = 0; k < M; ++k) s += ",u" + std::to_string(k);
    s += "\n";
    for (std::size_t idx : L.masked_cells()) {
      s += std::to_string(idx % L.nx()) + "," + std::to_string(idx / L.nx());
      for (int k = 0; k < M; ++k) s += "," + format_double(u.component(idx, k));
      s += "\n";
    }
    write_text(data_path.string(), s);
  } else {
    std::string bytes;
    bytes.reserve(L.masked_cells().size() * M * 8);
    for (std::size_t idx : L.masked_cells()) {
      for (int k = 0; k < M; ++k) {
        auto bits = std::bit_cast<std::uint64_t>(u.component(idx, k));
        for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
      }
    }
    write_text(data_path.string(), bytes);
  }
  write_text(join_path(stem, ".json"), hdr.dump(2) + "\n");
}

GridField read_field(const std::string& header_path, const LatticePtr& lattice) {
  Json hdr;
  try {
    hdr = Json::parse(read_text(header_path));
  } catch (const Json::parse_error& e) {
    throw SchemaError(header_path + ": JSON syntax error at byte " + std::to_string(e.byte));
  }
  auto need = [&](const char* key) -> const Json& {
    if (!hdr.contains(key)) throw SchemaError(header_path + ": missing key '" + key + "'");
    return hdr.at(key);
  };
  if (need("format") != "relaxbv-field") throw SchemaError(header_path + ": not a field header");
  const Lattice& L = *lattice;
  const double h = require_number(need("h"), header_path + ".h");
  if (std::abs(h - L.h()) > 1e-12 * L.h()) throw SchemaError(header_path + ": grid spacing does not match the lattice");
  if (need("nx").get<std::size_t>() != L.nx() || need("ny").get<std::size_t>() != L.ny()) {
    throw SchemaError(header_path + ": lattice shape does not match");
  }
  const auto mask = mask_from_rle(need("mask_rle").get<std::vector<std::size_t>>(), L.cells());
  if (mask != L.mask()) throw SchemaError(header_path + ": mask does not match the lattice");
  const int M = need("M").get<int>();
  if (M < 1 || M > 2) throw SchemaError(header_path + ": M must be 1 or 2");
  const std::string encoding = need("encoding").get<std::string>();
  const fs::path data_path = fs::path(header_path).parent_path() / need("data_file").get<std::string>();
  const std::string raw = read_text(data_path.string());
  GridField u(lattice, M);
  const std::size_t count = L.masked_cells().size() * static_cast<std::size_t>(M);
  std::vector<double> vals;
  vals.reserve(count);
  if (encoding == "binary-f64le") {
    if (raw.size() != count * 8) throw SchemaError(data_path.string() + ": expected " + std::to_string(count * 8) + " bytes");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[8 * i + b])) << (8 * b);
      vals.push_back(std::bit_cast<double>(bits));
    }
  } else if (encoding == "csv") {
    std::istringstream in(raw);
    std::string line;
    std::getline(in, line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::stringstream ls(line);
      std::string cell;
      int col = 0;
      while (std::getline(ls, cell, ',')) {
        if (col++ < 2) continue;
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc()) {
          throw SchemaError(data_path.string() + ": line " + std::to_string(lineno) + ": bad number '" + cell + "'");
        }
        vals.push_back(v);
      }
    }
    if (vals.size() != count) throw SchemaError(data_path.string() + ": expected " + std::to_string(count) + " values");
  } else {
    throw SchemaError(header_path + ": unknown encoding '" + encoding + "'");
  }
  std::size_t k = 0;
  for (std::size_t idx : L.masked_cells())
    for (int c = 0; c < M; ++c) u.data()[idx * M + c] = vals[k++];
  return u;
}

Json to_json(const EnergyReport& r) {
  Json j;
  j["tv_term"] = number(r.tv_term);
  j["contact_term"] = number(r.contact_term);
  j["bulk_term"] = number(r.bulk_term);
  j["total"] = number(r.total);
  Json pe = Json::array();
  for (double v : r.per_edge) pe.push_back(number(v));
  j["per_edge"] = pe;
  j["validity"] = to_string(r.validity);
  j["tv_infinite"] = r.tv_infinite;
  j["notes"] = r.notes;
  return j;
}

Json to_json(const AdmissibilityReport& r, bool per_point) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["admissible"] = r.admissible();
  j["epsilon0"] = r.epsilon0;
  j["sigma"] = r.sigma;
  j["min_slack"] = number(r.min_slack);
  j["min_gamma_slack"] = number(r.min_gamma_slack);
  j["points"] = r.per_point.size();
  if (per_point) {
    Json pts = Json::array();
    for (const auto& p : r.per_point) {
      pts.push_back({{"x", {p.x.x, p.x.y}}, {"L", p.L}, {"q", p.q}, {"product", p.product}, {"slack", p.slack},
                     {"corner", p.corner}});
    }
    j["per_point"] = pts;
  }
  return j;
}

Json to_json(const EmmerResult& r) { return {{"passes", r.passes}, {"bound", r.bound}}; }

Json to_json(const ExtensionResult& r) {
  Json j;
  j["l1_ratio"] = number(r.l1_ratio);
  j["grad_ratio"] = number(r.grad_ratio);
  j["delta"] = r.delta;
  j["boundary_mass"] = r.boundary_mass;
  j["corner_overlap"] = r.corner_overlap;
  j["ladder_steps"] = r.ladder_steps;
  j["bounds_met"] = r.bounds_met;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const CounterexampleResult& r) {
  Json j;
  j["ns"] = r.ns;
  Json a = Json::array(), g = Json::array();
  for (double v : r.per_n) a.push_back(number(v));
  for (double v : r.per_n_grid) g.push_back(number(v));
  j["per_n"] = a;
  j["per_n_grid"] = g;
  j["limit_of_sequence"] = number(r.limit_of_sequence);
  j["energy_of_limit"] = number(r.energy_of_limit);
  j["energy_of_limit_H"] = number(r.energy_of_limit_H);
  j["limit_off_bv"] = r.limit_off_bv;
  j["flags"] = r.flags;
  return j;
}

Json to_json(const ViolationReport& r) {
  Json j;
  j["liminf_energy"] = number(r.liminf_energy);
  j["limit_energy_F"] = number(r.limit_energy_F);
  j["limit_energy_H"] = number(r.limit_energy_H);
  j["violated"] = r.violated;
  j["below_relaxation"] = r.below_relaxation;
  j["gap"] = number(r.gap);
  j["limit_off_bv"] = r.limit_off_bv;
  return j;
}

Json to_json(const RepresentationReport& r) {
  Json j;
  j["H"] = number(r.H);
  j["F"] = number(r.F);
  j["upper_gap"] = number(r.upper_gap);
  j["upper_gap_raw"] = number(r.upper_gap_raw);
  j["upper_n"] = r.upper_n;
  j["lower_gap"] = number(r.lower_gap);
  j["lower_gap_raw"] = number(r.lower_gap_raw);
  j["lower_gap_vs_F"] = number(r.lower_gap_vs_F);
  j["worst_candidate"] = r.worst_candidate;
  j["candidates_evaluated"] = r.candidates_evaluated;
  j["members_skipped"] = r.members_skipped;
  j["verdict"] = to_string(r.verdict);
  return j;
}

Json to_json(const Diagnostics& d) {
  Json j;
  j["iterations"] = d.energy_curve.size();
  j["final_energy"] = d.energy_curve.empty() ? Json(nullptr) : number(d.energy_curve.back());
  j["final_residual"] = d.residual_curve.empty() ? Json(nullptr) : number(d.residual_curve.back());
  j["dual_feasibility_max"] = d.dual_feasibility_max;
  j["monotonicity_violations"] = d.monotonicity_violations;
  j["monotone"] = d.monotone;
  return j;
}

}  // namespace relaxbv
