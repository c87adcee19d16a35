#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "relaxbv/extension.hpp"
#include "relaxbv/geometry.hpp"
#include "relaxbv/grid.hpp"
#include "relaxbv/relaxation.hpp"
#include "relaxbv/solver.hpp"

namespace relaxbv {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Domain file:
///   {"name": str?, "vertices": [[x, y], ...], "smooth_flag": bool?,
///    "angle_overrides": {"<vertex index>": radians, ...}?,
///    "lipschitz_override": number?}
/// Errors name the offending JSON path (or byte offset for syntax errors).
PolygonalDomain domain_from_json(const Json& j);
PolygonalDomain parse_domain(std::string_view text);
PolygonalDomain load_domain(const std::string& path);
Json domain_to_json(const PolygonalDomain& dom);

/// Named domains: square, l_shape, disk<n> (smooth regular n-gon).
PolygonalDomain builtin_domain(const std::string& name);

enum class FieldEncoding { Csv, Binary };

/// Writes <stem>.json (header) and <stem>.csv or <stem>.bin (values of the
/// masked cells in index order, M per cell; binary is little-endian f64).
void write_field(const GridField& u, const std::string& stem, FieldEncoding encoding);
/// Reads a field written by write_field onto a lattice with the same h,
/// shape, origin and mask.
GridField read_field(const std::string& header_path, const LatticePtr& lattice);

/// Run lengths of the mask, starting with a run of unmasked cells.
std::vector<std::size_t> mask_rle(const Lattice& lattice);
std::vector<unsigned char> mask_from_rle(const std::vector<std::size_t>& runs, std::size_t cells);

/// Finite numbers as numbers, the rest as "inf", "-inf" or "nan".
Json number(double x);

Json to_json(const EnergyReport& r);
Json to_json(const AdmissibilityReport& r, bool per_point = false);
Json to_json(const EmmerResult& r);
Json to_json(const ExtensionResult& r);
Json to_json(const CounterexampleResult& r);
Json to_json(const ViolationReport& r);
Json to_json(const RepresentationReport& r);
Json to_json(const Diagnostics& d);

/// Shortest text that reads back to the same double.
std::string format_double(double x);

/// Writes text to path, creating parent directories; errors name the path.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace relaxbv
