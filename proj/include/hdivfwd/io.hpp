#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "hdivfwd/error.hpp"
#include "hdivfwd/geometry.hpp"
#include "hdivfwd/hexmesh.hpp"
#include "hdivfwd/sparse.hpp"

namespace hdivfwd {

inline constexpr const char* kVersion = "0.1.0";

// ---- key = value configuration ---------------------------------------------

/// Flat "key = value" file with optional [section] headers. Keys are stored
/// as "section.key". '#' and ';' start comments.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& source = "config") {
    Config c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ValidationError(source + ":" + std::to_string(lineno) + ": malformed section");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ValidationError(source + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ValidationError(source + ":" + std::to_string(lineno) + ": empty key");
      c.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("missing configuration key " + key);
    return it->second;
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? to_number(key, require(key)) : fallback;
  }
  long integer(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const double v = to_number(key, require(key));
    if (v != static_cast<double>(static_cast<long>(v))) throw ValidationError(key + " must be an integer");
    return static_cast<long>(v);
  }
  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = require(key);
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw ValidationError(key + ": expected a boolean, got '" + v + "'");
  }
  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& t : list(key)) out.push_back(to_number(key, t));
    return out;
  }
  /// Comma- or whitespace-separated list.
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    std::string v = require(key);
    for (char& ch : v)
      if (ch == ',') ch = ' ';
    std::istringstream is(v);
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
  }

  /// Rejects keys outside `known` (exact keys, or "section.*" wildcards).
  void check_known(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_) {
      if (known.count(k)) continue;
      const auto dot = k.find('.');
      if (dot != std::string::npos && known.count(k.substr(0, dot) + ".*")) continue;
      throw ValidationError("unknown configuration key '" + k + "'");
    }
  }

  /// Canonical text: sorted "key=value" lines.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }
  static double to_number(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(key + ": expected a number, got '" + s + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// "# hdivfwd version=... config_hash=... seed=..." line.
inline std::string provenance_line(const Config& cfg, std::uint64_t seed) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "# hdivfwd version=%s config_hash=%016llx seed=%llu", kVersion,
                static_cast<unsigned long long>(fnv1a(cfg.canonical())), static_cast<unsigned long long>(seed));
  return buf;
}

// ---- CSV -------------------------------------------------------------------

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  return out;
}

inline void write_convergence_csv(const std::string& path, std::span<const double> history,
                                  const std::string& provenance = {}) {
  auto out = open_output(path);
  if (!provenance.empty()) out << provenance << '\n';
  out << "iter,residual\n";
  for (std::size_t i = 0; i < history.size(); ++i) out << i << ',' << format_double(history[i]) << '\n';
}

inline void write_reference_csv(const std::string& path, std::span<const Vec3> points, std::span<const double> u,
                                const std::string& provenance = {}) {
  if (points.size() != u.size()) throw ValidationError("reference CSV: point and value counts differ");
  auto out = open_output(path);
  if (!provenance.empty()) out << provenance << '\n';
  out << "point_id,x,y,z,u\n";
  for (std::size_t i = 0; i < u.size(); ++i)
    out << i << ',' << format_double(points[i][0]) << ',' << format_double(points[i][1]) << ','
        << format_double(points[i][2]) << ',' << format_double(u[i]) << '\n';
}

// ---- legacy VTK --------------------------------------------------------------

namespace detail {
inline std::string vtk_title(const std::string& provenance) {
  std::string t = provenance.empty() ? std::string("hdivfwd") : provenance;
  if (!t.empty() && t[0] == '#') t.erase(0, t[0] == '#' && t.size() > 1 && t[1] == ' ' ? 2 : 1);
  if (t.size() > 255) t.resize(255);
  return t;
}
}  // namespace detail

/// Label volume as STRUCTURED_POINTS with one cell scalar per voxel.
inline void write_vtk_labels(const std::string& path, const HexMesh& mesh, const std::string& provenance = {}) {
  auto out = open_output(path);
  const auto& d = mesh.dims();
  const auto& o = mesh.origin();
  out << "# vtk DataFile Version 3.0\n" << detail::vtk_title(provenance) << "\nASCII\nDATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << d[0] + 1 << ' ' << d[1] + 1 << ' ' << d[2] + 1 << '\n';
  out << "ORIGIN " << format_double(o[0]) << ' ' << format_double(o[1]) << ' ' << format_double(o[2]) << '\n';
  const std::string h = format_double(mesh.spacing());
  out << "SPACING " << h << ' ' << h << ' ' << h << '\n';
  out << "CELL_DATA " << mesh.cell_count() << "\nSCALARS labels int 1\nLOOKUP_TABLE default\n";
  for (auto l : mesh.labels()) out << static_cast<int>(l) << '\n';
}

/// Fields to attach to the labeled cells.
struct VtkFields {
  std::vector<double> potential;        // per element, optional
  std::vector<Vec3> current;            // per element, optional
  std::vector<double> vertex_potential;  // per vertex, optional
  double current_scale = 1.0;           // multiplies `current` on output
};

/// Labeled cells as an UNSTRUCTURED_GRID of hexahedra (cell type 12).
inline void write_vtk_fields(const std::string& path, const HexMesh& mesh, const VtkFields& f,
                             const std::string& provenance = {}) {
  const auto ne = static_cast<std::size_t>(mesh.element_count());
  const auto nv = static_cast<std::size_t>(mesh.vertex_count());
  if (!f.potential.empty() && f.potential.size() != ne) throw ValidationError("VTK: potential length != element count");
  if (!f.current.empty() && f.current.size() != ne) throw ValidationError("VTK: current length != element count");
  if (!f.vertex_potential.empty() && f.vertex_potential.size() != nv)
    throw ValidationError("VTK: vertex potential length != vertex count");
  auto out = open_output(path);
  out << "# vtk DataFile Version 3.0\n" << detail::vtk_title(provenance) << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (std::int32_t v = 0; v < mesh.vertex_count(); ++v) {
    const auto x = mesh.vertex_position(v);
    out << format_double(x[0]) << ' ' << format_double(x[1]) << ' ' << format_double(x[2]) << '\n';
  }
  out << "CELLS " << ne << ' ' << 9 * ne << '\n';
  for (std::int32_t e = 0; e < mesh.element_count(); ++e) {
    out << 8;
    for (auto v : mesh.element_vertices(e)) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << ne << '\n';
  for (std::size_t e = 0; e < ne; ++e) out << "12\n";
  out << "CELL_DATA " << ne << "\nSCALARS label int 1\nLOOKUP_TABLE default\n";
  for (std::int32_t e = 0; e < mesh.element_count(); ++e) out << static_cast<int>(mesh.element_label(e)) << '\n';
  if (!f.potential.empty()) {
    out << "SCALARS potential double 1\nLOOKUP_TABLE default\n";
    for (double v : f.potential) out << format_double(v) << '\n';
  }
  if (!f.current.empty()) {
    out << "SCALARS current_magnitude double 1\nLOOKUP_TABLE default\n";
    for (const auto& c : f.current) out << format_double(f.current_scale * norm(c)) << '\n';
    out << "VECTORS current double\n";
    for (const auto& c : f.current)
      out << format_double(f.current_scale * c[0]) << ' ' << format_double(f.current_scale * c[1]) << ' '
          << format_double(f.current_scale * c[2]) << '\n';
  }
  if (!f.vertex_potential.empty()) {
    out << "POINT_DATA " << nv << "\nSCALARS potential double 1\nLOOKUP_TABLE default\n";
    for (double v : f.vertex_potential) out << format_double(v) << '\n';
  }
}

}  // namespace hdivfwd
