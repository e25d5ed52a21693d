#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hdivfwd/assembly.hpp"
#include "hdivfwd/error.hpp"
#include "hdivfwd/geometry.hpp"
#include "hdivfwd/hexmesh.hpp"
#include "hdivfwd/sparse.hpp"

namespace hdivfwd {

/// Point current source. Position in mm, moment in mA*mm.
struct Dipole {
  Vec3 position{0.0, 0.0, 0.0};
  Vec3 moment{0.0, 0.0, 0.0};
};

inline void validate_moment(const Dipole& d) {
  const double m = norm(d.moment);
  if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("dipole moment must be nonzero and finite");
}

/// Lowest-order Raviart-Thomas basis function of face f evaluated at x:
/// (1 - |<x - c_f, n_f>| / h) n_f inside the supporting elements, else 0.
inline Vec3 rt0_eval(const HexMesh& mesh, std::int32_t f, const Vec3& x) {
  const Face& fc = mesh.face(f);
  const int a = static_cast<int>(fc.axis);
  const double h = mesh.spacing();
  const Vec3 c = mesh.face_centroid(f);
  for (int b = 0; b < 3; ++b)
    if (b != a && std::abs(x[b] - c[b]) > 0.5 * h) return {0.0, 0.0, 0.0};
  const double s = x[a] - c[a];
  if (std::abs(s) > h) return {0.0, 0.0, 0.0};
  if (s < 0.0 && fc.minus < 0) return {0.0, 0.0, 0.0};
  if (s > 0.0 && fc.plus < 0) return {0.0, 0.0, 0.0};
  if (s == 0.0 && fc.minus < 0 && fc.plus < 0) return {0.0, 0.0, 0.0};
  return (1.0 - std::abs(s) / h) * unit_vector(fc.axis);
}

enum class RhsKind { direct, projected };

/// Discrete source term. For `direct`, `face` holds b_cur (with 1/sigma).
/// For `projected`, `face` holds the face-space primary current b_pot (no
/// 1/sigma) and `element` the element-space load h = -B b_pot. Indices are saddle-system columns/rows.
struct RhsSpec {
  RhsKind kind = RhsKind::projected;
  SparseVector face;
  SparseVector element;
  std::int32_t source_element = -1;
  std::vector<std::string> warnings;
};

namespace detail {
inline std::vector<std::pair<std::int32_t, double>> dipole_face_coefficients(const HexMesh& mesh,
                                                                            const SaddleSystem& system,
                                                                            const Dipole& dipole, double scale,
                                                                            std::int32_t& element,
                                                                            std::vector<std::string>& warnings) {
  validate_moment(dipole);
  element = mesh.locate_element(dipole.position);
  std::vector<std::pair<std::int32_t, double>> out;
  for (auto f : mesh.element_faces(element)) {
    const double v = scale * dot(dipole.moment, rt0_eval(mesh, f, dipole.position));
    if (v == 0.0) continue;
    const auto c = system.face_to_column[static_cast<std::size_t>(f)];
    if (c < 0) {
      warnings.push_back("dropped boundary-face component on face " + std::to_string(f));
      continue;
    }
    out.emplace_back(c, v);
  }
  return out;
}
}  // namespace detail

/// b_i = <m / sigma_T, w_i(x0)> on the interior faces of the element T
/// containing x0.
inline RhsSpec rhs_direct(const Dipole& dipole, const SaddleSystem& system, const HexMesh& mesh) {
  RhsSpec r;
  r.kind = RhsKind::direct;
  validate_moment(dipole);
  const auto e = mesh.locate_element(dipole.position);
  const double inv_sigma = 1.0 / system.element_sigma[static_cast<std::size_t>(e)];
  r.face = SparseVector::from_pairs(
      detail::dipole_face_coefficients(mesh, system, dipole, inv_sigma, r.source_element, r.warnings));
  return r;
}

/// Primary current as a face field: b_pot_i = <m, w_i(x0)> / h^3, which
/// preserves the dipole moment (each basis function integrates to h^3 n_i).
/// The element load is h = -B b_pot: a source on the +m side of the element
/// and a sink on the -m side, of strength |m|/h for a face-aligned source.
inline RhsSpec rhs_projected(const Dipole& dipole, const SaddleSystem& system, const HexMesh& mesh) {
  RhsSpec r;
  r.kind = RhsKind::projected;
  const double inv_volume = 1.0 / (mesh.spacing() * mesh.spacing() * mesh.spacing());
  r.face = SparseVector::from_pairs(
      detail::dipole_face_coefficients(mesh, system, dipole, inv_volume, r.source_element, r.warnings));
  std::vector<std::pair<std::int32_t, double>> h;
  const double h2 = mesh.spacing() * mesh.spacing();
  for (std::size_t k = 0; k < r.face.nnz(); ++k) {
    const Face& fc = mesh.face(system.column_to_face[static_cast<std::size_t>(r.face.index[k])]);
    h.emplace_back(fc.minus, -h2 * r.face.value[k]);
    h.emplace_back(fc.plus, h2 * r.face.value[k]);
  }
  r.element = SparseVector::from_pairs(std::move(h));
  return r;
}

inline RhsSpec make_rhs(RhsKind kind, const Dipole& dipole, const SaddleSystem& system, const HexMesh& mesh) {
  return kind == RhsKind::direct ? rhs_direct(dipole, system, mesh) : rhs_projected(dipole, system, mesh);
}

// ---- sphere-study source placement ----------------------------------------

struct PlacementSpec {
  double inner_radius = 78.0;  // mm, brain compartment
  Vec3 center{0.0, 0.0, 0.0};
  int n_radii = 10;
  int n_per_radius = 10;
  double d_max = 39.0;  // mm, largest distance to the inner boundary
  double d_min = 0.5;   // mm, smallest distance
  std::uint64_t seed = 1;
  bool radial = true;  // otherwise moments are drawn independently
};

struct PlacedDipole {
  std::int32_t id = 0;
  Dipole dipole;
  double eccentricity = 0.0;
};

namespace detail {
/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Vec3 random_direction(std::mt19937_64& rng) {
  const double z = 2.0 * unit_uniform(rng) - 1.0;
  const double phi = 2.0 * M_PI * unit_uniform(rng);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}
}  // namespace detail

/// Log-spaced distances d_i = d_max (d_min/d_max)^(i/(n-1)) to the inner
/// boundary, n_per_radius uniformly random directions each.
inline std::vector<double> placement_distances(const PlacementSpec& spec) {
  if (spec.n_radii < 1 || spec.n_per_radius < 1) throw ValidationError("source placement needs n_radii, n_per_radius >= 1");
  if (!(spec.d_max > 0.0 && spec.d_min > 0.0 && spec.d_min <= spec.d_max && spec.d_max <= spec.inner_radius))
    throw ValidationError("source distances must satisfy 0 < d_min <= d_max <= inner radius");
  std::vector<double> d(static_cast<std::size_t>(spec.n_radii));
  for (int i = 0; i < spec.n_radii; ++i)
    d[static_cast<std::size_t>(i)] =
        spec.n_radii == 1 ? spec.d_max : spec.d_max * std::pow(spec.d_min / spec.d_max, double(i) / (spec.n_radii - 1));
  return d;
}

inline std::vector<PlacedDipole> place_sources(const PlacementSpec& spec) {
  const auto distances = placement_distances(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<PlacedDipole> out;
  std::int32_t id = 0;
  for (double d : distances) {
    const double r = spec.inner_radius - d;
    for (int k = 0; k < spec.n_per_radius; ++k) {
      const Vec3 dir = detail::random_direction(rng);
      PlacedDipole p;
      p.id = id++;
      p.dipole.position = spec.center + r * dir;
      p.dipole.moment = spec.radial ? dir : detail::random_direction(rng);
      p.eccentricity = r / spec.inner_radius;
      out.push_back(p);
    }
  }
  return out;
}

// ---- dipole list files ----------------------------------------------------

inline void write_dipoles_csv(const std::string& path, const std::vector<PlacedDipole>& dipoles,
                              const std::string& provenance = {}) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  if (!provenance.empty()) out << provenance << '\n';
  out << "id,x,y,z,mx,my,mz\n";
  for (const auto& p : dipoles) {
    out << p.id;
    for (double v : p.dipole.position) out << ',' << format_double(v);
    for (double v : p.dipole.moment) out << ',' << format_double(v);
    out << '\n';
  }
}

/// Reads "id,x,y,z,mx,my,mz"; lines starting with '#' are skipped. The
/// eccentricity field is left at 0.
inline std::vector<PlacedDipole> read_dipoles_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  bool header = false;
  std::vector<PlacedDipole> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "id,x,y,z,mx,my,mz") throw ValidationError(path + ": expected header id,x,y,z,mx,my,mz");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError(path + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 7) throw ValidationError(path + ": expected 7 fields per dipole row");
    PlacedDipole p;
    p.id = static_cast<std::int32_t>(v[0]);
    p.dipole.position = {v[1], v[2], v[3]};
    p.dipole.moment = {v[4], v[5], v[6]};
    validate_moment(p.dipole);
    out.push_back(p);
  }
  if (!header) throw ValidationError(path + ": missing header");
  return out;
}

}  // namespace hdivfwd
