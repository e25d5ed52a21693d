#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hdivfwd/error.hpp"
#include "hdivfwd/geometry.hpp"
#include "hdivfwd/sparse.hpp"

namespace hdivfwd {

using Label = std::uint8_t;

/// Reserved label of non-conducting cells outside the computational domain.
inline constexpr Label kExterior = 0;

/// Lattice offsets of the eight hexahedron vertices: bottom square
/// counter-clockwise, then the top square.
inline constexpr std::array<std::array<int, 3>, 8> kHexCorner{
    {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};

struct Compartment {
  std::string name;
  double sigma;  // S/m
};

/// Compartment label -> (name, conductivity).
class CompartmentTable {
 public:
  CompartmentTable() = default;

  CompartmentTable& add(Label label, std::string name, double sigma) {
    if (label == kExterior) throw ValidationError("label 0 is reserved for the exterior");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw ValidationError("conductivity of compartment " + std::to_string(label) + " must be positive");
    if (entries_.count(label)) throw ValidationError("duplicate compartment label " + std::to_string(label));
    entries_.emplace(label, Compartment{std::move(name), sigma});
    return *this;
  }

  bool contains(Label label) const { return entries_.count(label) != 0; }

  const Compartment& at(Label label) const {
    const auto it = entries_.find(label);
    if (it == entries_.end()) throw ValidationError("unknown compartment label " + std::to_string(label));
    return it->second;
  }

  double sigma(Label label) const { return at(label).sigma; }
  const std::map<Label, Compartment>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Brain, CSF, skull, skin with labels 1..4.
  static CompartmentTable four_layer_sphere() {
    CompartmentTable t;
    t.add(1, "brain", 0.33).add(2, "csf", 1.79).add(3, "skull", 0.01).add(4, "skin", 0.43);
    return t;
  }

 private:
  std::map<Label, Compartment> entries_;
};

/// Where the sphere center sits relative to the voxel lattice.
enum class Centering { corner, cell_center };

/// Concentric multilayer sphere on a regular grid.
struct SphereSpec {
  std::vector<double> radii;  // mm, innermost first
  std::vector<Label> labels;  // one per layer
  double spacing = 2.0;       // mm
  /// All zero: grid sized to the outer radius plus one cell of air.
  std::array<std::int32_t, 3> dims{0, 0, 0};
  Vec3 origin{0.0, 0.0, 0.0};  // only read with explicit dims
  /// Unset: grid midpoint snapped to the lattice selected by `centering`.
  std::optional<Vec3> center;
  Centering centering = Centering::corner;

  static SphereSpec four_layer(double spacing) {
    SphereSpec s;
    s.radii = {78.0, 80.0, 86.0, 92.0};
    s.labels = {1, 2, 3, 4};
    s.spacing = spacing;
    return s;
  }

  void validate() const {
    if (!(spacing > 0.0)) throw ValidationError("sphere spacing must be positive");
    if (radii.empty()) throw ValidationError("sphere needs at least one layer");
    if (labels.size() != radii.size()) throw ValidationError("one label per sphere layer required");
    for (std::size_t k = 0; k < radii.size(); ++k) {
      if (!(radii[k] > 0.0)) throw ValidationError("sphere radii must be positive");
      if (k > 0 && !(radii[k] > radii[k - 1])) throw ValidationError("sphere radii must be strictly increasing");
      if (labels[k] == kExterior) throw ValidationError("sphere layers cannot use the exterior label 0");
    }
    for (auto d : dims)
      if (d < 0) throw ValidationError("grid dimensions must be non-negative");
  }
};

/// A face of the voxel lattice that bounds at least one labeled cell. The
/// normal points along +axis, from `minus` to `plus`.
struct Face {
  std::int32_t minus = -1;  // element on the low side, -1 if exterior
  std::int32_t plus = -1;   // element on the high side, -1 if exterior
  Axis axis = Axis::x;
  std::array<std::int32_t, 3> lattice{0, 0, 0};  // face lies in plane coordinate lattice[axis]

  bool boundary() const noexcept { return minus < 0 || plus < 0; }
};

/// Regular labeled hexahedral grid with element, face and vertex topology.
///
/// Elements are the cells with label != 0, numbered in x-fastest cell order.
/// Faces are ordered by axis, then by face-lattice index (x-fastest).
/// Vertices are the lattice points touching an element, in lattice order.
/// The object is immutable after construction.
class HexMesh {
 public:
  HexMesh(std::array<std::int32_t, 3> dims, double spacing, Vec3 origin, std::vector<Label> labels)
      : dims_(dims), spacing_(spacing), origin_(origin), labels_(std::move(labels)) {
    if (!(spacing_ > 0.0)) throw ValidationError("mesh spacing must be positive");
    for (auto d : dims_)
      if (d < 1) throw ValidationError("mesh dimensions must be >= 1");
    if (labels_.size() != cell_count()) throw ValidationError("label payload does not match grid dimensions");
    build_elements();
    build_faces();
    build_vertices();
  }

  const std::array<std::int32_t, 3>& dims() const noexcept { return dims_; }
  double spacing() const noexcept { return spacing_; }
  const Vec3& origin() const noexcept { return origin_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }

  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  }
  std::int32_t element_count() const noexcept { return static_cast<std::int32_t>(cell_of_element_.size()); }
  std::int32_t face_count() const noexcept { return static_cast<std::int32_t>(faces_.size()); }
  std::int32_t interior_face_count() const noexcept { return interior_faces_; }
  std::int32_t boundary_face_count() const noexcept { return face_count() - interior_faces_; }
  std::int32_t vertex_count() const noexcept { return static_cast<std::int32_t>(lattice_of_vertex_.size()); }

  std::int32_t cell_index(std::int32_t i, std::int32_t j, std::int32_t k) const noexcept {
    return i + dims_[0] * (j + dims_[1] * k);
  }
  std::array<std::int32_t, 3> cell_coords(std::int32_t cell) const noexcept {
    return {cell % dims_[0], (cell / dims_[0]) % dims_[1], cell / (dims_[0] * dims_[1])};
  }

  Label cell_label(std::int32_t cell) const { return labels_[static_cast<std::size_t>(cell)]; }
  Label element_label(std::int32_t e) const { return labels_[static_cast<std::size_t>(cell_of_element_[e])]; }
  std::int32_t element_of_cell(std::int32_t cell) const { return element_of_cell_[static_cast<std::size_t>(cell)]; }
  std::int32_t cell_of_element(std::int32_t e) const { return cell_of_element_[e]; }

  Vec3 element_center(std::int32_t e) const {
    const auto c = cell_coords(cell_of_element_[e]);
    return {origin_[0] + (c[0] + 0.5) * spacing_, origin_[1] + (c[1] + 0.5) * spacing_,
            origin_[2] + (c[2] + 0.5) * spacing_};
  }

  const std::vector<Face>& faces() const noexcept { return faces_; }
  const Face& face(std::int32_t f) const { return faces_[f]; }

  Vec3 face_centroid(std::int32_t f) const {
    const Face& fc = faces_[f];
    Vec3 x{};
    for (int a = 0; a < 3; ++a) {
      const double off = (a == static_cast<int>(fc.axis)) ? 0.0 : 0.5;
      x[a] = origin_[a] + (fc.lattice[a] + off) * spacing_;
    }
    return x;
  }

  /// Faces of element e, ordered -x, +x, -y, +y, -z, +z.
  const std::array<std::int32_t, 6>& element_faces(std::int32_t e) const { return element_faces_[e]; }

  /// Vertices of element e in hexahedron order (bottom square ccw, then top).
  const std::array<std::int32_t, 8>& element_vertices(std::int32_t e) const { return element_vertices_[e]; }

  std::array<std::int32_t, 3> vertex_lattice(std::int32_t v) const {
    const auto l = lattice_of_vertex_[v];
    const std::int32_t vx = dims_[0] + 1;
    const std::int32_t vy = dims_[1] + 1;
    return {l % vx, (l / vx) % vy, l / (vx * vy)};
  }
  Vec3 vertex_position(std::int32_t v) const {
    const auto l = vertex_lattice(v);
    return {origin_[0] + l[0] * spacing_, origin_[1] + l[1] * spacing_, origin_[2] + l[2] * spacing_};
  }

  /// Cell containing x. A point on a cell boundary plane belongs to the cell
  /// on the low side along that axis.
  std::optional<std::int32_t> locate_cell(const Vec3& x) const {
    std::array<std::int32_t, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const double t = (x[a] - origin_[a]) / spacing_;
      if (!std::isfinite(t)) return std::nullopt;
      const double fl = std::floor(t);
      const double ci = (t == fl) ? fl - 1.0 : fl;
      if (ci < 0.0 || ci >= dims_[a]) return std::nullopt;
      c[a] = static_cast<std::int32_t>(ci);
    }
    return cell_index(c[0], c[1], c[2]);
  }

  /// Element containing x; PlacementError when x is in air or off the grid.
  std::int32_t locate_element(const Vec3& x) const {
    const auto cell = locate_cell(x);
    if (!cell || element_of_cell(*cell) < 0) {
      std::ostringstream msg;
      msg << "position (" << x[0] << ", " << x[1] << ", " << x[2] << ") is outside the conducting domain";
      throw PlacementError(msg.str());
    }
    return element_of_cell(*cell);
  }

  /// Labels present in the domain, ascending.
  std::vector<Label> present_labels() const {
    std::array<bool, 256> seen{};
    for (auto l : labels_) seen[l] = true;
    std::vector<Label> out;
    for (int l = 1; l < 256; ++l)
      if (seen[l]) out.push_back(static_cast<Label>(l));
    return out;
  }

  /// True when every element can be reached from element 0 through interior faces.
  bool is_connected() const {
    if (element_count() == 0) return true;
    std::vector<char> seen(static_cast<std::size_t>(element_count()), 0);
    std::vector<std::int32_t> stack{0};
    seen[0] = 1;
    std::int32_t reached = 1;
    while (!stack.empty()) {
      const auto e = stack.back();
      stack.pop_back();
      for (auto f : element_faces_[e]) {
        const Face& fc = faces_[f];
        if (fc.boundary()) continue;
        const auto n = fc.minus == e ? fc.plus : fc.minus;
        if (!seen[n]) {
          seen[n] = 1;
          ++reached;
          stack.push_back(n);
        }
      }
    }
    return reached == element_count();
  }

 private:
  void build_elements() {
    element_of_cell_.assign(cell_count(), -1);
    for (std::size_t c = 0; c < cell_count(); ++c) {
      if (labels_[c] == kExterior) continue;
      element_of_cell_[c] = static_cast<std::int32_t>(cell_of_element_.size());
      cell_of_element_.push_back(static_cast<std::int32_t>(c));
    }
    if (cell_of_element_.empty()) throw EmptyDomainError("mesh has no labeled (conducting) cells");
  }

  std::int32_t element_at(std::int32_t i, std::int32_t j, std::int32_t k) const {
    if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) return -1;
    return element_of_cell_[static_cast<std::size_t>(cell_index(i, j, k))];
  }

  void build_faces() {
    element_faces_.assign(cell_of_element_.size(), {-1, -1, -1, -1, -1, -1});
    for (int a = 0; a < 3; ++a) {
      std::array<std::int32_t, 3> fd = dims_;
      fd[a] += 1;
      for (std::int32_t k = 0; k < fd[2]; ++k)
        for (std::int32_t j = 0; j < fd[1]; ++j)
          for (std::int32_t i = 0; i < fd[0]; ++i) {
            std::array<std::int32_t, 3> lo{i, j, k};
            lo[a] -= 1;
            const auto minus = element_at(lo[0], lo[1], lo[2]);
            const auto plus = element_at(i, j, k);
            if (minus < 0 && plus < 0) continue;
            const auto id = static_cast<std::int32_t>(faces_.size());
            faces_.push_back(Face{minus, plus, static_cast<Axis>(a), {i, j, k}});
            if (minus >= 0) element_faces_[minus][2 * a + 1] = id;
            if (plus >= 0) element_faces_[plus][2 * a] = id;
            if (minus >= 0 && plus >= 0) ++interior_faces_;
          }
    }
  }

  void build_vertices() {
    const std::int32_t vx = dims_[0] + 1;
    const std::int32_t vy = dims_[1] + 1;
    const std::size_t lattice = static_cast<std::size_t>(vx) * vy * (dims_[2] + 1);
    std::vector<std::int32_t> vertex_of_lattice(lattice, -1);
    const auto& corner = kHexCorner;
    for (auto cell : cell_of_element_) {
      const auto c = cell_coords(cell);
      for (const auto& o : corner)
        vertex_of_lattice[static_cast<std::size_t>((c[0] + o[0]) + vx * ((c[1] + o[1]) + vy * (c[2] + o[2])))] = 0;
    }
    for (std::size_t l = 0; l < lattice; ++l)
      if (vertex_of_lattice[l] == 0) {
        vertex_of_lattice[l] = static_cast<std::int32_t>(lattice_of_vertex_.size());
        lattice_of_vertex_.push_back(static_cast<std::int32_t>(l));
      }
    element_vertices_.resize(cell_of_element_.size());
    for (std::size_t e = 0; e < cell_of_element_.size(); ++e) {
      const auto c = cell_coords(cell_of_element_[e]);
      for (int q = 0; q < 8; ++q) {
        const auto& o = corner[q];
        element_vertices_[e][q] =
            vertex_of_lattice[static_cast<std::size_t>((c[0] + o[0]) + vx * ((c[1] + o[1]) + vy * (c[2] + o[2])))];
      }
    }
  }

  std::array<std::int32_t, 3> dims_;
  double spacing_;
  Vec3 origin_;
  std::vector<Label> labels_;
  std::vector<std::int32_t> element_of_cell_;
  std::vector<std::int32_t> cell_of_element_;
  std::vector<Face> faces_;
  std::int32_t interior_faces_ = 0;
  std::vector<std::array<std::int32_t, 6>> element_faces_;
  std::vector<std::int32_t> lattice_of_vertex_;
  std::vector<std::array<std::int32_t, 8>> element_vertices_;
};

/// Grid geometry a SphereSpec resolves to.
struct SphereGrid {
  std::array<std::int32_t, 3> dims;
  Vec3 origin;
  Vec3 center;
};

inline SphereGrid resolve_sphere_grid(const SphereSpec& spec) {
  spec.validate();
  const double h = spec.spacing;
  const double outer = spec.radii.back();
  SphereGrid g{};
  const bool automatic = spec.dims == std::array<std::int32_t, 3>{0, 0, 0};
  if (automatic) {
    const Vec3 c = spec.center.value_or(Vec3{0.0, 0.0, 0.0});
    const auto half = static_cast<std::int32_t>(std::ceil(outer / h - 1e-12)) + 1;
    const bool corner = spec.centering == Centering::corner;
    const std::int32_t n = corner ? 2 * half : 2 * half + 1;
    const double shift = corner ? half * h : (half + 0.5) * h;
    g.dims = {n, n, n};
    g.origin = {c[0] - shift, c[1] - shift, c[2] - shift};
    g.center = c;
  } else {
    for (auto d : spec.dims)
      if (d < 1) throw DimensionError("explicit grid dimensions must all be >= 1");
    g.dims = spec.dims;
    g.origin = spec.origin;
    if (spec.center) {
      g.center = *spec.center;
    } else {
      for (int a = 0; a < 3; ++a) {
        const std::int32_t n = g.dims[a];
        const double k = spec.centering == Centering::corner
                             ? std::round(n / 2.0)
                             : (n % 2 == 1 ? (n - 1) / 2 + 0.5 : n / 2 - 0.5);
        g.center[a] = g.origin[a] + k * h;
      }
    }
  }
  for (int a = 0; a < 3; ++a) {
    const double lo = g.origin[a];
    const double hi = g.origin[a] + g.dims[a] * h;
    if (g.center[a] - outer - h < lo - 1e-9 * h || g.center[a] + outer + h > hi + 1e-9 * h)
      throw DimensionError("sphere of radius " + std::to_string(outer) +
                           " mm plus one cell of padding does not fit in the grid");
  }
  return g;
}

/// Labels each cell by the innermost layer whose radius is >= the distance of
/// the cell centroid to the center; cells beyond the outer radius get label 0.
inline HexMesh generate_sphere_mesh(const SphereSpec& spec) {
  const SphereGrid g = resolve_sphere_grid(spec);
  const double h = spec.spacing;
  std::vector<double> r2(spec.radii.size());
  for (std::size_t k = 0; k < r2.size(); ++k) r2[k] = spec.radii[k] * spec.radii[k];
  std::vector<Label> labels(static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2], kExterior);
  std::size_t idx = 0;
  for (std::int32_t k = 0; k < g.dims[2]; ++k) {
    const double dz = g.origin[2] + (k + 0.5) * h - g.center[2];
    for (std::int32_t j = 0; j < g.dims[1]; ++j) {
      const double dy = g.origin[1] + (j + 0.5) * h - g.center[1];
      for (std::int32_t i = 0; i < g.dims[0]; ++i, ++idx) {
        const double dx = g.origin[0] + (i + 0.5) * h - g.center[0];
        const double d2 = dx * dx + dy * dy + dz * dz;
        for (std::size_t layer = 0; layer < r2.size(); ++layer)
          if (d2 <= r2[layer]) {
            labels[idx] = spec.labels[layer];
            break;
          }
      }
    }
  }
  return HexMesh(g.dims, h, g.origin, std::move(labels));
}

/// Sphere with the second-outermost layer (the skull in a four-layer model)
/// given a different outer radius.
inline HexMesh generate_leaky_sphere(SphereSpec spec, double skull_outer_radius) {
  spec.validate();
  const std::size_t n = spec.radii.size();
  if (n < 3) throw ValidationError("leaky sphere needs at least three layers");
  if (!(skull_outer_radius > spec.radii[n - 3] && skull_outer_radius < spec.radii[n - 1]))
    throw ValidationError("skull outer radius must lie strictly between the inner compartment radius and the outer radius");
  spec.radii[n - 2] = skull_outer_radius;
  return generate_sphere_mesh(spec);
}

/// Number of lattice vertices shared by at least one element labeled
/// `label_a` and at least one labeled `label_b`.
inline std::int64_t count_leaks(const HexMesh& mesh, Label label_a, Label label_b) {
  const auto present = mesh.present_labels();
  for (auto l : {label_a, label_b})
    if (std::find(present.begin(), present.end(), l) == present.end())
      throw ValidationError("label " + std::to_string(l) + " does not occur in the mesh");
  std::vector<std::uint8_t> mark(static_cast<std::size_t>(mesh.vertex_count()), 0);
  for (std::int32_t e = 0; e < mesh.element_count(); ++e) {
    const Label l = mesh.element_label(e);
    const std::uint8_t bit = (l == label_a ? 1 : 0) | (l == label_b ? 2 : 0);
    if (!bit) continue;
    for (auto v : mesh.element_vertices(e)) mark[static_cast<std::size_t>(v)] |= bit;
  }
  return std::count(mark.begin(), mark.end(), std::uint8_t{3});
}

// ---- labeled-voxel files -------------------------------------------------
//
// ASCII header "HXM1 nx ny nz spacing_mm ox oy oz\n" followed by nx*ny*nz
// unsigned 8-bit labels, x fastest.

inline void save_labeled_voxels(const std::string& path, const HexMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  const auto& d = mesh.dims();
  const auto& o = mesh.origin();
  out << "HXM1 " << d[0] << ' ' << d[1] << ' ' << d[2] << ' ' << format_double(mesh.spacing()) << ' '
      << format_double(o[0]) << ' ' << format_double(o[1]) << ' ' << format_double(o[2]) << '\n';
  out.write(reinterpret_cast<const char*>(mesh.labels().data()), static_cast<std::streamsize>(mesh.labels().size()));
  if (!out) throw ValidationError("failed writing " + path);
}

/// Reads an HXM1 file. Labels must be 0 or present in `table`. A positive
/// `spacing_override` replaces the spacing stored in the header.
inline HexMesh load_labeled_voxels(const std::string& path, const CompartmentTable& table,
                                   double spacing_override = 0.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw ValidationError(path + ": missing header");
  std::istringstream hs(header);
  std::string magic;
  long nx = 0, ny = 0, nz = 0;
  double h = 0.0;
  Vec3 origin{};
  if (!(hs >> magic >> nx >> ny >> nz >> h >> origin[0] >> origin[1] >> origin[2]) || magic != "HXM1")
    throw ValidationError(path + ": malformed HXM1 header");
  std::string extra;
  if (hs >> extra) throw ValidationError(path + ": trailing tokens in HXM1 header");
  if (nx < 1 || ny < 1 || nz < 1 || nx * ny * nz > (1L << 31))
    throw ValidationError(path + ": invalid grid dimensions");
  if (spacing_override > 0.0) h = spacing_override;
  if (!(h > 0.0)) throw ValidationError(path + ": spacing must be positive");
  std::vector<Label> labels(static_cast<std::size_t>(nx * ny * nz));
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (static_cast<std::size_t>(in.gcount()) != labels.size())
    throw ValidationError(path + ": payload shorter than nx*ny*nz");
  if (in.peek() != std::char_traits<char>::eof()) throw ValidationError(path + ": payload longer than nx*ny*nz");
  for (auto l : labels)
    if (l != kExterior && !table.contains(l))
      throw ValidationError(path + ": label " + std::to_string(l) + " is not in the compartment table");
  return HexMesh({static_cast<std::int32_t>(nx), static_cast<std::int32_t>(ny), static_cast<std::int32_t>(nz)}, h,
                 origin, std::move(labels));
}

}  // namespace hdivfwd
