#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hdivfwd/analytic_sphere.hpp"
#include "hdivfwd/error.hpp"
#include "hdivfwd/evaluation.hpp"
#include "hdivfwd/hexmesh.hpp"
#include "hdivfwd/io.hpp"
#include "hdivfwd/saddle_solver.hpp"
#include "hdivfwd/sources.hpp"

namespace hdivfwd {

/// Every key the command-line front end understands.
inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "mesh.file",           "mesh.radii",           "mesh.labels",         "mesh.spacing",
      "mesh.centering",      "mesh.dims",            "mesh.origin",         "mesh.center",
      "mesh.skull_outer_radius", "mesh.leak_labels", "compartments.*",      "solver.outer_tol",
      "solver.outer_max_iter", "solver.inner",       "solver.inner_iters",  "solver.inner_tol",
      "solver.precond",      "solver.diagonal",      "solver.ssor_sweeps",  "solver.ssor_omega",
      "solver.deflate",      "solver.recompute_every", "solver.nodal_precond", "solver.nodal_tol",
      "source.position",     "source.moment",        "source.file",         "placement.n_radii",
      "placement.n_per_radius", "placement.d_max",   "placement.d_min",     "placement.inner_radius",
      "placement.radial",    "sweep.methods",        "sweep.samples",       "sweep.sample_radius",
      "sweep.sample_label",  "sweep.inner_label",    "sweep.model_name",    "sweep.max_terms",
      "sweep.tail_tol",      "transfer.sensors",     "transfer.sensor_radius", "run.seed",
      "run.output",          "run.method",           "run.threads"};
  return keys;
}

namespace detail {
inline Vec3 vec3_of(const Config& c, const std::string& key) {
  const auto v = c.numbers(key);
  if (v.size() != 3) throw ValidationError(key + " needs three numbers");
  return {v[0], v[1], v[2]};
}
}  // namespace detail

/// Parsed run configuration shared by all subcommands.
struct RunConfig {
  Config raw;
  CompartmentTable table;
  std::optional<std::string> mesh_file;
  SphereSpec sphere;
  std::optional<double> skull_outer_radius;
  std::pair<Label, Label> leak_labels{2, 4};
  SolverConfig solver;
  NodalPrecond nodal_precond = NodalPrecond::amg;
  double nodal_tol = 1e-8;
  std::optional<Dipole> source;
  std::optional<std::string> source_file;
  PlacementSpec placement;
  std::vector<Method> methods{Method::mixed_projected};
  std::size_t samples = 1000;
  double sample_radius = 0.0;  // 0: outer sphere radius
  Label sample_label = 4;
  Label inner_label = 1;
  std::string model_name = "sphere";
  SeriesConfig series;
  std::size_t sensors = 32;
  double sensor_radius = 0.0;
  std::uint64_t seed = 1;
  std::string output = ".";
  Method method = Method::mixed_projected;

  static RunConfig from(const Config& c) {
    c.check_known(known_config_keys());
    RunConfig r;
    r.raw = c;

    bool any_compartment = false;
    for (const auto& [k, v] : c.values()) {
      if (k.rfind("compartments.", 0) != 0) continue;
      any_compartment = true;
      const auto label = std::stol(k.substr(13));
      if (label < 1 || label > 255) throw ValidationError("compartment labels must be in 1..255");
      const auto parts = c.list(k);
      if (parts.size() != 2) throw ValidationError(k + " must be '<name> <sigma>'");
      double sigma = 0.0;
      try {
        sigma = std::stod(parts[1]);
      } catch (const std::exception&) {
        throw ValidationError(k + ": bad conductivity '" + parts[1] + "'");
      }
      r.table.add(static_cast<Label>(label), parts[0], sigma);
    }
    if (!any_compartment) r.table = CompartmentTable::four_layer_sphere();

    if (c.has("mesh.file")) r.mesh_file = c.require("mesh.file");
    r.sphere = SphereSpec::four_layer(c.number("mesh.spacing", 2.0));
    if (c.has("mesh.radii")) r.sphere.radii = c.numbers("mesh.radii");
    if (c.has("mesh.labels")) {
      r.sphere.labels.clear();
      for (double l : c.numbers("mesh.labels")) r.sphere.labels.push_back(static_cast<Label>(l));
    } else if (r.sphere.labels.size() != r.sphere.radii.size()) {
      r.sphere.labels.clear();
      for (std::size_t k = 0; k < r.sphere.radii.size(); ++k) r.sphere.labels.push_back(static_cast<Label>(k + 1));
    }
    const std::string centering = c.get("mesh.centering", "corner");
    if (centering == "corner")
      r.sphere.centering = Centering::corner;
    else if (centering == "cell" || centering == "cell_center")
      r.sphere.centering = Centering::cell_center;
    else
      throw ValidationError("mesh.centering must be corner or cell_center");
    if (c.has("mesh.dims")) {
      const auto d = c.numbers("mesh.dims");
      if (d.size() != 3) throw ValidationError("mesh.dims needs three integers");
      r.sphere.dims = {static_cast<std::int32_t>(d[0]), static_cast<std::int32_t>(d[1]), static_cast<std::int32_t>(d[2])};
    }
    if (c.has("mesh.origin")) r.sphere.origin = detail::vec3_of(c, "mesh.origin");
    if (c.has("mesh.center")) r.sphere.center = detail::vec3_of(c, "mesh.center");
    if (c.has("mesh.skull_outer_radius")) r.skull_outer_radius = c.number("mesh.skull_outer_radius", 0.0);
    if (c.has("mesh.leak_labels")) {
      const auto l = c.numbers("mesh.leak_labels");
      if (l.size() != 2) throw ValidationError("mesh.leak_labels needs two labels");
      r.leak_labels = {static_cast<Label>(l[0]), static_cast<Label>(l[1])};
    }
    for (auto l : r.sphere.labels)
      if (!r.table.contains(l)) throw ValidationError("sphere label " + std::to_string(l) + " has no compartment entry");

    auto& s = r.solver;
    s.outer_tol = c.number("solver.outer_tol", s.outer_tol);
    s.outer_max_iter = static_cast<int>(c.integer("solver.outer_max_iter", s.outer_max_iter));
    const std::string inner = c.get("solver.inner", "exact");
    if (inner == "exact")
      s.inner = InnerSolve::exact_lines;
    else if (inner == "fixed")
      s.inner = InnerSolve::fixed_iterations;
    else if (inner == "tolerance")
      s.inner = InnerSolve::tolerance;
    else
      throw ValidationError("solver.inner must be exact, fixed or tolerance");
    s.inner_iters = static_cast<int>(c.integer("solver.inner_iters", s.inner_iters));
    s.inner_tol = c.number("solver.inner_tol", s.inner_tol);
    const std::string pre = c.get("solver.precond", "amg");
    if (pre == "none")
      s.precond = PrecondKind::none;
    else if (pre == "ssor")
      s.precond = PrecondKind::ssor;
    else if (pre == "amg")
      s.precond = PrecondKind::amg;
    else
      throw ValidationError("solver.precond must be none, ssor or amg");
    const std::string diag = c.get("solver.diagonal", "l2");
    if (diag == "l2")
      s.diagonal = DiagonalKind::l2_row;
    else if (diag == "diag")
      s.diagonal = DiagonalKind::diagonal;
    else if (diag == "rowsum")
      s.diagonal = DiagonalKind::row_sum;
    else
      throw ValidationError("solver.diagonal must be l2, diag or rowsum");
    s.ssor_sweeps = static_cast<int>(c.integer("solver.ssor_sweeps", s.ssor_sweeps));
    s.ssor_omega = c.number("solver.ssor_omega", s.ssor_omega);
    s.deflate_constants = c.flag("solver.deflate", s.deflate_constants);
    s.recompute_every = static_cast<int>(c.integer("solver.recompute_every", s.recompute_every));
    s.validate();
    const std::string np = c.get("solver.nodal_precond", "amg");
    if (np == "amg")
      r.nodal_precond = NodalPrecond::amg;
    else if (np == "jacobi")
      r.nodal_precond = NodalPrecond::jacobi;
    else
      throw ValidationError("solver.nodal_precond must be amg or jacobi");
    r.nodal_tol = c.number("solver.nodal_tol", r.nodal_tol);

    if (c.has("source.position") || c.has("source.moment")) {
      Dipole d;
      d.position = detail::vec3_of(c, "source.position");
      d.moment = detail::vec3_of(c, "source.moment");
      validate_moment(d);
      r.source = d;
    }
    if (c.has("source.file")) r.source_file = c.require("source.file");

    r.seed = static_cast<std::uint64_t>(c.integer("run.seed", 1));
    auto& p = r.placement;
    p.inner_radius = c.number("placement.inner_radius", r.sphere.radii.front());
    p.center = r.sphere.center.value_or(Vec3{0.0, 0.0, 0.0});
    p.n_radii = static_cast<int>(c.integer("placement.n_radii", p.n_radii));
    p.n_per_radius = static_cast<int>(c.integer("placement.n_per_radius", p.n_per_radius));
    p.d_max = c.number("placement.d_max", p.d_max);
    p.d_min = c.number("placement.d_min", p.d_min);
    p.radial = c.flag("placement.radial", true);
    p.seed = r.seed;

    if (c.has("sweep.methods")) {
      r.methods.clear();
      for (const auto& m : c.list("sweep.methods")) r.methods.push_back(parse_method(m));
      if (r.methods.empty()) throw UsageError("sweep.methods is empty");
    }
    const long samples = c.integer("sweep.samples", 1000);
    if (samples < 1) throw ValidationError("sweep.samples must be >= 1");
    r.samples = static_cast<std::size_t>(samples);
    r.sample_radius = c.number("sweep.sample_radius", r.sphere.radii.back());
    r.sample_label = static_cast<Label>(c.integer("sweep.sample_label", r.sphere.labels.back()));
    r.inner_label = static_cast<Label>(c.integer("sweep.inner_label", r.sphere.labels.front()));
    r.model_name = c.get("sweep.model_name", "sphere");
    r.series.max_terms = static_cast<int>(c.integer("sweep.max_terms", r.series.max_terms));
    r.series.tail_tol = c.number("sweep.tail_tol", r.series.tail_tol);

    const long sensors = c.integer("transfer.sensors", 32);
    if (sensors < 2) throw ValidationError("transfer.sensors must be >= 2");
    r.sensors = static_cast<std::size_t>(sensors);
    r.sensor_radius = c.number("transfer.sensor_radius", r.sphere.radii.back());

    r.output = c.get("run.output", ".");
    r.method = parse_method(c.get("run.method", "mixed-projected"));
    return r;
  }

  /// Output directory and thread count do not change results, so they stay
  /// out of the hash.
  std::string provenance() const {
    Config hashed;
    for (const auto& [k, v] : raw.values())
      if (k != "run.output" && k != "run.threads") hashed.set(k, v);
    return provenance_line(hashed, seed);
  }

  HexMesh build_mesh() const {
    if (mesh_file) return load_labeled_voxels(*mesh_file, table, raw.number("mesh.spacing", 0.0));
    if (skull_outer_radius) return generate_leaky_sphere(sphere, *skull_outer_radius);
    return generate_sphere_mesh(sphere);
  }

  /// Analytic reference for sphere meshes, with the thinned skull of a leaky
  /// variant.
  LayeredSphere analytic_model() const {
    LayeredSphere m;
    m.radii = sphere.radii;
    if (skull_outer_radius && m.radii.size() >= 2) m.radii[m.radii.size() - 2] = *skull_outer_radius;
    for (auto l : sphere.labels) m.sigmas.push_back(table.sigma(l));
    m.center = sphere.center.value_or(Vec3{0.0, 0.0, 0.0});
    return m;
  }

  SweepConfig sweep_config() const {
    SweepConfig s;
    s.model_name = model_name;
    s.solver = solver;
    s.nodal_precond = nodal_precond;
    s.nodal_tol = nodal_tol;
    s.series = series;
    s.inner_label = inner_label;
    s.sample_label = sample_label;
    return s;
  }

  /// Explicit sources get their eccentricity relative to the placement sphere.
  std::vector<PlacedDipole> dipoles() const {
    std::vector<PlacedDipole> out;
    if (source_file)
      out = read_dipoles_csv(*source_file);
    else if (source)
      out = {PlacedDipole{0, *source, 0.0}};
    else
      return place_sources(placement);
    for (auto& p : out) p.eccentricity = norm(p.dipole.position - placement.center) / placement.inner_radius;
    return out;
  }
};

}  // namespace hdivfwd
