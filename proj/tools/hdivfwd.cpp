// Command-line front end: generate-mesh, solve, sweep, transfer, export-vtk.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdivfwd/hdivfwd.hpp"
#include "hdivfwd/run_config.hpp"

namespace fs = std::filesystem;
using namespace hdivfwd;

namespace {

struct GlobalOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::string output;
  std::string method;
  long long seed = -1;
  int threads = 0;
  bool log_convergence = false;
};

RunConfig load_run_config(const GlobalOptions& g) {
  Config c = g.config_file.empty() ? Config{} : Config::load(g.config_file);
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    c.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!g.output.empty()) c.set("run.output", g.output);
  if (!g.method.empty()) c.set("run.method", g.method);
  if (g.seed >= 0) c.set("run.seed", std::to_string(g.seed));
  if (g.threads > 0) c.set("run.threads", std::to_string(g.threads));
  if (c.has("run.threads")) set_thread_count(static_cast<int>(c.integer("run.threads", 0)));
  auto r = RunConfig::from(c);
  std::error_code ec;
  fs::create_directories(r.output, ec);
  if (ec || !fs::is_directory(r.output)) throw ValidationError("cannot create output directory " + r.output);
  return r;
}

std::string out_path(const RunConfig& r, const std::string& name) { return (fs::path(r.output) / name).string(); }

void write_indexed_csv(const std::string& path, const std::string& header, std::span<const double> v,
                       const std::string& provenance) {
  auto out = open_output(path);
  out << provenance << '\n' << header << '\n';
  for (std::size_t i = 0; i < v.size(); ++i) out << i << ',' << format_double(v[i]) << '\n';
}

void write_vector_csv(const std::string& path, std::span<const Vec3> v, const std::string& provenance) {
  auto out = open_output(path);
  out << provenance << "\nelement_id,jx,jy,jz\n";
  for (std::size_t i = 0; i < v.size(); ++i)
    out << i << ',' << format_double(v[i][0]) << ',' << format_double(v[i][1]) << ',' << format_double(v[i][2])
        << '\n';
}

void print_mesh_stats(const HexMesh& mesh, const RunConfig& r) {
  std::printf("elements: %d\n", mesh.element_count());
  std::printf("faces: %lld (interior %lld, boundary %lld)\n", static_cast<long long>(mesh.face_count()),
              static_cast<long long>(mesh.interior_face_count()), static_cast<long long>(mesh.boundary_face_count()));
  std::printf("vertices: %lld\n", static_cast<long long>(mesh.vertex_count()));
  const auto present = mesh.present_labels();
  const auto has = [&](Label l) { return std::find(present.begin(), present.end(), l) != present.end(); };
  if (has(r.leak_labels.first) && has(r.leak_labels.second))
    std::printf("leaks: %lld\n", static_cast<long long>(count_leaks(mesh, r.leak_labels.first, r.leak_labels.second)));
}

int cmd_generate(const RunConfig& r) {
  const auto mesh = r.build_mesh();
  const auto path = out_path(r, "mesh.hxm");
  save_labeled_voxels(path, mesh);
  auto side = open_output(path + ".provenance");
  side << r.provenance() << '\n';
  print_mesh_stats(mesh, r);
  return 0;
}

/// Single-dipole solve. Mixed methods write element potentials, face and
/// element currents; cg-pi writes vertex potentials and element currents.
int cmd_solve(const RunConfig& r, bool log_convergence) {
  const auto mesh = r.build_mesh();
  const auto dipoles = r.dipoles();
  if (dipoles.size() != 1) throw ValidationError("solve needs exactly one dipole (source.position/moment)");
  const auto& d = dipoles.front().dipole;
  const auto prov = r.provenance();
  std::vector<double> history;
  int iterations = 0;
  if (r.method == Method::cg_pi) {
    const auto sys = assemble_stiffness(mesh, r.table);
    const NodalSolver solver(sys, r.nodal_precond);
    NodalSolution sol;
    try {
      sol = solver.solve(rhs_partial_integration(mesh, d).dense(static_cast<std::size_t>(mesh.vertex_count())),
                         r.nodal_tol);
    } catch (const NumericalError& e) {
      write_convergence_csv(out_path(r, "convergence.csv"), e.history(), prov);
      throw;
    }
    write_indexed_csv(out_path(r, "potential_vertices.csv"), "vertex_id,u", sol.u, prov);
    write_vector_csv(out_path(r, "current_elements.csv"), element_current(mesh, sys.element_sigma, sol.u), prov);
    history = sol.history;
    iterations = sol.iterations;
  } else {
    const auto sys = assemble_saddle_system(mesh, r.table);
    const SchurSolver solver(sys, r.solver);
    const auto kind = r.method == Method::mixed_direct ? RhsKind::direct : RhsKind::projected;
    const auto rhs = make_rhs(kind, d, sys, mesh);
    for (const auto& w : rhs.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    Solution sol;
    try {
      sol = solver.solve_potential(rhs);
    } catch (const NumericalError& e) {
      write_convergence_csv(out_path(r, "convergence.csv"), e.history(), prov);
      throw;
    }
    write_indexed_csv(out_path(r, "potential_elements.csv"), "element_id,u", sol.u, prov);
    {
      auto out = open_output(out_path(r, "current_faces.csv"));
      out << prov << "\nface_id,j\n";
      for (std::size_t c = 0; c < sol.j.size(); ++c)
        out << sys.column_to_face[c] << ',' << format_double(sol.j[c]) << '\n';
    }
    write_vector_csv(out_path(r, "current_elements.csv"), element_current_from_faces(mesh, sys, sol.j), prov);
    history = sol.history;
    iterations = sol.iterations;
  }
  write_convergence_csv(out_path(r, "convergence.csv"), history, prov);
  if (log_convergence)
    for (std::size_t i = 0; i < history.size(); ++i) std::fprintf(stderr, "iter %zu residual %.3e\n", i, history[i]);
  std::printf("method: %s iterations: %d\n", method_name(r.method).c_str(), iterations);
  return 0;
}

int cmd_sweep(const RunConfig& r) {
  const auto mesh = r.build_mesh();
  const auto model = r.analytic_model();
  const auto dipoles = r.dipoles();
  const SurfaceSampler sampler(mesh, fibonacci_sphere(r.samples, r.sample_radius, model.center), r.sample_label);
  const auto prov = r.provenance();
  write_dipoles_csv(out_path(r, "dipoles.csv"), dipoles, prov);
  const auto records = run_sweep(mesh, r.table, model, r.methods, dipoles, sampler, r.sweep_config(),
                                 [](const ErrorRecord& rec) {
                                   if (!rec.error.empty())
                                     std::fprintf(stderr, "dipole %d (%s) failed: %s\n", rec.dipole_id,
                                                  rec.method.c_str(), rec.error.c_str());
                                 });
  write_records_csv(out_path(r, "records.csv"), records, prov);
  write_summary_csv(out_path(r, "summary.csv"), summarize(records), prov);
  std::size_t failed = 0;
  for (const auto& rec : records) failed += rec.error.empty() ? 0 : 1;
  std::printf("records: %zu failed: %zu\n", records.size(), failed);
  return 0;
}

/// Transfer matrix on mixed meshes: sensors are surface points mapped to
/// elements of the sample label; sensor 0 is the reference.
int cmd_transfer(const RunConfig& r) {
  if (r.method == Method::cg_pi) throw UsageError("transfer supports the mixed methods only");
  const auto mesh = r.build_mesh();
  const auto dipoles = r.dipoles();
  const Vec3 center = r.sphere.center.value_or(Vec3{0.0, 0.0, 0.0});
  const SurfaceSampler sensors(mesh, fibonacci_sphere(r.sensors, r.sensor_radius, center), r.sample_label);
  const auto sys = assemble_saddle_system(mesh, r.table);
  const SchurSolver solver(sys, r.solver);
  const auto ne = static_cast<std::size_t>(mesh.element_count());
  const auto& el = sensors.elements();
  std::vector<std::vector<double>> restrictions;
  for (std::size_t k = 1; k < el.size(); ++k) {
    std::vector<double> v(ne, 0.0);
    v[static_cast<std::size_t>(el[k])] += 1.0;
    v[static_cast<std::size_t>(el[0])] -= 1.0;
    restrictions.push_back(std::move(v));
  }
  const auto t = solver.transfer_solve(restrictions);
  const auto kind = r.method == Method::mixed_direct ? RhsKind::direct : RhsKind::projected;
  auto out = open_output(out_path(r, "transfer.csv"));
  out << r.provenance() << "\ndipole_id,sensor,value\n";
  for (const auto& pd : dipoles) {
    const auto h = solver.element_load(make_rhs(kind, pd.dipole, sys, mesh));
    out << pd.id << ",0," << format_double(0.0) << '\n';
    for (std::size_t k = 0; k < t.size(); ++k) out << pd.id << ',' << k + 1 << ',' << format_double(dot(t[k], h)) << '\n';
  }
  std::printf("sensors: %zu dipoles: %zu\n", el.size(), dipoles.size());
  return 0;
}

/// Label volume plus, given a source, the solved fields. Currents are
/// written in uA/mm^2 (the solver works in mA).
int cmd_export(const RunConfig& r) {
  const auto mesh = r.build_mesh();
  const auto prov = r.provenance();
  write_vtk_labels(out_path(r, "labels.vtk"), mesh, prov);
  if (!r.source && !r.source_file) return 0;
  const auto dipoles = r.dipoles();
  if (dipoles.size() != 1) throw ValidationError("export-vtk needs exactly one dipole");
  const auto& d = dipoles.front().dipole;
  VtkFields f;
  f.current_scale = 1000.0;
  if (r.method == Method::cg_pi) {
    const auto sys = assemble_stiffness(mesh, r.table);
    const auto sol = NodalSolver(sys, r.nodal_precond)
                         .solve(rhs_partial_integration(mesh, d).dense(static_cast<std::size_t>(mesh.vertex_count())),
                                r.nodal_tol);
    f.current = element_current(mesh, sys.element_sigma, sol.u);
    f.vertex_potential = sol.u;
  } else {
    const auto sys = assemble_saddle_system(mesh, r.table);
    const auto kind = r.method == Method::mixed_direct ? RhsKind::direct : RhsKind::projected;
    const auto sol = SchurSolver(sys, r.solver).solve_potential(make_rhs(kind, d, sys, mesh));
    f.current = element_current_from_faces(mesh, sys, sol.j);
    f.potential = sol.u;
  }
  write_vtk_fields(out_path(r, "fields.vtk"), mesh, f, prov);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed and nodal finite element EEG forward solver on regular hexahedral meshes"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("-c,--config", g.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", g.sets, "override a configuration key, e.g. --set solver.outer_tol=1e-10");
  app.add_option("-o,--output", g.output, "output directory");
  app.add_option("-m,--method", g.method, "mixed-projected, mixed-direct or cg-pi");
  app.add_option("--seed", g.seed, "random seed for source placement")->check(CLI::NonNegativeNumber);
  app.add_option("-j,--threads", g.threads, "worker threads (default: HDIVFWD_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--log-convergence", g.log_convergence, "print the residual history to stderr");

  auto* gen = app.add_subcommand("generate-mesh", "write a labeled voxel mesh and print its statistics");
  auto* solve = app.add_subcommand("solve", "solve for one dipole");
  auto* sweep = app.add_subcommand("sweep", "sphere accuracy sweep against the analytic reference");
  auto* transfer = app.add_subcommand("transfer", "transfer-matrix potentials at surface sensors");
  auto* vtk = app.add_subcommand("export-vtk", "write labels and solved fields as legacy VTK");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    const auto r = load_run_config(g);
    if (*gen) return cmd_generate(r);
    if (*solve) return cmd_solve(r, g.log_convergence);
    if (*sweep) return cmd_sweep(r);
    if (*transfer) return cmd_transfer(r);
    if (*vtk) return cmd_export(r);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::validation);
  }
  return static_cast<int>(ExitCode::usage);
}
