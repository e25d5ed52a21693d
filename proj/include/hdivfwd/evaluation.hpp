#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "hdivfwd/analytic_sphere.hpp"
#include "hdivfwd/assembly.hpp"
#include "hdivfwd/cg_baseline.hpp"
#include "hdivfwd/error.hpp"
#include "hdivfwd/hexmesh.hpp"
#include "hdivfwd/parallel.hpp"
#include "hdivfwd/saddle_solver.hpp"
#include "hdivfwd/sources.hpp"

namespace hdivfwd {

// ---- metrics ---------------------------------------------------------------

namespace detail {
inline void check_metric_args(std::span<const double> a, std::span<const double> b, const char* name) {
  if (a.size() != b.size()) throw ValidationError(std::string(name) + ": vectors differ in length");
}
}  // namespace detail

/// || a/||a|| - b/||b|| ||, in [0, 2].
inline double rdm(std::span<const double> num, std::span<const double> ref) {
  detail::check_metric_args(num, ref, "rdm");
  const double na = norm2(num), nb = norm2(ref);
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("rdm is undefined for a zero vector");
  const double s = deterministic_sum(num.size(), [&](std::size_t i) {
    const double d = num[i] / na - ref[i] / nb;
    return d * d;
  });
  return std::sqrt(s);
}

/// ln(||num|| / ||ref||).
inline double lnmag(std::span<const double> num, std::span<const double> ref) {
  detail::check_metric_args(num, ref, "lnmag");
  const double na = norm2(num), nb = norm2(ref);
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("lnmag is undefined for a zero vector");
  return std::log(na) - std::log(nb);
}

// ---- methods ---------------------------------------------------------------

enum class Method { mixed_projected, mixed_direct, cg_pi };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::mixed_projected:
      return "mixed-projected";
    case Method::mixed_direct:
      return "mixed-direct";
    case Method::cg_pi:
      return "cg-pi";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "mixed-projected") return Method::mixed_projected;
  if (s == "mixed-direct") return Method::mixed_direct;
  if (s == "cg-pi") return Method::cg_pi;
  throw UsageError("unknown method '" + s + "' (expected mixed-projected, mixed-direct or cg-pi)");
}

// ---- records and statistics -----------------------------------------------

struct ErrorRecord {
  std::string model;
  std::string method;
  std::int32_t dipole_id = 0;
  double eccentricity = 0.0;
  bool outside = false;  // source element not in the inner compartment
  double rdm = std::numeric_limits<double>::quiet_NaN();
  double lnmag = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string error;  // nonempty when the solve failed
};

struct Quartiles {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Quantile with linear interpolation between order statistics (type 7).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw ValidationError("summary of an empty sample");
  std::sort(v.begin(), v.end());
  return {v.size(), v.front(), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75), v.back()};
}

struct SummaryRow {
  std::string model;
  std::string method;
  double eccentricity = 0.0;
  Quartiles rdm;
  Quartiles lnmag;
};

using SweepSummary = std::vector<SummaryRow>;

/// Groups finite records by (model, method, eccentricity).
inline SweepSummary summarize(const std::vector<ErrorRecord>& records) {
  if (records.empty()) throw ValidationError("cannot summarize an empty record list");
  std::map<std::tuple<std::string, std::string, double>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (!std::isfinite(r.rdm) || !std::isfinite(r.lnmag)) continue;
    auto& g = groups[{r.model, r.method, r.eccentricity}];
    g.first.push_back(r.rdm);
    g.second.push_back(r.lnmag);
  }
  SweepSummary out;
  for (auto& [key, g] : groups)
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), quartiles(g.first), quartiles(g.second)});
  return out;
}

// ---- surface sampling -------------------------------------------------------

/// Maps evaluation points to the element of a given label whose center is
/// nearest to each point.
class SurfaceSampler {
 public:
  SurfaceSampler(const HexMesh& mesh, std::vector<Vec3> points, Label label) : mesh_(&mesh), points_(std::move(points)) {
    std::vector<std::int32_t> candidates;
    for (std::int32_t e = 0; e < mesh.element_count(); ++e)
      if (mesh.element_label(e) == label) candidates.push_back(e);
    if (candidates.empty()) throw ValidationError("no element carries the sampling label " + std::to_string(label));
    std::vector<Vec3> centers;
    centers.reserve(candidates.size());
    for (auto e : candidates) centers.push_back(mesh.element_center(e));
    element_.resize(points_.size());
    parallel_for(
        points_.size(),
        [&](std::size_t b, std::size_t end) {
          for (std::size_t i = b; i < end; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::int32_t arg = -1;
            for (std::size_t k = 0; k < centers.size(); ++k) {
              const Vec3 d = centers[k] - points_[i];
              const double dd = dot(d, d);
              if (dd < best) {
                best = dd;
                arg = candidates[k];
              }
            }
            element_[i] = arg;
          }
        },
        16);
  }

  const std::vector<Vec3>& points() const noexcept { return points_; }
  const std::vector<std::int32_t>& elements() const noexcept { return element_; }

  /// Element-wise (P0) field at the sample elements.
  std::vector<double> sample_elements(std::span<const double> u) const {
    std::vector<double> out(points_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = u[static_cast<std::size_t>(element_[i])];
    return out;
  }

  /// Vertex field interpolated trilinearly inside the sample elements.
  std::vector<double> sample_vertices(std::span<const double> u) const {
    std::vector<double> out(points_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = interpolate_nodal(*mesh_, u, element_[i], points_[i]);
    return out;
  }

 private:
  const HexMesh* mesh_;
  std::vector<Vec3> points_;
  std::vector<std::int32_t> element_;
};

// ---- sweeps ---------------------------------------------------------------

struct SweepConfig {
  std::string model_name = "sphere";
  SolverConfig solver;
  NodalPrecond nodal_precond = NodalPrecond::amg;
  double nodal_tol = 1e-8;
  SeriesConfig series;
  Label inner_label = 1;   // compartment the sources should lie in
  Label sample_label = 4;  // compartment sampled at the surface points
};

/// Numerical surface values of one method, built once per mesh.
class ForwardModel {
 public:
  ForwardModel(const HexMesh& mesh, const CompartmentTable& table, Method method, const SweepConfig& cfg)
      : mesh_(mesh), method_(method), cfg_(cfg) {
    if (method == Method::cg_pi) {
      nodal_ = std::make_unique<NodalSystem>(assemble_stiffness(mesh, table));
      nodal_solver_ = std::make_unique<NodalSolver>(*nodal_, cfg.nodal_precond);
    } else {
      saddle_ = std::make_unique<SaddleSystem>(assemble_saddle_system(mesh, table));
      schur_ = std::make_unique<SchurSolver>(*saddle_, cfg.solver);
    }
  }

  Method method() const noexcept { return method_; }
  const SaddleSystem* saddle() const noexcept { return saddle_.get(); }
  const SchurSolver* schur() const noexcept { return schur_.get(); }
  const NodalSystem* nodal() const noexcept { return nodal_.get(); }
  const NodalSolver* nodal_solver() const noexcept { return nodal_solver_.get(); }

  struct Result {
    std::vector<double> field;  // element (mixed) or vertex (cg) potentials
    std::vector<double> j;      // mixed only: interior-face currents
    int iterations = 0;
  };

  Result solve(const Dipole& d) const {
    Result r;
    if (method_ == Method::cg_pi) {
      const auto load = rhs_partial_integration(mesh_, d).dense(static_cast<std::size_t>(mesh_.vertex_count()));
      auto sol = nodal_solver_->solve(load, cfg_.nodal_tol);
      r.field = std::move(sol.u);
      r.iterations = sol.iterations;
    } else {
      const auto kind = method_ == Method::mixed_direct ? RhsKind::direct : RhsKind::projected;
      auto sol = schur_->solve_potential(make_rhs(kind, d, *saddle_, mesh_));
      r.field = std::move(sol.u);
      r.j = std::move(sol.j);
      r.iterations = sol.iterations;
    }
    return r;
  }

  std::vector<double> sample(const SurfaceSampler& s, const Result& r) const {
    return method_ == Method::cg_pi ? s.sample_vertices(r.field) : s.sample_elements(r.field);
  }

 private:
  const HexMesh& mesh_;
  Method method_;
  SweepConfig cfg_;
  std::unique_ptr<SaddleSystem> saddle_;
  std::unique_ptr<SchurSolver> schur_;
  std::unique_ptr<NodalSystem> nodal_;
  std::unique_ptr<NodalSolver> nodal_solver_;
};

/// Solves every dipole with every method and compares the sampled surface
/// potentials to the analytic reference, both mean-zeroed over the samples.
/// Dipoles run in order; a failing dipole yields a NaN record and the sweep
/// continues.
inline std::vector<ErrorRecord> run_sweep(const HexMesh& mesh, const CompartmentTable& table,
                                          const LayeredSphere& model, const std::vector<Method>& methods,
                                          const std::vector<PlacedDipole>& dipoles, const SurfaceSampler& sampler,
                                          const SweepConfig& cfg,
                                          const std::function<void(const ErrorRecord&)>& observer = {}) {
  std::vector<ErrorRecord> out;
  if (dipoles.empty() || methods.empty()) return out;
  const auto present = mesh.present_labels();
  if (model.radii.size() != present.size())
    throw ValidationError("analytic model and mesh disagree on the number of compartments");
  std::vector<std::unique_ptr<ForwardModel>> forward;
  for (auto m : methods) forward.push_back(std::make_unique<ForwardModel>(mesh, table, m, cfg));
  for (const auto& pd : dipoles) {
    std::vector<double> ref;
    std::string ref_error;
    bool outside = true;
    try {
      outside = mesh.element_label(mesh.locate_element(pd.dipole.position)) != cfg.inner_label;
      ref = surface_potential(model, pd.dipole, sampler.points(), cfg.series);
      remove_mean(ref);
    } catch (const Error& e) {
      ref_error = e.what();
    }
    for (const auto& fm : forward) {
      ErrorRecord rec;
      rec.model = cfg.model_name;
      rec.method = method_name(fm->method());
      rec.dipole_id = pd.id;
      rec.eccentricity = pd.eccentricity;
      rec.outside = outside;
      if (!ref_error.empty()) {
        rec.error = ref_error;
      } else {
        try {
          const auto r = fm->solve(pd.dipole);
          auto num = fm->sample(sampler, r);
          remove_mean(num);
          rec.rdm = rdm(num, ref);
          rec.lnmag = lnmag(num, ref);
          rec.iterations = r.iterations;
        } catch (const Error& e) {
          rec.error = e.what();
        }
      }
      if (observer) observer(rec);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// ---- CSV output ----------------------------------------------------------------

inline void write_records_csv(const std::string& path, const std::vector<ErrorRecord>& records,
                              const std::string& provenance = {}) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  if (!provenance.empty()) out << provenance << '\n';
  out << "model,method,dipole_id,eccentricity,outside_flag,rdm,lnmag\n";
  for (const auto& r : records)
    out << r.model << ',' << r.method << ',' << r.dipole_id << ',' << format_double(r.eccentricity) << ','
        << (r.outside ? 1 : 0) << ',' << format_double(r.rdm) << ',' << format_double(r.lnmag) << '\n';
}

inline void write_summary_csv(const std::string& path, const SweepSummary& summary,
                              const std::string& provenance = {}) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  if (!provenance.empty()) out << provenance << '\n';
  out << "model,method,eccentricity,metric,count,min,q1,median,q3,max\n";
  for (const auto& row : summary)
    for (const auto& [name, q] : {std::pair<const char*, const Quartiles*>{"rdm", &row.rdm}, {"lnmag", &row.lnmag}})
      out << row.model << ',' << row.method << ',' << format_double(row.eccentricity) << ',' << name << ','
          << q->count << ',' << format_double(q->min) << ',' << format_double(q->q1) << ','
          << format_double(q->median) << ',' << format_double(q->q3) << ',' << format_double(q->max) << '\n';
}

}  // namespace hdivfwd
