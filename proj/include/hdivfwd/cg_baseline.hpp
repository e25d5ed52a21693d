#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hdivfwd/amg.hpp"
#include "hdivfwd/assembly.hpp"
#include "hdivfwd/error.hpp"
#include "hdivfwd/hexmesh.hpp"
#include "hdivfwd/krylov.hpp"
#include "hdivfwd/parallel.hpp"
#include "hdivfwd/sources.hpp"
#include "hdivfwd/sparse.hpp"

namespace hdivfwd {

/// Trilinear shape functions on the unit cube, vertex order kHexCorner.
inline std::array<double, 8> trilinear_shape(const Vec3& xi) {
  std::array<double, 8> phi{};
  for (int q = 0; q < 8; ++q) {
    double v = 1.0;
    for (int a = 0; a < 3; ++a) v *= kHexCorner[q][a] ? xi[a] : 1.0 - xi[a];
    phi[q] = v;
  }
  return phi;
}

/// Reference-coordinate gradients of the trilinear shape functions.
inline std::array<Vec3, 8> trilinear_gradient(const Vec3& xi) {
  std::array<Vec3, 8> g{};
  for (int q = 0; q < 8; ++q)
    for (int a = 0; a < 3; ++a) {
      double v = kHexCorner[q][a] ? 1.0 : -1.0;
      for (int b = 0; b < 3; ++b)
        if (b != a) v *= kHexCorner[q][b] ? xi[b] : 1.0 - xi[b];
      g[q][a] = v;
    }
  return g;
}

/// Stiffness of the unit cube with unit conductivity, 2x2x2 Gauss rule.
/// An element of edge h and conductivity sigma has stiffness sigma h K.
inline const std::array<std::array<double, 8>, 8>& reference_stiffness() {
  static const auto k = [] {
    std::array<std::array<double, 8>, 8> m{};
    const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (double x : g)
      for (double y : g)
        for (double z : g) {
          const auto grad = trilinear_gradient({x, y, z});
          for (int p = 0; p < 8; ++p)
            for (int q = 0; q < 8; ++q) m[p][q] += 0.125 * dot(grad[p], grad[q]);
        }
    return m;
  }();
  return k;
}

/// Local reference coordinates of x in element e, clamped to the cell.
inline Vec3 local_coordinates(const HexMesh& mesh, std::int32_t e, const Vec3& x) {
  const auto c = mesh.cell_coords(mesh.cell_of_element(e));
  Vec3 xi{};
  for (int a = 0; a < 3; ++a)
    xi[a] = std::clamp((x[a] - mesh.origin()[a]) / mesh.spacing() - c[a], 0.0, 1.0);
  return xi;
}

struct NodalSystem {
  CsrMatrix K;  // vertices x vertices
  std::vector<double> element_sigma;
};

/// Conforming trilinear stiffness over the vertices of labeled elements.
/// Rows are assembled independently, summing incident elements in a fixed
/// order.
inline NodalSystem assemble_stiffness(const HexMesh& mesh, const CompartmentTable& table) {
  NodalSystem sys;
  sys.element_sigma = element_conductivities(mesh, table);
  const auto& kref = reference_stiffness();
  const double h = mesh.spacing();
  const auto nv = static_cast<std::size_t>(mesh.vertex_count());
  const auto& dims = mesh.dims();

  // visits the incident elements of vertex v: body(e, local index of v)
  auto incident = [&](std::int32_t v, auto&& body) {
    const auto l = mesh.vertex_lattice(v);
    for (int q = 7; q >= 0; --q) {
      std::array<std::int32_t, 3> c{};
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        c[a] = l[a] - kHexCorner[q][a];
        inside = inside && c[a] >= 0 && c[a] < dims[a];
      }
      if (!inside) continue;
      const auto e = mesh.element_of_cell(mesh.cell_index(c[0], c[1], c[2]));
      if (e >= 0) body(e, q);
    }
  };
  auto slot = [](int q, int r) {
    int s = 0;
    for (int a = 2; a >= 0; --a) s = 3 * s + (kHexCorner[r][a] - kHexCorner[q][a] + 1);
    return s;
  };

  std::vector<std::size_t> ptr(nv + 1, 0);
  parallel_for(nv, [&](std::size_t b, std::size_t end) {
    for (std::size_t v = b; v < end; ++v) {
      std::uint32_t used = 0;
      incident(static_cast<std::int32_t>(v), [&](std::int32_t, int q) {
        for (int r = 0; r < 8; ++r) used |= 1u << slot(q, r);
      });
      ptr[v + 1] = static_cast<std::size_t>(__builtin_popcount(used));
    }
  });
  for (std::size_t v = 0; v < nv; ++v) ptr[v + 1] += ptr[v];
  std::vector<std::int32_t> col(ptr.back());
  std::vector<double> val(ptr.back());
  parallel_for(nv, [&](std::size_t b, std::size_t end) {
    for (std::size_t v = b; v < end; ++v) {
      std::array<double, 27> acc{};
      std::array<std::int32_t, 27> id;
      id.fill(-1);
      incident(static_cast<std::int32_t>(v), [&](std::int32_t e, int q) {
        const double c = sys.element_sigma[static_cast<std::size_t>(e)] * h;
        const auto& ev = mesh.element_vertices(e);
        for (int r = 0; r < 8; ++r) {
          const int s = slot(q, r);
          acc[s] += c * kref[q][r];
          id[s] = ev[r];
        }
      });
      std::size_t k = ptr[v];
      for (int s = 0; s < 27; ++s)
        if (id[s] >= 0) {
          col[k] = id[s];
          val[k++] = acc[s];
        }
    }
  });
  sys.K = CsrMatrix(mesh.vertex_count(), mesh.vertex_count(), std::move(ptr), std::move(col), std::move(val));
  return sys;
}

/// Partial-integration load b_i = <m, grad phi_i(x0)> on the vertices of the
/// element containing x0.
inline SparseVector rhs_partial_integration(const HexMesh& mesh, const Dipole& dipole) {
  validate_moment(dipole);
  const auto e = mesh.locate_element(dipole.position);
  const auto grad = trilinear_gradient(local_coordinates(mesh, e, dipole.position));
  std::vector<std::pair<std::int32_t, double>> p;
  const auto& ev = mesh.element_vertices(e);
  for (int q = 0; q < 8; ++q) p.emplace_back(ev[q], dot(dipole.moment, grad[q]) / mesh.spacing());
  return SparseVector::from_pairs(std::move(p));
}

enum class NodalPrecond { jacobi, amg };

struct NodalSolution {
  std::vector<double> u;  // vertex potentials, mean zero
  int iterations = 0;
  double residual = 0.0;
  double seconds = 0.0;
  std::vector<double> history;
};

/// Deflated PCG on the pure-Neumann stiffness system.
class NodalSolver {
 public:
  NodalSolver(const NodalSystem& system, NodalPrecond precond = NodalPrecond::jacobi)
      : sys_(system), kind_(precond) {
    inv_diag_ = sys_.K.diagonal();
    for (double& d : inv_diag_) {
      if (!(d > 0.0)) throw NumericalError("stiffness matrix has a non-positive diagonal entry");
      d = 1.0 / d;
    }
    if (kind_ == NodalPrecond::amg) amg_ = std::make_unique<SmoothedAggregationAmg>(sys_.K);
  }

  NodalSolution solve(std::span<const double> load, double tol = 1e-8, int max_iter = 20000) const {
    if (load.size() != static_cast<std::size_t>(sys_.K.rows())) throw ValidationError("nodal load length mismatch");
    const double bn = norm2(load);
    if (bn > 0.0 && std::abs(sum(load)) > 1e-12 * bn * std::sqrt(static_cast<double>(load.size())))
      throw ValidationError("incompatible nodal load: entries must sum to zero");
    const auto t0 = std::chrono::steady_clock::now();
    NodalSolution sol;
    sol.u.assign(load.size(), 0.0);
    PcgOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    opt.deflate_constants = true;
    const auto res = pcg([&](std::span<const double> v, std::span<double> w) { sys_.K.multiply(v, w); },
                         [&](std::span<const double> v, std::span<double> w) {
                           if (amg_) {
                             amg_->apply(v, w);
                           } else {
                             for (std::size_t i = 0; i < v.size(); ++i) w[i] = inv_diag_[i] * v[i];
                           }
                         },
                         load, std::span<double>(sol.u), opt);
    sol.iterations = res.iterations;
    sol.residual = res.relative_residual;
    sol.history = res.history;
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!res.converged)
      throw NumericalError("nodal CG did not reach tolerance (relative residual " +
                               format_double(res.relative_residual) + ")",
                           res.history);
    remove_mean(sol.u);
    return sol;
  }

 private:
  const NodalSystem& sys_;
  NodalPrecond kind_;
  std::vector<double> inv_diag_;
  std::unique_ptr<SmoothedAggregationAmg> amg_;
};

/// -sigma grad u at each element center, in the units of u / mm times S/m.
inline std::vector<Vec3> element_current(const HexMesh& mesh, const std::vector<double>& element_sigma,
                                         std::span<const double> u) {
  if (u.size() != static_cast<std::size_t>(mesh.vertex_count())) throw ValidationError("vertex field length mismatch");
  const auto grad = trilinear_gradient({0.5, 0.5, 0.5});
  std::vector<Vec3> out(static_cast<std::size_t>(mesh.element_count()));
  for (std::int32_t e = 0; e < mesh.element_count(); ++e) {
    Vec3 g{0.0, 0.0, 0.0};
    const auto& ev = mesh.element_vertices(e);
    for (int q = 0; q < 8; ++q) g = g + u[static_cast<std::size_t>(ev[q])] * grad[q];
    out[static_cast<std::size_t>(e)] = (-element_sigma[static_cast<std::size_t>(e)] / mesh.spacing()) * g;
  }
  return out;
}

/// Trilinear interpolation of a vertex field inside element e at x (clamped
/// into the element).
inline double interpolate_nodal(const HexMesh& mesh, std::span<const double> u, std::int32_t e, const Vec3& x) {
  const auto phi = trilinear_shape(local_coordinates(mesh, e, x));
  const auto& ev = mesh.element_vertices(e);
  double v = 0.0;
  for (int q = 0; q < 8; ++q) v += phi[q] * u[static_cast<std::size_t>(ev[q])];
  return v;
}

}  // namespace hdivfwd
