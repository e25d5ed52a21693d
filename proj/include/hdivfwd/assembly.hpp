#pragma once

#include <cstdint>
#include <vector>

#include "hdivfwd/error.hpp"
#include "hdivfwd/hexmesh.hpp"
#include "hdivfwd/parallel.hpp"
#include "hdivfwd/sparse.hpp"

namespace hdivfwd {

/// Conductivity of every element, looked up through the compartment table.
inline std::vector<double> element_conductivities(const HexMesh& mesh, const CompartmentTable& table) {
  std::vector<double> sigma(static_cast<std::size_t>(mesh.element_count()));
  for (std::int32_t e = 0; e < mesh.element_count(); ++e) {
    const double s = table.sigma(mesh.element_label(e));
    if (!(s > 0.0)) throw ValidationError("non-positive conductivity in element " + std::to_string(e));
    sigma[static_cast<std::size_t>(e)] = s;
  }
  return sigma;
}

/// RT0 mass matrix weighted by 1/sigma over all faces (boundary faces
/// included). On a regular grid a face couples only with itself and the
/// opposite faces of its two elements:
///   A(f,f) = sum_T h^3 / (3 sigma_T),  A(f,g) = h^3 / (6 sigma_T).
inline CsrMatrix assemble_A(const HexMesh& mesh, const std::vector<double>& sigma) {
  if (sigma.size() != static_cast<std::size_t>(mesh.element_count()))
    throw ValidationError("assemble_A: one conductivity per element required");
  for (double s : sigma)
    if (!(s > 0.0)) throw ValidationError("assemble_A: conductivities must be positive");
  const double h3 = mesh.spacing() * mesh.spacing() * mesh.spacing();
  const auto nf = static_cast<std::size_t>(mesh.face_count());
  std::vector<std::size_t> ptr(nf + 1, 0);
  for (std::size_t f = 0; f < nf; ++f) {
    const Face& fc = mesh.face(static_cast<std::int32_t>(f));
    ptr[f + 1] = ptr[f] + 1 + (fc.minus >= 0) + (fc.plus >= 0);
  }
  std::vector<std::int32_t> col(ptr.back());
  std::vector<double> val(ptr.back());
  parallel_for(nf, [&](std::size_t b, std::size_t e) {
    for (std::size_t f = b; f < e; ++f) {
      const Face& fc = mesh.face(static_cast<std::int32_t>(f));
      const int a = static_cast<int>(fc.axis);
      std::size_t k = ptr[f];
      double diag = 0.0;
      if (fc.minus >= 0) {
        const double c = h3 / sigma[static_cast<std::size_t>(fc.minus)];
        col[k] = mesh.element_faces(fc.minus)[2 * a];
        val[k++] = c / 6.0;
        diag += c / 3.0;
      }
      const std::size_t kd = k++;
      if (fc.plus >= 0) {
        const double c = h3 / sigma[static_cast<std::size_t>(fc.plus)];
        col[k] = mesh.element_faces(fc.plus)[2 * a + 1];
        val[k++] = c / 6.0;
        diag += c / 3.0;
      }
      col[kd] = static_cast<std::int32_t>(f);
      val[kd] = diag;
    }
  });
  return CsrMatrix(mesh.face_count(), mesh.face_count(), std::move(ptr), std::move(col), std::move(val));
}

inline CsrMatrix assemble_A(const HexMesh& mesh, const CompartmentTable& table) {
  return assemble_A(mesh, element_conductivities(mesh, table));
}

/// Divergence matrix, elements x faces: +h^2 where the element is on the low
/// side of the face (outward normal = +axis), -h^2 on the high side.
inline CsrMatrix assemble_B(const HexMesh& mesh) {
  const double h2 = mesh.spacing() * mesh.spacing();
  const auto ne = static_cast<std::size_t>(mesh.element_count());
  std::vector<std::size_t> ptr(ne + 1);
  for (std::size_t e = 0; e <= ne; ++e) ptr[e] = 6 * e;
  std::vector<std::int32_t> col(6 * ne);
  std::vector<double> val(6 * ne);
  parallel_for(ne, [&](std::size_t b, std::size_t e) {
    for (std::size_t t = b; t < e; ++t) {
      const auto& f = mesh.element_faces(static_cast<std::int32_t>(t));
      for (int q = 0; q < 6; ++q) {
        col[6 * t + q] = f[q];
        val[6 * t + q] = (q % 2 == 1) ? h2 : -h2;
      }
    }
  });
  return CsrMatrix(mesh.element_count(), mesh.face_count(), std::move(ptr), std::move(col), std::move(val));
}

/// Saddle-point blocks restricted to interior faces (zero normal current on
/// the domain boundary).
struct SaddleSystem {
  CsrMatrix A;   // interior faces x interior faces
  CsrMatrix B;   // elements x interior faces
  CsrMatrix Bt;  // transpose of B
  std::vector<std::int32_t> face_to_column;  // global face -> column, -1 for boundary faces
  std::vector<std::int32_t> column_to_face;
  std::vector<double> element_sigma;
  double spacing = 0.0;

  std::int32_t face_dofs() const noexcept { return A.rows(); }
  std::int32_t element_dofs() const noexcept { return B.rows(); }
  bool degenerate() const noexcept { return A.rows() == 0; }
};

inline SaddleSystem eliminate_boundary(const HexMesh& mesh, const CsrMatrix& A, const CsrMatrix& B,
                                       std::vector<double> sigma) {
  if (A.rows() != mesh.face_count() || B.cols() != mesh.face_count() || B.rows() != mesh.element_count())
    throw ValidationError("eliminate_boundary: block sizes do not match the mesh");
  SaddleSystem s;
  s.face_to_column.assign(static_cast<std::size_t>(mesh.face_count()), -1);
  for (std::int32_t f = 0; f < mesh.face_count(); ++f)
    if (!mesh.face(f).boundary()) {
      s.face_to_column[static_cast<std::size_t>(f)] = static_cast<std::int32_t>(s.column_to_face.size());
      s.column_to_face.push_back(f);
    }
  const auto n = static_cast<std::int32_t>(s.column_to_face.size());
  s.A = extract(A, s.face_to_column, n, s.face_to_column, n);
  std::vector<std::int32_t> identity(static_cast<std::size_t>(B.rows()));
  for (std::size_t e = 0; e < identity.size(); ++e) identity[e] = static_cast<std::int32_t>(e);
  s.B = extract(B, identity, B.rows(), s.face_to_column, n);
  s.Bt = transpose(s.B);
  s.element_sigma = std::move(sigma);
  s.spacing = mesh.spacing();
  return s;
}

/// Assembles and eliminates in one step.
inline SaddleSystem assemble_saddle_system(const HexMesh& mesh, const CompartmentTable& table) {
  auto sigma = element_conductivities(mesh, table);
  const CsrMatrix A = assemble_A(mesh, sigma);
  const CsrMatrix B = assemble_B(mesh);
  return eliminate_boundary(mesh, A, B, std::move(sigma));
}

}  // namespace hdivfwd
