#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hdivfwd/amg.hpp"
#include "hdivfwd/assembly.hpp"
#include "hdivfwd/error.hpp"
#include "hdivfwd/krylov.hpp"
#include "hdivfwd/parallel.hpp"
#include "hdivfwd/sources.hpp"
#include "hdivfwd/sparse.hpp"

namespace hdivfwd {

/// How x = A^-1 y is realized inside the Schur operator.
enum class InnerSolve {
  exact_lines,       // direct tridiagonal solve along grid lines
  fixed_iterations,  // inner_iters Jacobi-Chebyshev steps from zero (fixed linear map)
  tolerance,         // Jacobi-PCG until the relative residual is below inner_tol
};

enum class PrecondKind { none, ssor, amg };

/// Diagonal approximation D of A used in P = B D^-1 B^T.
enum class DiagonalKind { l2_row, diagonal, row_sum };

struct SolverConfig {
  double outer_tol = 1e-8;
  int outer_max_iter = 2000;
  InnerSolve inner = InnerSolve::exact_lines;
  int inner_iters = 1;
  double inner_tol = 1e-10;
  PrecondKind precond = PrecondKind::amg;
  DiagonalKind diagonal = DiagonalKind::l2_row;
  int ssor_sweeps = 2;
  double ssor_omega = 1.0;
  bool deflate_constants = true;
  int recompute_every = 50;

  void validate() const {
    if (!(outer_tol > 0.0 && outer_tol < 1.0)) throw ValidationError("outer_tol must lie in (0, 1)");
    if (!(inner_tol > 0.0 && inner_tol < 1.0)) throw ValidationError("inner_tol must lie in (0, 1)");
    if (outer_max_iter < 1) throw ValidationError("outer_max_iter must be >= 1");
    if (inner == InnerSolve::fixed_iterations && inner_iters < 1) throw ValidationError("inner_iters must be >= 1");
    if (ssor_sweeps < 1) throw ValidationError("ssor_sweeps must be >= 1");
    if (!(ssor_omega > 0.0 && ssor_omega < 2.0)) throw ValidationError("ssor_omega must lie in (0, 2)");
    if (recompute_every < 0) throw ValidationError("recompute_every must be >= 0");
  }
};

struct Solution {
  std::vector<double> u;  // element potentials, mean zero
  std::vector<double> j;  // interior-face normal current coefficients
  int iterations = 0;
  double residual = 0.0;  // final relative residual of the Schur system
  double seconds = 0.0;
  bool converged = false;
  std::vector<double> history;
};

/// D entries for each row of A.
inline std::vector<double> diagonal_approximation(const CsrMatrix& a, DiagonalKind kind) {
  std::vector<double> d(static_cast<std::size_t>(a.rows()));
  for (std::int32_t i = 0; i < a.rows(); ++i) {
    const auto vs = a.row_values(i);
    double v = 0.0;
    switch (kind) {
      case DiagonalKind::l2_row:
        for (double x : vs) v += x * x;
        v = std::sqrt(v);
        break;
      case DiagonalKind::diagonal:
        v = a.at(i, i);
        break;
      case DiagonalKind::row_sum:
        for (double x : vs) v += x;
        break;
    }
    if (!(v > 0.0)) throw ValidationError("diagonal approximation: row " + std::to_string(i) + " of A is zero");
    d[static_cast<std::size_t>(i)] = v;
  }
  return d;
}

/// P = B D^-1 B^T.
inline CsrMatrix schur_approximation(const SaddleSystem& s, DiagonalKind kind) {
  const auto d = diagonal_approximation(s.A, kind);
  std::vector<double> vals = s.B.values();
  const auto& cols = s.B.col_index();
  for (std::size_t k = 0; k < vals.size(); ++k) vals[k] /= d[static_cast<std::size_t>(cols[k])];
  const CsrMatrix bd(s.B.rows(), s.B.cols(), s.B.row_ptr(), cols, std::move(vals));
  return multiply(bd, s.Bt);
}

/// Fixed symmetric approximate inverse of P.
class SchurPreconditioner {
 public:
  SchurPreconditioner() = default;
  SchurPreconditioner(const SaddleSystem& s, const SolverConfig& cfg) : kind_(cfg.precond) {
    if (kind_ == PrecondKind::none || s.element_dofs() == 0) return;
    p_ = std::make_unique<CsrMatrix>(schur_approximation(s, cfg.diagonal));
    if (kind_ == PrecondKind::ssor)
      ssor_ = SymmetricGaussSeidel(p_.get(), cfg.ssor_sweeps, cfg.ssor_omega);
    else
      amg_ = std::make_unique<SmoothedAggregationAmg>(*p_);
  }

  PrecondKind kind() const noexcept { return kind_; }
  const CsrMatrix* matrix() const noexcept { return p_.get(); }

  void apply(std::span<const double> r, std::span<double> z) const {
    switch (kind_) {
      case PrecondKind::none:
        std::copy(r.begin(), r.end(), z.begin());
        break;
      case PrecondKind::ssor:
        ssor_.apply(r, z);
        break;
      case PrecondKind::amg:
        amg_->apply(r, z);
        break;
    }
  }

 private:
  PrecondKind kind_ = PrecondKind::none;
  std::unique_ptr<CsrMatrix> p_;
  SymmetricGaussSeidel ssor_;
  std::unique_ptr<SmoothedAggregationAmg> amg_;
};

/// Exact A^-1 for the face mass matrix: on a regular grid A only couples
/// faces along the same grid line, so it is block tridiagonal by lines.
class LineSolver {
 public:
  LineSolver() = default;
  explicit LineSolver(const CsrMatrix& a) {
    const std::int32_t n = a.rows();
    std::vector<std::int32_t> next(static_cast<std::size_t>(n), -1);
    std::vector<char> has_prev(static_cast<std::size_t>(n), 0);
    std::vector<double> up(static_cast<std::size_t>(n), 0.0);
    for (std::int32_t i = 0; i < n; ++i) {
      const auto cs = a.row_cols(i);
      const auto vs = a.row_values(i);
      int lower = 0, upper = 0;
      for (std::size_t k = 0; k < cs.size(); ++k) {
        if (cs[k] < i) ++lower;
        if (cs[k] > i) {
          ++upper;
          next[i] = cs[k];
          up[i] = vs[k];
        }
      }
      if (lower > 1 || upper > 1) throw ValidationError("face mass matrix is not line-tridiagonal");
      if (next[i] >= 0) has_prev[static_cast<std::size_t>(next[i])] = 1;
    }
    chain_ptr_.push_back(0);
    for (std::int32_t i = 0; i < n; ++i) {
      if (has_prev[i]) continue;
      for (std::int32_t k = i; k >= 0; k = next[k]) {
        order_.push_back(k);
        sub_.push_back(order_.size() > chain_ptr_.back() + 1 ? up[order_[order_.size() - 2]] : 0.0);
      }
      chain_ptr_.push_back(order_.size());
    }
    if (order_.size() != static_cast<std::size_t>(n)) throw ValidationError("face mass matrix has a cyclic line");
    pivot_.resize(order_.size());
    for (std::size_t c = 0; c + 1 < chain_ptr_.size(); ++c)
      for (std::size_t k = chain_ptr_[c]; k < chain_ptr_[c + 1]; ++k) {
        double d = a.at(order_[k], order_[k]);
        if (k > chain_ptr_[c]) d -= sub_[k] * sub_[k] / pivot_[k - 1];
        if (!(d > 0.0)) throw NumericalError("face mass matrix is not positive definite");
        pivot_[k] = d;
      }
  }

  void solve(std::span<const double> y, std::span<double> x) const {
    parallel_for(
        chain_ptr_.size() - 1,
        [&](std::size_t c0, std::size_t c1) {
          std::vector<double> w;
          for (std::size_t c = c0; c < c1; ++c) {
            const std::size_t lo = chain_ptr_[c], hi = chain_ptr_[c + 1];
            w.resize(hi - lo);
            for (std::size_t k = lo; k < hi; ++k) {
              double v = y[order_[k]];
              if (k > lo) v -= sub_[k] / pivot_[k - 1] * w[k - 1 - lo];
              w[k - lo] = v;
            }
            for (std::size_t k = hi; k-- > lo;) {
              double v = w[k - lo];
              if (k + 1 < hi) v -= sub_[k + 1] * x[order_[k + 1]];
              x[order_[k]] = v / pivot_[k];
            }
          }
        },
        256);
  }

 private:
  std::vector<std::int32_t> order_;
  std::vector<std::size_t> chain_ptr_;
  std::vector<double> sub_;    // coupling to the previous face on the line
  std::vector<double> pivot_;  // LDL^T pivots
};

/// Schur complement solver for S u = h, S = B A^-1 B^T.
///
/// Sign convention: A j - B^T u = b, B j = 0, so u is the physical potential
/// and S u = -B A^-1 b. The system must outlive the solver.
class SchurSolver {
 public:
  SchurSolver(const SaddleSystem& system, SolverConfig cfg) : s_(system), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (s_.element_dofs() == 0) throw EmptyDomainError("saddle system has no elements");
    lines_ = LineSolver(s_.A);
    inv_diag_ = s_.A.diagonal();
    for (double& d : inv_diag_) d = 1.0 / d;
    precond_ = SchurPreconditioner(s_, cfg_);
  }

  const SaddleSystem& system() const noexcept { return s_; }
  const SolverConfig& config() const noexcept { return cfg_; }
  const SchurPreconditioner& preconditioner() const noexcept { return precond_; }

  /// Exact A^-1 y.
  void apply_A_inverse_exact(std::span<const double> y, std::span<double> x) const { lines_.solve(y, x); }

  /// A^-1 y as configured.
  void apply_A_inverse(std::span<const double> y, std::span<double> x) const {
    switch (cfg_.inner) {
      case InnerSolve::exact_lines:
        lines_.solve(y, x);
        return;
      case InnerSolve::fixed_iterations:
        chebyshev(y, x, cfg_.inner_iters);
        return;
      case InnerSolve::tolerance: {
        PcgOptions opt;
        opt.tol = cfg_.inner_tol;
        opt.max_iter = 10000;
        std::fill(x.begin(), x.end(), 0.0);
        const auto r = pcg([&](std::span<const double> v, std::span<double> w) { s_.A.multiply(v, w); },
                           [&](std::span<const double> v, std::span<double> w) {
                             for (std::size_t i = 0; i < v.size(); ++i) w[i] = inv_diag_[i] * v[i];
                           },
                           y, x, opt);
        if (!r.converged) throw NumericalError("inner solve with A did not converge", r.history);
        return;
      }
    }
  }

  /// y = B A^-1 B^T u.
  void schur_apply(std::span<const double> u, std::span<double> y) const {
    std::vector<double> t(static_cast<std::size_t>(s_.face_dofs())), x(t.size());
    s_.Bt.multiply(u, t);
    apply_A_inverse(t, x);
    s_.B.multiply(x, y);
  }

  /// Element load of a right-hand side: -B A^-1 b_cur or -B b_pot.
  std::vector<double> element_load(const RhsSpec& rhs) const {
    std::vector<double> h(static_cast<std::size_t>(s_.element_dofs()), 0.0);
    if (rhs.kind == RhsKind::projected) return rhs.element.dense(h.size());
    const auto b = rhs.face.dense(static_cast<std::size_t>(s_.face_dofs()));
    std::vector<double> x(b.size());
    lines_.solve(b, x);
    s_.B.multiply(x, h);
    for (double& v : h) v = -v;
    return h;
  }

  /// Solves S u = h with mean-zero u.
  Solution solve_schur(std::span<const double> h) const {
    if (h.size() != static_cast<std::size_t>(s_.element_dofs())) throw ValidationError("load length mismatch");
    const double hn = norm2(h);
    if (hn > 0.0 && std::abs(mean(h)) > 1e-12 * hn)
      throw ValidationError("incompatible load: mean(h) must vanish (sources must balance sinks)");
    const auto t0 = std::chrono::steady_clock::now();
    Solution sol;
    sol.u.assign(h.size(), 0.0);
    PcgOptions opt;
    opt.tol = cfg_.outer_tol;
    opt.max_iter = cfg_.outer_max_iter;
    opt.deflate_constants = cfg_.deflate_constants;
    opt.recompute_every = cfg_.recompute_every;
    const auto res = pcg([&](std::span<const double> v, std::span<double> w) { schur_apply(v, w); },
                         [&](std::span<const double> v, std::span<double> w) { precond_.apply(v, w); }, h,
                         std::span<double>(sol.u), opt);
    sol.iterations = res.iterations;
    sol.residual = res.relative_residual;
    sol.history = res.history;
    sol.converged = res.converged;
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!res.converged)
      throw NumericalError("Schur complement CG did not reach tolerance within " + std::to_string(opt.max_iter) +
                               " iterations (relative residual " + format_double(res.relative_residual) + ")",
                           res.history);
    remove_mean(sol.u);
    return sol;
  }

  /// Potential and current for a dipole right-hand side. The current is
  /// recovered with the exact inner solve.
  Solution solve_potential(const RhsSpec& rhs) const {
    const auto t0 = std::chrono::steady_clock::now();
    const auto h = element_load(rhs);
    Solution sol = solve_schur(h);
    const auto nf = static_cast<std::size_t>(s_.face_dofs());
    std::vector<double> t(nf);
    s_.Bt.multiply(sol.u, t);
    if (rhs.kind == RhsKind::direct) {
      const auto b = rhs.face.dense(nf);
      for (std::size_t i = 0; i < nf; ++i) t[i] += b[i];
      sol.j.assign(nf, 0.0);
      lines_.solve(t, sol.j);
    } else {
      sol.j.assign(nf, 0.0);
      lines_.solve(t, sol.j);
      for (std::size_t k = 0; k < rhs.face.nnz(); ++k) sol.j[rhs.face.index[k]] += rhs.face.value[k];
    }
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  /// Solves S t_k = R_k for each mean-zero restriction vector. Because S is
  /// symmetric, <t_k, h> is the potential difference seen by sensor k for
  /// any load h.
  std::vector<std::vector<double>> transfer_solve(const std::vector<std::vector<double>>& restrictions) const {
    std::vector<std::vector<double>> out;
    out.reserve(restrictions.size());
    for (const auto& r : restrictions) {
      const double rn = norm2(r);
      if (rn > 0.0 && std::abs(mean(r)) > 1e-12 * rn)
        throw ValidationError("restriction vectors must be mean-zero (sensor minus reference)");
      out.push_back(solve_schur(r).u);
    }
    return out;
  }

 private:
  // Chebyshev acceleration of Jacobi for D^-1 A with spectrum in [0.5, 1.5].
  // Linear in y and symmetric; one step is x = D^-1 y.
  void chebyshev(std::span<const double> y, std::span<double> x, int steps) const {
    const double theta = 1.0, delta = 0.5;
    const double sigma1 = theta / delta;
    const std::size_t n = y.size();
    std::vector<double> r(y.begin(), y.end()), d(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 0.0;
      d[i] = inv_diag_[i] * r[i] / theta;
    }
    double rho = 1.0 / sigma1;
    for (int k = 0; k < steps; ++k) {
      for (std::size_t i = 0; i < n; ++i) x[i] += d[i];
      if (k + 1 == steps) break;
      s_.A.multiply(d, q);
      for (std::size_t i = 0; i < n; ++i) r[i] -= q[i];
      const double rho_new = 1.0 / (2.0 * sigma1 - rho);
      for (std::size_t i = 0; i < n; ++i) d[i] = rho_new * rho * d[i] + 2.0 * rho_new / delta * inv_diag_[i] * r[i];
      rho = rho_new;
    }
  }

  const SaddleSystem& s_;
  SolverConfig cfg_;
  LineSolver lines_;
  std::vector<double> inv_diag_;
  SchurPreconditioner precond_;
};

/// Element-averaged current density vector from face coefficients (the mean
/// of the two opposite face values per axis; boundary faces carry zero).
inline std::vector<Vec3> element_current_from_faces(const HexMesh& mesh, const SaddleSystem& system,
                                                    std::span<const double> j) {
  std::vector<Vec3> out(static_cast<std::size_t>(mesh.element_count()));
  for (std::int32_t e = 0; e < mesh.element_count(); ++e) {
    const auto& f = mesh.element_faces(e);
    for (int a = 0; a < 3; ++a) {
      const auto lo = system.face_to_column[static_cast<std::size_t>(f[2 * a])];
      const auto hi = system.face_to_column[static_cast<std::size_t>(f[2 * a + 1])];
      out[static_cast<std::size_t>(e)][a] = 0.5 * ((lo >= 0 ? j[lo] : 0.0) + (hi >= 0 ? j[hi] : 0.0));
    }
  }
  return out;
}

}  // namespace hdivfwd
