#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hdivfwd/error.hpp"
#include "hdivfwd/sparse.hpp"

namespace hdivfwd {

/// Symmetric Gauss-Seidel sweeps on a CSR matrix with relaxation omega.
/// Starting from x = 0, k forward+backward sweeps are a fixed symmetric
/// positive map for 0 < omega < 2 on a positive semidefinite matrix with
/// positive diagonal.
class SymmetricGaussSeidel {
 public:
  SymmetricGaussSeidel() = default;
  SymmetricGaussSeidel(const CsrMatrix* a, int sweeps, double omega) : a_(a), sweeps_(sweeps), omega_(omega) {
    if (sweeps_ < 1) throw ValidationError("SSOR needs at least one sweep");
    if (!(omega_ > 0.0 && omega_ < 2.0)) throw ValidationError("SSOR omega must lie in (0, 2)");
    inv_diag_ = a_->diagonal();
    for (double& d : inv_diag_) {
      if (!(d > 0.0)) throw NumericalError("SSOR: non-positive diagonal entry");
      d = 1.0 / d;
    }
  }

  void apply(std::span<const double> r, std::span<double> x) const {
    std::fill(x.begin(), x.end(), 0.0);
    for (int s = 0; s < sweeps_; ++s) {
      forward(r, x);
      backward(r, x);
    }
  }

  void forward(std::span<const double> r, std::span<double> x) const {
    const auto& ptr = a_->row_ptr();
    const auto& col = a_->col_index();
    const auto& val = a_->values();
    for (std::int32_t i = 0; i < a_->rows(); ++i) {
      double s = r[i];
      for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) s -= val[k] * x[col[k]];
      x[i] += omega_ * s * inv_diag_[i];
    }
  }

  void backward(std::span<const double> r, std::span<double> x) const {
    const auto& ptr = a_->row_ptr();
    const auto& col = a_->col_index();
    const auto& val = a_->values();
    for (std::int32_t i = a_->rows() - 1; i >= 0; --i) {
      double s = r[i];
      for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) s -= val[k] * x[col[k]];
      x[i] += omega_ * s * inv_diag_[i];
    }
  }

 private:
  const CsrMatrix* a_ = nullptr;
  int sweeps_ = 1;
  double omega_ = 1.0;
  std::vector<double> inv_diag_;
};

struct AmgOptions {
  double strength = 0.08;
  double strength_decay = 0.25;  // per-level factor; coarse stencils are wider and flatter
  std::int32_t coarse_size = 400;
  int max_levels = 10;
  double smoothing_omega = 4.0 / 3.0;  // divided by a bound on rho(D^-1 A)
};

/// Smoothed-aggregation multigrid for symmetric positive semidefinite
/// M-matrix-like operators whose near nullspace is the constants. apply() runs
/// one V-cycle with symmetric Gauss-Seidel smoothing and is a symmetric map.
class SmoothedAggregationAmg {
 public:
  SmoothedAggregationAmg() = default;
  explicit SmoothedAggregationAmg(CsrMatrix a, const AmgOptions& opt = {}) {
    levels_.push_back(Level{std::move(a), {}, {}, {}});
    while (static_cast<int>(levels_.size()) < opt.max_levels && levels_.back().a.rows() > opt.coarse_size) {
      Level& fine = levels_.back();
      const double theta = opt.strength * std::pow(opt.strength_decay, static_cast<double>(levels_.size() - 1));
      auto agg = aggregate(fine.a, theta);
      const std::int32_t nc = agg.second;
      if (nc == 0 || nc >= fine.a.rows() * 9 / 10) break;
      fine.p = smoothed_prolongator(fine.a, agg.first, nc, opt.smoothing_omega);
      fine.r = transpose(fine.p);
      CsrMatrix coarse = multiply(fine.r, multiply(fine.a, fine.p));
      levels_.push_back(Level{std::move(coarse), {}, {}, {}});
    }
    for (auto& l : levels_) l.smoother = SymmetricGaussSeidel(&l.a, 1, 1.0);
    factor_coarse();
  }

  SmoothedAggregationAmg(const SmoothedAggregationAmg&) = delete;
  SmoothedAggregationAmg& operator=(const SmoothedAggregationAmg&) = delete;
  SmoothedAggregationAmg(SmoothedAggregationAmg&& o) noexcept { *this = std::move(o); }
  SmoothedAggregationAmg& operator=(SmoothedAggregationAmg&& o) noexcept {
    levels_ = std::move(o.levels_);
    coarse_ = std::move(o.coarse_);
    coarse_n_ = o.coarse_n_;
    for (auto& l : levels_) l.smoother = SymmetricGaussSeidel(&l.a, 1, 1.0);
    return *this;
  }

  std::size_t level_count() const noexcept { return levels_.size(); }
  std::int32_t level_size(std::size_t l) const { return levels_[l].a.rows(); }
  std::size_t level_nnz(std::size_t l) const { return levels_[l].a.nnz(); }

  /// Operator complexity: total nonzeros over fine-level nonzeros.
  double complexity() const {
    double s = 0.0;
    for (const auto& l : levels_) s += static_cast<double>(l.a.nnz());
    return s / static_cast<double>(levels_.front().a.nnz());
  }

  void apply(std::span<const double> r, std::span<double> x) const { cycle(0, r, x); }

 private:
  struct Level {
    CsrMatrix a;
    CsrMatrix p;
    CsrMatrix r;
    SymmetricGaussSeidel smoother;
  };

  static std::pair<std::vector<std::int32_t>, std::int32_t> aggregate(const CsrMatrix& a, double theta) {
    const std::int32_t n = a.rows();
    const auto diag = a.diagonal();
    // strong neighbors, CSR layout
    std::vector<std::size_t> sptr(static_cast<std::size_t>(n) + 1, 0);
    std::vector<std::int32_t> scol;
    scol.reserve(a.nnz());
    for (std::int32_t i = 0; i < n; ++i) {
      const auto cs = a.row_cols(i);
      const auto vs = a.row_values(i);
      for (std::size_t k = 0; k < cs.size(); ++k) {
        const auto j = cs[k];
        if (j == i) continue;
        if (std::abs(vs[k]) >= theta * std::sqrt(std::abs(diag[i] * diag[j]))) scol.push_back(j);
      }
      sptr[static_cast<std::size_t>(i) + 1] = scol.size();
    }
    std::vector<std::int32_t> agg(static_cast<std::size_t>(n), -1);
    std::int32_t count = 0;
    // pass 1: seed aggregates from nodes whose whole strong neighborhood is free
    for (std::int32_t i = 0; i < n; ++i) {
      if (agg[i] >= 0) continue;
      bool free = true;
      for (std::size_t k = sptr[i]; k < sptr[i + 1] && free; ++k) free = agg[scol[k]] < 0;
      if (!free || sptr[i] == sptr[i + 1]) continue;
      agg[i] = count;
      for (std::size_t k = sptr[i]; k < sptr[i + 1]; ++k) agg[scol[k]] = count;
      ++count;
    }
    // pass 2: attach leftovers to a neighboring aggregate, strong neighbors
    // first, then the strongest aggregated neighbor of any kind
    std::vector<std::int32_t> pass2 = agg;
    for (std::int32_t i = 0; i < n; ++i) {
      if (agg[i] >= 0) continue;
      for (std::size_t k = sptr[i]; k < sptr[i + 1]; ++k)
        if (agg[scol[k]] >= 0) {
          pass2[i] = agg[scol[k]];
          break;
        }
      if (pass2[i] >= 0) continue;
      const auto cs = a.row_cols(i);
      const auto vs = a.row_values(i);
      double best = 0.0;
      for (std::size_t k = 0; k < cs.size(); ++k)
        if (cs[k] != i && agg[cs[k]] >= 0 && std::abs(vs[k]) > best) {
          best = std::abs(vs[k]);
          pass2[i] = agg[cs[k]];
        }
    }
    agg = std::move(pass2);
    // pass 3: remaining nodes form aggregates with their free strong neighbors
    for (std::int32_t i = 0; i < n; ++i) {
      if (agg[i] >= 0) continue;
      agg[i] = count;
      for (std::size_t k = sptr[i]; k < sptr[i + 1]; ++k)
        if (agg[scol[k]] < 0) agg[scol[k]] = count;
      ++count;
    }
    return {std::move(agg), count};
  }

  static CsrMatrix smoothed_prolongator(const CsrMatrix& a, const std::vector<std::int32_t>& agg, std::int32_t nc,
                                        double omega) {
    const std::int32_t n = a.rows();
    std::vector<double> size(static_cast<std::size_t>(nc), 0.0);
    for (auto g : agg) size[g] += 1.0;
    std::vector<std::size_t> tptr(static_cast<std::size_t>(n) + 1);
    std::vector<std::int32_t> tcol(static_cast<std::size_t>(n));
    std::vector<double> tval(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) {
      tptr[i] = static_cast<std::size_t>(i);
      tcol[i] = agg[i];
      tval[i] = 1.0 / std::sqrt(size[agg[i]]);
    }
    tptr[n] = static_cast<std::size_t>(n);
    const CsrMatrix t(n, nc, std::move(tptr), std::move(tcol), std::move(tval));
    // Jacobi smoothing S = I - w/rho D^-1 A, rho bounded by Gershgorin
    const auto diag = a.diagonal();
    double rho = 0.0;
    for (std::int32_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (double v : a.row_values(i)) s += std::abs(v);
      rho = std::max(rho, s / diag[i]);
    }
    const double w = omega / rho;
    std::vector<Triplet> sm;
    sm.reserve(a.nnz());
    for (std::int32_t i = 0; i < n; ++i) {
      const auto cs = a.row_cols(i);
      const auto vs = a.row_values(i);
      for (std::size_t k = 0; k < cs.size(); ++k)
        sm.push_back({i, cs[k], (cs[k] == i ? 1.0 : 0.0) - w * vs[k] / diag[i]});
    }
    return multiply(from_triplets(n, n, std::move(sm)), t);
  }

  void factor_coarse() {
    const CsrMatrix& a = levels_.back().a;
    coarse_n_ = a.rows();
    const std::size_t n = static_cast<std::size_t>(coarse_n_);
    coarse_.assign(n * n, 0.0);
    for (std::int32_t i = 0; i < coarse_n_; ++i) {
      const auto cs = a.row_cols(i);
      const auto vs = a.row_values(i);
      for (std::size_t k = 0; k < cs.size(); ++k) coarse_[i * n + static_cast<std::size_t>(cs[k])] = vs[k];
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(coarse_[i * n + i]));
    // LDL^T in place; a pivot at round-off level marks a nullspace direction
    // and its row/column is dropped (pseudo-inverse on the range).
    for (std::size_t j = 0; j < n; ++j) {
      double d = coarse_[j * n + j];
      for (std::size_t k = 0; k < j; ++k) d -= coarse_[j * n + k] * coarse_[j * n + k] * coarse_[k * n + k];
      if (d <= 1e-10 * scale) {
        coarse_[j * n + j] = 0.0;
        for (std::size_t i = j + 1; i < n; ++i) coarse_[i * n + j] = 0.0;
        continue;
      }
      coarse_[j * n + j] = d;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = coarse_[i * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= coarse_[i * n + k] * coarse_[j * n + k] * coarse_[k * n + k];
        coarse_[i * n + j] = s / d;
      }
    }
  }

  void coarse_solve(std::span<const double> b, std::span<double> x) const {
    const std::size_t n = static_cast<std::size_t>(coarse_n_);
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < i; ++k) y[i] -= coarse_[i * n + k] * y[k];
    for (std::size_t i = 0; i < n; ++i) y[i] = coarse_[i * n + i] > 0.0 ? y[i] / coarse_[i * n + i] : 0.0;
    for (std::size_t i = n; i-- > 0;)
      for (std::size_t k = i + 1; k < n; ++k) y[i] -= coarse_[k * n + i] * y[k];
    std::copy(y.begin(), y.end(), x.begin());
  }

  void cycle(std::size_t l, std::span<const double> b, std::span<double> x) const {
    if (l + 1 == levels_.size()) {
      coarse_solve(b, x);
      return;
    }
    const Level& lv = levels_[l];
    const auto n = static_cast<std::size_t>(lv.a.rows());
    const auto nc = static_cast<std::size_t>(lv.p.cols());
    std::vector<double> res(n), rc(nc), xc(nc);
    std::fill(x.begin(), x.end(), 0.0);
    lv.smoother.forward(b, x);
    lv.a.multiply(std::span<const double>(x.data(), n), res);
    for (std::size_t i = 0; i < n; ++i) res[i] = b[i] - res[i];
    lv.r.multiply(res, rc);
    cycle(l + 1, rc, xc);
    lv.p.multiply(xc, res);
    for (std::size_t i = 0; i < n; ++i) x[i] += res[i];
    lv.smoother.backward(b, x);
  }

  std::vector<Level> levels_;
  std::vector<double> coarse_;
  std::int32_t coarse_n_ = 0;
};

}  // namespace hdivfwd
