#pragma once

#include <algorithm>
#include <cstddef>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdivfwd/error.hpp"
#include "hdivfwd/parallel.hpp"

namespace hdivfwd {

/// Compressed sparse row matrix with sorted, unique column indices per row.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  CsrMatrix(std::int32_t rows, std::int32_t cols, std::vector<std::size_t> row_ptr,
            std::vector<std::int32_t> col_index, std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        row_ptr_(std::move(row_ptr)),
        col_(std::move(col_index)),
        val_(std::move(values)) {
    if (row_ptr_.size() != static_cast<std::size_t>(rows_) + 1 || col_.size() != val_.size() ||
        row_ptr_.back() != col_.size())
      throw ValidationError("CsrMatrix: inconsistent array sizes");
    for (std::int32_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        if (col_[k] < 0 || col_[k] >= cols_) throw ValidationError("CsrMatrix: column out of range");
        if (k > row_ptr_[r] && col_[k] <= col_[k - 1])
          throw ValidationError("CsrMatrix: columns not strictly increasing");
      }
  }

  std::int32_t rows() const noexcept { return rows_; }
  std::int32_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return val_.size(); }
  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::int32_t>& col_index() const noexcept { return col_; }
  const std::vector<double>& values() const noexcept { return val_; }

  std::span<const std::int32_t> row_cols(std::int32_t r) const {
    return {col_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::int32_t r) const {
    return {val_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Entry (r, c), zero if not stored.
  double at(std::int32_t r, std::int32_t c) const {
    const auto cols = row_cols(r);
    const auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0.0;
    return val_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(static_cast<std::size_t>(std::min(rows_, cols_)), 0.0);
    for (std::int32_t r = 0; r < static_cast<std::int32_t>(d.size()); ++r) d[r] = at(r, r);
    return d;
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    parallel_for(static_cast<std::size_t>(rows_), [&](std::size_t b, std::size_t e) {
      for (std::size_t r = b; r < e; ++r) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += val_[k] * x[col_[k]];
        y[r] = s;
      }
    });
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(rows_));
    multiply(x, y);
    return y;
  }

  bool is_symmetric(double tol = 0.0) const {
    if (rows_ != cols_) return false;
    for (std::int32_t r = 0; r < rows_; ++r) {
      const auto cs = row_cols(r);
      const auto vs = row_values(r);
      for (std::size_t k = 0; k < cs.size(); ++k)
        if (std::abs(vs[k] - at(cs[k], r)) > tol * std::max(1.0, std::abs(vs[k]))) return false;
    }
    return true;
  }

 private:
  std::int32_t rows_ = 0;
  std::int32_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::int32_t> col_;
  std::vector<double> val_;
};

struct Triplet {
  std::int32_t row;
  std::int32_t col;
  double value;
};

/// Builds a CSR matrix; duplicates are summed in input order after a stable
/// sort, which keeps the result independent of anything but the input.
inline CsrMatrix from_triplets(std::int32_t rows, std::int32_t cols, std::vector<Triplet> t) {
  std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> ptr(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<std::int32_t> ci;
  std::vector<double> v;
  ci.reserve(t.size());
  v.reserve(t.size());
  for (std::size_t k = 0; k < t.size();) {
    const auto r = t[k].row;
    const auto c = t[k].col;
    if (r < 0 || r >= rows || c < 0 || c >= cols) throw ValidationError("from_triplets: index out of range");
    double s = 0.0;
    while (k < t.size() && t[k].row == r && t[k].col == c) s += t[k++].value;
    ci.push_back(c);
    v.push_back(s);
    ++ptr[static_cast<std::size_t>(r) + 1];
  }
  for (std::size_t r = 0; r < static_cast<std::size_t>(rows); ++r) ptr[r + 1] += ptr[r];
  return CsrMatrix(rows, cols, std::move(ptr), std::move(ci), std::move(v));
}

inline CsrMatrix transpose(const CsrMatrix& a) {
  std::vector<std::size_t> ptr(static_cast<std::size_t>(a.cols()) + 1, 0);
  for (auto c : a.col_index()) ++ptr[static_cast<std::size_t>(c) + 1];
  for (std::size_t c = 0; c < static_cast<std::size_t>(a.cols()); ++c) ptr[c + 1] += ptr[c];
  std::vector<std::size_t> fill(ptr.begin(), ptr.end() - 1);
  std::vector<std::int32_t> ci(a.nnz());
  std::vector<double> v(a.nnz());
  for (std::int32_t r = 0; r < a.rows(); ++r) {
    const auto cs = a.row_cols(r);
    const auto vs = a.row_values(r);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const std::size_t dst = fill[cs[k]]++;
      ci[dst] = r;
      v[dst] = vs[k];
    }
  }
  return CsrMatrix(a.cols(), a.rows(), std::move(ptr), std::move(ci), std::move(v));
}

/// C = A B (Gustavson); columns of each row come out sorted.
inline CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("multiply: dimension mismatch");
  std::vector<std::size_t> ptr(static_cast<std::size_t>(a.rows()) + 1, 0);
  std::vector<std::int32_t> ci;
  std::vector<double> v;
  std::vector<double> acc(static_cast<std::size_t>(b.cols()), 0.0);
  std::vector<std::int32_t> marker(static_cast<std::size_t>(b.cols()), -1);
  std::vector<std::int32_t> pattern;
  for (std::int32_t r = 0; r < a.rows(); ++r) {
    pattern.clear();
    const auto acs = a.row_cols(r);
    const auto avs = a.row_values(r);
    for (std::size_t ka = 0; ka < acs.size(); ++ka) {
      const auto bcs = b.row_cols(acs[ka]);
      const auto bvs = b.row_values(acs[ka]);
      for (std::size_t kb = 0; kb < bcs.size(); ++kb) {
        const auto c = bcs[kb];
        if (marker[c] != r) {
          marker[c] = r;
          acc[c] = 0.0;
          pattern.push_back(c);
        }
        acc[c] += avs[ka] * bvs[kb];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    for (auto c : pattern) {
      ci.push_back(c);
      v.push_back(acc[c]);
    }
    ptr[static_cast<std::size_t>(r) + 1] = ci.size();
  }
  return CsrMatrix(a.rows(), b.cols(), std::move(ptr), std::move(ci), std::move(v));
}

/// Keeps rows/cols whose map entry is >= 0 and renumbers them to that entry.
inline CsrMatrix extract(const CsrMatrix& a, std::span<const std::int32_t> row_map, std::int32_t new_rows,
                         std::span<const std::int32_t> col_map, std::int32_t new_cols) {
  std::vector<std::size_t> ptr(static_cast<std::size_t>(new_rows) + 1, 0);
  std::vector<std::int32_t> ci;
  std::vector<double> v;
  std::vector<std::int32_t> old_of_new(static_cast<std::size_t>(new_rows), -1);
  for (std::int32_t r = 0; r < a.rows(); ++r)
    if (row_map[r] >= 0) old_of_new[row_map[r]] = r;
  std::vector<std::pair<std::int32_t, double>> row;
  for (std::int32_t nr = 0; nr < new_rows; ++nr) {
    row.clear();
    const auto r = old_of_new[nr];
    if (r >= 0) {
      const auto cs = a.row_cols(r);
      const auto vs = a.row_values(r);
      for (std::size_t k = 0; k < cs.size(); ++k)
        if (col_map[cs[k]] >= 0) row.emplace_back(col_map[cs[k]], vs[k]);
      std::sort(row.begin(), row.end());
    }
    for (auto& [c, x] : row) {
      ci.push_back(c);
      v.push_back(x);
    }
    ptr[static_cast<std::size_t>(nr) + 1] = ci.size();
  }
  return CsrMatrix(new_rows, new_cols, std::move(ptr), std::move(ci), std::move(v));
}

/// Sparse vector with sorted unique indices.
struct SparseVector {
  std::vector<std::int32_t> index;
  std::vector<double> value;

  std::size_t nnz() const noexcept { return index.size(); }
  double sum() const {
    double s = 0.0;
    for (double x : value) s += x;
    return s;
  }
  std::vector<double> dense(std::size_t n) const {
    std::vector<double> d(n, 0.0);
    for (std::size_t k = 0; k < index.size(); ++k) d[static_cast<std::size_t>(index[k])] += value[k];
    return d;
  }
  /// Collapses an unsorted (index, value) list into sorted unique form.
  static SparseVector from_pairs(std::vector<std::pair<std::int32_t, double>> p) {
    std::stable_sort(p.begin(), p.end(), [](auto& a, auto& b) { return a.first < b.first; });
    SparseVector s;
    for (std::size_t k = 0; k < p.size();) {
      const auto i = p[k].first;
      double v = 0.0;
      while (k < p.size() && p[k].first == i) v += p[k++].second;
      s.index.push_back(i);
      s.value.push_back(v);
    }
    return s;
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes coordinate real general, or symmetric (lower triangle) when
/// `symmetric` is set.
inline void write_matrix_market(const std::string& path, const CsrMatrix& a, bool symmetric = false) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  std::size_t count = 0;
  for (std::int32_t r = 0; r < a.rows(); ++r)
    for (auto c : a.row_cols(r))
      if (!symmetric || c <= r) ++count;
  out << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general") << "\n";
  out << a.rows() << " " << a.cols() << " " << count << "\n";
  for (std::int32_t r = 0; r < a.rows(); ++r) {
    const auto cs = a.row_cols(r);
    const auto vs = a.row_values(r);
    for (std::size_t k = 0; k < cs.size(); ++k)
      if (!symmetric || cs[k] <= r) out << r + 1 << " " << cs[k] + 1 << " " << format_double(vs[k]) << "\n";
  }
}

inline CsrMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("%%MatrixMarket matrix coordinate real", 0) != 0)
    throw ValidationError("unsupported Matrix Market header: " + line);
  const bool symmetric = line.find("symmetric") != std::string::npos;
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream hdr(line);
  long rows = 0, cols = 0, count = 0;
  if (!(hdr >> rows >> cols >> count)) throw ValidationError("malformed Matrix Market size line");
  std::vector<Triplet> t;
  for (long k = 0; k < count; ++k) {
    long r = 0, c = 0;
    double v = 0.0;
    if (!(in >> r >> c >> v)) throw ValidationError("truncated Matrix Market payload");
    t.push_back({static_cast<std::int32_t>(r - 1), static_cast<std::int32_t>(c - 1), v});
    if (symmetric && r != c) t.push_back({static_cast<std::int32_t>(c - 1), static_cast<std::int32_t>(r - 1), v});
  }
  return from_triplets(static_cast<std::int32_t>(rows), static_cast<std::int32_t>(cols), std::move(t));
}

}  // namespace hdivfwd
