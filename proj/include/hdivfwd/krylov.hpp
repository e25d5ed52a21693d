#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "hdivfwd/parallel.hpp"

namespace hdivfwd {

struct PcgOptions {
  double tol = 1e-8;  // on ||b - A x|| / ||b||
  int max_iter = 1000;
  bool deflate_constants = false;  // keep residuals and search directions mean-zero
  int recompute_every = 50;        // true residual refresh interval, 0 = never
  std::function<void(int, double)> on_iteration;
};

struct PcgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::vector<double> history;  // relative residual after each iteration, entry 0 = initial
};

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator. `apply(x, y)` sets y = A x, `precond(r, z)` sets z = M r. x is
/// used as the initial guess.
template <class Apply, class Precond>
PcgResult pcg(Apply&& apply, Precond&& precond, std::span<const double> b, std::span<double> x,
              const PcgOptions& opt) {
  const std::size_t n = b.size();
  PcgResult res;
  std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
  if (opt.deflate_constants) remove_mean(r);
  const double bnorm = norm2(r);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    res.history.push_back(0.0);
    return res;
  }
  auto residual = [&] {
    apply(std::span<const double>(x), std::span<double>(q));
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    if (opt.deflate_constants) remove_mean(r);
  };
  residual();
  double rel = norm2(r) / bnorm;
  res.history.push_back(rel);
  if (opt.on_iteration) opt.on_iteration(0, rel);
  if (rel <= opt.tol) {
    res.converged = true;
    res.relative_residual = rel;
    if (opt.deflate_constants) remove_mean(x);
    return res;
  }
  precond(std::span<const double>(r), std::span<double>(z));
  if (opt.deflate_constants) remove_mean(z);
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= opt.max_iter; ++it) {
    apply(std::span<const double>(p), std::span<double>(q));
    const double pq = dot(p, q);
    if (!(pq > 0.0) || !std::isfinite(pq)) break;
    const double alpha = rz / pq;
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
    });
    if (opt.recompute_every > 0 && it % opt.recompute_every == 0)
      residual();
    else if (opt.deflate_constants)
      remove_mean(r);
    rel = norm2(r) / bnorm;
    res.iterations = it;
    res.history.push_back(rel);
    if (opt.on_iteration) opt.on_iteration(it, rel);
    if (!std::isfinite(rel)) break;
    if (rel <= opt.tol) {
      residual();
      rel = norm2(r) / bnorm;
      res.history.back() = rel;
      if (rel <= opt.tol) {
        res.converged = true;
        break;
      }
    }
    precond(std::span<const double>(r), std::span<double>(z));
    if (opt.deflate_constants) remove_mean(z);
    const double rz_new = dot(r, z);
    if (!(std::abs(rz) > 0.0)) break;
    const double beta = rz_new / rz;
    rz = rz_new;
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) p[i] = z[i] + beta * p[i];
    });
  }
  res.relative_residual = rel;
  if (opt.deflate_constants) remove_mean(x);
  return res;
}

}  // namespace hdivfwd
