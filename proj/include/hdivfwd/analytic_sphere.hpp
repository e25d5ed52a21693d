#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hdivfwd/error.hpp"
#include "hdivfwd/geometry.hpp"
#include "hdivfwd/parallel.hpp"
#include "hdivfwd/sources.hpp"

namespace hdivfwd {

/// Concentric spheres; layer k spans (radii[k-1], radii[k]].
struct LayeredSphere {
  std::vector<double> radii;   // mm, increasing
  std::vector<double> sigmas;  // S/m
  Vec3 center{0.0, 0.0, 0.0};

  void validate() const {
    if (radii.empty() || radii.size() != sigmas.size())
      throw ValidationError("layered sphere needs one conductivity per radius");
    for (std::size_t k = 0; k < radii.size(); ++k) {
      if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1])))
        throw ValidationError("sphere radii must be positive and strictly increasing");
      if (!(sigmas[k] > 0.0)) throw ValidationError("sphere conductivities must be positive");
    }
  }

  static LayeredSphere four_layer() { return {{78.0, 80.0, 86.0, 92.0}, {0.33, 1.79, 0.01, 0.43}, {0, 0, 0}}; }
};

struct SeriesConfig {
  int max_terms = 200;
  double tail_tol = 1e-8;  // stop once a term bound drops below tail_tol times the first
};

/// Radial function of degree n in layer k: alpha_k rho^n + beta_k rho^-(n+1),
/// rho = r / R_outer. Normalized so that beta of the innermost layer is 1,
/// i.e. the r^-(n+1) part there matches the free-space source expansion.
struct LayerCoefficient {
  double alpha;
  double beta;
};

/// Interface recursion from the insulated outer surface inward, enforcing
/// continuity of u and sigma du/dr.
inline std::vector<LayerCoefficient> layer_coefficients(const LayeredSphere& model, int n) {
  model.validate();
  if (n < 1) throw ValidationError("series degree must be >= 1");
  const std::size_t layers = model.radii.size();
  const double outer = model.radii.back();
  std::vector<LayerCoefficient> c(layers);
  c[layers - 1] = {(n + 1.0) / n, 1.0};
  for (std::size_t k = layers - 1; k-- > 0;) {
    const double rho = model.radii[k] / outer;
    const double rn = std::pow(rho, n);
    const double rm = std::pow(rho, -(n + 1.0));
    const double p = c[k + 1].alpha * rn;
    const double q = c[k + 1].beta * rm;
    const double u = p + q;
    const double f = model.sigmas[k + 1] / model.sigmas[k] * (n * p - (n + 1.0) * q);
    const double pk = ((n + 1.0) * u + f) / (2.0 * n + 1.0);
    const double qk = (n * u - f) / (2.0 * n + 1.0);
    c[k] = {pk / rn, qk / rm};
  }
  const double scale = 1.0 / c[0].beta;
  for (auto& x : c) {
    x.alpha *= scale;
    x.beta *= scale;
  }
  return c;
}

namespace detail {
inline std::size_t layer_of(const LayeredSphere& m, double r) {
  for (std::size_t k = 0; k < m.radii.size(); ++k)
    if (r <= m.radii[k] * (1.0 + 1e-12)) return k;
  throw ValidationError("evaluation point lies outside the sphere model");
}
}  // namespace detail

/// Potential (V for mm, S/m and mA*mm) of a dipole inside the innermost layer
/// at points with radius >= the innermost radius.
inline std::vector<double> surface_potential(const LayeredSphere& model, const Dipole& dipole,
                                             std::span<const Vec3> points, const SeriesConfig& cfg = {}) {
  model.validate();
  if (cfg.max_terms < 1) throw ValidationError("max_terms must be >= 1");
  const Vec3 r0v = dipole.position - model.center;
  const double r0 = norm(r0v);
  if (!(r0 < model.radii.front())) throw ValidationError("dipole must lie strictly inside the innermost layer");
  const double outer = model.radii.back();
  const double rho0 = r0 / outer;
  const Vec3 e0 = r0 > 0.0 ? (1.0 / r0) * r0v : Vec3{1.0, 0.0, 0.0};
  const double m_radial = dot(dipole.moment, e0);
  const double mnorm = norm(dipole.moment);

  std::vector<std::vector<LayerCoefficient>> coef;
  double first_bound = 0.0;
  for (int n = 1; n <= cfg.max_terms; ++n) {
    coef.push_back(layer_coefficients(model, n));
    const auto& c = coef.back().back();
    const double bound = std::abs(c.alpha + c.beta) * std::pow(rho0, n - 1) * mnorm * (n + n * (n + 1.0));
    if (n == 1) first_bound = bound;
    if (n > 1 && bound < cfg.tail_tol * first_bound) break;
  }

  std::vector<std::size_t> layer_index(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = norm(points[i] - model.center);
    if (!(r >= model.radii.front() * (1.0 - 1e-12)))
      throw ValidationError("evaluation point lies inside the innermost layer");
    layer_index[i] = detail::layer_of(model, r);
  }

  std::vector<double> out(points.size());
  const double pre = 1.0 / (4.0 * M_PI * model.sigmas.front() * outer * outer);
  parallel_for(
      points.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          const Vec3 rv = points[i] - model.center;
          const double r = norm(rv);
          const std::size_t layer = layer_index[i];
          const Vec3 x = (1.0 / r) * rv;
          const double rho = r / outer;
          const double c = std::clamp(dot(x, e0), -1.0, 1.0);
          const double m_x = dot(dipole.moment, x);
          // P_n and P_n' by upward recurrence
          double p_prev = 1.0, p = c;
          double dp_prev = 0.0, dp = 1.0;
          double s = 0.0;
          for (std::size_t k = 0; k < coef.size(); ++k) {
            const int n = static_cast<int>(k) + 1;
            const auto& lc = coef[k][layer];
            const double radial = lc.alpha * std::pow(rho, n) + lc.beta * std::pow(rho, -(n + 1.0));
            const double angular = n * p * m_radial + dp * (m_x - c * m_radial);
            s += radial * std::pow(rho0, n - 1) * angular;
            const double p_next = ((2.0 * n + 1.0) * c * p - n * p_prev) / (n + 1.0);
            const double dp_next = dp_prev + (2.0 * n + 1.0) * p;
            p_prev = p;
            p = p_next;
            dp_prev = dp;
            dp = dp_next;
          }
          out[i] = pre * s;
        }
      },
      64);
  return out;
}

/// Quasi-uniform points on a sphere (Fibonacci lattice).
inline std::vector<Vec3> fibonacci_sphere(std::size_t count, double radius, const Vec3& center = {0.0, 0.0, 0.0}) {
  std::vector<Vec3> pts(count);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(count);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    pts[i] = center + radius * Vec3{s * std::cos(phi), s * std::sin(phi), z};
  }
  return pts;
}

}  // namespace hdivfwd
