#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace hdivfwd;

namespace {

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
    s = std::max(s, std::abs(b[i]));
  }
  return m / s;
}

}  // namespace

TEST(AnalyticSphere, UniformLayersMatchHomogeneousClosedForm) {
  LayeredSphere model{{78, 80, 86, 92}, {0.33, 0.33, 0.33, 0.33}, {1, -2, 3}};
  const auto pts = fibonacci_sphere(1000, 92.0, model.center);
  SeriesConfig cfg;
  cfg.tail_tol = 1e-14;
  cfg.max_terms = 400;
  for (const Dipole d : {Dipole{{1 + 10, -2 + 20, 3 - 5}, {0.3, -0.4, 0.8}}, Dipole{{1, -2, 3}, {0, 0, 1}},
                         Dipole{{1 + 60, -2, 3 + 30}, {1, 1, 0}}}) {
    const auto u = surface_potential(model, d, pts, cfg);
    std::vector<double> ref(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
      ref[i] = oracle::homogeneous_sphere(0.33, pts[i] - model.center, d.position - model.center, d.moment);
    EXPECT_LT(max_rel(u, ref), 1e-6);
  }
}

TEST(AnalyticSphere, UniformCoefficientsAreHomogeneous) {
  LayeredSphere model{{78, 80, 86, 92}, {1.0, 1.0, 1.0, 1.0}, {0, 0, 0}};
  for (int n = 1; n <= 50; ++n) {
    const auto c = layer_coefficients(model, n);
    for (std::size_t k = 0; k < c.size(); ++k) {
      EXPECT_NEAR(c[k].beta, 1.0, 1e-12);
      // alpha is only resolved relative to the dominant term at the layer's outer radius
      const double r = model.radii[k] / model.radii.back();
      const double scale = std::abs(c[k].alpha) + std::pow(r, -(2.0 * n + 1.0));
      EXPECT_NEAR(c[k].alpha, (n + 1.0) / n, 1e-12 * scale) << "n=" << n << " k=" << k;
    }
  }
}

TEST(AnalyticSphere, InterfaceContinuity) {
  const auto model = LayeredSphere::four_layer();
  const double outer = model.radii.back();
  for (int n = 1; n <= 100; ++n) {
    const auto c = layer_coefficients(model, n);
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      const double r = model.radii[k] / outer;
      const double rn = std::pow(r, n), rm = std::pow(r, -(n + 1.0));
      const double ui = c[k].alpha * rn + c[k].beta * rm;
      const double uo = c[k + 1].alpha * rn + c[k + 1].beta * rm;
      const double fi = model.sigmas[k] * (n * c[k].alpha * rn - (n + 1.0) * c[k].beta * rm);
      const double fo = model.sigmas[k + 1] * (n * c[k + 1].alpha * rn - (n + 1.0) * c[k + 1].beta * rm);
      const double su = std::abs(c[k].alpha * rn) + std::abs(c[k].beta * rm);
      const double sf = model.sigmas[k] * (n * std::abs(c[k].alpha * rn) + (n + 1.0) * std::abs(c[k].beta * rm));
      EXPECT_LT(std::abs(ui - uo), 1e-10 * su) << "n=" << n << " k=" << k;
      EXPECT_LT(std::abs(fi - fo), 1e-10 * sf) << "n=" << n << " k=" << k;
    }
    const auto& o = c.back();
    EXPECT_LT(std::abs(n * o.alpha - (n + 1.0) * o.beta), 1e-10 * (n * std::abs(o.alpha) + (n + 1.0) * std::abs(o.beta)));
  }
}

TEST(AnalyticSphere, SurfaceMeanVanishes) {
  const auto model = LayeredSphere::four_layer();
  const auto pts = fibonacci_sphere(20000, 92.0);
  const auto u = surface_potential(model, {{10, 20, 30}, {0.2, -0.5, 0.7}}, pts);
  double mean = 0.0, rms = 0.0;
  for (double v : u) {
    mean += v;
    rms += v * v;
  }
  mean /= static_cast<double>(u.size());
  rms = std::sqrt(rms / static_cast<double>(u.size()));
  EXPECT_LT(std::abs(mean), 1e-3 * rms);
}

TEST(AnalyticSphere, AxialSymmetryOfRadialDipole) {
  const auto model = LayeredSphere::four_layer();
  const Dipole d{{0, 0, 50}, {0, 0, 1}};
  std::vector<Vec3> pts;
  for (double theta : {0.3, 1.1, 2.5})
    for (int k = 0; k < 8; ++k) {
      const double phi = 2 * M_PI * k / 8.0;
      pts.push_back({92 * std::sin(theta) * std::cos(phi), 92 * std::sin(theta) * std::sin(phi), 92 * std::cos(theta)});
    }
  const auto u = surface_potential(model, d, pts);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t k = 1; k < 8; ++k)
      EXPECT_NEAR(u[t * 8 + k], u[t * 8], 1e-10 * std::abs(u[t * 8]));
}

TEST(AnalyticSphere, LinearityAndConductivityScaling) {
  auto model = LayeredSphere::four_layer();
  const auto pts = fibonacci_sphere(200, 92.0);
  const Vec3 x{5, -30, 40};
  const auto a = surface_potential(model, {x, {1, 0, 0}}, pts);
  const auto b = surface_potential(model, {x, {0, 1, 1}}, pts);
  const auto c = surface_potential(model, {x, {2, -3, -3}}, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(c[i], 2 * a[i] - 3 * b[i], 1e-12 * std::abs(c[i]) + 1e-18);
  for (auto& s : model.sigmas) s *= 5.0;
  const auto d = surface_potential(model, {x, {1, 0, 0}}, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(d[i], a[i] / 5.0, 1e-12 * std::abs(a[i]));
}

TEST(AnalyticSphere, CentredDipoleIsPureDipoleField) {
  // only n = 1 survives at the centre: u is proportional to cos(angle to m)
  const auto model = LayeredSphere::four_layer();
  const auto pts = fibonacci_sphere(100, 92.0);
  const Vec3 m{0.0, 0.6, 0.8};
  const auto u = surface_potential(model, {{0, 0, 0}, m}, pts);
  const double k = u[0] / dot(m, (1.0 / 92.0) * pts[0]);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(u[i], k * dot(m, (1.0 / 92.0) * pts[i]), 1e-12 * std::abs(k));
}

TEST(AnalyticSphere, TruncationErrorDecreases) {
  const auto model = LayeredSphere::four_layer();
  const auto pts = fibonacci_sphere(50, 92.0);
  const Dipole d{{0, 0, 77.5}, {0, 0, 1}};
  SeriesConfig exact;
  exact.max_terms = 600;
  exact.tail_tol = 0.0;
  const auto ref = surface_potential(model, d, pts, exact);
  double prev = 1e300;
  for (int n : {10, 20, 40, 80, 160}) {
    SeriesConfig c;
    c.max_terms = n;
    c.tail_tol = 0.0;
    const double e = max_rel(surface_potential(model, d, pts, c), ref);
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(AnalyticSphere, ValidatesInput) {
  const auto model = LayeredSphere::four_layer();
  const auto pts = fibonacci_sphere(10, 92.0);
  EXPECT_THROW(surface_potential(model, {{0, 0, 79}, {0, 0, 1}}, pts), ValidationError);
  EXPECT_THROW(surface_potential(model, {{0, 0, 10}, {0, 0, 1}}, fibonacci_sphere(10, 100.0)), ValidationError);
  EXPECT_THROW(surface_potential(model, {{0, 0, 10}, {0, 0, 1}}, fibonacci_sphere(10, 50.0)), ValidationError);
  EXPECT_THROW(layer_coefficients(model, 0), ValidationError);
  LayeredSphere bad{{80, 78}, {1, 1}, {0, 0, 0}};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(AnalyticSphere, FibonacciPointsLieOnTheSphere) {
  const Vec3 c{1, 2, 3};
  const auto pts = fibonacci_sphere(500, 92.0, c);
  ASSERT_EQ(pts.size(), 500u);
  Vec3 centroid{0, 0, 0};
  for (const auto& p : pts) {
    EXPECT_NEAR(norm(p - c), 92.0, 1e-12);
    centroid = centroid + (1.0 / 500.0) * (p - c);
  }
  EXPECT_LT(norm(centroid), 0.5);
}
