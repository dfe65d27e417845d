#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "npspec/geometry.hpp"

namespace npspec::testing {

// Curvature data straight from centered differences of the chart position;
// shares nothing with local_geometry's derivative path.
struct FdCurvature {
  double kappa1, kappa2, H;
  Mat2 A, g;
};

inline FdCurvature fd_curvature(const SurfaceChart& chart, const Vec2& u, double h = 1e-5) {
  auto pos = [&](double a, double b) { return chart.jet(Vec2(a, b)).x; };
  const Vec3 x = pos(u[0], u[1]);
  const Vec3 x1 = (pos(u[0] + h, u[1]) - pos(u[0] - h, u[1])) / (2 * h);
  const Vec3 x2 = (pos(u[0], u[1] + h) - pos(u[0], u[1] - h)) / (2 * h);
  const Vec3 x11 = (pos(u[0] + h, u[1]) - 2 * x + pos(u[0] - h, u[1])) / (h * h);
  const Vec3 x22 = (pos(u[0], u[1] + h) - 2 * x + pos(u[0], u[1] - h)) / (h * h);
  const Vec3 x12 = (pos(u[0] + h, u[1] + h) - pos(u[0] + h, u[1] - h) - pos(u[0] - h, u[1] + h) +
                    pos(u[0] - h, u[1] - h)) /
                   (4 * h * h);
  FdCurvature out;
  const Vec3 nu = x1.cross(x2).normalized();
  out.g << x1.dot(x1), x1.dot(x2), x1.dot(x2), x2.dot(x2);
  out.A << -nu.dot(x11), -nu.dot(x12), -nu.dot(x12), -nu.dot(x22);
  Mat2 B = out.g.inverse() * out.A;
  out.H = 0.5 * B.trace();
  const double disc = std::sqrt(std::max(0.0, B.trace() * B.trace() - 4 * B.determinant()));
  out.kappa1 = 0.5 * (B.trace() - disc);
  out.kappa2 = 0.5 * (B.trace() + disc);
  return out;
}

// Fully normalized real spherical harmonics on the unit sphere,
// int |Y|^2 dsigma = 1; theta = colatitude.
inline double assoc_legendre(int n, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= -fact * somx2;
      fact += 2.0;
    }
  }
  if (n == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (n == m + 1) return pmmp1;
  double pnn = 0.0;
  for (int nn = m + 2; nn <= n; ++nn) {
    pnn = (x * (2.0 * nn - 1.0) * pmmp1 - (nn + m - 1.0) * pmm) / (nn - m);
    pmm = pmmp1;
    pmmp1 = pnn;
  }
  return pnn;
}

inline double real_sph_harm(int n, int m, double theta, double phi) {
  const int am = std::abs(m);
  double norm = std::sqrt((2.0 * n + 1.0) / (4.0 * M_PI));
  for (int k = n - am + 1; k <= n + am; ++k) norm /= std::sqrt(double(k));
  const double p = assoc_legendre(n, am, std::cos(theta));
  if (m == 0) return norm * p;
  const double f = std::sqrt(2.0) * norm * p;
  return m > 0 ? f * std::cos(am * phi) : f * std::sin(am * phi);
}

inline Eigen::VectorXd harmonic_on_mesh(const QuadratureMesh& mesh, int n, int m) {
  Eigen::VectorXd v(mesh.size());
  for (int i = 0; i < mesh.size(); ++i) {
    const Vec2& u = mesh.nodes[size_t(i)].u;
    v[i] = real_sph_harm(n, m, u[0], u[1]);
  }
  return v;
}

inline double dot_w(const QuadratureMesh& mesh, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (int i = 0; i < mesh.size(); ++i) s += a[i] * b[i] * mesh.nodes[size_t(i)].w;
  return s;
}

// Random chart from the supported families, convex or not.
inline std::shared_ptr<SurfaceChart> random_chart(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int pick = int(uni(rng) * 4);
  switch (pick) {
    case 0: return make_sphere(0.5 + 1.5 * uni(rng));
    case 1: return make_spheroid(0.5 + uni(rng), 0.5 + 1.5 * uni(rng));
    case 2: return make_torus(1.5 + 1.5 * uni(rng), 0.3 + 0.4 * uni(rng));
    default: return make_random_convex_perturbation(rng(), 0.02 + 0.06 * uni(rng));
  }
}

}  // namespace npspec::testing
