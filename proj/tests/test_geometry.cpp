#include <doctest.h>

#include "helpers.hpp"
#include "npspec/geometry.hpp"

using namespace npspec;
using namespace npspec::testing;

TEST_CASE("unit sphere is umbilic with A = g and nu = x") {
  auto sphere = make_sphere(1.0);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uth(0.2, M_PI - 0.2), uph(0.0, 2 * M_PI);
  for (int k = 0; k < 20; ++k) {
    Vec2 u(uth(rng), uph(rng));
    PointGeometry G = local_geometry(*sphere, u);
    CHECK(G.kappa1 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(G.kappa2 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(G.H_mean == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((G.A - G.g).norm() < 1e-10);
    CHECK((G.nu - G.x).norm() < 1e-12);
    CHECK(std::abs(G.nu.norm() - 1.0) < 1e-12);
    CHECK((G.g * G.g_inv - Mat2::Identity()).norm() < 1e-10);
    // tr_g(A) = 2 H
    CHECK((G.g_inv * G.A).trace() == doctest::Approx(2.0 * G.H_mean).epsilon(1e-10));
  }
}

TEST_CASE("spheroid pole and equator curvatures match the finite-difference oracle") {
  auto spheroid = make_spheroid(1.0, 2.0);

  // pole: limit formulas, oracle from FD just inside the chart
  PointGeometry pole = local_geometry(*spheroid, Vec2(0.0, 0.3));
  CHECK(pole.pole);
  CHECK(pole.kappa1 == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(pole.kappa2 == doctest::Approx(2.0).epsilon(1e-10));
  FdCurvature near_pole = fd_curvature(*spheroid, Vec2(1e-3, 0.3));
  CHECK(std::abs(near_pole.kappa1 - 2.0) < 1e-4);
  CHECK(std::abs(near_pole.kappa2 - 2.0) < 1e-4);

  PointGeometry eq = local_geometry(*spheroid, Vec2(M_PI / 2, 1.0));
  FdCurvature eq_fd = fd_curvature(*spheroid, Vec2(M_PI / 2, 1.0));
  CHECK(eq.kappa1 == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(eq.kappa2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(eq_fd.kappa1 == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(eq_fd.kappa2 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("analytic and finite-difference second fundamental forms agree at O(h^2)") {
  auto chart = make_spheroid(1.0, 2.0);
  const Vec2 u(1.1, 0.7);
  PointGeometry G = local_geometry(*chart, u);
  const double e1 = (fd_curvature(*chart, u, 1e-3).A - G.A).norm();
  const double e2 = (fd_curvature(*chart, u, 5e-4).A - G.A).norm();
  CHECK(e1 < 1e-5);
  CHECK(e2 < 0.3 * e1);  // second order in the step
}

TEST_CASE("mesh weights recover areas") {
  SUBCASE("unit sphere") {
    auto mesh = build_quadrature_mesh(make_sphere(1.0), 32, 64);
    CHECK(std::abs(mesh.total_area - 4 * M_PI) < 1e-6);
  }
  SUBCASE("prolate spheroid closed form") {
    const double a = 1.0, c = 2.0;
    const double e = std::sqrt(1.0 - a * a / (c * c));
    const double area = 2 * M_PI * a * a * (1.0 + c * std::asin(e) / (a * e));
    auto mesh = build_quadrature_mesh(make_spheroid(a, c), 32, 64);
    CHECK(std::abs(mesh.total_area - area) < 1e-5);
  }
  SUBCASE("torus") {
    auto mesh = build_quadrature_mesh(make_torus(2.0, 0.5), 32, 64);
    CHECK(std::abs(mesh.total_area - 4 * M_PI * M_PI * 2.0 * 0.5) < 1e-10);
  }
  SUBCASE("resolution guard") {
    CHECK_THROWS_AS((void)build_quadrature_mesh(make_sphere(1.0), 2, 2), Error);
  }
  SUBCASE("parallel equals serial") {
    auto a1 = build_quadrature_mesh(make_spheroid(1.0, 2.0), 16, 16, Execution::Parallel);
    auto a2 = build_quadrature_mesh(make_spheroid(1.0, 2.0), 16, 16, Execution::Serial);
    REQUIRE(a1.size() == a2.size());
    for (int i = 0; i < a1.size(); ++i) {
      CHECK(a1.nodes[size_t(i)].w == a2.nodes[size_t(i)].w);
      CHECK(a1.nodes[size_t(i)].geo.x == a2.nodes[size_t(i)].geo.x);
    }
  }
}

TEST_CASE("umbilic consistency on spheres of several radii") {
  for (double R : {0.5, 1.0, 3.0}) {
    auto mesh = build_quadrature_mesh(make_sphere(R), 12, 12);
    for (const auto& nd : mesh.nodes) {
      CHECK(std::abs(nd.geo.kappa1 - 1.0 / R) < 1e-8);
      CHECK(std::abs(nd.geo.kappa2 - 1.0 / R) < 1e-8);
    }
  }
}

TEST_CASE("orientation: divergence-theorem volume is positive") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 8; ++k) {
    auto chart = random_chart(rng);
    auto mesh = build_quadrature_mesh(chart, 12, 16);
    CHECK(signed_volume(mesh) > 0.0);
  }
  auto sphere_mesh = build_quadrature_mesh(make_sphere(1.0), 32, 64);
  CHECK(signed_volume(sphere_mesh) == doctest::Approx(4.0 * M_PI / 3.0).epsilon(1e-7));
}

TEST_CASE("assumption A") {
  SUBCASE("unit sphere holds with margin 1") {
    auto mesh = build_quadrature_mesh(make_sphere(1.0), 12, 12);
    auto rep = check_assumption_A(*mesh.chart, mesh);
    CHECK(rep.holds);
    CHECK(rep.margin == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("torus fails on the inner ring") {
    auto mesh = build_quadrature_mesh(make_torus(2.0, 0.5), 24, 24);
    auto rep = check_assumption_A(*mesh.chart, mesh);
    CHECK_FALSE(rep.holds);
    CHECK_FALSE(rep.violating_nodes.empty());
    for (int idx : rep.violating_nodes) {
      const auto& G = mesh.nodes[size_t(idx)].geo;
      CHECK(G.kappa1 * G.kappa2 <= 1e-12);  // mixed-sign region
    }
  }
  SUBCASE("spheroid holds everywhere") {
    auto mesh = build_quadrature_mesh(make_spheroid(1.0, 2.0), 24, 24);
    auto rep = check_assumption_A(*mesh.chart, mesh);
    CHECK(rep.holds);
    CHECK(rep.margin > 0.0);
  }
  SUBCASE("agrees with the same-sign curvature test on 100 random charts") {
    std::mt19937_64 rng(20240811);
    for (int k = 0; k < 100; ++k) {
      auto chart = random_chart(rng);
      auto mesh = build_quadrature_mesh(chart, 10, 12);
      auto rep = check_assumption_A(*chart, mesh);
      bool same_sign = true;
      for (const auto& nd : mesh.nodes)
        same_sign = same_sign && (nd.geo.kappa1 * nd.geo.kappa2 > 0.0);
      CHECK(rep.holds == same_sign);
    }
  }
}

TEST_CASE("degenerate chart is rejected") {
  GenericSurfaceDef def;
  def.label = "pinched";
  def.position = [](const Vec2& u) { return Vec3(u[0] + u[1], u[0] + u[1], 0.0); };  // rank 1
  def.u1_range[1] = 1.0;
  def.u2_range[1] = 2 * M_PI;
  auto chart = make_generic(std::move(def));
  CHECK_THROWS_AS((void)local_geometry(*chart, Vec2(0.5, 1.0)), Error);
}

TEST_CASE("surface of revolution from profile samples approximates the sphere") {
  std::vector<Vec2> prof;
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    double t = M_PI * i / n;
    prof.emplace_back(std::sin(t), std::cos(t));
  }
  auto chart = make_surface_of_revolution(prof);
  auto mesh = build_quadrature_mesh(chart, 16, 16);
  CHECK(std::abs(mesh.total_area - 4 * M_PI) < 2e-3);
  PointGeometry G = local_geometry(*chart, Vec2(chart->u1_max() / 2, 0.5));
  CHECK(std::abs(G.kappa1 - 1.0) < 5e-3);
  CHECK(std::abs(G.kappa2 - 1.0) < 5e-3);
}
