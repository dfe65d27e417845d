#include <doctest.h>

#include "helpers.hpp"
#include "npspec/layer_potentials.hpp"

using namespace npspec;
using namespace npspec::testing;

namespace {
std::shared_ptr<QuadratureMesh> sphere_mesh(int n1, int n2) {
  return std::make_shared<QuadratureMesh>(build_quadrature_mesh(make_sphere(1.0), n1, n2));
}
}  // namespace

TEST_CASE("single layer on the unit sphere: shell potential and harmonic eigenvalues") {
  auto mesh = sphere_mesh(24, 48);
  OperatorMatrix S = assemble_single_layer(mesh);

  SUBCASE("S[1] = -1 at every node") {
    Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh->size());
    Eigen::VectorXd s1 = S.m * one;
    CHECK((s1.array() + 1.0).abs().maxCoeff() < 2e-3);
  }
  SUBCASE("S[Y_n] = -Y_n/(2n+1) for n <= 5") {
    for (int n = 0; n <= 5; ++n) {
      for (int m : {0, std::min(n, 1), -std::min(n, 1)}) {
        Eigen::VectorXd y = harmonic_on_mesh(*mesh, n, m);
        Eigen::VectorXd sy = S.m * y;
        const double expect = -1.0 / (2.0 * n + 1.0);
        // compare in the weighted norm against the exact multiple
        Eigen::VectorXd diff = sy - expect * y;
        CHECK(std::sqrt(dot_w(*mesh, diff, diff)) < 2e-3);
      }
    }
  }
  SUBCASE("matrix is symmetric in weighted coordinates") {
    Eigen::VectorXd w(mesh->size());
    for (int i = 0; i < mesh->size(); ++i) w[i] = mesh->nodes[size_t(i)].w;
    Eigen::MatrixXd Shat = w.cwiseSqrt().asDiagonal() * S.m * w.cwiseSqrt().cwiseInverse().asDiagonal();
    CHECK((Shat - Shat.transpose()).norm() / Shat.norm() < 1e-10);
  }
  SUBCASE("all entries finite") { CHECK(S.m.allFinite()); }
}

TEST_CASE("single layer self-convergence on a smooth density is at least second order") {
  auto spheroid = make_spheroid(1.0, 2.0);
  auto coarse = std::make_shared<QuadratureMesh>(build_quadrature_mesh(spheroid, 12, 24));
  auto mid = std::make_shared<QuadratureMesh>(build_quadrature_mesh(spheroid, 24, 48));
  auto fine = std::make_shared<QuadratureMesh>(build_quadrature_mesh(spheroid, 48, 96));

  // evaluate S[phi] at a fixed set of off-node parameter targets using rows on
  // each mesh via interpolation-free comparison at shared physical points:
  // use the same smooth density expression sampled on each mesh.
  auto density = [](const Vec2& u) { return std::cos(u[0]) + 0.3 * std::sin(2 * u[1]) * std::sin(u[0]); };
  auto apply_at_first_node = [&](const QuadratureMesh& mesh) {
    Eigen::VectorXd phi(mesh.size());
    for (int i = 0; i < mesh.size(); ++i) phi[i] = density(mesh.nodes[size_t(i)].u);
    // common physical target: evaluate the corrected row at the node nearest
    // to a fixed parameter point
    Vec2 target(1.234, 2.345);
    int best = 0;
    double bd = 1e9;
    for (int i = 0; i < mesh.size(); ++i) {
      double d = (mesh.nodes[size_t(i)].u - target).norm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    // re-center: use row assembly at exactly that node
    Eigen::MatrixXd row = assemble_rows(mesh, OperatorKind::SingleLayer, {best});
    return std::pair<double, Vec2>((row * phi)(0), mesh.nodes[size_t(best)].u);
  };
  // Evaluate all three on the *fine* mesh's chosen physical point by using
  // direct off-surface-free comparison: instead compare S[phi] in the weighted
  // L2 norm through mesh transfer: simpler and standard is Richardson on a
  // functional: F = <S phi, phi>_w which converges at the same order.
  auto functional = [&](const QuadratureMesh& mesh) {
    Eigen::VectorXd phi(mesh.size());
    for (int i = 0; i < mesh.size(); ++i) phi[i] = density(mesh.nodes[size_t(i)].u);
    OperatorMatrix S = assemble_single_layer(
        std::make_shared<QuadratureMesh>(mesh));
    return dot_w(mesh, S.m * phi, phi);
  };
  const double f1 = functional(*coarse), f2 = functional(*mid), f3 = functional(*fine);
  const double e1 = std::abs(f1 - f3), e2 = std::abs(f2 - f3);
  const double order = std::log2(e1 / e2);
  CHECK(order >= 2.0);
  (void)apply_at_first_node;
}

TEST_CASE("NP operator on the unit sphere") {
  auto mesh = sphere_mesh(24, 48);
  OperatorMatrix K = assemble_np(mesh);

  SUBCASE("K*[Y_n] = Y_n/(2(2n+1))") {
    for (int n = 0; n <= 4; ++n) {
      Eigen::VectorXd y = harmonic_on_mesh(*mesh, n, std::min(n, 1));
      Eigen::VectorXd ky = K.m * y;
      Eigen::VectorXd diff = ky - y / (2.0 * (2 * n + 1.0));
      CHECK(std::sqrt(dot_w(*mesh, diff, diff)) < 5e-4);
    }
  }
  SUBCASE("Gauss identity: adjoint applied to 1 returns 1/2") {
    Eigen::VectorXd w(mesh->size());
    for (int i = 0; i < mesh->size(); ++i) w[i] = mesh->nodes[size_t(i)].w;
    Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh->size());
    // discrete adjoint of K*
    Eigen::VectorXd k1 = w.cwiseInverse().asDiagonal() * (K.m.transpose() * (w.asDiagonal() * one));
    CHECK((k1.array() - 0.5).abs().maxCoeff() < 2e-3);
    // direct assembly of K agrees with the weighted transpose on densities
    OperatorMatrix Kadj = assemble_np_adjoint(mesh);
    Eigen::VectorXd y = harmonic_on_mesh(*mesh, 2, 1);
    Eigen::VectorXd via_transpose = w.cwiseInverse().asDiagonal() * (K.m.transpose() * (w.asDiagonal() * y));
    Eigen::VectorXd direct = Kadj.m * y;
    Eigen::VectorXd diff = via_transpose - direct;
    CHECK(std::sqrt(dot_w(*mesh, diff, diff)) < 2e-3);
    Eigen::VectorXd kadj1 = Kadj.m * one;
    CHECK((kadj1.array() - 0.5).abs().maxCoeff() < 2e-3);
  }
}

TEST_CASE("parallel and serial assembly agree bitwise") {
  auto mesh = std::make_shared<QuadratureMesh>(build_quadrature_mesh(make_spheroid(1.0, 2.0), 10, 14));
  AssemblyOptions par, ser;
  ser.exec = Execution::Serial;
  OperatorMatrix Ap = assemble_np(mesh, par), As = assemble_np(mesh, ser);
  CHECK((Ap.m - As.m).norm() == 0.0);
  OperatorMatrix Sp = assemble_single_layer(mesh, par), Ss = assemble_single_layer(mesh, ser);
  CHECK((Sp.m - Ss.m).norm() == 0.0);
}

TEST_CASE("density transfer to a refined mesh is exact for bandlimited modes") {
  auto coarse = sphere_mesh(16, 32);
  auto fine = sphere_mesh(32, 64);
  Eigen::VectorXd y = harmonic_on_mesh(*coarse, 4, 2);
  Eigen::VectorXd yt = interpolate_density(*coarse, *fine, y);
  Eigen::VectorXd yf = harmonic_on_mesh(*fine, 4, 2);
  CHECK((yt - yf).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("jump relation") {
  auto mesh = sphere_mesh(32, 64);
  const double h_off = 0.15;

  SUBCASE("uniform density: interior derivative vanishes") {
    Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh->size());
    JumpResidual r = verify_jump_relation(*mesh, one, h_off, 24);
    CHECK(r.interior < 5e-3);
  }
  SUBCASE("degree-2 harmonic") {
    Eigen::VectorXd y = harmonic_on_mesh(*mesh, 2, 1);
    JumpResidual r = verify_jump_relation(*mesh, y, h_off, 24);
    CHECK(r.interior < 1e-2);
    CHECK(r.exterior < 1e-2);
  }
  SUBCASE("offset guard") {
    Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh->size());
    CHECK_THROWS_AS((void)verify_jump_relation(*mesh, one, 0.01 * mesh->max_spacing()), Error);
  }
}

TEST_CASE("jump of the normal derivative equals the density on the spheroid") {
  auto mesh = std::make_shared<QuadratureMesh>(build_quadrature_mesh(make_spheroid(1.0, 2.0), 32, 64));
  // random bandlimited density: low-order mix in chart coordinates
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double a0 = uni(rng), a1 = uni(rng), a2 = uni(rng);
  Eigen::VectorXd phi(mesh->size());
  for (int i = 0; i < mesh->size(); ++i) {
    const Vec2& u = mesh->nodes[size_t(i)].u;
    phi[i] = a0 + a1 * std::cos(u[0]) + a2 * std::sin(u[0]) * std::cos(u[1]);
  }
  JumpResidual r = verify_jump_relation(*mesh, phi, 0.16, 16);
  CHECK(r.jump < 1e-2);
}

TEST_CASE("Kelley symmetrization") {
  auto mesh = sphere_mesh(32, 64);
  OperatorMatrix S = assemble_single_layer(mesh);
  OperatorMatrix K = assemble_np(mesh);
  OperatorMatrix sym = symmetrize_np(S, K);
  CHECK(sym.kelley_residual < 1e-3);
  CHECK(sym.sym_defect >= 0.0);

  SUBCASE("meshes must match") {
    auto mesh2 = sphere_mesh(16, 32);
    OperatorMatrix S2 = assemble_single_layer(mesh2);
    CHECK_THROWS_AS((void)symmetrize_np(S2, K), Error);
  }
}

TEST_CASE("Kelley residual drops under refinement with order >= 1") {
  auto m1 = sphere_mesh(16, 32);
  auto m2 = sphere_mesh(32, 64);
  OperatorMatrix s1 = assemble_single_layer(m1), k1 = assemble_np(m1);
  OperatorMatrix s2 = assemble_single_layer(m2), k2 = assemble_np(m2);
  const double r1 = symmetrize_np(s1, k1).kelley_residual;
  const double r2 = symmetrize_np(s2, k2).kelley_residual;
  CHECK(r2 < 0.5 * r1);
}

TEST_CASE("axisymmetric Fourier blocks") {
  auto mesh = sphere_mesh(24, 48);
  auto blocks = assemble_axisym_blocks(mesh, 8);
  REQUIRE(blocks.size() == 17);

  SUBCASE("m = 0 block contains 1/2") {
    const AxisymBlock* b0 = nullptr;
    for (const auto& b : blocks)
      if (b.m == 0) b0 = &b;
    REQUIRE(b0);
    Eigen::EigenSolver<Eigen::MatrixXd> es(b0->kstar);
    double best = 1e9;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      best = std::min(best, std::abs(es.eigenvalues()[i].real() - 0.5));
    CHECK(best < 1e-3);
  }
  SUBCASE("eigenvalue 1/6 appears once in each of m = -1, 0, 1") {
    for (int want : {-1, 0, 1}) {
      const AxisymBlock* blk = nullptr;
      for (const auto& b : blocks)
        if (b.m == want) blk = &b;
      REQUIRE(blk);
      Eigen::EigenSolver<Eigen::MatrixXd> es(blk->kstar);
      int hits = 0;
      for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()[i].real() - 1.0 / 6.0) < 1e-3 &&
            std::abs(es.eigenvalues()[i].imag()) < 1e-8)
          ++hits;
      CHECK(hits == 1);
    }
  }
  SUBCASE("non-axisymmetric chart is rejected") {
    auto chart = make_random_convex_perturbation(3, 0.05);
    auto gm = std::make_shared<QuadratureMesh>(build_quadrature_mesh(chart, 12, 16));
    CHECK_THROWS_AS((void)assemble_axisym_blocks(gm, 4), Error);
  }
}
