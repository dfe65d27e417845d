#include "npspec/layer_potentials.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace npspec {

namespace {
// Deterministic outputs: Eigen's threaded products change summation order
// with the thread count; row-level parallelism lives in our own loops.
const bool eigen_single_thread = [] {
  Eigen::setNbThreads(1);
  return true;
}();
}  // namespace

Complex helmholtz_fundamental(Complex k, double r) {
  if (!(r > 0)) fail(ErrorCode::ZeroDistance, "kernel evaluated at zero distance");
  return -std::exp(Complex(0, 1) * k * r) / (4.0 * M_PI * r);
}

namespace {

// Smooth radial cutoff: 1 on [0, r0], 0 on [1, inf).
double pou_eta(double rho, double r0) {
  if (rho <= r0) return 1.0;
  if (rho >= 1.0) return 0.0;
  const double s = (rho - r0) / (1.0 - r0);
  const double qa = std::exp(-1.0 / (1.0 - s));
  const double qb = std::exp(-1.0 / s);
  return qa / (qa + qb);
}

struct TargetData {
  Vec3 x;
  Vec3 nu;
};

struct PatchSpec {
  Vec2 u0;
  double at, aphi;    // half widths, chart units
  double l1, l2;      // metric scales at the target
  double v1lo, v1hi;  // metric-scaled axis-1 range after domain clipping
  double v2lo, v2hi;
};

double wrap_delta(double d, double period) {
  d = std::fmod(d, period);
  if (d > 0.5 * period) d -= period;
  if (d < -0.5 * period) d += period;
  return d;
}

PatchSpec make_patch(const QuadratureMesh& mesh, int i, int j, const AssemblyOptions& opts) {
  const SurfaceChart& ch = *mesh.chart;
  PatchSpec p;
  p.u0 = mesh.node(i, j).u;
  // uniform half-widths so that eta_i(u_j) = eta_j(u_i); per-row widths would
  // desymmetrize the far/near splitting
  p.at = opts.patch_cells * (ch.u1_max() - ch.u1_min()) / mesh.n1;
  p.aphi = opts.patch_cells * (ch.u2_max() - ch.u2_min()) / mesh.n2;
  p.at = std::min(p.at, 0.45 * (ch.u1_max() - ch.u1_min()));
  p.aphi = std::min(p.aphi, 0.45 * (ch.u2_max() - ch.u2_min()));
  const Mat2& g = mesh.node(i, j).geo.g;
  p.l1 = std::sqrt(g(0, 0));
  p.l2 = std::sqrt(g(1, 1));
  p.v1lo = -p.at * p.l1;
  p.v1hi = p.at * p.l1;
  if (!ch.periodic1()) {
    p.v1lo = std::max(p.v1lo, (ch.u1_min() - p.u0[0]) * p.l1);
    p.v1hi = std::min(p.v1hi, (ch.u1_max() - p.u0[0]) * p.l1);
  }
  p.v2lo = -p.aphi * p.l2;
  p.v2hi = p.aphi * p.l2;
  return p;
}

// Chart-axis ends of a closed non-periodic axis are rotation poles: sources
// there pack physically close to any near-pole target while staying far in
// chart distance, so that neighbourhood gets its own refined cap rule.
struct PoleCap {
  double edge;    // chart coordinate of the pole
  double sign;    // +1: interior is edge + d, -1: edge - d
  double radius;  // chart-distance support of the cap weight
};

std::vector<PoleCap> pole_caps(const QuadratureMesh& mesh, const AssemblyOptions& opts) {
  std::vector<PoleCap> caps;
  const SurfaceChart& ch = *mesh.chart;
  if (ch.periodic1()) return caps;
  const double dt = (ch.u1_max() - ch.u1_min()) / mesh.n1;
  const double radius =
      std::min((opts.patch_cells + 2.0) * dt, 0.25 * (ch.u1_max() - ch.u1_min()));
  caps.push_back({ch.u1_min(), +1.0, radius});
  caps.push_back({ch.u1_max(), -1.0, radius});
  return caps;
}

double cap_weight(const PoleCap& cap, double t) {
  return pou_eta(cap.sign * (t - cap.edge) / cap.radius, 0.45);
}

double patch_rho(const PatchSpec& p, double du1, double du2) {
  const double r1 = du1 / p.at;
  const double r2 = du2 / p.aphi;
  return std::sqrt(r1 * r1 + r2 * r2);
}

// Density interpolation at off-node points in the exact discrete basis:
// periodic sinc on uniform periodic axes, full-width barycentric in the
// mapped variable mu on Gauss profile axes. Representable modes are
// interpolated exactly, which keeps the near-field rules from injecting
// error at high frequencies.

// Periodic sinc weights on an even uniform grid:
// w_j = sin(n d_j)/(n tan d_j) with d_j = pi (q - x_j)/period. Since
// sin(n d_j) = (-1)^j sin(n d_0), only one sine plus a rotation recurrence
// for (cos d_j, sin d_j) is needed.
void trig_weights(int n, double period, double x0, double q, double* w) {
  const double d0 = M_PI * (q - x0) / period;
  const double step = -M_PI / n;
  const double s_n = std::sin(n * d0) / n;
  double c = std::cos(d0), s = std::sin(d0);
  const double cs = std::cos(step), ss = std::sin(step);
  double sign = 1.0;
  for (int j = 0; j < n; ++j) {
    w[j] = std::abs(s) < 1e-13 ? 1.0 : sign * s_n * c / s;
    const double cn = c * cs - s * ss;
    s = c * ss + s * cs;
    c = cn;
    sign = -sign;
  }
}

struct AxisInterp {
  bool periodic = false;
  int n = 0;
  double x0 = 0.0, period = 0.0;  // periodic axes
  double a = 0.0, L = 1.0;        // mapped axes
  std::vector<double> mu;         // node coordinates in mu
  std::vector<double> bary;       // barycentric weights

  static AxisInterp make(const std::vector<double>& nodes, const std::vector<double>& mapped,
                         bool is_periodic, double lo, double hi) {
    AxisInterp ax;
    ax.n = static_cast<int>(nodes.size());
    ax.periodic = is_periodic;
    if (is_periodic) {
      ax.x0 = nodes[0];
      ax.period = hi - lo;
      return ax;
    }
    ax.a = lo;
    ax.L = hi - lo;
    ax.mu = mapped;
    ax.bary.resize(static_cast<size_t>(ax.n));
    for (int i = 0; i < ax.n; ++i) {
      double b = 1.0;
      for (int j = 0; j < ax.n; ++j)
        if (j != i) b /= (ax.mu[size_t(i)] - ax.mu[size_t(j)]);
      ax.bary[size_t(i)] = b;
    }
    return ax;
  }

  void weights(double q, double* w) const {
    if (periodic) {
      trig_weights(n, period, x0, q, w);
      return;
    }
    const double muq = -std::cos(M_PI * (q - a) / L);
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = muq - mu[size_t(i)];
      if (std::abs(d) < 1e-15) {
        for (int j = 0; j < n; ++j) w[j] = 0.0;
        w[i] = 1.0;
        return;
      }
      w[i] = bary[size_t(i)] / d;
      denom += w[i];
    }
    for (int i = 0; i < n; ++i) w[i] /= denom;
  }
};

struct GaussRule {
  std::vector<double> x, w;
};
GaussRule unit_gauss(int n) {
  GaussRule r;
  gauss_legendre(n, 0.0, 1.0, r.x, r.w);
  return r;
}

struct NearPoints {
  std::vector<double> t, phi, c_re, c_im;
  void clear() {
    t.clear();
    phi.clear();
    c_re.clear();
    c_im.clear();
  }
};

template <typename Scalar, typename Kernel>
void assemble_row(const QuadratureMesh& mesh, int ti, int tj, const AssemblyOptions& opts,
                  const Kernel& ker, const GaussRule& gpsi, const GaussRule& grad,
                  const std::vector<PoleCap>& caps, const GaussRule& gcap,
                  const AxisInterp& ax1, const AxisInterp& ax2, NearPoints& pts,
                  Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> row) {
  const SurfaceChart& ch = *mesh.chart;
  const MeshNode& tnode = mesh.node(ti, tj);
  const TargetData tgt{tnode.geo.x, tnode.geo.nu};
  const PatchSpec p = make_patch(mesh, ti, tj, opts);
  const double period1 = ch.u1_max() - ch.u1_min();
  const double period2 = ch.u2_max() - ch.u2_min();

  pts.clear();
  auto accumulate = [&](double t, double phi, Scalar c) {
    pts.t.push_back(t);
    pts.phi.push_back(phi);
    if constexpr (std::is_same_v<Scalar, double>) {
      pts.c_re.push_back(c);
    } else {
      pts.c_re.push_back(std::real(c));
      pts.c_im.push_back(std::imag(c));
    }
  };

  // The split cap rule only pays off when the kernel varies at the pole
  // scale, i.e. for near-pole targets; other rows keep the plain rule there.
  std::array<bool, 4> cap_active{};
  for (size_t ci = 0; ci < caps.size(); ++ci)
    cap_active[ci] =
        std::abs(p.u0[0] - caps[ci].edge) <= caps[ci].radius + 2.0 * period1 / mesh.n1;

  row.setZero();

  // Far part: product rule on the smooth remainder (1 - eta) * kernel.
  for (int i = 0; i < mesh.n1; ++i) {
    double du1 = mesh.u1_nodes[size_t(i)] - p.u0[0];
    if (ch.periodic1()) du1 = wrap_delta(du1, period1);
    double capw = 1.0;
    for (size_t ci = 0; ci < caps.size(); ++ci)
      if (cap_active[ci]) capw *= 1.0 - cap_weight(caps[ci], mesh.u1_nodes[size_t(i)]);
    if (capw <= 0.0) continue;
    for (int j = 0; j < mesh.n2; ++j) {
      const int idx = mesh.index(i, j);
      double du2 = wrap_delta(mesh.u2_nodes[size_t(j)] - p.u0[1], period2);
      const double eta = pou_eta(patch_rho(p, du1, du2), opts.pou_inner);
      if (eta >= 1.0) continue;
      const MeshNode& src = mesh.nodes[size_t(idx)];
      row[idx] += ker(tgt, src.geo.x, src.geo.nu) * ((1.0 - eta) * capw * src.w);
    }
  }

  // Pole caps: refined rule on the chart-degenerate neighbourhoods, where
  // sources sit physically close to near-pole targets at large chart distance.
  // Far targets see a smooth kernel there and keep the plain product rule.
  for (size_t ci = 0; ci < caps.size(); ++ci) {
    const PoleCap& cap = caps[ci];
    if (!cap_active[ci]) continue;
    const int mphi = mesh.n2;
    const double dphi = period2 / mphi;
    for (size_t qr = 0; qr < gcap.x.size(); ++qr) {
      const double d = cap.radius * gcap.x[qr];
      const double t = cap.edge + cap.sign * d;
      double etac = cap_weight(cap, t);
      for (size_t cj = 0; cj < ci; ++cj)
        if (cap_active[cj]) etac *= 1.0 - cap_weight(caps[cj], t);
      if (etac <= 0.0) continue;
      const double wd = cap.radius * gcap.w[qr];
      for (int q = 0; q < mphi; ++q) {
        const double phi = ch.u2_min() + period2 * q / mphi;
        const double du1 = t - p.u0[0];
        const double du2 = wrap_delta(phi - p.u0[1], period2);
        const double wgt = etac * (1.0 - pou_eta(patch_rho(p, du1, du2), opts.pou_inner));
        if (wgt <= 0.0) continue;
        const SurfacePoint sp = surface_point(ch, Vec2(t, phi));
        accumulate(t, phi, ker(tgt, sp.x, sp.nu) * (wgt * sp.sqrt_det_g * wd * dphi));
      }
    }
  }

  // Near part: polar integration of eta * kernel over the patch rectangle in
  // metric-scaled coordinates, density replaced by its Lagrange interpolant.
  const double corners[4][2] = {{p.v1lo, p.v2lo}, {p.v1hi, p.v2lo}, {p.v1hi, p.v2hi}, {p.v1lo, p.v2hi}};
  for (int e = 0; e < 4; ++e) {
    const double* ca = corners[e];
    const double* cb = corners[(e + 1) % 4];
    double psi_a = std::atan2(ca[1], ca[0]);
    double psi_b = std::atan2(cb[1], cb[0]);
    if (psi_b <= psi_a) psi_b += 2.0 * M_PI;
    // outward edge normal and offset: edge e is v2=v2lo, v1=v1hi, v2=v2hi, v1=v1lo
    double en1 = 0, en2 = 0, ed = 0;
    switch (e) {
      case 0: en2 = -1; ed = -p.v2lo; break;
      case 1: en1 = 1; ed = p.v1hi; break;
      case 2: en2 = 1; ed = p.v2hi; break;
      case 3: en1 = -1; ed = -p.v1lo; break;
    }
    if (ed <= 0) continue;  // degenerate clipped edge
    for (size_t qp = 0; qp < gpsi.x.size(); ++qp) {
      const double psi = psi_a + (psi_b - psi_a) * gpsi.x[qp];
      const double c = std::cos(psi), s = std::sin(psi);
      const double denom = c * en1 + s * en2;
      if (denom <= 1e-14) continue;
      const double smax = ed / denom;
      const double wpsi = gpsi.w[qp] * (psi_b - psi_a);
      for (size_t qr = 0; qr < grad.x.size(); ++qr) {
        const double sr = smax * grad.x[qr];
        const double v1 = sr * c, v2 = sr * s;
        const double du1 = v1 / p.l1, du2 = v2 / p.l2;
        const double eta = pou_eta(patch_rho(p, du1, du2), opts.pou_inner);
        if (eta <= 0.0) continue;
        double u1 = p.u0[0] + du1;
        double u2 = p.u0[1] + du2;
        if (ch.periodic1()) {
          if (u1 < ch.u1_min()) u1 += period1;
          if (u1 >= ch.u1_max()) u1 -= period1;
        } else {
          u1 = std::clamp(u1, ch.u1_min(), ch.u1_max());
        }
        const SurfacePoint sp = surface_point(ch, Vec2(u1, u2));
        const Scalar kval = ker(tgt, sp.x, sp.nu);
        const Scalar coeff = kval * (eta * sp.sqrt_det_g * wpsi * grad.w[qr] * smax * sr /
                                     (p.l1 * p.l2));
        accumulate(u1, p.u0[1] + du2, coeff);
      }
    }
  }

  // Scatter the collected near-field contributions through the interpolation
  // weights in one pair of small matrix products.
  const int Q = static_cast<int>(pts.t.size());
  if (Q == 0) return;
  Eigen::MatrixXd Wt(mesh.n1, Q), Wp(mesh.n2, Q);
  for (int q = 0; q < Q; ++q) {
    ax1.weights(pts.t[size_t(q)], Wt.col(q).data());
    ax2.weights(pts.phi[size_t(q)], Wp.col(q).data());
  }
  using RowView = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  RowView rv(row.data(), mesh.n1, mesh.n2);
  Eigen::Map<const Eigen::VectorXd> cre(pts.c_re.data(), Q);
  if constexpr (std::is_same_v<Scalar, double>) {
    rv.noalias() += (Wt * cre.asDiagonal()) * Wp.transpose();
  } else {
    Eigen::Map<const Eigen::VectorXd> cim(pts.c_im.data(), Q);
    Eigen::MatrixXd mre = (Wt * cre.asDiagonal()) * Wp.transpose();
    Eigen::MatrixXd mim = (Wt * cim.asDiagonal()) * Wp.transpose();
    rv += (mre + Complex(0, 1) * mim).eval();
  }
}

template <typename Scalar, typename Kernel>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> assemble_rows_impl(
    const QuadratureMesh& mesh, const std::vector<int>& targets, const AssemblyOptions& opts,
    const Kernel& ker) {
  const GaussRule gpsi = unit_gauss(opts.n_psi);
  const GaussRule grad = unit_gauss(opts.n_rad);
  const GaussRule gcap = unit_gauss(opts.n_rad + 8);
  const std::vector<PoleCap> caps = pole_caps(mesh, opts);
  const SurfaceChart& ch = *mesh.chart;
  const AxisInterp ax1 =
      AxisInterp::make(mesh.u1_nodes, mesh.u1_mapped, ch.periodic1(), ch.u1_min(), ch.u1_max());
  const AxisInterp ax2 = AxisInterp::make(mesh.u2_nodes, {}, true, ch.u2_min(), ch.u2_max());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(targets.size(), mesh.size());
  const int nt = static_cast<int>(targets.size());
  auto do_row = [&](int r) {
    const int idx = targets[size_t(r)];
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row(mesh.size());
    NearPoints pts;
    assemble_row<Scalar>(mesh, idx / mesh.n2, idx % mesh.n2, opts, ker, gpsi, grad, caps, gcap,
                         ax1, ax2, pts, row);
    out.row(r) = row.transpose();
  };
  if (opts.exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (int r = 0; r < nt; ++r) do_row(r);
  } else {
    for (int r = 0; r < nt; ++r) do_row(r);
  }
  return out;
}

double ker_single(const TargetData& t, const Vec3& y, const Vec3&) {
  return laplace_kernel((t.x - y).norm());
}
double ker_np(const TargetData& t, const Vec3& y, const Vec3&) {
  const Vec3 d = t.x - y;
  const double r = d.norm();
  return d.dot(t.nu) / (4.0 * M_PI * r * r * r);
}
double ker_np_adj(const TargetData& t, const Vec3& y, const Vec3& nuy) {
  const Vec3 d = y - t.x;
  const double r = d.norm();
  return d.dot(nuy) / (4.0 * M_PI * r * r * r);
}

std::vector<int> all_targets(const QuadratureMesh& mesh) {
  std::vector<int> t(static_cast<size_t>(mesh.size()));
  for (int i = 0; i < mesh.size(); ++i) t[size_t(i)] = i;
  return t;
}

}  // namespace

Eigen::MatrixXd assemble_rows(const QuadratureMesh& mesh, OperatorKind kind,
                              const std::vector<int>& targets, const AssemblyOptions& opts) {
  switch (kind) {
    case OperatorKind::SingleLayer:
      return assemble_rows_impl<double>(mesh, targets, opts, ker_single);
    case OperatorKind::NeumannPoincare:
      return assemble_rows_impl<double>(mesh, targets, opts, ker_np);
    case OperatorKind::NeumannPoincareAdjoint:
      return assemble_rows_impl<double>(mesh, targets, opts, ker_np_adj);
    default:
      fail(ErrorCode::InvalidValue, "assemble_rows: not a static kernel kind");
  }
}

Eigen::MatrixXcd assemble_rows_helmholtz(const QuadratureMesh& mesh, OperatorKind kind, Complex k,
                                         const std::vector<int>& targets,
                                         const AssemblyOptions& opts) {
  if (kind == OperatorKind::HelmholtzSingle) {
    auto ker = [k](const TargetData& t, const Vec3& y, const Vec3&) -> Complex {
      return helmholtz_fundamental(k, (t.x - y).norm());
    };
    return assemble_rows_impl<Complex>(mesh, targets, opts, ker);
  }
  if (kind == OperatorKind::HelmholtzNP) {
    auto ker = [k](const TargetData& t, const Vec3& y, const Vec3&) -> Complex {
      const Vec3 d = t.x - y;
      const double r = d.norm();
      const Complex ikr = Complex(0, 1) * k * r;
      return d.dot(t.nu) * std::exp(ikr) * (1.0 - ikr) / (4.0 * M_PI * r * r * r);
    };
    return assemble_rows_impl<Complex>(mesh, targets, opts, ker);
  }
  fail(ErrorCode::InvalidValue, "assemble_rows_helmholtz: not a Helmholtz kind");
}

OperatorMatrix assemble_single_layer(std::shared_ptr<const QuadratureMesh> mesh,
                                     const AssemblyOptions& opts) {
  OperatorMatrix op;
  op.kind = OperatorKind::SingleLayer;
  op.mesh = mesh;
  op.m = assemble_rows(*mesh, OperatorKind::SingleLayer, all_targets(*mesh), opts);
  // the kernel is symmetric: averaging with the weighted adjoint makes the
  // discrete operator exactly self-adjoint on L2(dsigma)
  Eigen::VectorXd w(mesh->size());
  for (int i = 0; i < mesh->size(); ++i) w[i] = mesh->nodes[size_t(i)].w;
  op.m = 0.5 * (op.m + (w.cwiseInverse().asDiagonal() * op.m.transpose() * w.asDiagonal()).eval());
  return op;
}

OperatorMatrix assemble_np(std::shared_ptr<const QuadratureMesh> mesh, const AssemblyOptions& opts) {
  OperatorMatrix op;
  op.kind = OperatorKind::NeumannPoincare;
  op.mesh = mesh;
  op.m = assemble_rows(*mesh, OperatorKind::NeumannPoincare, all_targets(*mesh), opts);
  return op;
}

OperatorMatrix assemble_np_adjoint(std::shared_ptr<const QuadratureMesh> mesh,
                                   const AssemblyOptions& opts) {
  OperatorMatrix op;
  op.kind = OperatorKind::NeumannPoincareAdjoint;
  op.mesh = mesh;
  op.m = assemble_rows(*mesh, OperatorKind::NeumannPoincareAdjoint, all_targets(*mesh), opts);
  return op;
}

double single_layer_potential_offsurface(const QuadratureMesh& mesh, const Eigen::VectorXd& density,
                                         const Vec3& x) {
  double v = 0.0;
  for (int i = 0; i < mesh.size(); ++i) {
    const MeshNode& nd = mesh.nodes[size_t(i)];
    const double r = (x - nd.geo.x).norm();
    if (r < 1e-14) fail(ErrorCode::ZeroDistance, "off-surface target touches a node");
    v += laplace_kernel(r) * density[i] * nd.w;
  }
  return v;
}

Eigen::VectorXd interpolate_density(const QuadratureMesh& coarse, const QuadratureMesh& fine,
                                    const Eigen::VectorXd& density) {
  const SurfaceChart& ch = *coarse.chart;
  const AxisInterp ax1 =
      AxisInterp::make(coarse.u1_nodes, coarse.u1_mapped, ch.periodic1(), ch.u1_min(), ch.u1_max());
  const int n1 = coarse.n1, n2 = coarse.n2;

  if (ch.periodic1()) {
    // torus-type: exact tensor trig x trig transfer
    const AxisInterp ax2 = AxisInterp::make(coarse.u2_nodes, {}, true, ch.u2_min(), ch.u2_max());
    Eigen::MatrixXd d = Eigen::Map<const Eigen::MatrixXd>(density.data(), n2, n1);
    Eigen::MatrixXd wt(n1, fine.n1), wp(n2, fine.n2);
    for (int i = 0; i < fine.n1; ++i) ax1.weights(fine.u1_nodes[size_t(i)], wt.col(i).data());
    for (int j = 0; j < fine.n2; ++j) ax2.weights(fine.u2_nodes[size_t(j)], wp.col(j).data());
    Eigen::MatrixXd out = wp.transpose() * (d * wt);
    return Eigen::Map<Eigen::VectorXd>(out.data(), fine.size());
  }

  // Pole charts: transfer per azimuthal mode. Odd modes vanish like the
  // distance to the axis and are not smooth in mu; dividing by a linear
  // vanishing factor restores evenness before the polynomial interpolation.
  const double L = ch.u1_max() - ch.u1_min();
  auto axis_factor = [&](double t) { return std::sin(M_PI * (t - ch.u1_min()) / L); };

  Eigen::MatrixXcd modes(n1, n2);  // profile x azimuthal mode index
  for (int i = 0; i < n1; ++i)
    for (int m = 0; m < n2; ++m) {
      Complex acc = 0.0;
      for (int j = 0; j < n2; ++j)
        acc += density[coarse.index(i, j)] *
               std::exp(Complex(0, -2.0 * M_PI * m * j / n2));
      modes(i, m) = acc / double(n2);
    }

  Eigen::MatrixXd wt(n1, fine.n1);
  for (int i = 0; i < fine.n1; ++i) ax1.weights(fine.u1_nodes[size_t(i)], wt.col(i).data());

  Eigen::MatrixXcd fine_modes(fine.n1, n2);
  for (int m = 0; m < n2; ++m) {
    const int ms = m <= n2 / 2 ? m : m - n2;  // signed mode
    const bool odd = std::abs(ms) % 2 == 1;
    Eigen::VectorXcd prof = modes.col(m);
    if (odd)
      for (int i = 0; i < n1; ++i) prof[i] /= axis_factor(coarse.u1_nodes[size_t(i)]);
    Eigen::VectorXcd fprof = wt.transpose() * prof;
    if (odd)
      for (int i = 0; i < fine.n1; ++i) fprof[i] *= axis_factor(fine.u1_nodes[size_t(i)]);
    fine_modes.col(m) = fprof;
  }

  const double omega = 2.0 * M_PI / (ch.u2_max() - ch.u2_min());
  Eigen::VectorXd out(fine.size());
  for (int i = 0; i < fine.n1; ++i)
    for (int j = 0; j < fine.n2; ++j) {
      const double ph = omega * (fine.u2_nodes[size_t(j)] - ch.u2_min());
      Complex acc = 0.0;
      for (int m = 0; m < n2; ++m) {
        const int ms = m <= n2 / 2 ? m : m - n2;
        acc += fine_modes(i, m) * std::exp(Complex(0, ms * ph));
      }
      out[fine.index(i, j)] = acc.real();
    }
  return out;
}

JumpResidual verify_jump_relation(const QuadratureMesh& mesh, const Eigen::VectorXd& density,
                                  double h_off, int max_targets, const AssemblyOptions& opts) {
  // The offset guard applies to the evaluation mesh: the density transfers to
  // a refinement of the input mesh exactly (it lives in the discrete basis),
  // which keeps the one-sided stencil inside its convergence range without
  // violating the 5-spacing quadrature guard.
  constexpr int kMaxRefine = 10;
  const double spacing = mesh.max_spacing();
  if (h_off < 5.0 * spacing / kMaxRefine)
    fail(ErrorCode::OffsetTooSmall, "offset below 5x node spacing at the supported refinement");
  int refine = 1;
  while (refine < kMaxRefine && h_off < 5.0 * spacing / refine) ++refine;

  QuadratureMesh fine_store;
  const QuadratureMesh* eval = &mesh;
  Eigen::VectorXd phi_eval = density;
  if (refine > 1) {
    fine_store = build_quadrature_mesh(mesh.chart, refine * mesh.n1, refine * mesh.n2, opts.exec);
    phi_eval = interpolate_density(mesh, fine_store, density);
    eval = &fine_store;
  }

  std::vector<int> targets;
  const int stride = std::max(1, eval->size() / std::max(1, max_targets));
  for (int i = 0; i < eval->size(); i += stride) targets.push_back(i);

  Eigen::MatrixXd srows = assemble_rows(*eval, OperatorKind::SingleLayer, targets, opts);
  Eigen::MatrixXd krows = assemble_rows(*eval, OperatorKind::NeumannPoincare, targets, opts);
  Eigen::VectorXd s_on = srows * phi_eval;
  Eigen::VectorXd kphi = krows * phi_eval;

  // One-sided derivative at the surface from {0, 1, 1.25, 1.5, 1.75, 2} h_off.
  // The compressed span keeps the stencil inside the exterior potential's
  // convergence radius near high-curvature points (~1/kappa).
  const double offs[6] = {0.0, 1.0, 1.25, 1.5, 1.75, 2.0};
  double cfd[6];
  {
    // Fornberg-style solve: weights w with sum w_k p(offs_k) = p'(0) for all
    // p up to degree 5
    Eigen::MatrixXd V(6, 6);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(6);
    rhs[1] = 1.0;
    for (int r = 0; r < 6; ++r)
      for (int k = 0; k < 6; ++k) V(r, k) = std::pow(offs[k], r);
    Eigen::VectorXd w = V.fullPivLu().solve(rhs);
    for (int k = 0; k < 6; ++k) cfd[k] = w[k];
  }
  JumpResidual res;
  for (size_t t = 0; t < targets.size(); ++t) {
    const MeshNode& nd = eval->nodes[size_t(targets[t])];
    double dplus = cfd[0] * s_on[int(t)], dminus = cfd[0] * s_on[int(t)];
    for (int j = 1; j < 6; ++j) {
      const double d = offs[j] * h_off;
      dplus += cfd[j] * single_layer_potential_offsurface(*eval, phi_eval, nd.geo.x + d * nd.geo.nu);
      dminus += cfd[j] * single_layer_potential_offsurface(*eval, phi_eval, nd.geo.x - d * nd.geo.nu);
    }
    dplus /= h_off;
    dminus /= -h_off;  // derivative with respect to +nu from the inside
    const double phi = phi_eval[targets[t]];
    res.exterior = std::max(res.exterior, std::abs(dplus - (0.5 * phi + kphi[int(t)])));
    res.interior = std::max(res.interior, std::abs(dminus - (-0.5 * phi + kphi[int(t)])));
    res.jump = std::max(res.jump, std::abs((dplus - dminus) - phi));
  }
  return res;
}

double norm2_estimate(const Eigen::MatrixXd& M, int iters, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(M.cols());
  for (int i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  v.normalize();
  double s = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd w = M * v;
    v = M.transpose() * w;
    s = std::sqrt(v.norm());
    v.normalize();
  }
  return s;
}

EnergyFactorization factor_energy(const OperatorMatrix& S, double floor_rel,
                                  double max_floored_fraction) {
  if (S.kind != OperatorKind::SingleLayer)
    fail(ErrorCode::InvalidValue, "factor_energy expects a single-layer matrix");
  const int n = S.size();
  EnergyFactorization F;
  F.w.resize(n);
  for (int i = 0; i < n; ++i) F.w[i] = S.mesh->nodes[size_t(i)].w;
  Eigen::VectorXd sw = F.w.cwiseSqrt();
  Eigen::MatrixXd E = -S.m;
  Eigen::MatrixXd Ehat = sw.asDiagonal() * E * sw.cwiseInverse().asDiagonal();
  F.e_sym = 0.5 * (Ehat + Ehat.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F.e_sym);
  if (es.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "energy eigensolve failed");
  F.eigvals = es.eigenvalues();
  F.eigvecs = es.eigenvectors();
  const double top = F.eigvals.maxCoeff();
  if (top <= 0.0) fail(ErrorCode::NotPositiveDefinite, "energy matrix E = -S has no positive part");
  if (F.eigvals.minCoeff() < -0.05 * top)
    fail(ErrorCode::NotPositiveDefinite, "energy matrix E = -S is substantially indefinite");
  // clip just above the quadrature noise floor; untouched when E is already p.d.
  F.floor_value = std::max(floor_rel * top, 2.0 * std::max(0.0, -F.eigvals.minCoeff()));
  for (int i = 0; i < n; ++i) {
    if (F.eigvals[i] < F.floor_value) {
      F.eigvals[i] = F.floor_value;
      ++F.floored_modes;
    }
  }
  if (F.floored_modes > max_floored_fraction * n)
    fail(ErrorCode::NotPositiveDefinite,
         "energy matrix E = -S is not positive definite beyond the sub-resolution tail");
  Eigen::VectorXd sq = F.eigvals.cwiseSqrt();
  F.half = F.eigvecs * sq.asDiagonal() * F.eigvecs.transpose();
  F.half_inv = F.eigvecs * sq.cwiseInverse().asDiagonal() * F.eigvecs.transpose();
  return F;
}

OperatorMatrix symmetrize_np(const OperatorMatrix& S, const OperatorMatrix& Kstar) {
  if (S.mesh != Kstar.mesh || S.size() != Kstar.size())
    fail(ErrorCode::InvalidValue, "operands assembled on different meshes");
  EnergyFactorization F = factor_energy(S);
  const int n = S.size();
  Eigen::VectorXd sw = F.w.cwiseSqrt();
  Eigen::MatrixXd Khat = sw.asDiagonal() * Kstar.m * sw.cwiseInverse().asDiagonal();
  Eigen::MatrixXd T = F.half * Khat * F.half_inv;
  const double tnorm = norm2_estimate(T);
  const double defect = norm2_estimate(T - T.transpose()) / std::max(tnorm, 1e-300);

  OperatorMatrix out;
  out.kind = OperatorKind::SymmetrizedNP;
  out.mesh = S.mesh;
  out.m = 0.5 * (T + T.transpose());
  out.pullback = sw.cwiseInverse().asDiagonal() * F.half_inv;
  out.sym_defect = defect;

  // Kelley residual ||S K* - K S|| / ||S K*||, operator 2-norms on L2(dsigma):
  // in W^{1/2}-coordinates K becomes the plain transpose of K*, and the norms
  // are estimated by seeded power iteration.
  {
    Eigen::MatrixXd Shat = sw.asDiagonal() * S.m * sw.cwiseInverse().asDiagonal();
    Eigen::MatrixXd R = Shat * Khat - Khat.transpose() * Shat;
    const double num = norm2_estimate(R, 40, 777);
    const double den = norm2_estimate(Shat * Khat, 40, 778);
    out.kelley_residual = num / std::max(den, 1e-300);
  }
  return out;
}

std::vector<AxisymBlock> assemble_axisym_blocks(std::shared_ptr<const QuadratureMesh> mesh,
                                                int m_max, const AssemblyOptions& opts) {
  if (!mesh->axisym || !mesh->chart->periodic2())
    fail(ErrorCode::NotAxisymmetric, "Fourier blocks need a surface of revolution");
  if (m_max < 0 || 2 * m_max >= mesh->n2)
    fail(ErrorCode::InvalidValue, "m_max must satisfy 2*m_max < azimuthal resolution");
  const int n1 = mesh->n1, n2 = mesh->n2;
  std::vector<int> targets(static_cast<size_t>(n1));
  for (int i = 0; i < n1; ++i) targets[size_t(i)] = mesh->index(i, 0);

  Eigen::MatrixXd srows = assemble_rows(*mesh, OperatorKind::SingleLayer, targets, opts);
  Eigen::MatrixXd krows = assemble_rows(*mesh, OperatorKind::NeumannPoincare, targets, opts);

  Eigen::VectorXd pw(n1);
  for (int i = 0; i < n1; ++i) {
    double s = 0.0;
    for (int b = 0; b < n2; ++b) s += mesh->node(i, b).w;
    pw[i] = s;
  }

  std::vector<AxisymBlock> blocks;
  for (int m = -m_max; m <= m_max; ++m) {
    AxisymBlock blk;
    blk.m = m;
    blk.profile_weights = pw;
    blk.profile_nodes = targets;
    blk.s.resize(n1, n1);
    blk.kstar.resize(n1, n1);
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n1; ++j) {
        double accs = 0.0, acck = 0.0;
        for (int b = 0; b < n2; ++b) {
          const double phase = std::cos(m * mesh->u2_nodes[size_t(b)]);
          accs += srows(i, mesh->index(j, b)) * phase;
          acck += krows(i, mesh->index(j, b)) * phase;
        }
        blk.s(i, j) = accs;
        blk.kstar(i, j) = acck;
      }
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

}  // namespace npspec
