#include "npspec/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace npspec {

const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::DegenerateChart: return "DegenerateChart";
    case ErrorCode::PoleSingularity: return "PoleSingularity";
    case ErrorCode::ResolutionTooLow: return "ResolutionTooLow";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotAxisymmetric: return "NotAxisymmetric";
    case ErrorCode::OffsetTooSmall: return "OffsetTooSmall";
    case ErrorCode::ZeroCovector: return "ZeroCovector";
    case ErrorCode::FlowBlowup: return "FlowBlowup";
    case ErrorCode::AssumptionAViolated: return "AssumptionAViolated";
    case ErrorCode::EmptyFiber: return "EmptyFiber";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::DegenerateContrast: return "DegenerateContrast";
    case ErrorCode::LambdaHalf: return "LambdaHalf";
    case ErrorCode::ZeroDensity: return "ZeroDensity";
    case ErrorCode::ZeroDistance: return "ZeroDistance";
    case ErrorCode::WavenumberTooLarge: return "WavenumberTooLarge";
    case ErrorCode::SingularS: return "SingularS";
    case ErrorCode::NoResonanceFound: return "NoResonanceFound";
    case ErrorCode::BumpUnresolved: return "BumpUnresolved";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.resize(static_cast<size_t>(n));
  weights.resize(static_cast<size_t>(n));
  const double eps = 1e-15;
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < eps) break;
    }
    double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
    nodes[static_cast<size_t>(i)] = xm - xl * x;
    nodes[static_cast<size_t>(n - 1 - i)] = xm + xl * x;
    double w = 2.0 * xl / ((1.0 - x * x) * pp * pp);
    weights[static_cast<size_t>(i)] = w;
    weights[static_cast<size_t>(n - 1 - i)] = w;
  }
}

ChartJet3 SurfaceChart::jet3(const Vec2& u) const {
  // Central differences of the second-derivative jet.
  const double h = 1e-4 * std::max({u1_max() - u1_min(), u2_max() - u2_min(), 1.0});
  ChartJet jp1 = jet(Vec2(u[0] + h, u[1])), jm1 = jet(Vec2(u[0] - h, u[1]));
  ChartJet jp2 = jet(Vec2(u[0], u[1] + h)), jm2 = jet(Vec2(u[0], u[1] - h));
  ChartJet3 out;
  out.x111 = (jp1.x11 - jm1.x11) / (2 * h);
  out.x112 = (jp2.x11 - jm2.x11) / (2 * h);
  out.x122 = (jp2.x12 - jm2.x12) / (2 * h);
  out.x222 = (jp2.x22 - jm2.x22) / (2 * h);
  return out;
}

// ---- revolution charts ----------------------------------------------------

namespace {

struct ProfileJet {
  double rho, rho_t, rho_tt, rho_ttt;
  double z, z_t, z_tt, z_ttt;
};

class RevolutionChart : public SurfaceChart {
 public:
  virtual ProfileJet profile(double t) const = 0;
  virtual double t_min() const = 0;
  virtual double t_max() const = 0;
  virtual bool profile_periodic() const { return false; }

  double u1_min() const override { return t_min(); }
  double u1_max() const override { return t_max(); }
  double u2_min() const override { return 0.0; }
  double u2_max() const override { return 2.0 * M_PI; }
  bool periodic1() const override { return profile_periodic(); }
  bool periodic2() const override { return true; }
  bool axisymmetric() const override { return true; }
  bool analytic_jet3() const override { return true; }

  bool has_pole_at(double t) const override {
    if (profile_periodic()) return false;
    const double tol = 1e-12 * (t_max() - t_min());
    return std::abs(t - t_min()) < tol || std::abs(t - t_max()) < tol;
  }

  ChartJet jet(const Vec2& u) const override {
    ProfileJet p = profile(u[0]);
    const double c = std::cos(u[1]), s = std::sin(u[1]);
    ChartJet j;
    j.x = Vec3(p.rho * c, p.rho * s, p.z);
    j.x1 = Vec3(p.rho_t * c, p.rho_t * s, p.z_t);
    j.x2 = Vec3(-p.rho * s, p.rho * c, 0.0);
    j.x11 = Vec3(p.rho_tt * c, p.rho_tt * s, p.z_tt);
    j.x12 = Vec3(-p.rho_t * s, p.rho_t * c, 0.0);
    j.x22 = Vec3(-p.rho * c, -p.rho * s, 0.0);
    return j;
  }

  ChartJet3 jet3(const Vec2& u) const override {
    ProfileJet p = profile(u[0]);
    const double c = std::cos(u[1]), s = std::sin(u[1]);
    ChartJet3 j;
    j.x111 = Vec3(p.rho_ttt * c, p.rho_ttt * s, p.z_ttt);
    j.x112 = Vec3(-p.rho_tt * s, p.rho_tt * c, 0.0);
    j.x122 = Vec3(-p.rho_t * c, -p.rho_t * s, 0.0);
    j.x222 = Vec3(p.rho * s, -p.rho * c, 0.0);
    return j;
  }
};

class SpheroidChart : public RevolutionChart {
 public:
  SpheroidChart(double a, double c) : a_(a), c_(c) {
    if (a <= 0 || c <= 0) fail(ErrorCode::InvalidValue, "spheroid semi-axes must be positive");
  }
  ChartKind kind() const override { return a_ == c_ ? ChartKind::Sphere : ChartKind::Spheroid; }
  std::string name() const override {
    return a_ == c_ ? "sphere(R=" + std::to_string(a_) + ")"
                    : "spheroid(a=" + std::to_string(a_) + ",c=" + std::to_string(c_) + ")";
  }
  double t_min() const override { return 0.0; }
  double t_max() const override { return M_PI; }
  ProfileJet profile(double t) const override {
    const double st = std::sin(t), ct = std::cos(t);
    return {a_ * st, a_ * ct, -a_ * st, -a_ * ct, c_ * ct, -c_ * st, -c_ * ct, c_ * st};
  }

 private:
  double a_, c_;
};

class TorusChart : public RevolutionChart {
 public:
  TorusChart(double R, double r) : R_(R), r_(r) {
    if (R <= 0 || r <= 0 || r >= R) fail(ErrorCode::InvalidValue, "torus needs 0 < r_minor < R_major");
  }
  ChartKind kind() const override { return ChartKind::Torus; }
  std::string name() const override {
    return "torus(R=" + std::to_string(R_) + ",r=" + std::to_string(r_) + ")";
  }
  double t_min() const override { return 0.0; }
  double t_max() const override { return 2.0 * M_PI; }
  bool profile_periodic() const override { return true; }
  ProfileJet profile(double t) const override {
    const double st = std::sin(t), ct = std::cos(t);
    // z = -r sin t makes the normal outward.
    return {R_ + r_ * ct, -r_ * st,     -r_ * ct,     r_ * st,
            -r_ * st,     -r_ * ct, r_ * st, r_ * ct};
  }

 private:
  double R_, r_;
};

// Clamped cubic spline through (s_i, f_i).
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> s, std::vector<double> f) : s_(std::move(s)), f_(std::move(f)) {
    const int n = static_cast<int>(s_.size());
    if (n < 4) fail(ErrorCode::InvalidValue, "profile needs at least 4 samples");
    for (int i = 0; i + 1 < n; ++i)
      if (!(s_[size_t(i + 1)] > s_[size_t(i)]))
        fail(ErrorCode::InvalidValue, "profile arc parameter must be strictly increasing");
    // natural spline second derivatives
    std::vector<double> a(size_t(n), 0.0), b(size_t(n), 0.0), cdiag(size_t(n), 0.0), r(size_t(n), 0.0);
    m_.assign(size_t(n), 0.0);
    b[0] = 1.0;
    b[size_t(n - 1)] = 1.0;
    for (int i = 1; i + 1 < n; ++i) {
      double h0 = s_[size_t(i)] - s_[size_t(i - 1)], h1 = s_[size_t(i + 1)] - s_[size_t(i)];
      a[size_t(i)] = h0 / 6.0;
      b[size_t(i)] = (h0 + h1) / 3.0;
      cdiag[size_t(i)] = h1 / 6.0;
      r[size_t(i)] = (f_[size_t(i + 1)] - f_[size_t(i)]) / h1 - (f_[size_t(i)] - f_[size_t(i - 1)]) / h0;
    }
    for (int i = 1; i < n; ++i) {
      double w = a[size_t(i)] / b[size_t(i - 1)];
      b[size_t(i)] -= w * cdiag[size_t(i - 1)];
      r[size_t(i)] -= w * r[size_t(i - 1)];
    }
    m_[size_t(n - 1)] = r[size_t(n - 1)] / b[size_t(n - 1)];
    for (int i = n - 2; i >= 0; --i)
      m_[size_t(i)] = (r[size_t(i)] - cdiag[size_t(i)] * m_[size_t(i + 1)]) / b[size_t(i)];
  }

  void eval(double t, double& f, double& ft, double& ftt, double& fttt) const {
    const int n = static_cast<int>(s_.size());
    int i = int(std::upper_bound(s_.begin(), s_.end(), t) - s_.begin()) - 1;
    i = std::clamp(i, 0, n - 2);
    double h = s_[size_t(i + 1)] - s_[size_t(i)];
    double A = (s_[size_t(i + 1)] - t) / h, B = (t - s_[size_t(i)]) / h;
    f = A * f_[size_t(i)] + B * f_[size_t(i + 1)] +
        ((A * A * A - A) * m_[size_t(i)] + (B * B * B - B) * m_[size_t(i + 1)]) * h * h / 6.0;
    ft = (f_[size_t(i + 1)] - f_[size_t(i)]) / h -
         (3 * A * A - 1) * h * m_[size_t(i)] / 6.0 + (3 * B * B - 1) * h * m_[size_t(i + 1)] / 6.0;
    ftt = A * m_[size_t(i)] + B * m_[size_t(i + 1)];
    fttt = (m_[size_t(i + 1)] - m_[size_t(i)]) / h;
  }

 private:
  std::vector<double> s_, f_;
  std::vector<double> m_;
};

class SplineRevolutionChart : public RevolutionChart {
 public:
  explicit SplineRevolutionChart(const std::vector<Vec2>& samples) {
    if (samples.size() < 4) fail(ErrorCode::InvalidValue, "profile needs at least 4 samples");
    std::vector<double> s(samples.size()), rho(samples.size()), z(samples.size());
    s[0] = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
      rho[i] = samples[i][0];
      z[i] = samples[i][1];
      if (rho[i] < 0) fail(ErrorCode::InvalidValue, "profile rho must be nonnegative");
      if (i > 0) {
        double d = (samples[i] - samples[i - 1]).norm();
        if (d <= 0) fail(ErrorCode::InvalidValue, "profile samples must advance monotonically");
        s[i] = s[i - 1] + d;
      }
    }
    smax_ = s.back();
    rho_ = CubicSpline(s, rho);
    z_ = CubicSpline(s, z);
  }
  ChartKind kind() const override { return ChartKind::SurfaceOfRevolution; }
  std::string name() const override { return "surface_of_revolution"; }
  double t_min() const override { return 0.0; }
  double t_max() const override { return smax_; }
  bool analytic_jet3() const override { return false; }  // spline third derivative is only piecewise
  ProfileJet profile(double t) const override {
    ProfileJet p{};
    rho_.eval(t, p.rho, p.rho_t, p.rho_tt, p.rho_ttt);
    z_.eval(t, p.z, p.z_t, p.z_tt, p.z_ttt);
    return p;
  }

 private:
  CubicSpline rho_, z_;
  double smax_ = 0.0;
};

class GenericChart : public SurfaceChart {
 public:
  explicit GenericChart(GenericSurfaceDef def) : def_(std::move(def)) {}
  ChartKind kind() const override { return ChartKind::GenericParametric; }
  std::string name() const override { return def_.label; }
  double u1_min() const override { return def_.u1_range[0]; }
  double u1_max() const override { return def_.u1_range[1]; }
  double u2_min() const override { return def_.u2_range[0]; }
  double u2_max() const override { return def_.u2_range[1]; }
  bool periodic1() const override { return def_.periodic[0]; }
  bool periodic2() const override { return def_.periodic[1]; }

  ChartJet jet(const Vec2& u) const override {
    const double h = def_.fd_step;
    const auto& F = def_.position;
    ChartJet j;
    j.x = F(u);
    Vec3 fp1 = F(Vec2(u[0] + h, u[1])), fm1 = F(Vec2(u[0] - h, u[1]));
    Vec3 fp2 = F(Vec2(u[0], u[1] + h)), fm2 = F(Vec2(u[0], u[1] - h));
    j.x1 = (fp1 - fm1) / (2 * h);
    j.x2 = (fp2 - fm2) / (2 * h);
    j.x11 = (fp1 - 2 * j.x + fm1) / (h * h);
    j.x22 = (fp2 - 2 * j.x + fm2) / (h * h);
    Vec3 fpp = F(Vec2(u[0] + h, u[1] + h)), fpm = F(Vec2(u[0] + h, u[1] - h));
    Vec3 fmp = F(Vec2(u[0] - h, u[1] + h)), fmm = F(Vec2(u[0] - h, u[1] - h));
    j.x12 = (fpp - fpm - fmp + fmm) / (4 * h * h);
    return j;
  }

 private:
  GenericSurfaceDef def_;
};

}  // namespace

std::shared_ptr<SurfaceChart> make_sphere(double R) { return std::make_shared<SpheroidChart>(R, R); }
std::shared_ptr<SurfaceChart> make_spheroid(double a, double c) {
  return std::make_shared<SpheroidChart>(a, c);
}
std::shared_ptr<SurfaceChart> make_torus(double R_major, double r_minor) {
  return std::make_shared<TorusChart>(R_major, r_minor);
}
std::shared_ptr<SurfaceChart> make_surface_of_revolution(const std::vector<Vec2>& profile) {
  return std::make_shared<SplineRevolutionChart>(profile);
}
std::shared_ptr<SurfaceChart> make_generic(GenericSurfaceDef def) {
  return std::make_shared<GenericChart>(std::move(def));
}

std::shared_ptr<SurfaceChart> make_random_convex_perturbation(uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::array<double, 9> c{};
  for (auto& v : c) v = uni(rng);
  GenericSurfaceDef def;
  def.label = "perturbed_sphere(seed=" + std::to_string(seed) + ")";
  def.u1_range[0] = 0.0;
  def.u1_range[1] = M_PI;
  def.u2_range[0] = 0.0;
  def.u2_range[1] = 2.0 * M_PI;
  def.periodic[0] = false;
  def.periodic[1] = true;
  def.fd_step = 1e-4;
  def.position = [c, amplitude](const Vec2& u) -> Vec3 {
    const double st = std::sin(u[0]), ct = std::cos(u[0]);
    const double cp = std::cos(u[1]), sp = std::sin(u[1]);
    const double x = st * cp, y = st * sp, z = ct;
    const double P = c[0] * x + c[1] * y + c[2] * z + c[3] * x * y + c[4] * y * z + c[5] * x * z +
                     c[6] * (x * x - y * y) + c[7] * (2 * z * z - x * x - y * y) / 2.0 +
                     c[8] * x * y * z;
    const double r = 1.0 + amplitude * P;
    return Vec3(r * x, r * y, r * z);
  };
  return make_generic(std::move(def));
}

// ---- pointwise geometry ---------------------------------------------------

namespace {

PointGeometry pole_geometry(const RevolutionChart& chart, const Vec2& u) {
  ProfileJet p = chart.profile(u[0]);
  if (std::abs(p.rho_t) < 1e-12)
    fail(ErrorCode::PoleSingularity, "profile not C^2 at the rotation axis");
  PointGeometry G;
  G.u = u;
  G.pole = true;
  G.x = Vec3(0, 0, p.z);
  const double sgn = p.rho_t > 0 ? 1.0 : -1.0;
  G.nu = Vec3(0, 0, sgn);
  const double sp = std::hypot(p.rho_t, p.z_t);
  const double kappa = (p.z_t * p.rho_tt - p.rho_t * p.z_tt) / (sp * sp * sp);
  G.kappa1 = G.kappa2 = kappa;
  G.kv1 = G.kv2 = kappa;
  G.H_mean = kappa;
  G.v1 = Vec3(0, 1, 0);
  G.v2 = G.nu.cross(G.v1);
  G.g << p.rho_t * p.rho_t + p.z_t * p.z_t, 0, 0, 0;
  G.g_inv.setZero();
  G.A = kappa * G.g;
  G.sqrt_det_g = 0.0;
  return G;
}

}  // namespace

PointGeometry local_geometry(const SurfaceChart& chart, const Vec2& u, double eps_reg) {
  if (chart.has_pole_at(u[0])) {
    const auto* rev = dynamic_cast<const RevolutionChart*>(&chart);
    if (rev) return pole_geometry(*rev, u);
    fail(ErrorCode::PoleSingularity, "pole on a chart without limit formulas");
  }
  ChartJet j = chart.jet(u);
  Vec3 cross = j.x1.cross(j.x2);
  const double nrm = cross.norm();
  if (nrm < eps_reg) fail(ErrorCode::DegenerateChart, "|X1 x X2| below regularity threshold");

  PointGeometry G;
  G.u = u;
  G.x = j.x;
  G.nu = cross / nrm;
  G.g << j.x1.dot(j.x1), j.x1.dot(j.x2), j.x1.dot(j.x2), j.x2.dot(j.x2);
  const double det = G.g(0, 0) * G.g(1, 1) - G.g(0, 1) * G.g(0, 1);
  G.sqrt_det_g = std::sqrt(std::max(det, 0.0));
  G.g_inv << G.g(1, 1) / det, -G.g(0, 1) / det, -G.g(0, 1) / det, G.g(0, 0) / det;
  // Outward normal with convex => positive curvature.
  G.A << -G.nu.dot(j.x11), -G.nu.dot(j.x12), -G.nu.dot(j.x12), -G.nu.dot(j.x22);
  Mat2 B = G.g_inv * G.A;
  G.H_mean = 0.5 * B.trace();
  // (tr^2 - 4 det) written cancellation-free for umbilic points
  const double disc = (B(0, 0) - B(1, 1)) * (B(0, 0) - B(1, 1)) + 4.0 * B(0, 1) * B(1, 0);
  const double sq = std::sqrt(std::max(disc, 0.0));
  G.kappa1 = 0.5 * (B.trace() - sq);
  G.kappa2 = 0.5 * (B.trace() + sq);

  // Principal directions: eigenvectors of B in chart coordinates.
  auto chart_dir = [&](double kappa) -> Vec2 {
    Mat2 M = B - kappa * Mat2::Identity();
    // pick the row with the larger norm as the orthogonal complement
    Vec2 r0(M(0, 0), M(0, 1)), r1(M(1, 0), M(1, 1));
    Vec2 r = r0.norm() >= r1.norm() ? r0 : r1;
    if (r.norm() < 1e-14) return Vec2(1, 0);  // umbilic
    return Vec2(-r[1], r[0]);
  };
  Vec2 c1 = chart_dir(G.kappa1), c2 = chart_dir(G.kappa2);
  Vec3 d1 = (c1[0] * j.x1 + c1[1] * j.x2).normalized();
  Vec3 d2 = (c2[0] * j.x1 + c2[1] * j.x2).normalized();
  if (sq < 1e-12 * (1.0 + std::abs(B.trace()))) {
    // umbilic: any orthonormal pair
    d1 = j.x1.normalized();
    d2 = (j.x2 - j.x2.dot(d1) * d1).normalized();
  } else {
    d2 = (d2 - d2.dot(d1) * d1).normalized();
  }
  double k_d1 = G.kappa1, k_d2 = G.kappa2;
  if (chart.axisymmetric()) {
    // frame convention: v1 azimuthal ((v1)_z = 0)
    if (std::abs(d1[2]) > std::abs(d2[2])) {
      std::swap(d1, d2);
      std::swap(k_d1, k_d2);
    }
    d1[2] = 0.0;
    if (d1.norm() < 1e-14) d1 = Vec3(0, 1, 0);
    d1.normalize();
  }
  if ((d1.cross(d2)).dot(G.nu) < 0) d2 = -d2;
  G.v1 = d1;
  G.v2 = d2;
  G.kv1 = k_d1;
  G.kv2 = k_d2;
  return G;
}

SurfacePoint surface_point(const SurfaceChart& chart, const Vec2& u) {
  ChartJet j = chart.jet(u);
  Vec3 cross = j.x1.cross(j.x2);
  const double nrm = cross.norm();
  return {j.x, nrm > 0 ? Vec3(cross / nrm) : Vec3(0, 0, 0), nrm};
}

// ---- mesh ------------------------------------------------------------------

QuadratureMesh build_quadrature_mesh(std::shared_ptr<const SurfaceChart> chart, int n1, int n2,
                                     Execution exec) {
  if (n1 < 8 || n2 < 8) fail(ErrorCode::ResolutionTooLow, "need at least 8 nodes per axis");
  QuadratureMesh mesh;
  mesh.chart = chart;
  mesh.n1 = n1;
  mesh.n2 = n2;
  mesh.axisym = chart->axisymmetric();

  // Non-periodic profile axes end at rotation poles; Gauss nodes in
  // mu = -cos(pi (t-a)/(b-a)) keep rows away from the poles and integrate
  // closed-surface integrands (polynomial in mu) at spectral accuracy.
  auto axis_rule = [](int n, double a, double b, bool periodic, std::vector<double>& x,
                      std::vector<double>& w) {
    if (periodic) {
      x.resize(static_cast<size_t>(n));
      w.assign(static_cast<size_t>(n), (b - a) / n);
      for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = a + (b - a) * i / n;
    } else {
      gauss_legendre(n, -1.0, 1.0, x, w);
      const double scale = (b - a) / M_PI;
      for (int i = 0; i < n; ++i) {
        const double mu = x[static_cast<size_t>(i)];
        x[static_cast<size_t>(i)] = a + scale * std::acos(-mu);
        w[static_cast<size_t>(i)] *= scale / std::sqrt(1.0 - mu * mu);
      }
    }
  };
  axis_rule(n1, chart->u1_min(), chart->u1_max(), chart->periodic1(), mesh.u1_nodes, mesh.u1_weights);
  axis_rule(n2, chart->u2_min(), chart->u2_max(), chart->periodic2(), mesh.u2_nodes, mesh.u2_weights);
  if (!chart->periodic1()) {
    mesh.u1_mapped.resize(static_cast<size_t>(n1));
    const double L = chart->u1_max() - chart->u1_min();
    for (int i = 0; i < n1; ++i)
      mesh.u1_mapped[static_cast<size_t>(i)] =
          -std::cos(M_PI * (mesh.u1_nodes[static_cast<size_t>(i)] - chart->u1_min()) / L);
  }

  mesh.nodes.resize(static_cast<size_t>(n1 * n2));
  const SurfaceChart& ch = *chart;
  auto fill_row = [&](int i) {
    for (int jj = 0; jj < n2; ++jj) {
      Vec2 u(mesh.u1_nodes[static_cast<size_t>(i)], mesh.u2_nodes[static_cast<size_t>(jj)]);
      MeshNode& nd = mesh.nodes[static_cast<size_t>(i * n2 + jj)];
      nd.u = u;
      nd.geo = local_geometry(ch, u);
      nd.w = mesh.u1_weights[static_cast<size_t>(i)] * mesh.u2_weights[static_cast<size_t>(jj)] *
             nd.geo.sqrt_det_g;
    }
  };
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n1; ++i) fill_row(i);
  } else {
    for (int i = 0; i < n1; ++i) fill_row(i);
  }
  double area = 0.0;  // serial reduction keeps the sum order fixed
  for (const auto& nd : mesh.nodes) area += nd.w;
  mesh.total_area = area;
  return mesh;
}

double QuadratureMesh::diameter() const {
  Vec3 lo = nodes.front().geo.x, hi = lo;
  for (const auto& nd : nodes) {
    lo = lo.cwiseMin(nd.geo.x);
    hi = hi.cwiseMax(nd.geo.x);
  }
  return (hi - lo).norm();
}

double QuadratureMesh::max_spacing() const {
  double h = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const Vec3& x = node(i, j).geo.x;
      if (i + 1 < n1) h = std::max(h, (node(i + 1, j).geo.x - x).norm());
      h = std::max(h, (node(i, (j + 1) % n2).geo.x - x).norm());
    }
  return h;
}

double signed_volume(const QuadratureMesh& mesh) {
  double v = 0.0;
  for (const auto& nd : mesh.nodes) v += nd.geo.x.dot(nd.geo.nu) * nd.w;
  return v / 3.0;
}

AssumptionAReport check_assumption_A(const SurfaceChart& /*chart*/, const QuadratureMesh& mesh,
                                     int n_dirs) {
  AssumptionAReport rep;
  n_dirs = std::max(n_dirs, 8);
  double best = std::numeric_limits<double>::infinity();
  double worst_violation = 0.0;
  double sampled = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < mesh.size(); ++idx) {
    const PointGeometry& G = mesh.nodes[static_cast<size_t>(idx)].geo;
    const double tr = G.kappa1 + G.kappa2;
    const double lo = G.kappa1 - tr, hi = G.kappa2 - tr;  // range of m over unit covectors
    if (lo <= 0.0 && hi >= 0.0) {
      rep.violating_nodes.push_back(idx);
      worst_violation = std::max(worst_violation, std::min(-lo, hi));
    } else {
      best = std::min(best, std::min(std::abs(lo), std::abs(hi)));
    }
    for (int k = 0; k < n_dirs; ++k) {
      const double psi = M_PI * k / n_dirs;
      const double m = G.kv1 * std::cos(psi) * std::cos(psi) + G.kv2 * std::sin(psi) * std::sin(psi) - tr;
      sampled = std::min(sampled, std::abs(m));
    }
  }
  rep.holds = rep.violating_nodes.empty();
  rep.margin = rep.holds ? best : -worst_violation;
  rep.sampled_margin = sampled;
  return rep;
}

}  // namespace npspec
