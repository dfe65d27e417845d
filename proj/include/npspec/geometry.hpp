#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "npspec/error.hpp"

namespace npspec {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;

enum class Execution { Serial, Parallel };

enum class ChartKind { Sphere, Spheroid, Torus, SurfaceOfRevolution, GenericParametric };

/// Position and partial derivatives of the embedding at one parameter point.
struct ChartJet {
  Vec3 x;
  Vec3 x1, x2;        // first derivatives
  Vec3 x11, x12, x22; // second derivatives
};

struct ChartJet3 {
  Vec3 x111, x112, x122, x222;
};

/// Parametrized closed surface in R^3 over a rectangle, periodic flags per axis.
/// Axis 1 is the profile/colatitude direction, axis 2 the azimuth for
/// surfaces of revolution.
class SurfaceChart {
 public:
  virtual ~SurfaceChart() = default;

  virtual ChartKind kind() const = 0;
  virtual std::string name() const = 0;

  virtual double u1_min() const = 0;
  virtual double u1_max() const = 0;
  virtual double u2_min() const = 0;
  virtual double u2_max() const = 0;
  virtual bool periodic1() const = 0;
  virtual bool periodic2() const = 0;

  virtual ChartJet jet(const Vec2& u) const = 0;

  /// Third derivatives; default falls back to central differences of jet().
  virtual ChartJet3 jet3(const Vec2& u) const;
  virtual bool analytic_jet3() const { return false; }

  /// True when the surface is invariant under rotation about the z-axis and
  /// axis 2 is the rotation angle.
  virtual bool axisymmetric() const { return false; }

  /// Pole parameters (revolution charts whose profile meets the axis).
  virtual bool has_pole_at(double /*u1*/) const { return false; }
};

/// Pointwise extrinsic geometry. Curvature sign convention: outward normal,
/// convex bodies get positive principal curvatures.
struct PointGeometry {
  Vec2 u;
  Vec3 x;
  Vec3 nu;       // unit outward normal
  Mat2 g;        // first fundamental form
  Mat2 g_inv;
  Mat2 A;        // second fundamental form
  double sqrt_det_g = 0.0;
  double H_mean = 0.0;   // mean curvature, tr_g(A)/2
  double kappa1 = 0.0;   // principal curvatures, kappa1 <= kappa2
  double kappa2 = 0.0;
  // Principal frame. On surfaces of revolution v1 is the azimuthal direction
  // ((v1)_z = 0) and v2 the meridional one, oriented so (v1 x v2).nu > 0;
  // kv1/kv2 are the curvatures along v1/v2. Otherwise v1 carries kappa1.
  Vec3 v1, v2;
  double kv1 = 0.0, kv2 = 0.0;
  bool pole = false;     // chart-degenerate axis point; g fields not usable
};

struct MeshNode {
  Vec2 u;
  double w = 0.0;  // surface-measure quadrature weight
  PointGeometry geo;
};

/// Product quadrature mesh: Gauss-Legendre on non-periodic axes, trapezoid on
/// periodic ones. Node (i,j) lives at index i*n2 + j.
struct QuadratureMesh {
  std::shared_ptr<const SurfaceChart> chart;
  int n1 = 0, n2 = 0;
  std::vector<double> u1_nodes, u1_weights;
  std::vector<double> u2_nodes, u2_weights;
  // interpolation coordinates of the profile nodes: mu = -cos(pi (t-a)/(b-a))
  // on non-periodic axes (where the quadrature nodes are Gauss points in mu)
  std::vector<double> u1_mapped;
  std::vector<MeshNode> nodes;
  double total_area = 0.0;
  bool axisym = false;

  int size() const { return n1 * n2; }
  int index(int i, int j) const { return i * n2 + j; }
  const MeshNode& node(int i, int j) const { return nodes[static_cast<size_t>(index(i, j))]; }
  double diameter() const;  // bounding-box diameter of the node cloud
  /// Largest chordal gap between azimuthally/profile-adjacent nodes.
  double max_spacing() const;
};

struct AssumptionAReport {
  bool holds = false;
  double margin = 0.0;  // min |m| over extremal directions; negative if violated
  std::vector<int> violating_nodes;
  double sampled_margin = 0.0;  // cross-check from sampled covectors
};

/// Geometry of the chart at u. Throws DegenerateChart when |X1 x X2| < eps_reg,
/// PoleSingularity when a pole is hit on a chart that cannot take limits there.
PointGeometry local_geometry(const SurfaceChart& chart, const Vec2& u, double eps_reg = 1e-10);

/// Lightweight point data for quadrature kernels (first derivatives only).
struct SurfacePoint {
  Vec3 x;
  Vec3 nu;
  double sqrt_det_g;
};
SurfacePoint surface_point(const SurfaceChart& chart, const Vec2& u);

QuadratureMesh build_quadrature_mesh(std::shared_ptr<const SurfaceChart> chart, int n1, int n2,
                                     Execution exec = Execution::Parallel);

AssumptionAReport check_assumption_A(const SurfaceChart& chart, const QuadratureMesh& mesh,
                                     int n_dirs = 16);

/// Signed volume from the divergence theorem; positive for outward orientation.
double signed_volume(const QuadratureMesh& mesh);

// ---- chart factories ----------------------------------------------------

std::shared_ptr<SurfaceChart> make_sphere(double R);
std::shared_ptr<SurfaceChart> make_spheroid(double a, double c);
std::shared_ptr<SurfaceChart> make_torus(double R_major, double r_minor);
/// Profile samples (rho_i, z_i), rho >= 0, interpolated with a clamped cubic
/// spline over a strictly increasing arc parameter; endpoints on the axis.
std::shared_ptr<SurfaceChart> make_surface_of_revolution(const std::vector<Vec2>& profile);

struct GenericSurfaceDef {
  std::function<Vec3(const Vec2&)> position;
  double u1_range[2] = {0.0, 1.0};
  double u2_range[2] = {0.0, 1.0};
  bool periodic[2] = {false, true};
  double fd_step = 1e-5;
  std::string label = "generic";
};
std::shared_ptr<SurfaceChart> make_generic(GenericSurfaceDef def);

/// Sphere of radius 1 perturbed by a random harmonic polynomial, convex for
/// small amplitude; used as the generic non-axisymmetric test body.
std::shared_ptr<SurfaceChart> make_random_convex_perturbation(uint64_t seed, double amplitude = 0.08);

// ---- quadrature rules ----------------------------------------------------

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace npspec
