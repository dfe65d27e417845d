#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "npspec/geometry.hpp"

namespace npspec {

using Complex = std::complex<double>;

enum class OperatorKind {
  SingleLayer,            // S, kernel Gamma(x-y) = -1/(4 pi |x-y|)
  NeumannPoincare,        // K*, kernel <x-y,nu(x)>/(4 pi |x-y|^3)
  NeumannPoincareAdjoint, // K,  kernel <y-x,nu(y)>/(4 pi |x-y|^3)
  HelmholtzSingle,        // S^k
  HelmholtzNP,            // K^{k*}
  SymmetrizedNP,
};

/// Parameters of the singular-quadrature scheme: a smooth partition of unity
/// splits each kernel row into a globally smooth far part (handled by the
/// product rule) and a local part integrated in metric-scaled polar
/// coordinates with Lagrange interpolation of the density.
struct AssemblyOptions {
  int patch_cells = 4;     // patch half-width in mesh cells
  int n_psi = 16;          // angular Gauss points per patch triangle
  int n_rad = 20;          // radial Gauss points
  double pou_inner = 0.3;  // eta == 1 inside this fraction of the patch
  Execution exec = Execution::Parallel;
};

struct OperatorMatrix {
  OperatorKind kind;
  std::shared_ptr<const QuadratureMesh> mesh;
  Eigen::MatrixXd m;    // real kinds
  Eigen::MatrixXcd mc;  // Helmholtz kinds
  double wavenumber_re = 0.0, wavenumber_im = 0.0;
  // populated by symmetrize_np
  Eigen::MatrixXd pullback;  // density = pullback * (symmetric-coordinate vector)
  double kelley_residual = -1.0;
  double sym_defect = -1.0;

  bool is_complex() const {
    return kind == OperatorKind::HelmholtzSingle || kind == OperatorKind::HelmholtzNP;
  }
  int size() const { return is_complex() ? int(mc.rows()) : int(m.rows()); }
};

OperatorMatrix assemble_single_layer(std::shared_ptr<const QuadratureMesh> mesh,
                                     const AssemblyOptions& opts = {});
OperatorMatrix assemble_np(std::shared_ptr<const QuadratureMesh> mesh,
                           const AssemblyOptions& opts = {});
/// Direct discretization of K (adjoint of K*); used by duality tests.
OperatorMatrix assemble_np_adjoint(std::shared_ptr<const QuadratureMesh> mesh,
                                   const AssemblyOptions& opts = {});

/// Rows of the Nystrom matrix for a subset of target nodes (static kinds).
Eigen::MatrixXd assemble_rows(const QuadratureMesh& mesh, OperatorKind kind,
                              const std::vector<int>& targets, const AssemblyOptions& opts = {});
Eigen::MatrixXcd assemble_rows_helmholtz(const QuadratureMesh& mesh, OperatorKind kind, Complex k,
                                         const std::vector<int>& targets,
                                         const AssemblyOptions& opts = {});

/// Off-surface single-layer potential by the plain product rule.
double single_layer_potential_offsurface(const QuadratureMesh& mesh, const Eigen::VectorXd& density,
                                         const Vec3& x);

/// Exact transfer of a node density to a refined mesh of the same chart
/// (trigonometric in the azimuth, polynomial in the mapped profile variable).
Eigen::VectorXd interpolate_density(const QuadratureMesh& coarse, const QuadratureMesh& fine,
                                    const Eigen::VectorXd& density);

struct JumpResidual {
  double interior = 0.0;  // max |d_nu S^- - (-1/2 + K*) phi|
  double exterior = 0.0;  // max |d_nu S^+ - (+1/2 + K*) phi|
  double jump = 0.0;      // max |(d_nu S^+ - d_nu S^-) - phi|
};

/// Checks the jump relation by one-sided normal finite differences of the
/// off-surface potential at a subsample of nodes. h_off must be at least
/// 5 node spacings (OffsetTooSmall otherwise).
JumpResidual verify_jump_relation(const QuadratureMesh& mesh, const Eigen::VectorXd& density,
                                  double h_off, int max_targets = 64,
                                  const AssemblyOptions& opts = {});

/// Energy matrix E = -S as a W-symmetric positive definite factorization.
/// Ships the transforms needed to conjugate operators into symmetric
/// coordinates: for a density f, the symmetric representative is
/// to_sym * f and f = from_sym * (representative).
struct EnergyFactorization {
  Eigen::VectorXd w;          // quadrature weights
  Eigen::MatrixXd e_sym;      // symmetrized W^{1/2} E W^{-1/2}
  Eigen::VectorXd eigvals;    // of e_sym, ascending, floored
  Eigen::MatrixXd eigvecs;
  Eigen::MatrixXd half;       // e_sym^{1/2}
  Eigen::MatrixXd half_inv;   // e_sym^{-1/2}
  int floored_modes = 0;      // sub-resolution tail modes clipped to the floor
  double floor_value = 0.0;
};

/// E = -S must be positive definite; on product meshes the azimuthal
/// oversampling near poles leaves a sub-resolution tail at the quadrature
/// noise floor, which is clipped to floor_rel * max eigenvalue before taking
/// square roots. More than max_floored_fraction clipped modes means the sign
/// structure is genuinely wrong and raises NotPositiveDefinite.
EnergyFactorization factor_energy(const OperatorMatrix& S, double floor_rel = 1e-12,
                                  double max_floored_fraction = 0.1);

/// Kelley-symmetrized NP matrix: E^{1/2}-conjugation of K* in weighted
/// coordinates, explicitly symmetrized. Reports the Kelley commutation
/// residual ||S K* - K S|| / ||S K*|| (seeded power-iteration 2-norm
/// estimates) and the pre-symmetrization defect.
OperatorMatrix symmetrize_np(const OperatorMatrix& S, const OperatorMatrix& Kstar);

/// Deterministic power-iteration estimate of the matrix 2-norm.
double norm2_estimate(const Eigen::MatrixXd& M, int iters = 30, uint64_t seed = 12345);

struct AxisymBlock {
  int m = 0;
  Eigen::MatrixXd s;      // single-layer block over profile nodes
  Eigen::MatrixXd kstar;  // NP block
  Eigen::VectorXd profile_weights;  // ring-summed quadrature weights
  std::vector<int> profile_nodes;   // mesh indices of the phi=0 column
};

/// Azimuthal Fourier reduction on a surface of revolution: per-mode blocks
/// obtained by DFT of the corrected Nystrom rows along the azimuth. The union
/// of block spectra over |m| <= n2/2 reproduces the full-matrix spectrum.
std::vector<AxisymBlock> assemble_axisym_blocks(std::shared_ptr<const QuadratureMesh> mesh,
                                                int m_max, const AssemblyOptions& opts = {});

// Fundamental solutions.
inline double laplace_kernel(double r) { return -1.0 / (4.0 * M_PI * r); }
Complex helmholtz_fundamental(Complex k, double r);

}  // namespace npspec
