#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "npspec/layer_potentials.hpp"

namespace npspec {

/// Regularizer fixed by the flow construction; not configurable.
inline double rho_reg(double r) { return 1.0 - std::exp(-r); }
inline double rho_reg_inv(double y) { return -std::log1p(-y); }

struct Eigenpair {
  double lambda = 0.0;     // NP eigenvalue
  Eigen::VectorXd phi;     // density, L2(dsigma)-normalized; profile vector on modal runs
  double c = 0.0;          // Sobolev normalizer 1/<E phi, phi>
  int index = 0;
  int m = std::numeric_limits<int>::min();  // azimuthal mode on modal runs
  bool has_m() const { return m != std::numeric_limits<int>::min(); }
};

struct ModalEnergy {
  int m = 0;
  EnergyFactorization factor;  // of the m-mode block, over profile nodes
};

/// Eigenpairs plus everything needed to evaluate |D|^alpha and weighted sums.
struct SpectralDataset {
  std::shared_ptr<const QuadratureMesh> mesh;
  std::vector<Eigenpair> pairs;
  bool modal = false;
  Eigen::VectorXd profile_weights;  // modal runs: ring-summed weights
  std::shared_ptr<EnergyFactorization> energy;  // full runs
  std::vector<ModalEnergy> modal_energy;        // modal runs, one per |m|

  /// |D|^alpha phi in the pair's own representation ((2E)^{-alpha}).
  Eigen::VectorXd modulated(int pair_index, double alpha) const;
  /// Quadrature weight vector matching the pair representation.
  const Eigen::VectorXd& rep_weights() const;
  /// <E phi, phi> in the pair representation.
  double energy_product(int pair_index) const;
};

struct SpectralWindow {
  double h = 1.0;
  double r = 0.0, s = 1.0;  // window for rho(lambda^2/h^2), closed
  std::optional<std::pair<double, double>> m_window;  // window for m*h (k = 2)
};

/// Window centred on an NP-eigenvalue band [lam_lo, lam_hi].
SpectralWindow window_from_lambda_band(double lam_lo, double lam_hi);

struct WindowSelection {
  std::vector<int> indices;  // into dataset.pairs, deterministic order
  bool empty = false;
};

WindowSelection select_window(const SpectralDataset& data, const SpectralWindow& window);

struct EigOptions {
  // E-eigenvalue fraction below which modes count as sub-resolution; they are
  // decoupled from the E^{1/2}-conjugation and solved as a plain symmetric
  // block, so their quadrature noise cannot leak into the resolved spectrum
  // through the amplified conjugation.
  double deflation_cut_rel = 3e-3;
};

/// Full-mesh eigendecomposition through the Kelley-symmetrized operator.
SpectralDataset np_eigendecomposition(const OperatorMatrix& S, const OperatorMatrix& Kstar,
                                      const EigOptions& opts = {});

/// Per-mode eigendecomposition of azimuthal Fourier blocks.
SpectralDataset block_eigendecomposition(std::shared_ptr<const QuadratureMesh> mesh,
                                         const std::vector<AxisymBlock>& blocks);

double plasmonic_map(double gamma_c, double gamma_m);
double eigenvalue_to_contrast(double lambda, double gamma_m);

/// (2E)^{-alpha} phi through the symmetric factorization of E.
Eigen::VectorXd fractional_modulation(double alpha, const EnergyFactorization& E,
                                      const Eigen::VectorXd& phi);

double sobolev_normalizer(const EnergyFactorization& E, const Eigen::VectorXd& phi);

}  // namespace npspec
