#include "npspec/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace npspec {

double plasmonic_map(double gamma_c, double gamma_m) {
  if (gamma_c == gamma_m) fail(ErrorCode::DegenerateContrast, "gamma_c == gamma_m");
  return (gamma_c + gamma_m) / (2.0 * (gamma_c - gamma_m));
}

double eigenvalue_to_contrast(double lambda, double gamma_m) {
  if (lambda == 0.5) fail(ErrorCode::LambdaHalf, "inverse map unbounded at lambda = 1/2");
  return gamma_m * (2.0 * lambda + 1.0) / (2.0 * lambda - 1.0);
}

Eigen::VectorXd fractional_modulation(double alpha, const EnergyFactorization& E,
                                      const Eigen::VectorXd& phi) {
  if (alpha == 0.0) return phi;
  if (alpha < -2.0 || alpha > 2.0) fail(ErrorCode::InvalidValue, "alpha outside [-2, 2]");
  Eigen::VectorXd scale(E.eigvals.size());
  for (int i = 0; i < scale.size(); ++i) scale[i] = std::pow(2.0 * E.eigvals[i], -alpha);
  Eigen::VectorXd hat = E.w.cwiseSqrt().asDiagonal() * phi;
  Eigen::VectorXd out = E.eigvecs * (scale.asDiagonal() * (E.eigvecs.transpose() * hat));
  return E.w.cwiseSqrt().cwiseInverse().asDiagonal() * out;
}

double sobolev_normalizer(const EnergyFactorization& E, const Eigen::VectorXd& phi) {
  const double l2 = (E.w.asDiagonal() * phi).dot(phi);
  if (!(l2 > 0)) fail(ErrorCode::ZeroDensity, "zero density has no normalizer");
  // floored spectral form of E, consistent with the E^{1/2} transforms
  Eigen::VectorXd hat = E.eigvecs.transpose() * (E.w.cwiseSqrt().asDiagonal() * phi);
  const double q = (E.eigvals.asDiagonal() * hat).dot(hat);
  if (!(q > 0)) fail(ErrorCode::NotPositiveDefinite, "energy product not positive");
  return 1.0 / q;
}

namespace {

void sort_pairs(std::vector<Eigenpair>& pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const Eigenpair& a, const Eigenpair& b) {
    if (std::abs(a.lambda) != std::abs(b.lambda)) return std::abs(a.lambda) > std::abs(b.lambda);
    if (a.m != b.m) return a.m < b.m;
    return a.lambda > b.lambda;
  });
  for (size_t i = 0; i < pairs.size(); ++i) pairs[i].index = static_cast<int>(i);
}

}  // namespace

SpectralDataset np_eigendecomposition(const OperatorMatrix& S, const OperatorMatrix& Kstar,
                                      const EigOptions& opts) {
  if (S.mesh != Kstar.mesh || S.size() != Kstar.size())
    fail(ErrorCode::InvalidValue, "operands assembled on different meshes");
  auto energy = std::make_shared<EnergyFactorization>(factor_energy(S));
  const int n = S.size();
  const Eigen::VectorXd& w = energy->w;
  Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd Khat = sw.asDiagonal() * Kstar.m * sw.cwiseInverse().asDiagonal();

  const double cut = opts.deflation_cut_rel * energy->eigvals.maxCoeff();
  int nr = 0;
  for (int i = 0; i < n; ++i)
    if (energy->eigvals[i] >= cut) ++nr;
  const int ng = n - nr;  // eigvals ascending: first ng are sub-resolution

  SpectralDataset data;
  data.mesh = S.mesh;
  data.energy = energy;
  data.pairs.reserve(static_cast<size_t>(n));

  auto push_pair = [&](double lambda, const Eigen::VectorXd& phi_raw) {
    Eigenpair p;
    p.lambda = lambda;
    p.phi = phi_raw / std::sqrt((w.asDiagonal() * phi_raw).dot(phi_raw));
    p.c = sobolev_normalizer(*energy, p.phi);
    data.pairs.push_back(std::move(p));
  };

  {
    Eigen::MatrixXd Vr = energy->eigvecs.rightCols(nr);
    Eigen::VectorXd lr = energy->eigvals.tail(nr);
    Eigen::MatrixXd Kr = Vr.transpose() * Khat * Vr;
    Eigen::MatrixXd T = lr.cwiseSqrt().asDiagonal() * Kr * lr.cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::MatrixXd Ts = 0.5 * (T + T.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ts);
    if (es.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "eigensolve failed");
    Eigen::MatrixXd pullback =
        sw.cwiseInverse().asDiagonal() * (Vr * lr.cwiseSqrt().cwiseInverse().asDiagonal());
    Eigen::MatrixXd densities = pullback * es.eigenvectors();
    for (int k = 0; k < nr; ++k) push_pair(es.eigenvalues()[k], densities.col(k));
  }
  if (ng > 0) {
    // sub-resolution sector: plain symmetric restriction, no conjugation
    Eigen::MatrixXd Vg = energy->eigvecs.leftCols(ng);
    Eigen::MatrixXd Kg = Vg.transpose() * Khat * Vg;
    Eigen::MatrixXd Gs = 0.5 * (Kg + Kg.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Gs);
    Eigen::MatrixXd densities = sw.cwiseInverse().asDiagonal() * (Vg * es.eigenvectors());
    for (int k = 0; k < ng; ++k) push_pair(es.eigenvalues()[k], densities.col(k));
  }
  sort_pairs(data.pairs);
  return data;
}

SpectralDataset block_eigendecomposition(std::shared_ptr<const QuadratureMesh> mesh,
                                         const std::vector<AxisymBlock>& blocks) {
  SpectralDataset data;
  data.mesh = mesh;
  data.modal = true;
  if (blocks.empty()) fail(ErrorCode::InvalidValue, "no blocks");
  data.profile_weights = blocks.front().profile_weights;

  for (const AxisymBlock& blk : blocks) {
    // factor the mode's energy block once per |m| (blocks for -m are equal)
    int slot = -1;
    for (size_t i = 0; i < data.modal_energy.size(); ++i)
      if (data.modal_energy[i].m == std::abs(blk.m)) slot = static_cast<int>(i);
    if (slot < 0) {
      ModalEnergy me;
      me.m = std::abs(blk.m);
      const int n = static_cast<int>(blk.s.rows());
      me.factor.w = blk.profile_weights;
      Eigen::VectorXd sw = me.factor.w.cwiseSqrt();
      Eigen::MatrixXd Ehat = sw.asDiagonal() * (-blk.s) * sw.cwiseInverse().asDiagonal();
      me.factor.e_sym = 0.5 * (Ehat + Ehat.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(me.factor.e_sym);
      if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        fail(ErrorCode::NotPositiveDefinite, "mode energy block not positive definite, m=" +
                                                 std::to_string(blk.m));
      me.factor.eigvals = es.eigenvalues();
      me.factor.eigvecs = es.eigenvectors();
      Eigen::VectorXd sq = me.factor.eigvals.cwiseSqrt();
      me.factor.half = me.factor.eigvecs * sq.asDiagonal() * me.factor.eigvecs.transpose();
      me.factor.half_inv = me.factor.eigvecs * sq.cwiseInverse().asDiagonal() *
                           me.factor.eigvecs.transpose();
      data.modal_energy.push_back(std::move(me));
      slot = static_cast<int>(data.modal_energy.size()) - 1;
      (void)n;
    }
    const EnergyFactorization& F = data.modal_energy[size_t(slot)].factor;
    Eigen::VectorXd sw = F.w.cwiseSqrt();
    Eigen::MatrixXd Khat = sw.asDiagonal() * blk.kstar * sw.cwiseInverse().asDiagonal();
    Eigen::MatrixXd T = F.half * Khat * F.half_inv;
    Eigen::MatrixXd Tsym = 0.5 * (T + T.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tsym);
    Eigen::MatrixXd pullback = sw.cwiseInverse().asDiagonal() * F.half_inv;
    for (int k = 0; k < Tsym.rows(); ++k) {
      Eigenpair p;
      p.lambda = es.eigenvalues()[k];
      p.m = blk.m;
      p.phi = pullback * es.eigenvectors().col(k);
      const double nrm = std::sqrt((F.w.asDiagonal() * p.phi).dot(p.phi));
      p.phi /= nrm;
      Eigen::VectorXd hat = sw.asDiagonal() * p.phi;
      p.c = 1.0 / hat.dot(F.e_sym * hat);
      data.pairs.push_back(std::move(p));
    }
  }
  sort_pairs(data.pairs);
  return data;
}

Eigen::VectorXd SpectralDataset::modulated(int pair_index, double alpha) const {
  const Eigenpair& p = pairs[size_t(pair_index)];
  if (alpha == 0.0) return p.phi;
  if (!modal) return fractional_modulation(alpha, *energy, p.phi);
  for (const auto& me : modal_energy)
    if (me.m == std::abs(p.m)) return fractional_modulation(alpha, me.factor, p.phi);
  fail(ErrorCode::InvalidValue, "no energy block for mode");
}

const Eigen::VectorXd& SpectralDataset::rep_weights() const {
  return modal ? profile_weights : energy->w;
}

double SpectralDataset::energy_product(int pair_index) const { return 1.0 / pairs[size_t(pair_index)].c; }

SpectralWindow window_from_lambda_band(double lam_lo, double lam_hi) {
  if (!(0 < lam_lo && lam_lo < lam_hi)) fail(ErrorCode::InvalidValue, "need 0 < lam_lo < lam_hi");
  SpectralWindow w;
  w.h = std::sqrt(lam_lo * lam_hi);
  w.r = rho_reg(lam_lo * lam_lo / (w.h * w.h));
  w.s = rho_reg(lam_hi * lam_hi / (w.h * w.h));
  return w;
}

WindowSelection select_window(const SpectralDataset& data, const SpectralWindow& window) {
  WindowSelection sel;
  for (int i = 0; i < static_cast<int>(data.pairs.size()); ++i) {
    const Eigenpair& p = data.pairs[size_t(i)];
    const double f1 = rho_reg(p.lambda * p.lambda / (window.h * window.h));
    if (f1 < window.r || f1 > window.s) continue;
    if (window.m_window) {
      if (!p.has_m()) continue;
      const double mv = p.m * window.h;
      if (mv < window.m_window->first || mv > window.m_window->second) continue;
    }
    sel.indices.push_back(i);
  }
  sel.empty = sel.indices.empty();
  return sel;
}

}  // namespace npspec
