#include "qgmm/covariance.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qgmm/errors.hpp"

namespace qgmm {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace

CovarianceEstimate covariance_iid(const Eigen::MatrixXd& per_obs_moments) {
  const Eigen::Index n = per_obs_moments.rows();
  if (n < 2) throw inference_error("covariance_iid: need at least 2 observations");
  CovarianceEstimate out;
  out.method = CovarianceMethod::iid;
  out.lags = 0;
  out.sigma = symmetrize(per_obs_moments.transpose() * per_obs_moments / n);
  return out;
}

CovarianceEstimate covariance_hac(const Eigen::MatrixXd& per_obs_moments, int lags) {
  const Eigen::Index n = per_obs_moments.rows();
  if (n < 2) throw inference_error("covariance_hac: need at least 2 observations");
  if (lags < 0 || lags >= n)
    throw std::invalid_argument("covariance_hac: lags must satisfy 0 <= lags < n");
  Eigen::MatrixXd sigma = per_obs_moments.transpose() * per_obs_moments / n;
  for (int l = 1; l <= lags; ++l) {
    // Gamma_l = (1/n) sum_{t>l} g_t g_{t-l}'
    const Eigen::MatrixXd gamma =
        per_obs_moments.bottomRows(n - l).transpose() * per_obs_moments.topRows(n - l) /
        n;
    const double w = 1.0 - static_cast<double>(l) / (lags + 1);
    sigma += w * (gamma + gamma.transpose());
  }
  CovarianceEstimate out;
  out.method = CovarianceMethod::bartlett_hac;
  out.lags = lags;
  out.sigma = symmetrize(sigma);
  return out;
}

CovarianceEstimate covariance(const Eigen::MatrixXd& per_obs_moments,
                              CovarianceMethod method) {
  if (method == CovarianceMethod::iid) return covariance_iid(per_obs_moments);
  return covariance_hac(per_obs_moments,
                        newey_west_lags(static_cast<int>(per_obs_moments.rows())));
}

int newey_west_lags(int n) {
  return static_cast<int>(std::floor(4.0 * std::pow(n / 100.0, 2.0 / 9.0)));
}

Eigen::MatrixXd theoretical_iid_sigma(double tau, const ObservationSet& data) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("theoretical_iid_sigma: tau must lie in (0,1)");
  const int n = data.n();
  const int q = data.stacked_dim();
  Eigen::MatrixXd zz = Eigen::MatrixXd::Zero(q, q);
  Eigen::MatrixXd zi(1, q);
  for (int i = 0; i < n; ++i) {
    int offset = 0;
    for (const auto& block : data.choices) {
      const int dz = static_cast<int>(block.instruments.cols());
      zi.block(0, offset, 1, dz) = block.instruments.row(i);
      offset += dz;
    }
    zz.noalias() += zi.transpose() * zi;
  }
  return tau * (1.0 - tau) * zz / n;
}

Eigen::MatrixXd efficient_weight(const CovarianceEstimate& cov, double ridge) {
  const Eigen::Index q = cov.sigma.rows();
  if (cov.sigma.cols() != q)
    throw dimension_error("efficient_weight: covariance matrix is not square");
  if (ridge < 0.0) ridge = 1e-10 * cov.sigma.trace() / q;
  Eigen::MatrixXd a = symmetrize(cov.sigma);
  a.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double min_eig = es.eigenvalues().minCoeff();
  const double max_eig = es.eigenvalues().maxCoeff();
  if (!(min_eig > 0.0) || min_eig <= max_eig * 1e-300)
    throw conditioning_error(
        "efficient_weight: covariance singular after ridging, smallest eigenvalue " +
            std::to_string(min_eig),
        min_eig);
  const Eigen::MatrixXd w = es.eigenvectors() *
                            es.eigenvalues().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose();
  return symmetrize(w);
}

}  // namespace qgmm
