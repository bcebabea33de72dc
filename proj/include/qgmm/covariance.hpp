#pragma once

#include <Eigen/Core>

#include "qgmm/model.hpp"

namespace qgmm {

enum class CovarianceMethod { iid, bartlett_hac };

struct CovarianceEstimate {
  Eigen::MatrixXd sigma;  // symmetric, PSD up to rounding
  CovarianceMethod method = CovarianceMethod::iid;
  int lags = 0;
};

// (1/n) sum_i g_i g_i'. Rows of per_obs_moments are the g_i.
CovarianceEstimate covariance_iid(const Eigen::MatrixXd& per_obs_moments);

// Bartlett long-run covariance: Gamma_0 + sum_l (1 - l/(L+1))(Gamma_l + Gamma_l').
CovarianceEstimate covariance_hac(const Eigen::MatrixXd& per_obs_moments, int lags);

CovarianceEstimate covariance(const Eigen::MatrixXd& per_obs_moments,
                              CovarianceMethod method);

// Newey-West truncation rule floor(4 (n/100)^{2/9}).
int newey_west_lags(int n);

// tau(1-tau) (1/n) sum_i Z_i Z_i' with Z_i the stacked instrument vector;
// the iid covariance implied by the conditional quantile restriction.
Eigen::MatrixXd theoretical_iid_sigma(double tau, const ObservationSet& data);

// Inverse of (sigma + ridge I), symmetrized. ridge < 0 selects the default
// 1e-10 * trace/dim. Throws conditioning_error when still singular.
Eigen::MatrixXd efficient_weight(const CovarianceEstimate& cov, double ridge = -1.0);

}  // namespace qgmm
