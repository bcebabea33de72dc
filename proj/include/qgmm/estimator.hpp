#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "qgmm/anneal.hpp"
#include "qgmm/bandwidth.hpp"
#include "qgmm/covariance.hpp"
#include "qgmm/model.hpp"

namespace qgmm {

struct StageRecord {
  std::string stage;
  Eigen::VectorXd theta;
  double objective = 0.0;
};

struct EstimateReport {
  ParameterPoint theta_hat;
  Eigen::MatrixXd asymptotic_cov;  // (d_beta+1)^2, already divided by n
  Eigen::VectorXd se;
  Eigen::VectorXd ci_low, ci_high;  // 95%
  double objective_value = 0.0;
  double bandwidth_used = 0.0;
  std::vector<StageRecord> stage_trace;
  bool one_step_clamped = false;
  bool one_step_skipped = false;   // rank-deficient Jacobian, Newton update skipped
  bool one_step_rejected = false;  // update worsened the moment criterion, kept stage A
  // Jacobian rank-deficient at theta_hat (tiny bandwidths saturate the
  // kernel); the point estimate stands but cov/se/ci are NaN.
  bool inference_degenerate = false;
};

// Stage A: global search (anneal + polish) of the moment criterion
// studentized by the quantile-implied null variances; no estimated
// weighting matrix is involved yet.
ParameterPoint initial_estimate(const ObservationSet& data, const StructuralModel& model,
                                double h, const AnnealConfig& config);

// theta - (G' S_inv G)^-1 G' S_inv g, the linear-algebra core of one_step.
Eigen::VectorXd newton_update(const Eigen::VectorXd& theta, const Eigen::VectorXd& g_bar,
                              const Eigen::MatrixXd& G, const Eigen::MatrixXd& Sigma_inv);

// Newton-type update
//   theta_1s = theta_bar - (G' S^-1 G)^-1 G' S^-1 M_n(theta_bar),
// G from moment_jacobian and S from the chosen covariance at theta_bar.
// When bounds are supplied the result is clamped into them (flag via
// *clamped). Throws identification_error on a rank-deficient Jacobian.
ParameterPoint one_step(const ObservationSet& data, const StructuralModel& model,
                        const ParameterPoint& theta_bar, double h,
                        CovarianceMethod cov_method,
                        const ParameterBounds* bounds = nullptr, bool* clamped = nullptr);

// Efficient two-step GMM at a fixed bandwidth: initial estimate, one-step
// update, then re-minimization under W = efficient_weight(Sigma(theta_1s)),
// with sandwich covariance, SEs and 95% CIs. A rank-deficient one-step
// Jacobian is recoverable: the final search is seeded at the stage-A point.
EstimateReport two_step(const ObservationSet& data, const StructuralModel& model, double h,
                        const AnnealConfig& config,
                        CovarianceMethod cov_method = CovarianceMethod::iid);

// two_step plus bandwidth resolution. Fixed bandwidths pass through; the
// plug-in rule runs stage A at a small pilot bandwidth, resolves h from the
// pilot residuals, and continues the pipeline at the resolved h.
EstimateReport estimate(const ObservationSet& data, const StructuralModel& model,
                        const BandwidthChoice& bandwidth, const AnnealConfig& config,
                        CovarianceMethod cov_method = CovarianceMethod::iid);

// Sandwich (G'WG)^-1 G'W Sigma W G (G'WG)^-1 / n.
Eigen::MatrixXd asymptotic_covariance(const Eigen::MatrixXd& G_hat, const Eigen::MatrixXd& W,
                                      const Eigen::MatrixXd& Sigma_hat, int n);

struct BootstrapResult {
  Eigen::VectorXd se;
  Eigen::VectorXd ci_low, ci_high;   // center +- 1.96 se
  Eigen::MatrixXd draws;             // completed draws x (d_beta+1)
  int requested = 0;
  int completed = 0;
  int failed = 0;
};

// Nonparametric bootstrap: rows resampled with replacement, the same index
// set applied to every choice block; each draw re-estimated on its own
// deterministic RNG stream. Draws that fail to estimate are dropped and
// counted; more than 10% failures raises inference_error. The plug-in
// bandwidth is recomputed per draw unless the choice freezes it.
BootstrapResult bootstrap_inference(const ObservationSet& data, const StructuralModel& model,
                                    const BandwidthChoice& bandwidth, double full_sample_h,
                                    int B, std::uint64_t seed, const AnnealConfig& config,
                                    CovarianceMethod cov_method,
                                    const ParameterPoint& center, int threads = 0);

}  // namespace qgmm
