#pragma once

#include <Eigen/Core>

#include "qgmm/model.hpp"

namespace qgmm {

// Stacked sample moments at one parameter point. g_bar is the column mean of
// per_obs_moments; G_hat is filled by moment_jacobian.
struct MomentEvaluation {
  Eigen::VectorXd g_bar;            // m*d_Z
  Eigen::MatrixXd per_obs_moments;  // n x m*d_Z
  Eigen::MatrixXd G_hat;            // m*d_Z x (d_beta+1)
};

// Reusable buffers for the objective hot path.
struct MomentWorkspace {
  Eigen::VectorXd lambda_values;
  Eigen::VectorXd smoothed;
};

// (1/n) sum_i Z_ji (1{Lambda_ji <= 0} - tau), stacked over choices.
Eigen::VectorXd unsmoothed_moments(const ObservationSet& data, const StructuralModel& model,
                                   const ParameterPoint& theta);

// Per-observation rows of the unsmoothed moment function (n x m*d_Z); feed
// to the covariance estimators.
Eigen::MatrixXd unsmoothed_per_obs_moments(const ObservationSet& data,
                                           const StructuralModel& model,
                                           const ParameterPoint& theta);

// Smoothed version with indicator replaced by I~(-Lambda/h); fills g_bar and
// per_obs_moments. h must be > 0.
MomentEvaluation smoothed_moments(const ObservationSet& data, const StructuralModel& model,
                                  const ParameterPoint& theta, double h);

// g_bar only, no per-observation matrix; the annealer calls this.
void smoothed_moment_vector(const ObservationSet& data, const StructuralModel& model,
                            const Eigen::VectorXd& theta, double h, Eigen::VectorXd& out,
                            MomentWorkspace& ws);

// (m*d_Z) x (d_beta+1). Beta block -(1/(n h)) sum_i I~'(-Lambda_ji/h)
// Z_ji^(k) dLambda/dbeta^(l); last column -(1/n) sum_i Z_ji.
Eigen::MatrixXd moment_jacobian(const ObservationSet& data, const StructuralModel& model,
                                const ParameterPoint& theta, double h);

// Lambda_ji for one choice block, using the batch evaluator when present.
void lambda_values(const ChoiceBlock& block, const StructuralModel& model,
                   const Eigen::VectorXd& beta, Eigen::VectorXd& out);

}  // namespace qgmm
