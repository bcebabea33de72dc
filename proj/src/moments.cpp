#include "qgmm/moments.hpp"

#include <stdexcept>
#include <string>

#include "qgmm/errors.hpp"
#include "qgmm/smoothing.hpp"

namespace qgmm {

namespace {

void check_theta(const StructuralModel& model, Eigen::Index beta_size) {
  if (beta_size != model.d_beta)
    throw dimension_error("parameter point has beta of length " +
                          std::to_string(beta_size) + ", model expects " +
                          std::to_string(model.d_beta));
}

}  // namespace

void lambda_values(const ChoiceBlock& block, const StructuralModel& model,
                   const Eigen::VectorXd& beta, Eigen::VectorXd& out) {
  if (model.lambda_batch) {
    model.lambda_batch(block.outcomes, block.regressors, beta, out);
    return;
  }
  const Eigen::Index n = block.outcomes.rows();
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = model.lambda(block.outcomes.row(i), block.regressors.row(i), beta);
}

Eigen::VectorXd unsmoothed_moments(const ObservationSet& data, const StructuralModel& model,
                                   const ParameterPoint& theta) {
  data.validate();
  check_theta(model, theta.beta.size());
  const int n = data.n();
  Eigen::VectorXd g(data.stacked_dim());
  Eigen::VectorXd lam;
  int offset = 0;
  for (const auto& block : data.choices) {
    lambda_values(block, model, theta.beta, lam);
    // 1{Lambda <= 0} - tau
    const Eigen::VectorXd a =
        (lam.array() <= 0.0).cast<double>() - theta.tau;
    const int dz = static_cast<int>(block.instruments.cols());
    g.segment(offset, dz) = block.instruments.transpose() * a / n;
    offset += dz;
  }
  return g;
}

Eigen::MatrixXd unsmoothed_per_obs_moments(const ObservationSet& data,
                                           const StructuralModel& model,
                                           const ParameterPoint& theta) {
  data.validate();
  check_theta(model, theta.beta.size());
  const int n = data.n();
  Eigen::MatrixXd out(n, data.stacked_dim());
  Eigen::VectorXd lam;
  int offset = 0;
  for (const auto& block : data.choices) {
    lambda_values(block, model, theta.beta, lam);
    const Eigen::VectorXd a = (lam.array() <= 0.0).cast<double>() - theta.tau;
    const int dz = static_cast<int>(block.instruments.cols());
    out.middleCols(offset, dz) = block.instruments.array().colwise() * a.array();
    offset += dz;
  }
  return out;
}

void smoothed_moment_vector(const ObservationSet& data, const StructuralModel& model,
                            const Eigen::VectorXd& theta, double h, Eigen::VectorXd& out,
                            MomentWorkspace& ws) {
  if (!(h > 0.0)) throw std::invalid_argument("smoothed moments: bandwidth must be > 0");
  const int n = data.n();
  const Eigen::VectorXd beta = theta.head(theta.size() - 1);
  const double tau = theta(theta.size() - 1);
  out.resize(data.stacked_dim());
  int offset = 0;
  for (const auto& block : data.choices) {
    lambda_values(block, model, beta, ws.lambda_values);
    ws.smoothed.resize(n);
    // I~(-Lambda/h) - tau
    kernels::smooth_indicator_batch(ws.lambda_values.data(), -1.0 / h,
                                    ws.smoothed.data(), static_cast<std::size_t>(n));
    ws.smoothed.array() -= tau;
    const int dz = static_cast<int>(block.instruments.cols());
    out.segment(offset, dz).noalias() = block.instruments.transpose() * ws.smoothed / n;
    offset += dz;
  }
}

MomentEvaluation smoothed_moments(const ObservationSet& data, const StructuralModel& model,
                                  const ParameterPoint& theta, double h) {
  data.validate();
  check_theta(model, theta.beta.size());
  if (!(h > 0.0)) throw std::invalid_argument("smoothed moments: bandwidth must be > 0");
  const int n = data.n();
  MomentEvaluation ev;
  ev.per_obs_moments.resize(n, data.stacked_dim());
  Eigen::VectorXd lam, s(n);
  int offset = 0;
  for (const auto& block : data.choices) {
    lambda_values(block, model, theta.beta, lam);
    kernels::smooth_indicator_batch(lam.data(), -1.0 / h, s.data(),
                                    static_cast<std::size_t>(n));
    s.array() -= theta.tau;
    const int dz = static_cast<int>(block.instruments.cols());
    ev.per_obs_moments.middleCols(offset, dz) =
        block.instruments.array().colwise() * s.array();
    offset += dz;
  }
  ev.g_bar = ev.per_obs_moments.colwise().mean();
  return ev;
}

Eigen::MatrixXd moment_jacobian(const ObservationSet& data, const StructuralModel& model,
                                const ParameterPoint& theta, double h) {
  data.validate();
  check_theta(model, theta.beta.size());
  if (!(h > 0.0)) throw std::invalid_argument("moment jacobian: bandwidth must be > 0");
  if (!model.lambda_gradient && !model.gradient_batch)
    throw std::invalid_argument("moment jacobian: model supplies no lambda gradient");
  const int n = data.n();
  const int p = model.d_beta + 1;
  Eigen::MatrixXd G(data.stacked_dim(), p);
  Eigen::VectorXd lam, w(n);
  Eigen::MatrixXd D;
  int offset = 0;
  for (const auto& block : data.choices) {
    lambda_values(block, model, theta.beta, lam);
    kernels::smooth_indicator_derivative_batch(lam.data(), -1.0 / h, w.data(),
                                               static_cast<std::size_t>(n));
    if (model.gradient_batch) {
      model.gradient_batch(block.outcomes, block.regressors, theta.beta, D);
    } else {
      D.resize(n, model.d_beta);
      for (int i = 0; i < n; ++i)
        D.row(i) = model
                       .lambda_gradient(block.outcomes.row(i), block.regressors.row(i),
                                        theta.beta)
                       .transpose();
    }
    const int dz = static_cast<int>(block.instruments.cols());
    // beta block: -(1/(n h)) Z' diag(w) D;  tau column: -(1/n) Z' 1
    G.block(offset, 0, dz, model.d_beta).noalias() =
        -(block.instruments.transpose() * (D.array().colwise() * w.array()).matrix()) /
        (n * h);
    G.block(offset, model.d_beta, dz, 1) =
        -block.instruments.colwise().mean().transpose();
    offset += dz;
  }
  return G;
}

}  // namespace qgmm
