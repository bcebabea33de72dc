#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace qgmm {

// One choice's sample: outcomes Y_j (n x d_Y), regressors X_j (n x d_X),
// instruments Z_j (n x d_Z, first column the constant 1 by convention).
struct ChoiceBlock {
  Eigen::MatrixXd outcomes;
  Eigen::MatrixXd regressors;
  Eigen::MatrixXd instruments;
};

struct ObservationSet {
  std::vector<ChoiceBlock> choices;

  int n() const { return choices.empty() ? 0 : static_cast<int>(choices[0].outcomes.rows()); }
  int num_choices() const { return static_cast<int>(choices.size()); }

  // Total stacked moment dimension, sum of d_Z over choices.
  int stacked_dim() const {
    int d = 0;
    for (const auto& c : choices) d += static_cast<int>(c.instruments.cols());
    return d;
  }

  // Throws dimension_error naming the offending block; also rejects
  // non-finite entries.
  void validate(bool require_two_choices = false) const;

  // Same row index set applied to every choice block (bootstrap resampling).
  ObservationSet resample_rows(const std::vector<int>& idx) const;
};

// The known structural function Lambda(y, x, beta) and its beta-gradient.
// lambda_batch/gradient_batch are optional vectorized evaluators; when
// absent, callers fall back to the row-wise functions.
struct StructuralModel {
  int d_beta = 0;

  std::function<double(const Eigen::RowVectorXd& y, const Eigen::RowVectorXd& x,
                       const Eigen::VectorXd& beta)>
      lambda;
  std::function<Eigen::VectorXd(const Eigen::RowVectorXd& y, const Eigen::RowVectorXd& x,
                                const Eigen::VectorXd& beta)>
      lambda_gradient;

  std::function<void(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& beta, Eigen::VectorXd& out)>
      lambda_batch;
  std::function<void(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& beta, Eigen::MatrixXd& out)>
      gradient_batch;
};

// Lambda = y - b0 - b1 * x, the location-scale form used by both DGPs and
// the consumption Euler application. d_beta = 2, gradient (-1, -x).
StructuralModel linear_location_model();

// theta = (beta', tau)'. tau is always the last coordinate of the packed
// vector form.
struct ParameterPoint {
  Eigen::VectorXd beta;
  double tau = 0.5;

  int dim() const { return static_cast<int>(beta.size()) + 1; }

  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v(dim());
    v.head(beta.size()) = beta;
    v(beta.size()) = tau;
    return v;
  }

  static ParameterPoint from_vector(const Eigen::VectorXd& v) {
    ParameterPoint p;
    p.beta = v.head(v.size() - 1);
    p.tau = v(v.size() - 1);
    return p;
  }
};

// Compact box B x T; tau bounds must stay strictly inside (0, 1).
struct ParameterBounds {
  Eigen::VectorXd beta_lower;
  Eigen::VectorXd beta_upper;
  double tau_lower = 0.05;
  double tau_upper = 0.95;

  int dim() const { return static_cast<int>(beta_lower.size()) + 1; }

  static ParameterBounds box(int d_beta, double beta_lo, double beta_hi,
                             double tau_lo = 0.05, double tau_hi = 0.95);
  static ParameterBounds around(const ParameterPoint& center, double beta_halfwidth,
                                double tau_lo = 0.05, double tau_hi = 0.95);

  Eigen::VectorXd lower_vector() const;
  Eigen::VectorXd upper_vector() const;
  Eigen::VectorXd center() const;
  bool contains(const Eigen::VectorXd& theta) const;
  // Returns the clamped point; sets *clamped when any coordinate moved.
  Eigen::VectorXd clamp(const Eigen::VectorXd& theta, bool* clamped = nullptr) const;
  void validate() const;
};

}  // namespace qgmm
