#include "qgmm/model.hpp"

#include <cmath>
#include <sstream>

#include "qgmm/errors.hpp"

namespace qgmm {

void ObservationSet::validate(bool require_two_choices) const {
  if (choices.empty()) throw dimension_error("observation set has no choice blocks");
  if (require_two_choices && choices.size() < 2)
    throw dimension_error(
        "tau estimation needs at least two choice blocks, got " +
        std::to_string(choices.size()));
  const Eigen::Index rows = choices[0].outcomes.rows();
  for (std::size_t j = 0; j < choices.size(); ++j) {
    const auto& c = choices[j];
    auto fail = [&](const char* what, Eigen::Index got) {
      std::ostringstream os;
      os << "choice block " << j + 1 << ": " << what << " has " << got
         << " rows, expected " << rows;
      throw dimension_error(os.str());
    };
    if (c.outcomes.rows() != rows) fail("outcome matrix", c.outcomes.rows());
    if (c.regressors.rows() != rows) fail("regressor matrix", c.regressors.rows());
    if (c.instruments.rows() != rows) fail("instrument matrix", c.instruments.rows());
    if (c.instruments.cols() == 0)
      throw dimension_error("choice block " + std::to_string(j + 1) +
                            ": instrument matrix has no columns");
    if (!c.outcomes.allFinite() || !c.regressors.allFinite() || !c.instruments.allFinite())
      throw dimension_error("choice block " + std::to_string(j + 1) +
                            ": non-finite entries");
  }
}

ObservationSet ObservationSet::resample_rows(const std::vector<int>& idx) const {
  ObservationSet out;
  out.choices.reserve(choices.size());
  for (const auto& c : choices) {
    ChoiceBlock b;
    b.outcomes.resize(idx.size(), c.outcomes.cols());
    b.regressors.resize(idx.size(), c.regressors.cols());
    b.instruments.resize(idx.size(), c.instruments.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      b.outcomes.row(r) = c.outcomes.row(idx[r]);
      b.regressors.row(r) = c.regressors.row(idx[r]);
      b.instruments.row(r) = c.instruments.row(idx[r]);
    }
    out.choices.push_back(std::move(b));
  }
  return out;
}

StructuralModel linear_location_model() {
  StructuralModel m;
  m.d_beta = 2;
  m.lambda = [](const Eigen::RowVectorXd& y, const Eigen::RowVectorXd& x,
                const Eigen::VectorXd& beta) {
    return y(0) - beta(0) - beta(1) * x(0);
  };
  m.lambda_gradient = [](const Eigen::RowVectorXd&, const Eigen::RowVectorXd& x,
                         const Eigen::VectorXd&) {
    Eigen::VectorXd g(2);
    g << -1.0, -x(0);
    return g;
  };
  m.lambda_batch = [](const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& beta, Eigen::VectorXd& out) {
    out = Y.col(0).array() - beta(0) - beta(1) * X.col(0).array();
  };
  m.gradient_batch = [](const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                        const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out.resize(Y.rows(), 2);
    out.col(0).setConstant(-1.0);
    out.col(1) = -X.col(0);
  };
  return m;
}

ParameterBounds ParameterBounds::box(int d_beta, double beta_lo, double beta_hi,
                                     double tau_lo, double tau_hi) {
  ParameterBounds b;
  b.beta_lower = Eigen::VectorXd::Constant(d_beta, beta_lo);
  b.beta_upper = Eigen::VectorXd::Constant(d_beta, beta_hi);
  b.tau_lower = tau_lo;
  b.tau_upper = tau_hi;
  b.validate();
  return b;
}

ParameterBounds ParameterBounds::around(const ParameterPoint& center,
                                        double beta_halfwidth, double tau_lo,
                                        double tau_hi) {
  ParameterBounds b;
  b.beta_lower = center.beta.array() - beta_halfwidth;
  b.beta_upper = center.beta.array() + beta_halfwidth;
  b.tau_lower = tau_lo;
  b.tau_upper = tau_hi;
  b.validate();
  return b;
}

Eigen::VectorXd ParameterBounds::lower_vector() const {
  Eigen::VectorXd v(dim());
  v.head(beta_lower.size()) = beta_lower;
  v(beta_lower.size()) = tau_lower;
  return v;
}

Eigen::VectorXd ParameterBounds::upper_vector() const {
  Eigen::VectorXd v(dim());
  v.head(beta_upper.size()) = beta_upper;
  v(beta_upper.size()) = tau_upper;
  return v;
}

Eigen::VectorXd ParameterBounds::center() const {
  return 0.5 * (lower_vector() + upper_vector());
}

bool ParameterBounds::contains(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd lo = lower_vector(), hi = upper_vector();
  if (theta.size() != lo.size()) return false;
  return (theta.array() >= lo.array()).all() && (theta.array() <= hi.array()).all();
}

Eigen::VectorXd ParameterBounds::clamp(const Eigen::VectorXd& theta, bool* clamped) const {
  const Eigen::VectorXd lo = lower_vector(), hi = upper_vector();
  Eigen::VectorXd out = theta.cwiseMax(lo).cwiseMin(hi);
  if (clamped != nullptr) *clamped = (out - theta).cwiseAbs().maxCoeff() > 0.0;
  return out;
}

void ParameterBounds::validate() const {
  if (beta_lower.size() != beta_upper.size())
    throw dimension_error("parameter bounds: beta vectors disagree on length");
  if ((beta_lower.array() > beta_upper.array()).any())
    throw std::invalid_argument("parameter bounds: empty beta box");
  if (!(tau_lower > 0.0 && tau_upper < 1.0 && tau_lower < tau_upper))
    throw std::invalid_argument("parameter bounds: tau box must sit strictly inside (0,1)");
}

}  // namespace qgmm
