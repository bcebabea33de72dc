#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "qgmm/covariance.hpp"
#include "qgmm/errors.hpp"
#include "qgmm/moments.hpp"
#include "qgmm/rng.hpp"
#include "qgmm/simulation.hpp"

using namespace qgmm;

TEST_CASE("iid covariance of a constant sample is the outer product") {
  Eigen::MatrixXd rows(4, 2);
  rows << 1, -2, 1, -2, 1, -2, 1, -2;
  const CovarianceEstimate c = covariance_iid(rows);
  Eigen::MatrixXd expected(2, 2);
  expected << 1, -2, -2, 4;
  CHECK((c.sigma - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(c.lags == 0);
}

TEST_CASE("iid covariance matches direct summation") {
  Eigen::MatrixXd rows(3, 2);
  rows << 0.3, -1.1, 2.0, 0.4, -0.7, 0.9;
  const CovarianceEstimate c = covariance_iid(rows);
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < 3; ++i) oracle += rows.row(i).transpose() * rows.row(i);
  oracle /= 3.0;
  CHECK((c.sigma - oracle).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.sigma - c.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("off-diagonal blocks are plain cross moments") {
  RngStream rng(31);
  Eigen::MatrixXd rows(500, 2);
  for (int i = 0; i < 500; ++i) {
    rows(i, 0) = rng.normal();
    rows(i, 1) = rng.normal(1.0, 2.0);
  }
  const CovarianceEstimate c = covariance_iid(rows);
  double cross = 0.0;
  for (int i = 0; i < 500; ++i) cross += rows(i, 0) * rows(i, 1);
  cross /= 500.0;
  CHECK(c.sigma(0, 1) == doctest::Approx(cross).epsilon(1e-12));
}

TEST_CASE("iid covariance needs two observations") {
  CHECK_THROWS_AS(covariance_iid(Eigen::MatrixXd::Ones(1, 2)), inference_error);
}

TEST_CASE("hac with zero lags equals iid") {
  RngStream rng(13);
  Eigen::MatrixXd rows(200, 3);
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 3; ++j) rows(i, j) = rng.normal();
  const CovarianceEstimate iid = covariance_iid(rows);
  const CovarianceEstimate hac = covariance_hac(rows, 0);
  CHECK((iid.sigma - hac.sigma).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hac lag range is validated") {
  const Eigen::MatrixXd rows = Eigen::MatrixXd::Ones(10, 2);
  CHECK_THROWS_AS(covariance_hac(rows, -1), std::invalid_argument);
  CHECK_THROWS_AS(covariance_hac(rows, 10), std::invalid_argument);
}

TEST_CASE("hac on white noise stays near the iid estimate") {
  RngStream rng(2);
  const int n = 10000;
  Eigen::MatrixXd rows(n, 2);
  for (int i = 0; i < n; ++i) {
    rows(i, 0) = rng.normal();
    rows(i, 1) = rng.normal(0.0, 0.5);
  }
  const CovarianceEstimate iid = covariance_iid(rows);
  const CovarianceEstimate hac = covariance_hac(rows, 3);
  const double rel = (hac.sigma - iid.sigma).norm() / iid.sigma.norm();
  CHECK(rel < 0.05);
}

TEST_CASE("hac recovers the AR(1) long-run variance") {
  // x_t = phi x_{t-1} + e_t; long-run variance Var(x)(1+phi)/(1-phi).
  // The Bartlett window truncated at 12 lags underestimates it by ~10% in
  // expectation, so this runs on a fixed draw with margin.
  const double phi = 0.5;
  const int n = 20000;
  RngStream rng(39);
  Eigen::MatrixXd rows(n, 1);
  double x = rng.normal(0.0, 1.0 / std::sqrt(1.0 - phi * phi));
  for (int i = 0; i < n; ++i) {
    x = phi * x + rng.normal();
    rows(i, 0) = x;
  }
  const double var_x = rows.col(0).squaredNorm() / n;
  const double target = var_x * (1.0 + phi) / (1.0 - phi);
  const int lags = newey_west_lags(n);
  CHECK(lags == 12);
  const CovarianceEstimate hac = covariance_hac(rows, lags);
  CHECK(std::abs(hac.sigma(0, 0) - target) / target < 0.10);
}

TEST_CASE("newey-west lag rule") {
  CHECK(newey_west_lags(100) == 4);
  CHECK(newey_west_lags(20000) == 12);
}

TEST_CASE("theoretical iid sigma with constant instruments") {
  ObservationSet data;
  data.choices.resize(2);
  for (auto& c : data.choices) {
    c.outcomes = Eigen::MatrixXd::Zero(6, 1);
    c.regressors = Eigen::MatrixXd::Zero(6, 1);
    c.instruments = Eigen::MatrixXd::Ones(6, 1);
  }
  const Eigen::MatrixXd sigma = theoretical_iid_sigma(0.5, data);
  CHECK((sigma - 0.25 * Eigen::MatrixXd::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

  // tau(1-tau) -> 0 at the edges
  CHECK(theoretical_iid_sigma(1e-8, data).norm() < 1e-7);
  CHECK(theoretical_iid_sigma(1.0 - 1e-8, data).norm() < 1e-7);
  CHECK_THROWS_AS(theoretical_iid_sigma(0.0, data), std::invalid_argument);
}

TEST_CASE("sample covariance of unsmoothed moments matches the quantile formula") {
  // DGP-1 at the truth: within 10% Frobenius of tau(1-tau) (1/n) sum ZZ'.
  const ObservationSet data = generate(Dgp::dgp1, 5000, 424242);
  const ParameterPoint theta0 = true_parameters(Dgp::dgp1);
  const Eigen::MatrixXd per_obs =
      unsmoothed_per_obs_moments(data, linear_location_model(), theta0);
  const CovarianceEstimate sample = covariance_iid(per_obs);
  const Eigen::MatrixXd theory = theoretical_iid_sigma(theta0.tau, data);
  const double rel = (sample.sigma - theory).norm() / theory.norm();
  CHECK(rel < 0.10);
}

TEST_CASE("efficient weight inverts well-conditioned matrices") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  CovarianceEstimate cov;
  cov.sigma = eye;
  CHECK((efficient_weight(cov, 0.0) - eye).cwiseAbs().maxCoeff() < 1e-14);

  cov.sigma = Eigen::Vector2d(2.0, 4.0).asDiagonal();
  const Eigen::MatrixXd w = efficient_weight(cov);
  CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w(1, 1) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(std::abs(w(0, 1)) < 1e-12);
}

TEST_CASE("efficient weight of a random SPD matrix is its inverse") {
  RngStream rng(9);
  Eigen::MatrixXd a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = rng.normal();
  CovarianceEstimate cov;
  cov.sigma = a * a.transpose() + Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd w = efficient_weight(cov, 0.0);
  CHECK((w * cov.sigma - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("efficient weight reports genuinely singular input") {
  CovarianceEstimate cov;
  cov.sigma = Eigen::MatrixXd::Zero(2, 2);
  try {
    efficient_weight(cov, 0.0);
    FAIL("expected conditioning_error");
  } catch (const conditioning_error& e) {
    CHECK(e.smallest_eigenvalue <= 0.0);
  }
}
