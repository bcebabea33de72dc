#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "qgmm/errors.hpp"
#include "qgmm/estimator.hpp"
#include "qgmm/euler.hpp"
#include "qgmm/moments.hpp"
#include "qgmm/rng.hpp"

using namespace qgmm;

namespace {

PreferenceEstimates prefs_of(double tau, double delta, double gamma) {
  PreferenceEstimates p;
  p.tau = tau;
  p.delta = delta;
  p.gamma = gamma;
  p.eis = 1.0 / gamma;
  return p;
}

// tau-quantile of a discrete sample: inf{ w : P(W <= w) >= tau }
double discrete_quantile(std::vector<double> w, double tau) {
  std::sort(w.begin(), w.end());
  const double n = static_cast<double>(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    if ((i + 1) / n >= tau) return w[i];
  return w.back();
}

}  // namespace

TEST_CASE("euler structural model is the affine location form") {
  const StructuralModel model = euler_structural_model(2);
  REQUIRE(model.d_beta == 2);
  Eigen::RowVectorXd y(1), x(1);
  y << 0.04;
  x << 0.02;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
  CHECK(model.lambda(y, x, b) == 0.04);  // b = 0 leaves consumption growth
  b << 0.01, 0.5;
  CHECK(model.lambda(y, x, b) == doctest::Approx(0.04 - 0.01 - 0.5 * 0.02).epsilon(1e-15));
  const Eigen::VectorXd grad = model.lambda_gradient(y, x, b);
  CHECK(grad(0) == -1.0);
  CHECK(grad(1) == -0.02);
  CHECK_THROWS_AS(euler_structural_model(1), std::invalid_argument);
}

TEST_CASE("log-linearized restriction is equivalent to the level Euler equation") {
  // three-atom joint distribution of (consumption growth, log return)
  const double tau_pref = 0.4;
  const double gamma = 1.25, delta = 1.02;
  const double b1 = 1.0 / gamma, b0 = std::log(delta) / gamma;

  // X = dc - b0 - b1 lnR takes atoms {-0.2, 0, 0.3}; its (1-tau)-quantile is 0
  const std::vector<double> x_atoms = {-0.2, 0.0, 0.3};
  std::vector<double> dc(3), lnr(3);
  for (int i = 0; i < 3; ++i) {
    lnr[i] = 0.05 + 0.1 * i;
    dc[i] = x_atoms[i] + b0 + b1 * lnr[i];
  }
  CHECK(discrete_quantile(x_atoms, 1.0 - tau_pref) == 0.0);

  // level form: W = delta (c'/c)^(-gamma) R; its tau-quantile is 1
  std::vector<double> w(3);
  for (int i = 0; i < 3; ++i) w[i] = delta * std::exp(-gamma * dc[i]) * std::exp(lnr[i]);
  CHECK(discrete_quantile(w, tau_pref) == doctest::Approx(1.0).epsilon(1e-12));

  // monotone map check: W = exp(-gamma X) reverses order, flipping the index
  for (int i = 0; i < 3; ++i)
    CHECK(w[i] == doctest::Approx(std::exp(-gamma * x_atoms[i])).epsilon(1e-12));
}

TEST_CASE("preference transform and its inverse") {
  const PreferenceEstimates p = to_preferences(0.0, 0.829371, 0.6);
  CHECK(p.gamma == doctest::Approx(1.205733).epsilon(1e-5));
  CHECK(p.eis == doctest::Approx(0.829371).epsilon(1e-12));
  CHECK(p.delta == 1.0);  // zero intercept
  CHECK(p.tau == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(p.eis == 1.0 / p.gamma);  // exact by construction

  const double delta_target = 1.197456;
  const PreferenceEstimates q =
      to_preferences(0.829371 * std::log(delta_target), 0.829371, 0.6);
  CHECK(q.delta == doctest::Approx(delta_target).epsilon(1e-12));

  // round trip back to (b0, b1, q)
  const double b1 = q.eis;
  const double b0 = std::log(q.delta) * b1 / 1.0;
  CHECK(b1 == doctest::Approx(0.829371).epsilon(1e-12));
  CHECK(b0 / b1 == doctest::Approx(std::log(delta_target)).epsilon(1e-12));

  CHECK_THROWS_AS(to_preferences(0.0, 0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(to_preferences(0.0, -0.5, 0.5), std::invalid_argument);
}

TEST_CASE("preference inference over bootstrap draws") {
  // identical draws collapse every SE to zero
  Eigen::MatrixXd same(5, 3);
  for (int r = 0; r < 5; ++r) same.row(r) << 0.1, 0.8, 0.6;
  const PreferenceEstimates point = to_preferences(0.1, 0.8, 0.6);
  const PreferenceInference flat = preference_inference(same, point);
  CHECK(flat.se.tau == 0.0);
  CHECK(flat.se.delta == 0.0);
  CHECK(flat.se.gamma == 0.0);
  CHECK(flat.se.eis == 0.0);
  CHECK(flat.dropped == 0);

  // tight cluster: SE(eis) tracks the SD of the slope draws and SE(gamma)
  // is amplified by roughly gamma^2 (delta method)
  RngStream rng(8);
  const int B = 4000;
  Eigen::MatrixXd draws(B, 3);
  for (int r = 0; r < B; ++r)
    draws.row(r) << rng.normal(0.0, 0.005), rng.normal(0.83, 0.01), rng.normal(0.6, 0.01);
  const PreferenceInference inf = preference_inference(draws, to_preferences(0.0, 0.83, 0.6));
  double slope_sd = 0.0, slope_mean = draws.col(1).mean();
  for (int r = 0; r < B; ++r) slope_sd += std::pow(draws(r, 1) - slope_mean, 2);
  slope_sd = std::sqrt(slope_sd / (B - 1));
  CHECK(inf.se.eis == doctest::Approx(slope_sd).epsilon(1e-12));
  const double gamma = 1.0 / 0.83;
  CHECK(inf.se.gamma / inf.se.eis == doctest::Approx(gamma * gamma).epsilon(0.05));
  CHECK(inf.ci_low.tau < inf.ci_high.tau);

  // non-positive slopes are dropped and counted
  Eigen::MatrixXd with_bad = draws;
  with_bad(0, 1) = -0.2;
  with_bad(1, 1) = 0.0;
  const PreferenceInference dropped =
      preference_inference(with_bad, to_preferences(0.0, 0.83, 0.6));
  CHECK(dropped.dropped == 2);

  CHECK_THROWS_AS(preference_inference(Eigen::MatrixXd::Ones(1, 3), point),
                  inference_error);
}

TEST_CASE("synthetic panel satisfies the flipped quantile restriction") {
  const PreferenceEstimates prefs = prefs_of(0.4, 1.0, 1.2);
  const ConsumptionPanel panel = synthetic_panel(5000, 10, prefs, 99);
  REQUIRE(panel.rows() == 50000);
  REQUIRE(panel.num_assets() == 2);

  const double b1 = 1.0 / prefs.gamma;
  const double b0 = std::log(prefs.delta) / prefs.gamma;
  for (int j = 0; j < 2; ++j) {
    int below = 0;
    for (int r = 0; r < panel.rows(); ++r) {
      const double lam =
          panel.consumption_growth(r) - b0 - b1 * panel.log_returns(r, j);
      if (lam <= 0.0) ++below;
    }
    const double freq = static_cast<double>(below) / panel.rows();
    CHECK(freq == doctest::Approx(1.0 - prefs.tau).epsilon(0.02 / 0.6));
  }

  // determinism
  const ConsumptionPanel again = synthetic_panel(5000, 10, prefs, 99);
  CHECK((panel.consumption_growth - again.consumption_growth).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(synthetic_panel(0, 5, prefs, 1), std::invalid_argument);
  CHECK_THROWS_AS(synthetic_panel(5, 5, prefs_of(0.4, 1.0, -1.0), 1),
                  std::invalid_argument);
}

TEST_CASE("panel stacks into two choice blocks with shared instruments") {
  const ConsumptionPanel panel = synthetic_panel(50, 4, prefs_of(0.45, 1.0, 1.5), 3);
  const ObservationSet data = to_observations(panel);
  REQUIRE(data.num_choices() == 2);
  CHECK(data.n() == 200);
  CHECK(data.stacked_dim() == 8);
  CHECK(data.choices[0].instruments.col(0).minCoeff() == 1.0);
  CHECK((data.choices[0].instruments - data.choices[1].instruments)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((data.choices[0].outcomes - data.choices[1].outcomes).cwiseAbs().maxCoeff() ==
        0.0);  // consumption growth is common across assets
}

TEST_CASE("panel csv round trip and addressed errors") {
  const ConsumptionPanel panel = synthetic_panel(20, 3, prefs_of(0.4, 1.02, 1.1), 7);
  const std::string path = "/tmp/qgmm_panel_test.csv";
  write_panel_csv(panel, path);
  const ConsumptionPanel back = read_panel_csv(path);
  REQUIRE(back.rows() == panel.rows());
  CHECK((back.consumption_growth - panel.consumption_growth).cwiseAbs().maxCoeff() <
        1e-14);
  CHECK((back.log_returns - panel.log_returns).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(back.household_id == panel.household_id);

  // missing column named in the error
  {
    std::FILE* f = std::fopen("/tmp/qgmm_bad_header.csv", "w");
    std::fputs("household_id,period,consumption_growth,log_return_asset1\n1,1,0,0\n", f);
    std::fclose(f);
    try {
      read_panel_csv("/tmp/qgmm_bad_header.csv");
      FAIL("expected io_error");
    } catch (const io_error& e) {
      CHECK(std::string(e.what()).find("log_return_asset2") != std::string::npos);
    }
  }
  // malformed cell addressed by row and column
  {
    std::FILE* f = std::fopen("/tmp/qgmm_bad_cell.csv", "w");
    std::fputs(
        "household_id,period,consumption_growth,log_return_asset1,log_return_asset2,"
        "lag2_consumption_growth,lag2_nominal_return,inflation\n"
        "1,1,0.01,0.02,0.03,0.0,0.0,0.0\n"
        "2,1,oops,0.02,0.03,0.0,0.0,0.0\n",
        f);
    std::fclose(f);
    try {
      read_panel_csv("/tmp/qgmm_bad_cell.csv");
      FAIL("expected io_error");
    } catch (const io_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("row 3") != std::string::npos);
      CHECK(msg.find("consumption_growth") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(read_panel_csv("/tmp/does_not_exist_qgmm.csv"), io_error);
}

TEST_CASE("degenerate returns break identification") {
  // the same constant return on both assets makes the slope column a
  // multiple of the intercept column
  ConsumptionPanel panel = synthetic_panel(100, 5, prefs_of(0.4, 1.0, 1.2), 17);
  panel.log_returns.col(0).setConstant(0.03);
  panel.log_returns.col(1).setConstant(0.03);
  const ObservationSet data = to_observations(panel);
  const StructuralModel model = euler_structural_model(2);

  ParameterPoint pilot;
  pilot.beta = Eigen::VectorXd::Zero(2);
  pilot.tau = 0.5;
  CHECK_THROWS_AS(one_step(data, model, pilot, 0.05, CovarianceMethod::iid),
                  identification_error);

  AnnealConfig config;
  config.bounds = ParameterBounds::box(2, -2.0, 2.0);
  config.seed = 4;
  config.max_iterations = 1500;
  config.restarts = 1;
  const EstimateReport report = two_step(data, model, 0.05, config);
  CHECK(report.inference_degenerate);  // rank-deficient jacobian at theta_hat
}

TEST_CASE("synthetic panel round trip recovers the preferences roughly") {
  // light version of the acceptance run: n*T = 2500, loose tolerances
  const PreferenceEstimates prefs = prefs_of(0.4, 1.0, 1.2);
  const ConsumptionPanel panel = synthetic_panel(500, 5, prefs, 2024);
  const ObservationSet data = to_observations(panel);
  const StructuralModel model = euler_structural_model(2);

  AnnealConfig config;
  config.bounds.beta_lower = Eigen::VectorXd::Constant(2, -2.0);
  config.bounds.beta_upper = Eigen::VectorXd::Constant(2, 2.0);
  config.bounds.beta_lower(1) = 0.01;  // slope must stay positive
  config.bounds.beta_upper(1) = 3.0;
  config.seed = 31;
  config.max_iterations = 6000;
  config.restarts = 2;

  const EstimateReport report =
      estimate(data, model, BandwidthChoice::parse("plugin"), config);
  const PreferenceEstimates rec =
      to_preferences(report.theta_hat.beta(0), report.theta_hat.beta(1),
                     report.theta_hat.tau);
  MESSAGE("recovered tau=", rec.tau, " delta=", rec.delta, " eis=", rec.eis);
  CHECK(std::abs(rec.tau - prefs.tau) < 0.08);
  CHECK(std::abs(rec.eis - prefs.eis) < 0.25);
  CHECK(std::abs(rec.delta - prefs.delta) < 0.25);
}
