#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qgmm/errors.hpp"
#include "qgmm/normal.hpp"
#include "qgmm/rng.hpp"
#include "qgmm/simulation.hpp"

using namespace qgmm;

TEST_CASE("normal quantile matches a bisection-on-erf oracle") {
  for (double p : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999}) {
    // oracle: solve normal_cdf(x) = p by bisection on erfc
    double lo = -10, hi = 10;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    CHECK(normal_quantile(p) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));
  }
  CHECK(normal_quantile(0.7) == doctest::Approx(0.524400512708041).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(normal_quantile(1.0), std::domain_error);
}

TEST_CASE("generate reproduces the structural equations exactly") {
  for (Dgp dgp : {Dgp::dgp1, Dgp::dgp2}) {
    const ObservationSet data = generate(dgp, 500, 77);
    REQUIRE(data.num_choices() == 2);
    REQUIRE(data.n() == 500);
    for (int i = 0; i < data.n(); ++i) {
      const double y1 = data.choices[0].outcomes(i, 0);
      const double d1 = data.choices[0].regressors(i, 0);
      const double y2 = data.choices[1].outcomes(i, 0);
      const double d2 = data.choices[1].regressors(i, 0);
      // invert each asset's equation for the rank; both recover the same U
      double u1, u2;
      if (dgp == Dgp::dgp1) {
        u1 = normal_cdf(y1 - 0.7 * d1);
        u2 = (y2 - normal_quantile(0.7)) / d2;
      } else {
        u1 = (y1 / (1.0 + d1)) / 5.0;
        u2 = ((y2 / (1.0 + d2)) + 0.7) / 6.0;
      }
      CHECK(u1 == doctest::Approx(u2).epsilon(1e-9));
      CHECK(u1 > 0.0);
      CHECK(u1 < 1.0);
      // regressor built from the stored instrument and the rank
      CHECK(d1 == doctest::Approx(data.choices[0].instruments(i, 1) + u1).epsilon(1e-9));
    }
    // instruments carry the constant first
    CHECK(data.choices[0].instruments.col(0).minCoeff() == 1.0);
    CHECK(data.choices[0].instruments.col(0).maxCoeff() == 1.0);
  }
}

TEST_CASE("instrument law has mean 4 and the regressor is endogenous") {
  const int n = 100000;
  const ObservationSet data = generate(Dgp::dgp1, n, 5);
  CHECK(data.choices[0].instruments.col(1).mean() == doctest::Approx(4.0).epsilon(0.005));
  CHECK(data.choices[1].instruments.col(1).mean() == doctest::Approx(4.0).epsilon(0.005));

  // U = D - Z; corr(D, U) = sd(U)/sd(D) ~ 0.28 by construction
  const Eigen::VectorXd d = data.choices[0].regressors.col(0);
  const Eigen::VectorXd u = d - data.choices[0].instruments.col(1);
  const Eigen::VectorXd dc = d.array() - d.mean();
  const Eigen::VectorXd uc = u.array() - u.mean();
  const double corr = dc.dot(uc) / std::sqrt(dc.squaredNorm() * uc.squaredNorm());
  CHECK(corr > 0.2);
  CHECK(corr == doctest::Approx(0.28).epsilon(0.1));
}

TEST_CASE("structural quantile property holds within instrument bins") {
  const int n = 100000;
  const ObservationSet data = generate(Dgp::dgp1, n, 21);
  const ParameterPoint theta0 = true_parameters(Dgp::dgp1);
  // P(Y <= b0 + b1 D | z bin) ~ 0.7 per quartile bin of the instrument
  for (int j = 0; j < 2; ++j) {
    const auto& c = data.choices[j];
    for (int bin = 0; bin < 4; ++bin) {
      const double lo = 4.0 + (bin - 2) * 0.6745;  // quartiles of N(4,1)
      const double hi = bin == 3 ? 1e300 : 4.0 + (bin - 1) * 0.6745;
      int count = 0, below = 0;
      for (int i = 0; i < n; ++i) {
        const double z = c.instruments(i, 1);
        if (z < (bin == 0 ? -1e300 : lo) || z >= hi) continue;
        ++count;
        const double fitted = theta0.beta(0) + theta0.beta(1) * c.regressors(i, 0);
        if (c.outcomes(i, 0) <= fitted) ++below;
      }
      REQUIRE(count > 1000);
      CHECK(static_cast<double>(below) / count == doctest::Approx(0.7).epsilon(0.03));
    }
  }
}

TEST_CASE("true parameters per design") {
  const ParameterPoint p1 = true_parameters(Dgp::dgp1);
  CHECK(p1.beta(0) == doctest::Approx(normal_quantile(0.7)).epsilon(1e-15));
  CHECK(p1.beta(1) == 0.7);
  CHECK(p1.tau == 0.7);

  const ParameterPoint p2 = true_parameters(Dgp::dgp2);
  CHECK(p2.beta(0) == 3.5);
  CHECK(p2.beta(1) == 3.5);
  CHECK(p2.tau == 0.7);
  // the two coefficient curves cross exactly at u = 0.7
  CHECK(5.0 * 0.7 == doctest::Approx(3.5));
  CHECK(6.0 * 0.7 - 0.7 == doctest::Approx(3.5));
}

TEST_CASE("generate is deterministic and n is validated") {
  const ObservationSet a = generate(Dgp::dgp2, 100, 33);
  const ObservationSet b = generate(Dgp::dgp2, 100, 33);
  CHECK((a.choices[0].outcomes - b.choices[0].outcomes).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.choices[1].instruments - b.choices[1].instruments).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(generate(Dgp::dgp1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(dgp_from_id(3), std::invalid_argument);
}

TEST_CASE("run_replications tabulates bias and rmse") {
  ReplicationSettings s = ReplicationSettings::defaults();
  s.n = 400;
  s.reps = 6;
  s.seed = 11;
  s.bandwidth = BandwidthChoice::parse("fixed:1");
  s.config.max_iterations = 3000;
  s.config.restarts = 1;
  const BiasRmseTable table = run_replications(Dgp::dgp1, s);

  REQUIRE(table.params.size() == 3);
  CHECK(table.params[0] == "tau");
  CHECK(table.params[1] == "beta1");
  CHECK(table.params[2] == "beta0");
  CHECK(table.failures == 0);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::isfinite(table.bias[k]));
    CHECK(table.rmse[k] >= std::abs(table.bias[k]) - 1e-15);
  }
  CHECK(std::abs(table.bias[0]) < 0.15);  // tau roughly centered even at n=400

  // identical settings give an identical table
  const BiasRmseTable again = run_replications(Dgp::dgp1, s);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(table.bias[k] == again.bias[k]);
    CHECK(table.rmse[k] == again.rmse[k]);
  }
}

TEST_CASE("single replication collapses rmse to |bias|") {
  ReplicationSettings s = ReplicationSettings::defaults();
  s.n = 300;
  s.reps = 1;
  s.seed = 3;
  s.bandwidth = BandwidthChoice::parse("fixed:1");
  s.config.max_iterations = 2000;
  s.config.restarts = 1;
  const BiasRmseTable table = run_replications(Dgp::dgp2, s);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(table.rmse[k] == doctest::Approx(std::abs(table.bias[k])).epsilon(1e-12));
}

TEST_CASE("table emitters produce the declared layout") {
  BiasRmseTable t;
  t.dgp = 1;
  t.n = 1500;
  t.reps = 10;
  t.failures = 0;
  t.bandwidth = "plugin";
  t.params = {"tau", "beta1", "beta0"};
  t.bias = {0.01, -0.002, 0.03};
  t.rmse = {0.05, 0.02, 0.15};

  const std::string csv = table_to_csv(t);
  CHECK(csv.find("dgp,n,reps,bandwidth,param,bias,rmse") == 0);
  CHECK(csv.find("1,1500,10,plugin,tau,0.01,0.05") != std::string::npos);
  CHECK(csv.find("beta0") != std::string::npos);

  const std::string json = table_to_json(t);
  CHECK(json.find("\"param\": \"tau\"") != std::string::npos);
  CHECK(json.find("\"failures\": 0") != std::string::npos);
}
