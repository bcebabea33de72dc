#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qgmm/bandwidth.hpp"
#include "qgmm/simulation.hpp"

using namespace qgmm;

TEST_CASE("fixed bandwidth is the identity on valid input") {
  CHECK(fixed_bandwidth(0.1) == 0.1);
  CHECK(fixed_bandwidth(1.0) == 1.0);
  CHECK(fixed_bandwidth(0.01) == 0.01);
  CHECK_THROWS_AS(fixed_bandwidth(0.0), std::invalid_argument);
  CHECK_THROWS_AS(fixed_bandwidth(-0.5), std::invalid_argument);
}

TEST_CASE("plug-in bandwidth lands in the expected range per design") {
  const StructuralModel model = linear_location_model();
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (int n : {1500, 3000, 5000}) {
      const double h1 =
          plugin_bandwidth(generate(Dgp::dgp1, n, seed), model, true_parameters(Dgp::dgp1));
      CHECK(h1 >= 0.92);
      CHECK(h1 <= 2.61);
      const double h2 =
          plugin_bandwidth(generate(Dgp::dgp2, n, seed), model, true_parameters(Dgp::dgp2));
      CHECK(h2 >= 6.0);
      CHECK(h2 <= 37.7);
    }
  }
}

TEST_CASE("plug-in bandwidth is scale equivariant") {
  const StructuralModel model = linear_location_model();
  ObservationSet data = generate(Dgp::dgp1, 2000, 10);
  const ParameterPoint pilot = true_parameters(Dgp::dgp1);
  const double h = plugin_bandwidth(data, model, pilot);

  // scale outcomes and beta by 10: every Lambda residual scales by 10
  ObservationSet scaled = data;
  for (auto& c : scaled.choices) c.outcomes *= 10.0;
  ParameterPoint pilot10 = pilot;
  pilot10.beta *= 10.0;
  const double h10 = plugin_bandwidth(scaled, model, pilot10);
  CHECK(h10 / h == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("plug-in bandwidth decreases in n") {
  const StructuralModel model = linear_location_model();
  const ParameterPoint pilot = true_parameters(Dgp::dgp1);
  double prev = 1e300;
  for (int n : {500, 5000, 50000}) {
    const double h = plugin_bandwidth(generate(Dgp::dgp1, n, 123), model, pilot);
    CHECK(h > 0.0);
    CHECK(h < prev);
    prev = h;
  }
}

TEST_CASE("plug-in bandwidth falls back on zero residual spread") {
  ObservationSet data;
  data.choices.resize(2);
  for (auto& c : data.choices) {
    c.outcomes = Eigen::MatrixXd::Constant(50, 1, 2.0);
    c.regressors = Eigen::MatrixXd::Zero(50, 1);
    c.instruments = Eigen::MatrixXd::Ones(50, 1);
  }
  ParameterPoint pilot;
  pilot.beta.resize(2);
  pilot.beta << 2.0, 0.0;  // Lambda identically zero
  pilot.tau = 0.5;
  CHECK(plugin_bandwidth(data, linear_location_model(), pilot) == 1e-3);
}

TEST_CASE("admissibility threshold follows the n^(-1/8) rate") {
  CHECK(admissible(0.1, 3000));        // 0.1 <= 10 * 3000^(-1/8) ~ 3.67
  CHECK_FALSE(admissible(100.0, 3000));
  CHECK(admissible(10.0, 1));          // threshold is exactly 10 at n = 1
  CHECK_FALSE(admissible(10.0 + 1e-9, 1));
  CHECK_THROWS_AS(admissible(1.0, 0), std::invalid_argument);
}

TEST_CASE("bandwidth choice parsing") {
  const BandwidthChoice plugin = BandwidthChoice::parse("plugin");
  CHECK(plugin.kind == BandwidthChoice::Kind::plugin);
  CHECK(plugin.describe() == "plugin");

  const BandwidthChoice fixed = BandwidthChoice::parse("fixed:0.25");
  CHECK(fixed.kind == BandwidthChoice::Kind::fixed);
  CHECK(fixed.value == 0.25);
  CHECK(fixed.describe() == "fixed:0.25");

  CHECK_THROWS_AS(BandwidthChoice::parse("fixed:-1"), std::invalid_argument);
  CHECK_THROWS_AS(BandwidthChoice::parse("fixed:abc"), std::invalid_argument);
  CHECK_THROWS_AS(BandwidthChoice::parse("nope"), std::invalid_argument);
}
