#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qgmm/anneal.hpp"
#include "qgmm/bandwidth.hpp"
#include "qgmm/covariance.hpp"
#include "qgmm/model.hpp"

namespace qgmm {

// The two Monte Carlo designs. Both stack two choices whose structural
// quantile functions cross exactly at tau = 0.7; design 2 keeps them close
// everywhere else, which makes it the weakly separated stress case.
enum class Dgp { dgp1 = 1, dgp2 = 2 };

Dgp dgp_from_id(int id);

// Two-choice sample of size n. Instruments are (1, Z_ji) with
// Z_ji ~ N(4, 1) drawn independently per choice; regressors D_ji = Z_ji + U_i
// are endogenous through the shared rank. One uniform rank U_i drives both
// choices, so the stacked moment covariance at the truth is
// tau(1-tau) E[Z_i Z_i'].
ObservationSet generate(Dgp dgp, int n, std::uint64_t seed);

// (beta_0, beta_1, tau): design 1 -> (Phi^-1(0.7), 0.7, 0.7),
// design 2 -> (3.5, 3.5, 0.7).
ParameterPoint true_parameters(Dgp dgp);

struct ReplicationSettings {
  int n = 1500;
  int reps = 100;
  BandwidthChoice bandwidth{};
  std::uint64_t seed = 0;
  int threads = 0;
  AnnealConfig config;
  CovarianceMethod cov_method = CovarianceMethod::iid;

  static ReplicationSettings defaults();
};

// Bias and RMSE per parameter, reported in the order (tau, beta1, beta0).
struct BiasRmseTable {
  int dgp = 1;
  int n = 0;
  int reps = 0;
  int failures = 0;
  std::string bandwidth;
  std::vector<std::string> params;
  std::vector<double> bias;
  std::vector<double> rmse;
};

// Runs `reps` independent replications (parallel, order-stable reduction):
// generate with a derived seed, estimate, tabulate. Failed replications are
// excluded and counted; more than 5% failures raises harness_error.
BiasRmseTable run_replications(Dgp dgp, const ReplicationSettings& settings);

// CSV with columns (dgp, n, reps, bandwidth, param, bias, rmse).
std::string table_to_csv(const BiasRmseTable& table);
// JSON mirror of the same rows.
std::string table_to_json(const BiasRmseTable& table);

}  // namespace qgmm
