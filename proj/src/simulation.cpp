#include "qgmm/simulation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "qgmm/errors.hpp"
#include "qgmm/estimator.hpp"
#include "qgmm/normal.hpp"
#include "qgmm/parallel.hpp"
#include "qgmm/rng.hpp"

namespace qgmm {

Dgp dgp_from_id(int id) {
  if (id == 1) return Dgp::dgp1;
  if (id == 2) return Dgp::dgp2;
  throw std::invalid_argument("dgp id must be 1 or 2, got " + std::to_string(id));
}

ObservationSet generate(Dgp dgp, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  RngStream rng(seed);

  ObservationSet data;
  data.choices.resize(2);
  for (auto& c : data.choices) {
    c.outcomes.resize(n, 1);
    c.regressors.resize(n, 1);
    c.instruments.resize(n, 2);
    c.instruments.col(0).setOnes();
  }

  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double z1 = rng.normal(4.0, 1.0);
    const double z2 = rng.normal(4.0, 1.0);
    const double d1 = z1 + u;
    const double d2 = z2 + u;

    double y1, y2;
    if (dgp == Dgp::dgp1) {
      y1 = normal_quantile(u) + 0.7 * d1;
      y2 = normal_quantile(0.7) + u * d2;
    } else {
      y1 = 5.0 * u + 5.0 * u * d1;
      y2 = (6.0 * u - 0.7) + (6.0 * u - 0.7) * d2;
    }

    data.choices[0].outcomes(i, 0) = y1;
    data.choices[0].regressors(i, 0) = d1;
    data.choices[0].instruments(i, 1) = z1;
    data.choices[1].outcomes(i, 0) = y2;
    data.choices[1].regressors(i, 0) = d2;
    data.choices[1].instruments(i, 1) = z2;
  }
  return data;
}

ParameterPoint true_parameters(Dgp dgp) {
  ParameterPoint p;
  p.beta.resize(2);
  if (dgp == Dgp::dgp1) {
    p.beta << normal_quantile(0.7), 0.7;
  } else {
    p.beta << 3.5, 3.5;
  }
  p.tau = 0.7;
  return p;
}

ReplicationSettings ReplicationSettings::defaults() {
  ReplicationSettings s;
  s.bandwidth.kind = BandwidthChoice::Kind::plugin;
  s.config.bounds = ParameterBounds::box(2, -10.0, 10.0);
  return s;
}

BiasRmseTable run_replications(Dgp dgp, const ReplicationSettings& settings) {
  if (settings.reps < 1) throw std::invalid_argument("run_replications: reps must be >= 1");
  const StructuralModel model = linear_location_model();
  const ParameterPoint theta0 = true_parameters(dgp);
  const Eigen::VectorXd truth = theta0.to_vector();
  const int p = theta0.dim();

  std::vector<Eigen::VectorXd> estimates(settings.reps);
  std::vector<char> ok(settings.reps, 0);
  parallel_for(settings.reps, settings.threads, [&](int r) {
    const std::uint64_t rep_seed = derive_seed(settings.seed, static_cast<std::uint64_t>(r));
    const ObservationSet data = generate(dgp, settings.n, rep_seed);
    AnnealConfig config = settings.config;
    config.seed = derive_seed(rep_seed, 1);
    try {
      const EstimateReport rep =
          estimate(data, model, settings.bandwidth, config, settings.cov_method);
      estimates[r] = rep.theta_hat.to_vector();
      ok[r] = 1;
    } catch (const std::exception&) {
      ok[r] = 0;
    }
  });

  int completed = 0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(p);
  for (int r = 0; r < settings.reps; ++r) {
    if (!ok[r]) continue;
    ++completed;
    const Eigen::VectorXd err = estimates[r] - truth;
    sum += err;
    sumsq += err.cwiseAbs2();
  }
  const int failures = settings.reps - completed;
  if (failures * 20 > settings.reps)
    throw harness_error("run_replications: " + std::to_string(failures) + " of " +
                        std::to_string(settings.reps) + " replications failed (>5%)");

  const Eigen::VectorXd bias = sum / completed;
  const Eigen::VectorXd rmse = (sumsq / completed).cwiseSqrt();

  BiasRmseTable table;
  table.dgp = static_cast<int>(dgp);
  table.n = settings.n;
  table.reps = settings.reps;
  table.failures = failures;
  table.bandwidth = settings.bandwidth.describe();
  // theta is (beta0, beta1, tau); the table reports (tau, beta1, beta0).
  table.params = {"tau", "beta1", "beta0"};
  table.bias = {bias(2), bias(1), bias(0)};
  table.rmse = {rmse(2), rmse(1), rmse(0)};
  return table;
}

std::string table_to_csv(const BiasRmseTable& table) {
  std::ostringstream os;
  os.precision(12);
  os << "dgp,n,reps,bandwidth,param,bias,rmse\n";
  for (std::size_t k = 0; k < table.params.size(); ++k)
    os << table.dgp << ',' << table.n << ',' << table.reps << ',' << table.bandwidth << ','
       << table.params[k] << ',' << table.bias[k] << ',' << table.rmse[k] << '\n';
  return os.str();
}

std::string table_to_json(const BiasRmseTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < table.params.size(); ++k)
    rows.push_back({{"dgp", table.dgp},
                    {"n", table.n},
                    {"reps", table.reps},
                    {"bandwidth", table.bandwidth},
                    {"param", table.params[k]},
                    {"bias", table.bias[k]},
                    {"rmse", table.rmse[k]}});
  nlohmann::json j{{"rows", rows}, {"failures", table.failures}};
  return j.dump(2);
}

}  // namespace qgmm
