#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "qgmm/model.hpp"

namespace qgmm {

// Household-period panel for the intertemporal consumption application.
// log_returns holds one column per asset. Instruments are the twice-lagged
// consumption growth, the twice-lagged nominal return, the inflation rate,
// and a constant added at estimation time.
struct ConsumptionPanel {
  std::vector<long long> household_id;
  std::vector<int> period;
  Eigen::VectorXd consumption_growth;  // ln(c_{t+1}/c_t)
  Eigen::MatrixXd log_returns;         // rows x assets
  Eigen::VectorXd lag2_consumption_growth;
  Eigen::VectorXd lag2_nominal_return;
  Eigen::VectorXd inflation;

  int rows() const { return static_cast<int>(consumption_growth.size()); }
  int num_assets() const { return static_cast<int>(log_returns.cols()); }
};

// tau is the risk attitude; eis = 1/gamma always.
struct PreferenceEstimates {
  double tau = 0.5;
  double delta = 1.0;
  double gamma = 1.0;
  double eis = 1.0;
};

// Per asset j: Lambda_j = consumption_growth - b0 - b1 * ln R_j, estimated at
// quantile index q = 1 - tau. Affine in (b0, b1) with gradient (-1, -ln R_j).
StructuralModel euler_structural_model(int num_assets);

// Stacks the panel into per-asset choice blocks with the shared instrument
// set (1, lag2 consumption growth, lag2 nominal return, inflation).
ObservationSet to_observations(const ConsumptionPanel& panel);

// gamma = 1/b1, eis = b1, delta = exp(b0/b1), tau = 1 - q_hat.
// Requires b1 > 0.
PreferenceEstimates to_preferences(double b0, double b1, double q_hat);

struct PreferenceInference {
  PreferenceEstimates point;
  PreferenceEstimates se;
  PreferenceEstimates ci_low;
  PreferenceEstimates ci_high;
  int dropped = 0;  // draws with b1 <= 0
};

// Transforms bootstrap draws of (b0, b1, q) into preference space;
// SE = SD across transformed draws, CI = point +- 1.96 SE.
PreferenceInference preference_inference(const Eigen::MatrixXd& bootstrap_draws,
                                         const PreferenceEstimates& point);

// Synthetic two-asset panel on which the quantile restriction
// Q_{1-tau}[dc - b0 - b1 ln R_j | e] = 0 holds exactly per asset. The two
// assets carry different idiosyncratic volatilities, which is what pins the
// quantile level in estimation.
ConsumptionPanel synthetic_panel(int n, int T, const PreferenceEstimates& prefs,
                                 std::uint64_t seed);

// CSV with the fixed header household_id, period, consumption_growth,
// log_return_asset1, log_return_asset2, lag2_consumption_growth,
// lag2_nominal_return, inflation. Missing columns raise io_error naming the
// column; malformed cells are addressed by row and column.
ConsumptionPanel read_panel_csv(const std::string& path);
void write_panel_csv(const ConsumptionPanel& panel, const std::string& path);

}  // namespace qgmm
