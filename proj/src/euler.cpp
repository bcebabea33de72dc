#include "qgmm/euler.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qgmm/errors.hpp"
#include "qgmm/normal.hpp"
#include "qgmm/rng.hpp"

namespace qgmm {

StructuralModel euler_structural_model(int num_assets) {
  if (num_assets < 2)
    throw std::invalid_argument(
        "euler_structural_model: joint tau estimation needs at least 2 assets");
  return linear_location_model();
}

ObservationSet to_observations(const ConsumptionPanel& panel) {
  const int n = panel.rows();
  const int m = panel.num_assets();
  if (m < 2) throw dimension_error("consumption panel must carry at least 2 assets");
  ObservationSet data;
  data.choices.resize(m);
  Eigen::MatrixXd z(n, 4);
  z.col(0).setOnes();
  z.col(1) = panel.lag2_consumption_growth;
  z.col(2) = panel.lag2_nominal_return;
  z.col(3) = panel.inflation;
  for (int j = 0; j < m; ++j) {
    auto& c = data.choices[j];
    c.outcomes = panel.consumption_growth;
    c.regressors = panel.log_returns.col(j);
    c.instruments = z;
  }
  data.validate();
  return data;
}

PreferenceEstimates to_preferences(double b0, double b1, double q_hat) {
  if (!(b1 > 0.0))
    throw std::invalid_argument(
        "to_preferences: slope must be positive (gamma > 0), got " + std::to_string(b1));
  PreferenceEstimates p;
  p.gamma = 1.0 / b1;
  p.eis = b1;
  p.delta = std::exp(b0 / b1);
  p.tau = 1.0 - q_hat;
  return p;
}

PreferenceInference preference_inference(const Eigen::MatrixXd& bootstrap_draws,
                                         const PreferenceEstimates& point) {
  if (bootstrap_draws.rows() < 2)
    throw inference_error("preference_inference: need at least 2 bootstrap draws");
  if (bootstrap_draws.cols() != 3)
    throw dimension_error("preference_inference: draws must have columns (b0, b1, q)");

  std::vector<Eigen::Vector4d> transformed;  // (tau, delta, gamma, eis)
  transformed.reserve(bootstrap_draws.rows());
  int dropped = 0;
  for (Eigen::Index r = 0; r < bootstrap_draws.rows(); ++r) {
    const double b1 = bootstrap_draws(r, 1);
    if (!(b1 > 0.0)) {
      ++dropped;
      continue;
    }
    const PreferenceEstimates p =
        to_preferences(bootstrap_draws(r, 0), b1, bootstrap_draws(r, 2));
    transformed.emplace_back(p.tau, p.delta, p.gamma, p.eis);
  }
  if (transformed.size() < 2)
    throw inference_error("preference_inference: fewer than 2 usable draws");

  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  for (const auto& t : transformed) mean += t;
  mean /= static_cast<double>(transformed.size());
  Eigen::Vector4d var = Eigen::Vector4d::Zero();
  for (const auto& t : transformed) var += (t - mean).cwiseAbs2();
  var /= static_cast<double>(transformed.size() - 1);
  const Eigen::Vector4d sd = var.cwiseSqrt();

  const double z95 = 1.959963984540054;
  PreferenceInference out;
  out.point = point;
  out.dropped = dropped;
  out.se = {sd(0), sd(1), sd(2), sd(3)};
  out.ci_low = {point.tau - z95 * sd(0), point.delta - z95 * sd(1),
                point.gamma - z95 * sd(2), point.eis - z95 * sd(3)};
  out.ci_high = {point.tau + z95 * sd(0), point.delta + z95 * sd(1),
                 point.gamma + z95 * sd(2), point.eis + z95 * sd(3)};
  return out;
}

ConsumptionPanel synthetic_panel(int n, int T, const PreferenceEstimates& prefs,
                                 std::uint64_t seed) {
  if (n < 1 || T < 1) throw std::invalid_argument("synthetic_panel: n and T must be >= 1");
  if (!(prefs.gamma > 0.0)) throw std::invalid_argument("synthetic_panel: gamma must be > 0");
  if (!(prefs.tau > 0.0 && prefs.tau < 1.0))
    throw std::invalid_argument("synthetic_panel: tau must lie in (0,1)");

  const double b1 = 1.0 / prefs.gamma;
  const double b0 = std::log(prefs.delta) / prefs.gamma;
  const double q = 1.0 - prefs.tau;
  const double zq = normal_quantile(q);

  // Consumption noise and asset-specific return noise; the spread between
  // the two asset volatilities separates the quantile level.
  const double s_eps = 0.05;
  const double sw[2] = {0.04, 0.10};
  double sigma_xi[2], shift[2];
  for (int j = 0; j < 2; ++j) {
    sigma_xi[j] = std::sqrt(s_eps * s_eps + b1 * b1 * sw[j] * sw[j]);
    shift[j] = sigma_xi[j] * zq / b1;
  }

  const int rows = n * T;
  ConsumptionPanel panel;
  panel.household_id.resize(rows);
  panel.period.resize(rows);
  panel.consumption_growth.resize(rows);
  panel.log_returns.resize(rows, 2);
  panel.lag2_consumption_growth.resize(rows);
  panel.lag2_nominal_return.resize(rows);
  panel.inflation.resize(rows);

  RngStream rng(seed);
  int r = 0;
  for (int h = 0; h < n; ++h) {
    for (int t = 0; t < T; ++t, ++r) {
      panel.household_id[r] = h + 1;
      panel.period[r] = t + 1;
      const double z_c = rng.normal(0.02, 0.02);
      const double z_r = rng.normal(0.05, 0.03);
      const double z_i = rng.normal(0.02, 0.01);
      // common return component driven by the information set
      const double m = 0.03 + 2.0 * (z_c - 0.02) + 1.0 * (z_r - 0.05) + 1.5 * (z_i - 0.02);
      const double eps = rng.normal();
      panel.lag2_consumption_growth(r) = z_c;
      panel.lag2_nominal_return(r) = z_r;
      panel.inflation(r) = z_i;
      for (int j = 0; j < 2; ++j)
        panel.log_returns(r, j) = m + sw[j] * rng.normal() + shift[j];
      panel.consumption_growth(r) = b0 + b1 * m + s_eps * eps;
    }
  }
  return panel;
}

namespace {

const char* const kPanelHeader[] = {
    "household_id",           "period",
    "consumption_growth",     "log_return_asset1",
    "log_return_asset2",      "lag2_consumption_growth",
    "lag2_nominal_return",    "inflation"};
constexpr int kPanelCols = 8;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, int row, const char* column) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    std::ostringstream os;
    os << "row " << row << ", column '" << column << "': cannot parse '" << cell << "'";
    throw io_error(os.str());
  }
}

}  // namespace

ConsumptionPanel read_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw io_error("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  std::vector<int> col(kPanelCols, -1);
  for (int k = 0; k < kPanelCols; ++k) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == kPanelHeader[k]) col[k] = static_cast<int>(c);
    if (col[k] < 0)
      throw io_error("'" + path + "': missing column '" + kPanelHeader[k] + "'");
  }

  std::vector<std::vector<double>> values(kPanelCols);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      std::ostringstream os;
      os << "row " << row << ": expected " << header.size() << " cells, got "
         << cells.size();
      throw io_error(os.str());
    }
    for (int k = 0; k < kPanelCols; ++k)
      values[k].push_back(parse_cell(cells[col[k]], row, kPanelHeader[k]));
  }
  const int rows = static_cast<int>(values[0].size());
  if (rows == 0) throw io_error("'" + path + "' has no data rows");

  ConsumptionPanel panel;
  panel.household_id.resize(rows);
  panel.period.resize(rows);
  panel.consumption_growth.resize(rows);
  panel.log_returns.resize(rows, 2);
  panel.lag2_consumption_growth.resize(rows);
  panel.lag2_nominal_return.resize(rows);
  panel.inflation.resize(rows);
  for (int r = 0; r < rows; ++r) {
    panel.household_id[r] = static_cast<long long>(values[0][r]);
    panel.period[r] = static_cast<int>(values[1][r]);
    panel.consumption_growth(r) = values[2][r];
    panel.log_returns(r, 0) = values[3][r];
    panel.log_returns(r, 1) = values[4][r];
    panel.lag2_consumption_growth(r) = values[5][r];
    panel.lag2_nominal_return(r) = values[6][r];
    panel.inflation(r) = values[7][r];
  }
  return panel;
}

void write_panel_csv(const ConsumptionPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  for (int k = 0; k < kPanelCols; ++k) out << (k ? "," : "") << kPanelHeader[k];
  out << '\n';
  out.precision(17);
  for (int r = 0; r < panel.rows(); ++r) {
    out << panel.household_id[r] << ',' << panel.period[r] << ','
        << panel.consumption_growth(r) << ',' << panel.log_returns(r, 0) << ','
        << panel.log_returns(r, 1) << ',' << panel.lag2_consumption_growth(r) << ','
        << panel.lag2_nominal_return(r) << ',' << panel.inflation(r) << '\n';
  }
  if (!out) throw io_error("failed while writing '" + path + "'");
}

}  // namespace qgmm
