#include "qgmm/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "qgmm/errors.hpp"
#include "qgmm/moments.hpp"
#include "qgmm/parallel.hpp"
#include "qgmm/rng.hpp"
#include "qgmm/smoothing.hpp"

namespace qgmm {

namespace {

constexpr double kZ95 = 1.959963984540054;  // Phi^-1(0.975)

// RNG substream tag for the stage-C search.
constexpr std::uint64_t kStageCStream = 0xC0;

void check_full_rank(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd, const char* where) {
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(sv.size() - 1) > sv(0) * 1e-12)) {
    std::vector<double> values(sv.data(), sv.data() + sv.size());
    throw identification_error(std::string(where) + ": moment Jacobian is rank deficient",
                               values);
  }
}

double pooled_lambda_sd(const ObservationSet& data, const StructuralModel& model,
                        const Eigen::VectorXd& beta) {
  Eigen::VectorXd lam;
  double ss = 0.0;
  long count = 0;
  for (const auto& block : data.choices) {
    lambda_values(block, model, beta, lam);
    const double mean = lam.mean();
    ss += (lam.array() - mean).square().sum();
    count += lam.size();
  }
  return std::sqrt(ss / count);
}

// Stage-A search criterion: each moment studentized by its quantile-implied
// null variance tau(1-tau) mean(Z_k^2). Under a plain identity weight the
// sample objective collapses toward the tau bounds, where the indicators
// saturate and the whole moment vector shrinks no matter the beta; the
// studentization removes that scale advantage while keeping the same zeros.
//
// The moments are affine in tau, g(beta, tau) = a(beta) - tau zbar, so tau
// can be profiled out in closed form per beta. The search scatters uniform
// beta draws with profiled tau to locate the basin, then anneals.
class StageACriterion {
 public:
  StageACriterion(const ObservationSet& data, const StructuralModel& model, double h)
      : data_(data), model_(model), h_(h) {
    const int q = data.stacked_dim();
    m2_.resize(q);
    zbar_.resize(q);
    int offset = 0;
    for (const auto& block : data.choices) {
      const int dz = static_cast<int>(block.instruments.cols());
      m2_.segment(offset, dz) = block.instruments.cwiseAbs2().colwise().mean();
      zbar_.segment(offset, dz) = block.instruments.colwise().mean();
      offset += dz;
    }
  }

  double operator()(const Eigen::VectorXd& theta) {
    smoothed_moment_vector(data_, model_, theta, h_, g_, ws_);
    const double tau = theta(theta.size() - 1);
    return (g_.cwiseAbs2().array() / m2_.array()).sum() / (tau * (1.0 - tau));
  }

  // Minimizes over tau in [lo, hi] for a fixed beta; returns (tau, value).
  std::pair<double, double> profile_tau(const Eigen::VectorXd& beta, double lo, double hi) {
    Eigen::VectorXd theta(beta.size() + 1);
    theta.head(beta.size()) = beta;
    theta(beta.size()) = 0.5;
    smoothed_moment_vector(data_, model_, theta, h_, g_, ws_);
    const Eigen::VectorXd a = g_ + 0.5 * zbar_;  // g(tau) = a - tau zbar

    const double c0 = (a.cwiseAbs2().array() / m2_.array()).sum();
    const double c1 = (a.cwiseProduct(zbar_).array() / m2_.array()).sum();
    const double c2 = (zbar_.cwiseAbs2().array() / m2_.array()).sum();
    auto value = [&](double tau) {
      return (c0 - 2.0 * c1 * tau + c2 * tau * tau) / (tau * (1.0 - tau));
    };

    double best_tau = lo;
    double best_val = value(lo);
    if (value(hi) < best_val) {
      best_tau = hi;
      best_val = value(hi);
    }
    // stationary points of N(tau)/(tau(1-tau)): (c2-2c1) tau^2 + 2c0 tau - c0 = 0
    const double qa = c2 - 2.0 * c1, qb = 2.0 * c0, qc = -c0;
    if (std::abs(qa) < 1e-300) {
      if (qb != 0.0) {
        const double root = -qc / qb;
        if (root > lo && root < hi && value(root) < best_val) {
          best_tau = root;
          best_val = value(root);
        }
      }
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        for (double root : {(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)}) {
          if (root > lo && root < hi && value(root) < best_val) {
            best_tau = root;
            best_val = value(root);
          }
        }
      }
    }
    return {best_tau, best_val};
  }

 private:
  const ObservationSet& data_;
  const StructuralModel& model_;
  double h_;
  Eigen::VectorXd m2_, zbar_;
  Eigen::VectorXd g_;
  MomentWorkspace ws_;
};

Objective stage_a_objective(const ObservationSet& data, const StructuralModel& model,
                            double h) {
  auto crit = std::make_shared<StageACriterion>(data, model, h);
  return [crit](const Eigen::VectorXd& theta) { return (*crit)(theta); };
}

// RNG substream tag for the stage-A scatter.
constexpr std::uint64_t kScatterStream = 0xA1;

}  // namespace

ParameterPoint initial_estimate(const ObservationSet& data, const StructuralModel& model,
                                double h, const AnnealConfig& config) {
  data.validate();
  config.validate();
  auto crit = std::make_shared<StageACriterion>(data, model, h);

  // Scatter phase: uniform beta draws with tau profiled out, plus the box
  // center. Candidates are kept per tau-bin (best in each), because the
  // saturated near-boundary regions otherwise crowd out interior candidates
  // whose basin depth only shows after a local polish.
  const int d_beta = static_cast<int>(config.bounds.beta_lower.size());
  const int scatter = std::max(400, 200 * d_beta);
  constexpr int kTauBins = 8;

  struct Candidate {
    Eigen::VectorXd theta;
    double value = std::numeric_limits<double>::infinity();
  };
  std::vector<Candidate> pool(kTauBins);
  const double tau_span = config.bounds.tau_upper - config.bounds.tau_lower;

  RngStream rng(derive_seed(config.seed, kScatterStream));
  Eigen::VectorXd beta(d_beta);
  Eigen::VectorXd theta(d_beta + 1);
  for (int s = 0; s <= scatter; ++s) {
    if (s == 0) {
      beta = 0.5 * (config.bounds.beta_lower + config.bounds.beta_upper);
    } else {
      for (int d = 0; d < d_beta; ++d)
        beta(d) = rng.uniform(config.bounds.beta_lower(d), config.bounds.beta_upper(d));
    }
    const auto [tau, value] =
        crit->profile_tau(beta, config.bounds.tau_lower, config.bounds.tau_upper);
    theta.head(d_beta) = beta;
    theta(d_beta) = tau;
    const int bin = std::min(
        kTauBins - 1,
        static_cast<int>(kTauBins * (tau - config.bounds.tau_lower) / tau_span));
    if (value < pool[bin].value) pool[bin] = {theta, value};
  }

  const Objective obj = [crit](const Eigen::VectorXd& theta) { return (*crit)(theta); };
  Eigen::VectorXd best;
  double f_best = std::numeric_limits<double>::infinity();
  for (const auto& c : pool) {
    if (!std::isfinite(c.value)) continue;
    const Eigen::VectorXd refined = polish(obj, c.theta, config.bounds, 1e-5);
    const double value = obj(refined);
    if (value < f_best) {
      f_best = value;
      best = refined;
    }
  }

  const Eigen::VectorXd rough = anneal(obj, config, best);
  return ParameterPoint::from_vector(
      polish(obj, rough, config.bounds, config.polish_tolerance));
}

Eigen::VectorXd newton_update(const Eigen::VectorXd& theta, const Eigen::VectorXd& g_bar,
                              const Eigen::MatrixXd& G, const Eigen::MatrixXd& Sigma_inv) {
  const Eigen::MatrixXd GtS = G.transpose() * Sigma_inv;
  return theta - (GtS * G).ldlt().solve(GtS * g_bar);
}

ParameterPoint one_step(const ObservationSet& data, const StructuralModel& model,
                        const ParameterPoint& theta_bar, double h,
                        CovarianceMethod cov_method, const ParameterBounds* bounds,
                        bool* clamped) {
  const MomentEvaluation ev = smoothed_moments(data, model, theta_bar, h);
  const Eigen::MatrixXd G = moment_jacobian(data, model, theta_bar, h);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  check_full_rank(svd, "one_step");

  const Eigen::MatrixXd S_inv = efficient_weight(covariance(ev.per_obs_moments, cov_method));
  Eigen::VectorXd theta = newton_update(theta_bar.to_vector(), ev.g_bar, G, S_inv);
  if (bounds != nullptr) theta = bounds->clamp(theta, clamped);
  else if (clamped != nullptr) *clamped = false;
  return ParameterPoint::from_vector(theta);
}

Eigen::MatrixXd asymptotic_covariance(const Eigen::MatrixXd& G_hat, const Eigen::MatrixXd& W,
                                      const Eigen::MatrixXd& Sigma_hat, int n) {
  if (G_hat.rows() != W.rows() || W.rows() != W.cols() || Sigma_hat.rows() != W.rows() ||
      Sigma_hat.cols() != W.cols())
    throw dimension_error("asymptotic_covariance: nonconformable inputs");
  if (n < 1) throw std::invalid_argument("asymptotic_covariance: n must be >= 1");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G_hat);
  check_full_rank(svd, "asymptotic_covariance");

  const Eigen::MatrixXd GtW = G_hat.transpose() * W;
  const Eigen::MatrixXd bread = (GtW * G_hat).ldlt().solve(
      Eigen::MatrixXd::Identity(G_hat.cols(), G_hat.cols()));
  const Eigen::MatrixXd meat = GtW * Sigma_hat * GtW.transpose();
  Eigen::MatrixXd cov = bread * meat * bread.transpose() / n;
  return 0.5 * (cov + cov.transpose());
}

namespace {

// Stages B and C given the stage-A point, plus the Theorem-2 covariance.
EstimateReport finish_pipeline(const ObservationSet& data, const StructuralModel& model,
                               const ParameterPoint& theta_bar, double stage_a_h, double h,
                               const AnnealConfig& config, CovarianceMethod cov_method) {
  EstimateReport report;
  report.bandwidth_used = h;
  report.stage_trace.push_back(
      {"initial", theta_bar.to_vector(),
       stage_a_objective(data, model, stage_a_h)(theta_bar.to_vector())});

  // Newton update; a degenerate Jacobian just forfeits the update. The GLS
  // step can also leave the basin outright when the weighted direction is
  // locally nonlinear, so an update that worsens the studentized criterion
  // is rejected in favor of the stage-A point.
  ParameterPoint theta_1s = theta_bar;
  try {
    const ParameterPoint candidate = one_step(data, model, theta_bar, h, cov_method,
                                              &config.bounds, &report.one_step_clamped);
    const Objective criterion = stage_a_objective(data, model, h);
    if (criterion(candidate.to_vector()) <= criterion(theta_bar.to_vector())) {
      theta_1s = candidate;
    } else {
      report.one_step_rejected = true;
    }
  } catch (const identification_error&) {
    report.one_step_skipped = true;
  }

  // Efficient weight from the one-step point, then re-minimize.
  const MomentEvaluation ev_1s = smoothed_moments(data, model, theta_1s, h);
  const Eigen::MatrixXd W = efficient_weight(covariance(ev_1s.per_obs_moments, cov_method));
  const Objective obj = make_gmm_objective(data, model, W, h);
  report.stage_trace.push_back({"one_step", theta_1s.to_vector(), obj(theta_1s.to_vector())});

  AnnealConfig stage_c = config;
  stage_c.seed = derive_seed(config.seed, kStageCStream);
  const Eigen::VectorXd rough = anneal(obj, stage_c, theta_1s.to_vector());
  const Eigen::VectorXd theta_2s = polish(obj, rough, config.bounds, config.polish_tolerance);

  report.theta_hat = ParameterPoint::from_vector(theta_2s);
  report.objective_value = obj(theta_2s);
  report.stage_trace.push_back({"two_step", theta_2s, report.objective_value});

  const MomentEvaluation ev_hat = smoothed_moments(data, model, report.theta_hat, h);
  const Eigen::MatrixXd Sigma = covariance(ev_hat.per_obs_moments, cov_method).sigma;
  const int p = model.d_beta + 1;
  try {
    const Eigen::MatrixXd G = moment_jacobian(data, model, report.theta_hat, h);
    report.asymptotic_cov = asymptotic_covariance(G, W, Sigma, data.n());
    report.se = report.asymptotic_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    report.ci_low = theta_2s - kZ95 * report.se;
    report.ci_high = theta_2s + kZ95 * report.se;
  } catch (const identification_error&) {
    report.inference_degenerate = true;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.asymptotic_cov = Eigen::MatrixXd::Constant(p, p, nan);
    report.se = Eigen::VectorXd::Constant(p, nan);
    report.ci_low = Eigen::VectorXd::Constant(p, nan);
    report.ci_high = Eigen::VectorXd::Constant(p, nan);
  }
  return report;
}

}  // namespace

EstimateReport two_step(const ObservationSet& data, const StructuralModel& model, double h,
                        const AnnealConfig& config, CovarianceMethod cov_method) {
  if (!(h > 0.0)) throw std::invalid_argument("two_step: bandwidth must be > 0");
  data.validate(/*require_two_choices=*/true);
  config.validate();
  // The stage-A search needs enough smoothing to keep the criterion surface
  // navigable; tiny final bandwidths still apply from stage B on.
  const double center_sd =
      pooled_lambda_sd(data, model, ParameterPoint::from_vector(config.bounds.center()).beta);
  const double stage_a_h =
      center_sd > 0.0
          ? std::max(h, 0.5 * plugin_bandwidth_from_scale(center_sd, data.n()))
          : h;
  const ParameterPoint theta_bar = initial_estimate(data, model, stage_a_h, config);
  return finish_pipeline(data, model, theta_bar, stage_a_h, h, config, cov_method);
}

EstimateReport estimate(const ObservationSet& data, const StructuralModel& model,
                        const BandwidthChoice& bandwidth, const AnnealConfig& config,
                        CovarianceMethod cov_method) {
  if (bandwidth.kind == BandwidthChoice::Kind::fixed)
    return two_step(data, model, fixed_bandwidth(bandwidth.value), config, cov_method);

  data.validate(/*require_two_choices=*/true);
  config.validate();
  // Plug-in: stage A doubles as the pilot for the bandwidth rule. It runs at
  // half the rule's value for the box-center residual scale; much smaller
  // pilot bandwidths leave the criterion surface step-quantized and the
  // candidate polish stalls on its plateaus.
  const double center_sd =
      pooled_lambda_sd(data, model, ParameterPoint::from_vector(config.bounds.center()).beta);
  const double h_pilot =
      center_sd > 0.0 ? 0.5 * plugin_bandwidth_from_scale(center_sd, data.n()) : 1e-3;
  const ParameterPoint theta_pilot = initial_estimate(data, model, h_pilot, config);
  const double h = plugin_bandwidth(data, model, theta_pilot);
  return finish_pipeline(data, model, theta_pilot, h_pilot, h, config, cov_method);
}

BootstrapResult bootstrap_inference(const ObservationSet& data, const StructuralModel& model,
                                    const BandwidthChoice& bandwidth, double full_sample_h,
                                    int B, std::uint64_t seed, const AnnealConfig& config,
                                    CovarianceMethod cov_method,
                                    const ParameterPoint& center, int threads) {
  if (B < 2) throw std::invalid_argument("bootstrap_inference: need B >= 2 draws");
  data.validate();
  const int n = data.n();
  const int p = center.dim();

  const bool freeze =
      bandwidth.freeze_in_bootstrap || bandwidth.kind == BandwidthChoice::Kind::fixed;

  std::vector<Eigen::VectorXd> results(B);
  std::vector<char> ok(B, 0);
  parallel_for(B, threads, [&](int b) {
    RngStream idx_rng = RngStream::derive(seed, static_cast<std::uint64_t>(b) * 2);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = idx_rng.uniform_int(n);
    const ObservationSet resampled = data.resample_rows(idx);

    AnnealConfig draw_config = config;
    draw_config.seed = derive_seed(seed, static_cast<std::uint64_t>(b) * 2 + 1);
    try {
      EstimateReport rep;
      if (freeze) {
        rep = two_step(resampled, model, full_sample_h, draw_config, cov_method);
      } else {
        rep = estimate(resampled, model, bandwidth, draw_config, cov_method);
      }
      results[b] = rep.theta_hat.to_vector();
      ok[b] = 1;
    } catch (const std::exception&) {
      ok[b] = 0;  // dropped, counted below
    }
  });

  BootstrapResult out;
  out.requested = B;
  for (int b = 0; b < B; ++b) out.completed += ok[b];
  out.failed = B - out.completed;
  if (out.failed * 10 > B)
    throw inference_error("bootstrap_inference: " + std::to_string(out.failed) + " of " +
                          std::to_string(B) + " draws failed (>10%)");

  out.draws.resize(out.completed, p);
  int row = 0;
  for (int b = 0; b < B; ++b)
    if (ok[b]) out.draws.row(row++) = results[b].transpose();

  const Eigen::RowVectorXd mean = out.draws.colwise().mean();
  Eigen::VectorXd var = Eigen::VectorXd::Zero(p);
  for (int r = 0; r < out.completed; ++r)
    var += (out.draws.row(r) - mean).cwiseAbs2().transpose();
  var /= std::max(1, out.completed - 1);
  out.se = var.cwiseSqrt();
  out.ci_low = center.to_vector() - kZ95 * out.se;
  out.ci_high = center.to_vector() + kZ95 * out.se;
  return out;
}

}  // namespace qgmm
