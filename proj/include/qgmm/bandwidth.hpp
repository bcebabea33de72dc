#pragma once

#include <string>

#include "qgmm/model.hpp"

namespace qgmm {

// Identity on valid input; rejects h <= 0.
double fixed_bandwidth(double h);

// Gaussian-reference plug-in: h = c * sigma_Lambda * n^{-1/(2r-1)} with
// r = 4 and sigma_Lambda the pooled (per-choice centered) standard deviation
// of the Lambda residuals at the pilot point. Falls back to 1e-3 with a
// stderr warning when the residual spread is zero.
double plugin_bandwidth(const ObservationSet& data, const StructuralModel& model,
                        const ParameterPoint& theta_pilot);

// The same rule from a residual scale supplied directly.
double plugin_bandwidth_from_scale(double sigma_lambda, int n);

// Rate check h <= C n^{-1/(2r)} with C = 10; advisory, reported in
// diagnostics only.
bool admissible(double h, int n);

struct BandwidthChoice {
  enum class Kind { fixed, plugin };
  Kind kind = Kind::plugin;
  double value = 0.0;            // fixed bandwidth when kind == fixed
  bool freeze_in_bootstrap = false;

  // "plugin" or "fixed:<h>"
  static BandwidthChoice parse(const std::string& text);
  std::string describe() const;
};

}  // namespace qgmm
