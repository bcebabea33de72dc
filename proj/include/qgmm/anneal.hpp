#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "qgmm/model.hpp"

namespace qgmm {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct AnnealConfig {
  int max_iterations = 20000;  // total objective evaluations across restarts
  double initial_temperature = 1.0;
  // Geometric, applied per proposal; the default reaches ~1e-10 of the
  // initial temperature within one restart's share of the default budget.
  double cooling_rate = 0.9965;
  int restarts = 3;
  ParameterBounds bounds;
  std::uint64_t seed = 0;
  double polish_tolerance = 1e-10;

  void validate() const;
};

// M_n(theta)' W M_n(theta) with smoothed moments; >= 0 for any SPD W.
double gmm_objective(const ObservationSet& data, const StructuralModel& model,
                     const ParameterPoint& theta, const Eigen::MatrixXd& W, double h);

// Closure over (data, model, W, h) with its own moment workspace. data and
// model are held by reference and must outlive the objective. Not shareable
// across threads; make one per worker.
Objective make_gmm_objective(const ObservationSet& data, const StructuralModel& model,
                             const Eigen::MatrixXd& W, double h);

// Simulated annealing over the config box: geometric cooling, uniform
// box-scaled proposals shrinking with temperature, Metropolis acceptance.
// Deterministic given config.seed; never returns a point worse than start.
Eigen::VectorXd anneal(const Objective& objective, const AnnealConfig& config,
                       const Eigen::VectorXd& start);

// Nelder-Mead descent clamped to bounds; stops when the simplex diameter
// falls below tol. Never increases the objective.
Eigen::VectorXd polish(const Objective& objective, const Eigen::VectorXd& theta0,
                       const ParameterBounds& bounds, double tol);

// ParameterPoint convenience wrappers.
ParameterPoint anneal(const Objective& objective, const AnnealConfig& config,
                      const ParameterPoint& start);
ParameterPoint polish(const Objective& objective, const ParameterPoint& theta0,
                      const ParameterBounds& bounds, double tol);

}  // namespace qgmm
