#include "qgmm/anneal.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "qgmm/errors.hpp"
#include "qgmm/moments.hpp"
#include "qgmm/rng.hpp"

namespace qgmm {

void AnnealConfig::validate() const {
  bounds.validate();
  if (max_iterations < 1) throw std::invalid_argument("anneal: max_iterations must be >= 1");
  if (!(cooling_rate > 0.0 && cooling_rate < 1.0))
    throw std::invalid_argument("anneal: cooling_rate must lie in (0,1)");
  if (!(initial_temperature > 0.0))
    throw std::invalid_argument("anneal: initial_temperature must be > 0");
  if (restarts < 1) throw std::invalid_argument("anneal: restarts must be >= 1");
}

double gmm_objective(const ObservationSet& data, const StructuralModel& model,
                     const ParameterPoint& theta, const Eigen::MatrixXd& W, double h) {
  data.validate();
  const int q = data.stacked_dim();
  if (W.rows() != q || W.cols() != q) {
    std::ostringstream os;
    os << "gmm_objective: weighting matrix is " << W.rows() << "x" << W.cols()
       << ", moments have dimension " << q;
    throw dimension_error(os.str());
  }
  MomentWorkspace ws;
  Eigen::VectorXd g;
  smoothed_moment_vector(data, model, theta.to_vector(), h, g, ws);
  return g.dot(W * g);
}

Objective make_gmm_objective(const ObservationSet& data, const StructuralModel& model,
                             const Eigen::MatrixXd& W, double h) {
  data.validate();
  const int q = data.stacked_dim();
  if (W.rows() != q || W.cols() != q)
    throw dimension_error("make_gmm_objective: weighting matrix dimension mismatch");
  auto ws = std::make_shared<MomentWorkspace>();
  auto g = std::make_shared<Eigen::VectorXd>();
  return [&data, &model, W, h, ws, g](const Eigen::VectorXd& theta) {
    smoothed_moment_vector(data, model, theta, h, *g, *ws);
    return g->dot(W * (*g));
  };
}

namespace {

double checked_eval(const Objective& f, const Eigen::VectorXd& theta) {
  const double v = f(theta);
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "objective returned non-finite value at theta = [";
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      os << (i ? ", " : "") << theta(i);
    os << "]";
    throw std::runtime_error(os.str());
  }
  return v;
}

}  // namespace

Eigen::VectorXd anneal(const Objective& objective, const AnnealConfig& config,
                       const Eigen::VectorXd& start) {
  config.validate();
  const Eigen::VectorXd lo = config.bounds.lower_vector();
  const Eigen::VectorXd hi = config.bounds.upper_vector();
  if (start.size() != lo.size() || !config.bounds.contains(start))
    throw std::invalid_argument("anneal: start point outside bounds");

  RngStream rng(config.seed);
  const Eigen::VectorXd halfwidth = 0.5 * (hi - lo);

  Eigen::VectorXd best = start;
  double f_best = checked_eval(objective, start);
  // Temperatures live on the scale of the start objective.
  const double f_ref = std::max(std::abs(f_best), 1e-12);

  const int per_restart = std::max(1, config.max_iterations / config.restarts);
  for (int r = 0; r < config.restarts; ++r) {
    Eigen::VectorXd cur = best;
    double f_cur = f_best;
    // Reheat each restart from the incumbent, progressively cooler.
    double temp = config.initial_temperature * f_ref * std::pow(0.3, r);
    const double temp0 = config.initial_temperature * f_ref;
    Eigen::VectorXd prop(cur.size());
    for (int it = 0; it < per_restart; ++it) {
      const double scale = std::sqrt(std::min(1.0, temp / temp0));
      for (Eigen::Index d = 0; d < cur.size(); ++d) {
        const double step = halfwidth(d) * scale * rng.uniform(-1.0, 1.0);
        prop(d) = std::clamp(cur(d) + step, lo(d), hi(d));
      }
      const double f_prop = checked_eval(objective, prop);
      const double delta = f_prop - f_cur;
      if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temp)) {
        cur = prop;
        f_cur = f_prop;
        if (f_cur < f_best) {
          best = cur;
          f_best = f_cur;
        }
      }
      temp *= config.cooling_rate;
    }
  }
  return best;
}

Eigen::VectorXd polish(const Objective& objective, const Eigen::VectorXd& theta0,
                       const ParameterBounds& bounds, double tol) {
  bounds.validate();
  if (!bounds.contains(theta0))
    throw std::invalid_argument("polish: start point outside bounds");
  const Eigen::VectorXd lo = bounds.lower_vector();
  const Eigen::VectorXd hi = bounds.upper_vector();
  const int dim = static_cast<int>(theta0.size());

  auto clamp = [&](Eigen::VectorXd v) {
    for (int d = 0; d < dim; ++d) v(d) = std::clamp(v(d), lo(d), hi(d));
    return v;
  };

  // Initial simplex: theta0 plus per-coordinate offsets of 5% of the box,
  // flipped inward at the boundary.
  std::vector<Eigen::VectorXd> x(dim + 1, theta0);
  std::vector<double> fx(dim + 1);
  for (int d = 0; d < dim; ++d) {
    double step = 0.05 * (hi(d) - lo(d));
    if (theta0(d) + step > hi(d)) step = -step;
    x[d + 1](d) = std::clamp(theta0(d) + step, lo(d), hi(d));
  }
  for (int v = 0; v <= dim; ++v) fx[v] = checked_eval(objective, x[v]);

  const int max_evals = 500 * dim + 200;
  int evals = dim + 1;
  while (evals < max_evals) {
    // order vertices, best first
    std::vector<int> idx(dim + 1);
    for (int v = 0; v <= dim; ++v) idx[v] = v;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return fx[a] < fx[b]; });
    std::vector<Eigen::VectorXd> xs(dim + 1);
    std::vector<double> fs(dim + 1);
    for (int v = 0; v <= dim; ++v) {
      xs[v] = x[idx[v]];
      fs[v] = fx[idx[v]];
    }
    x.swap(xs);
    fx.swap(fs);

    double diameter = 0.0;
    for (int v = 1; v <= dim; ++v)
      diameter = std::max(diameter, (x[v] - x[0]).cwiseAbs().maxCoeff());
    if (diameter < tol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int v = 0; v < dim; ++v) centroid += x[v];
    centroid /= dim;

    const Eigen::VectorXd reflected = clamp(centroid + (centroid - x[dim]));
    const double f_ref = checked_eval(objective, reflected);
    ++evals;

    if (f_ref < fx[0]) {
      const Eigen::VectorXd expanded = clamp(centroid + 2.0 * (centroid - x[dim]));
      const double f_exp = checked_eval(objective, expanded);
      ++evals;
      if (f_exp < f_ref) {
        x[dim] = expanded;
        fx[dim] = f_exp;
      } else {
        x[dim] = reflected;
        fx[dim] = f_ref;
      }
    } else if (f_ref < fx[dim - 1]) {
      x[dim] = reflected;
      fx[dim] = f_ref;
    } else {
      const Eigen::VectorXd contracted = clamp(centroid + 0.5 * (x[dim] - centroid));
      const double f_con = checked_eval(objective, contracted);
      ++evals;
      if (f_con < fx[dim]) {
        x[dim] = contracted;
        fx[dim] = f_con;
      } else {
        // shrink toward the best vertex
        for (int v = 1; v <= dim; ++v) {
          x[v] = clamp(x[0] + 0.5 * (x[v] - x[0]));
          fx[v] = checked_eval(objective, x[v]);
        }
        evals += dim;
      }
    }
  }

  int best = 0;
  for (int v = 1; v <= dim; ++v)
    if (fx[v] < fx[best]) best = v;
  return x[best];
}

ParameterPoint anneal(const Objective& objective, const AnnealConfig& config,
                      const ParameterPoint& start) {
  return ParameterPoint::from_vector(anneal(objective, config, start.to_vector()));
}

ParameterPoint polish(const Objective& objective, const ParameterPoint& theta0,
                      const ParameterBounds& bounds, double tol) {
  return ParameterPoint::from_vector(polish(objective, theta0.to_vector(), bounds, tol));
}

}  // namespace qgmm
