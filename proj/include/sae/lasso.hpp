#ifndef SAE_LASSO_HPP
#define SAE_LASSO_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sae/areal.hpp"
#include "sae/rng.hpp"

namespace sae {

struct LassoModel {
  std::vector<double> beta;  // original covariate scale, exact zeros preserved
  double intercept = 0.0;
  double lambda_star = 0.0;
  std::vector<double> centers;  // standardisation applied during fitting
  std::vector<double> scales;   // 0 marks a constant column (coefficient 0)
  std::vector<std::pair<double, double>> cv_curve;  // (lambda, mean CV error)
};

namespace lasso_detail {

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

struct Standardised {
  Eigen::MatrixXd x;  // columns: mean 0, mean square 1 (constant columns zeroed)
  Eigen::VectorXd y;  // centred
  double y_mean = 0.0;
  std::vector<double> centers;
  std::vector<double> scales;
};

inline Standardised standardise(const std::vector<ArealRow>& train) {
  const std::size_t m = train.size();
  const std::size_t p = train.front().xbar_s.size();
  Standardised s;
  s.x.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
  s.y.resize(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    if (!train[i].ybar_s)
      throw std::invalid_argument("lasso: training row without sampled mean");
    if (train[i].xbar_s.size() != p)
      throw std::invalid_argument("lasso: inconsistent covariate dimensions");
    s.y(static_cast<Eigen::Index>(i)) = *train[i].ybar_s;
    for (std::size_t j = 0; j < p; ++j)
      s.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          train[i].xbar_s[j];
  }
  s.y_mean = s.y.mean();
  s.y.array() -= s.y_mean;
  s.centers.resize(p);
  s.scales.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto col = s.x.col(static_cast<Eigen::Index>(j));
    s.centers[j] = col.mean();
    col.array() -= s.centers[j];
    const double scale = std::sqrt(col.squaredNorm() / static_cast<double>(m));
    s.scales[j] = scale;
    if (scale > 0.0)
      col /= scale;
    else
      col.setZero();
  }
  return s;
}

// Cyclic coordinate descent for
//   min ||y - X b||^2 / (2m) + lambda sum_j w_j |b_j|
// on standardised data (w_j = 0 for an unpenalised coordinate).  Warm-started
// from `beta`; converges when the largest coefficient change in a full cycle
// drops below 1e-7.
inline void coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               double lambda,
                               const std::vector<double>& penalty_weight,
                               Eigen::VectorXd& beta, Eigen::VectorXd& residual) {
  const double m = static_cast<double>(x.rows());
  const Eigen::Index p = x.cols();
  constexpr double kTol = 1e-7;
  constexpr int kMaxCycles = 100000;
  for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (penalty_weight[static_cast<std::size_t>(j)] < 0.0) continue;  // dropped
      const double old = beta(j);
      const double rho = x.col(j).dot(residual) / m + old;
      const double updated = soft_threshold(
          rho, lambda * penalty_weight[static_cast<std::size_t>(j)]);
      if (updated != old) {
        residual += x.col(j) * (old - updated);
        beta(j) = updated;
        max_change = std::max(max_change, std::fabs(updated - old));
      }
    }
    if (max_change < kTol) return;
  }
}

inline std::vector<double> lambda_grid(double lambda_max, int grid_size) {
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  const double lo = std::log(1e-4 * lambda_max);
  const double hi = std::log(lambda_max);
  for (int g = 0; g < grid_size; ++g) {
    const double t = (grid_size == 1)
                         ? 0.0
                         : static_cast<double>(g) / (grid_size - 1.0);
    grid[static_cast<std::size_t>(g)] = std::exp(hi + t * (lo - hi));
  }
  return grid;
}

struct PathResult {
  // One coefficient vector per lambda, on the standardised scale.
  std::vector<Eigen::VectorXd> beta;
};

inline PathResult fit_path(const Standardised& s, const std::vector<double>& grid,
                           std::optional<std::size_t> forced) {
  const std::size_t p = s.scales.size();
  std::vector<double> penalty_weight(p, 1.0);
  for (std::size_t j = 0; j < p; ++j)
    if (s.scales[j] == 0.0) penalty_weight[j] = -1.0;  // constant column: skip
  if (forced) {
    if (*forced >= p)
      throw std::invalid_argument("lasso: forced index out of range");
    if (penalty_weight[*forced] >= 0.0) penalty_weight[*forced] = 0.0;
  }

  PathResult path;
  path.beta.reserve(grid.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::VectorXd residual = s.y;
  for (double lambda : grid) {
    coordinate_descent(s.x, s.y, lambda, penalty_weight, beta, residual);
    path.beta.push_back(beta);
  }
  return path;
}

// Largest penalty that keeps every penalised coefficient at zero.  With an
// unpenalised forced covariate, the residual is taken after fitting it.
inline double lambda_max(const Standardised& s, std::optional<std::size_t> forced) {
  const double m = static_cast<double>(s.x.rows());
  Eigen::VectorXd residual = s.y;
  if (forced && s.scales[*forced] > 0.0) {
    const auto col = s.x.col(static_cast<Eigen::Index>(*forced));
    residual -= col * (col.dot(s.y) / m);
  }
  double best = 0.0;
  for (Eigen::Index j = 0; j < s.x.cols(); ++j) {
    if (forced && static_cast<std::size_t>(j) == *forced) continue;
    best = std::max(best, std::fabs(s.x.col(j).dot(residual)) / m);
  }
  return best > 0.0 ? best : 1.0;
}

inline LassoModel from_standardised(const Standardised& s,
                                    const Eigen::VectorXd& beta_std,
                                    double lambda_star) {
  LassoModel model;
  const std::size_t p = s.scales.size();
  model.beta.resize(p, 0.0);
  model.intercept = s.y_mean;
  model.centers = s.centers;
  model.scales = s.scales;
  model.lambda_star = lambda_star;
  for (std::size_t j = 0; j < p; ++j) {
    if (s.scales[j] == 0.0) continue;
    model.beta[j] = beta_std(static_cast<Eigen::Index>(j)) / s.scales[j];
    model.intercept -= model.beta[j] * s.centers[j];
  }
  return model;
}

}  // namespace lasso_detail

inline double lasso_predict(const LassoModel& model, std::span<const double> x) {
  if (x.size() != model.beta.size())
    throw std::invalid_argument("lasso_predict: covariate dimension mismatch");
  double out = model.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) out += model.beta[j] * x[j];
  return out;
}

// Single fit at a given penalty (no cross-validation); used when the penalty
// is known or for oracle checks.
inline LassoModel lasso_fit_fixed(const std::vector<ArealRow>& train,
                                  double lambda,
                                  std::optional<std::size_t> forced = {}) {
  if (train.size() < 2)
    throw std::invalid_argument("lasso_fit_fixed: need >= 2 training rows");
  if (lambda < 0.0) throw std::invalid_argument("lasso_fit_fixed: lambda < 0");
  const auto s = lasso_detail::standardise(train);
  // Warm-start through a short descending grid for stability.
  std::vector<double> grid;
  const double top = lasso_detail::lambda_max(s, forced);
  for (double l : lasso_detail::lambda_grid(top, 20))
    if (l > lambda) grid.push_back(l);
  grid.push_back(lambda);
  const auto path = lasso_detail::fit_path(s, grid, forced);
  return lasso_detail::from_standardised(s, path.beta.back(), lambda);
}

// LASSO with the penalty chosen by k-fold cross-validation at the area level:
// a log-spaced grid from lambda_max down to 1e-4 lambda_max, warm starts along
// the path, fold assignment by seeded shuffle, and the final model refit on
// all rows at the selected penalty (largest lambda attaining the smallest mean
// held-out squared error).
inline LassoModel lasso_fit(const std::vector<ArealRow>& train, int grid_size,
                            int folds, std::uint64_t seed,
                            std::optional<std::size_t> forced = {}) {
  if (grid_size < 1) throw std::invalid_argument("lasso_fit: grid_size < 1");
  if (folds < 2) throw std::invalid_argument("lasso_fit: folds < 2");
  const std::size_t m = train.size();
  if (m < static_cast<std::size_t>(folds))
    throw std::invalid_argument("lasso_fit: fewer rows than folds");

  const auto s_full = lasso_detail::standardise(train);
  const auto grid =
      lasso_detail::lambda_grid(lasso_detail::lambda_max(s_full, forced), grid_size);

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  Rng rng(seed, {stream::cv_fold});
  shuffle(order, rng);

  std::vector<double> cv_error(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<ArealRow> fold_train;
    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < m; ++i) {
      if (static_cast<int>(i % static_cast<std::size_t>(folds)) == f)
        held_out.push_back(order[i]);
      else
        fold_train.push_back(train[order[i]]);
    }
    const auto s_fold = lasso_detail::standardise(fold_train);
    const auto path = lasso_detail::fit_path(s_fold, grid, forced);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto model = lasso_detail::from_standardised(s_fold, path.beta[g], grid[g]);
      for (std::size_t i : held_out) {
        const double err = *train[i].ybar_s - lasso_predict(model, train[i].xbar_s);
        cv_error[g] += err * err;
      }
    }
  }
  for (auto& e : cv_error) e /= static_cast<double>(m);

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (cv_error[g] < cv_error[best]) best = g;
  // Prefer the largest lambda among exact ties (grid is descending).
  while (best > 0 && cv_error[best - 1] == cv_error[best]) --best;

  const auto path = lasso_detail::fit_path(s_full, grid, forced);
  LassoModel model =
      lasso_detail::from_standardised(s_full, path.beta[best], grid[best]);
  model.cv_curve.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g)
    model.cv_curve.emplace_back(grid[g], cv_error[g]);
  return model;
}

}  // namespace sae

#endif  // SAE_LASSO_HPP
