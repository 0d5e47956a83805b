#ifndef SAE_PREDICTOR_HPP
#define SAE_PREDICTOR_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "sae/areal.hpp"

namespace sae {

// Uniform predictor abstraction: fit on sampled-area rows, then map any
// covariate-mean vector to a predicted outcome mean.
using PredictFn = std::function<double(std::span<const double>)>;
using PredictorFactory = std::function<PredictFn(const std::vector<ArealRow>&)>;

// Ordinary least squares on a fixed covariate subset (intercept included);
// the fixed-subset linear predictors of the interval-comparison study.
inline PredictorFactory ols_factory(std::vector<std::size_t> covariates) {
  return [covariates](const std::vector<ArealRow>& train) -> PredictFn {
    if (train.empty()) throw std::invalid_argument("ols: empty training set");
    const Eigen::Index m = static_cast<Eigen::Index>(train.size());
    const Eigen::Index k = static_cast<Eigen::Index>(covariates.size());
    Eigen::MatrixXd z(m, k + 1);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& row = train[static_cast<std::size_t>(i)];
      if (!row.ybar_s)
        throw std::invalid_argument("ols: training row without sampled mean");
      z(i, 0) = 1.0;
      for (Eigen::Index j = 0; j < k; ++j)
        z(i, j + 1) = row.xbar_s.at(covariates[static_cast<std::size_t>(j)]);
      y(i) = *row.ybar_s;
    }
    auto eta = std::make_shared<Eigen::VectorXd>(
        z.colPivHouseholderQr().solve(y));
    auto cols = std::make_shared<std::vector<std::size_t>>(covariates);
    return [eta, cols](std::span<const double> x) {
      double out = (*eta)(0);
      for (std::size_t j = 0; j < cols->size(); ++j) {
        if ((*cols)[j] >= x.size())
          throw std::invalid_argument("ols: covariate dimension mismatch");
        out += (*eta)(static_cast<Eigen::Index>(j) + 1) * x[(*cols)[j]];
      }
      return out;
    };
  };
}

}  // namespace sae

#endif  // SAE_PREDICTOR_HPP
