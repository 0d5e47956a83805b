#ifndef SAE_FORWARD_HPP
#define SAE_FORWARD_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sae/areal.hpp"

namespace sae {

// Weighted Gaussian linear model chosen by forward selection on AIC.
// The working model is ybar_c ~ N(z_c' eta, sigma^2 / n_c).
struct ForwardModel {
  std::vector<std::size_t> selected;  // covariate indices, in selection order
  Eigen::VectorXd eta_hat;            // intercept first, then selected
  Eigen::MatrixXd cov_eta;
  double sigma_hat = 0.0;  // residual scale on the unit level
};

namespace forward_detail {

struct WlsFit {
  Eigen::VectorXd eta;
  double weighted_sse = 0.0;
  bool singular = false;
};

// Rows are scaled by sqrt(n_c), so an ordinary least-squares solve gives the
// weighted fit.
inline WlsFit wls(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& sqrt_w) {
  const Eigen::MatrixXd zw = sqrt_w.asDiagonal() * z;
  const Eigen::VectorXd yw = sqrt_w.asDiagonal() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(zw);
  WlsFit fit;
  if (qr.rank() < z.cols()) {
    fit.singular = true;
    return fit;
  }
  fit.eta = qr.solve(yw);
  fit.weighted_sse = (yw - zw * fit.eta).squaredNorm();
  return fit;
}

// AIC with maximum-likelihood sigma^2 and K+2 parameters (coefficients,
// intercept and sigma).  log L = -m/2 log(2 pi sse/m) + 1/2 sum log n_c - m/2.
inline double aic(double weighted_sse, double m, double n_covariates,
                  double sum_log_w) {
  if (weighted_sse <= 0.0) return -std::numeric_limits<double>::infinity();
  const double sigma2_ml = weighted_sse / m;
  const double loglik =
      -0.5 * m * std::log(2.0 * M_PI * sigma2_ml) + 0.5 * sum_log_w - 0.5 * m;
  return -2.0 * loglik + 2.0 * (n_covariates + 2.0);
}

inline Eigen::MatrixXd design_matrix(const std::vector<ArealRow>& train,
                                     const std::vector<std::size_t>& cols) {
  const Eigen::Index m = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd z(m, static_cast<Eigen::Index>(cols.size()) + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    z(i, 0) = 1.0;
    for (std::size_t k = 0; k < cols.size(); ++k)
      z(i, static_cast<Eigen::Index>(k) + 1) =
          train[static_cast<std::size_t>(i)].xbar_s[cols[k]];
  }
  return z;
}

}  // namespace forward_detail

// Forward selection: starting from the intercept-only model, repeatedly add
// the covariate whose weighted model attains the lowest AIC, stopping when no
// addition lowers the AIC or K reaches m-2.  A `forced` covariate that was
// not selected is appended before the final refit.
inline ForwardModel forward_fit(const std::vector<ArealRow>& train,
                                std::optional<std::size_t> forced = {}) {
  const std::size_t m = train.size();
  if (m < 3) throw std::invalid_argument("forward_fit: need >= 3 training rows");
  const std::size_t p = train.front().xbar_s.size();
  if (forced && *forced >= p)
    throw std::invalid_argument("forward_fit: forced index out of range");

  Eigen::VectorXd y(m), sqrt_w(m);
  double sum_log_w = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!train[i].ybar_s)
      throw std::invalid_argument("forward_fit: training row without sampled mean");
    y(static_cast<Eigen::Index>(i)) = *train[i].ybar_s;
    const double w = static_cast<double>(train[i].n_sampled);
    sqrt_w(static_cast<Eigen::Index>(i)) = std::sqrt(w);
    sum_log_w += std::log(w);
  }

  std::vector<std::size_t> selected;
  std::vector<bool> in_model(p, false);
  const double dm = static_cast<double>(m);

  auto model_aic = [&](const std::vector<std::size_t>& cols) {
    const auto fit = forward_detail::wls(forward_detail::design_matrix(train, cols),
                                         y, sqrt_w);
    if (fit.singular) return std::numeric_limits<double>::infinity();
    return forward_detail::aic(fit.weighted_sse, dm,
                               static_cast<double>(cols.size()), sum_log_w);
  };

  double current_aic = model_aic(selected);
  while (selected.size() + 2 < m) {
    double best_aic = std::numeric_limits<double>::infinity();
    std::size_t best_j = p;
    std::vector<std::size_t> candidate = selected;
    candidate.push_back(0);
    for (std::size_t j = 0; j < p; ++j) {
      if (in_model[j]) continue;
      candidate.back() = j;
      const double a = model_aic(candidate);
      if (a < best_aic) {
        best_aic = a;
        best_j = j;
      }
    }
    if (best_j == p || best_aic >= current_aic) break;
    selected.push_back(best_j);
    in_model[best_j] = true;
    current_aic = best_aic;
  }

  if (forced && !in_model[*forced]) selected.push_back(*forced);

  // Final refit; on a singular design, drop last-added covariates until the
  // fit becomes full rank.
  forward_detail::WlsFit fit;
  for (;;) {
    fit = forward_detail::wls(forward_detail::design_matrix(train, selected), y,
                              sqrt_w);
    if (!fit.singular) break;
    if (selected.empty())
      throw std::runtime_error("forward_fit: intercept-only design is singular");
    selected.pop_back();
  }

  ForwardModel model;
  model.selected = selected;
  model.eta_hat = fit.eta;
  const double dof = dm - static_cast<double>(selected.size()) - 1.0;
  const double sigma2 = fit.weighted_sse / std::max(1.0, dof);
  model.sigma_hat = std::sqrt(sigma2);

  const Eigen::MatrixXd z = forward_detail::design_matrix(train, selected);
  const Eigen::MatrixXd zwz =
      z.transpose() * sqrt_w.array().square().matrix().asDiagonal() * z;
  model.cov_eta =
      sigma2 * zwz.ldlt().solve(Eigen::MatrixXd::Identity(z.cols(), z.cols()));
  return model;
}

inline double forward_predict(const ForwardModel& model,
                              std::span<const double> x) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(model.selected.size()) + 1);
  z(0) = 1.0;
  for (std::size_t k = 0; k < model.selected.size(); ++k) {
    if (model.selected[k] >= x.size())
      throw std::invalid_argument("forward_predict: covariate dimension mismatch");
    z(static_cast<Eigen::Index>(k) + 1) = x[model.selected[k]];
  }
  return z.dot(model.eta_hat);
}

struct ForwardPrediction {
  double yhat_ns = 0.0;
  double variance = 0.0;
};

// Point prediction and prediction variance for a mean over `count` units:
// z' cov(eta) z + sigma^2 / count.  count = 0 (fully enumerated area) drops
// the second term.
inline ForwardPrediction forward_predict_interval(const ForwardModel& model,
                                                  std::span<const double> x,
                                                  double count) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(model.selected.size()) + 1);
  z(0) = 1.0;
  for (std::size_t k = 0; k < model.selected.size(); ++k) {
    if (model.selected[k] >= x.size())
      throw std::invalid_argument("forward_predict_interval: dimension mismatch");
    z(static_cast<Eigen::Index>(k) + 1) = x[model.selected[k]];
  }
  ForwardPrediction out;
  out.yhat_ns = z.dot(model.eta_hat);
  out.variance = z.dot(model.cov_eta * z);
  if (count > 0.0)
    out.variance += model.sigma_hat * model.sigma_hat / count;
  return out;
}

inline ForwardPrediction forward_predict_interval(const ForwardModel& model,
                                                  const ArealRow& row) {
  return forward_predict_interval(model, row.xbar_ns,
                                  static_cast<double>(row.n_remaining()));
}

}  // namespace sae

#endif  // SAE_FORWARD_HPP
