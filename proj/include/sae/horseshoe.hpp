#ifndef SAE_HORSESHOE_HPP
#define SAE_HORSESHOE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sae/areal.hpp"
#include "sae/rng.hpp"
#include "sae/stats.hpp"

namespace sae {

struct HsConfig {
  int chains = 2;
  int iterations = 5000;  // per chain, burn-in included
  int burn_in = 2500;
  int thin = 1;
  std::uint64_t seed = 0;
  // Test hook: freeze tau and every lambda_j at this value (wide prior limit)
  // instead of sampling them.
  std::optional<double> fixed_scale;

  void validate() const {
    if (chains < 1) throw std::invalid_argument("horseshoe: chains >= 1");
    if (thin < 1) throw std::invalid_argument("horseshoe: thin >= 1");
    if (burn_in < 0 || burn_in >= iterations)
      throw std::invalid_argument("horseshoe: need burn_in < iterations");
  }

  int retained_per_chain() const { return (iterations - burn_in + thin - 1) / thin; }
};

struct ParamDiagnostic {
  std::string name;
  double rhat = 1.0;
  double ess = 0.0;
};

// Pooled retained draws across chains, plus per-parameter split-Rhat and
// effective sample size for the monitored parameters (intercept, every beta_j,
// sigma, tau).
struct PosteriorSamples {
  std::size_t p = 0;
  std::size_t n_draws = 0;
  int n_chains = 0;
  std::vector<double> intercept;  // n_draws
  std::vector<double> sigma;      // n_draws
  std::vector<double> tau;        // n_draws
  std::vector<double> beta;       // n_draws x p, row-major
  std::vector<double> lambda;     // n_draws x p, row-major

  std::vector<ParamDiagnostic> diagnostics;
  double max_rhat = 1.0;
  double min_ess = 0.0;

  double beta_at(std::size_t draw, std::size_t j) const {
    return beta[draw * p + j];
  }
};

namespace hs_detail {

// Split-Rhat over per-chain series (each chain halved).
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> seqs;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) return 1.0;
    seqs.emplace_back(c.data(), half);
    seqs.emplace_back(c.data() + half, half);
  }
  const double n = static_cast<double>(seqs.front().size());
  const double k = static_cast<double>(seqs.size());
  double grand = 0.0;
  std::vector<double> means;
  for (auto s : seqs) {
    means.push_back(mean(s));
    grand += means.back();
  }
  grand /= k;
  double w = 0.0, b = 0.0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    w += variance(seqs[i]);
    b += (means[i] - grand) * (means[i] - grand);
  }
  w /= k;
  b *= n / (k - 1.0);
  if (w <= 0.0) return 1.0;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

// Effective sample size via the multi-chain autocorrelation estimate with
// Geyer's initial-positive-sequence truncation.
inline double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> seqs;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) return static_cast<double>(c.size() * chains.size());
    seqs.emplace_back(c.data(), half);
    seqs.emplace_back(c.data() + half, half);
  }
  const std::size_t n = seqs.front().size();
  const double k = static_cast<double>(seqs.size());
  std::vector<double> means;
  double w = 0.0, grand = 0.0;
  for (auto s : seqs) {
    means.push_back(mean(s));
    grand += means.back();
    w += variance(s);
  }
  grand /= k;
  w /= k;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (k - 1.0);
  const double var_plus = (static_cast<double>(n) - 1.0) / n * w + b / n;
  if (var_plus <= 0.0) return static_cast<double>(n) * k;

  const std::size_t max_lag = std::min<std::size_t>(n - 1, 500);
  double tau = 1.0;
  double prev_pair = 0.0;
  for (std::size_t t = 1; t + 1 <= max_lag; t += 2) {
    double rho_pair = 0.0;
    for (std::size_t lag = t; lag <= t + 1; ++lag) {
      double acov = 0.0;
      for (std::size_t s = 0; s < seqs.size(); ++s) {
        double sum = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i)
          sum += (seqs[s][i] - means[s]) * (seqs[s][i + lag] - means[s]);
        acov += sum / static_cast<double>(n);
      }
      acov /= k;
      rho_pair += 1.0 - (w - acov) / var_plus;
    }
    if (rho_pair < 0.0) break;
    // Enforce monotone decrease of the pair sums (initial monotone sequence).
    if (prev_pair > 0.0 && rho_pair > prev_pair) rho_pair = prev_pair;
    tau += 2.0 * rho_pair;
    prev_pair = rho_pair;
  }
  return std::max(1.0, static_cast<double>(n) * k / tau);
}

}  // namespace hs_detail

// Gibbs sampler for ybar_c ~ N(b0 + x_c' beta, sigma^2 / n_c) with horseshoe
// priors beta_j ~ N(0, lambda_j^2 tau^2), tau, lambda_j ~ HC+(0,1), expressed
// through their inverse-gamma auxiliary representation; sigma^2 gets an
// IG(0.01, 0.01) prior, the intercept a fixed N(0, 100^2) prior.  A `forced`
// covariate is excluded from shrinkage and receives the same N(0, 100^2)
// prior.
inline PosteriorSamples hs_fit(const std::vector<ArealRow>& train,
                               const HsConfig& config,
                               std::optional<std::size_t> forced = {}) {
  config.validate();
  const std::size_t m = train.size();
  if (m < 3) throw std::invalid_argument("hs_fit: need >= 3 training rows");
  const std::size_t p = train.front().xbar_s.size();
  if (forced && *forced >= p)
    throw std::invalid_argument("hs_fit: forced index out of range");

  Eigen::MatrixXd x(m, p + 1);
  Eigen::VectorXd y(m), w(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!train[i].ybar_s)
      throw std::invalid_argument("hs_fit: training row without sampled mean");
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j) + 1) =
          train[i].xbar_s[j];
    y(static_cast<Eigen::Index>(i)) = *train[i].ybar_s;
    w(static_cast<Eigen::Index>(i)) = static_cast<double>(train[i].n_sampled);
  }
  const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
  const Eigen::VectorXd xtwy = x.transpose() * w.asDiagonal() * y;

  constexpr double kSigmaA = 0.01, kSigmaB = 0.01;
  constexpr double kWidePrec = 1.0 / (100.0 * 100.0);
  const int retained = config.retained_per_chain();
  const std::size_t total = static_cast<std::size_t>(retained) *
                            static_cast<std::size_t>(config.chains);

  PosteriorSamples samples;
  samples.p = p;
  samples.n_chains = config.chains;
  samples.n_draws = total;
  samples.intercept.reserve(total);
  samples.sigma.reserve(total);
  samples.tau.reserve(total);
  samples.beta.reserve(total * p);
  samples.lambda.reserve(total * p);

  // Per-chain series for diagnostics: intercept, beta_j..., sigma, tau.
  const std::size_t n_monitored = p + 3;
  std::vector<std::vector<std::vector<double>>> monitor(
      n_monitored, std::vector<std::vector<double>>(config.chains));

  for (int chain = 0; chain < config.chains; ++chain) {
    Rng rng(config.seed, {stream::chain, static_cast<std::uint64_t>(chain)});
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd lambda2 = Eigen::VectorXd::Ones(p);
    Eigen::VectorXd nu = Eigen::VectorXd::Ones(p);
    double sigma2 = 1.0, tau2 = 1.0, xi = 1.0;
    if (config.fixed_scale) {
      // Freeze tau and every lambda_j at fixed_scale.
      tau2 = *config.fixed_scale * *config.fixed_scale;
      lambda2.setConstant(tau2);
    }

    Eigen::MatrixXd prec(p + 1, p + 1);
    Eigen::VectorXd z(p + 1);
    for (int iter = 0; iter < config.iterations; ++iter) {
      // (intercept, beta) | rest
      prec = xtwx / sigma2;
      prec(0, 0) += kWidePrec;
      for (std::size_t j = 0; j < p; ++j) {
        double prior_prec;
        if (forced && j == *forced)
          prior_prec = kWidePrec;
        else
          prior_prec = 1.0 / (lambda2(static_cast<Eigen::Index>(j)) * tau2);
        prec(static_cast<Eigen::Index>(j) + 1, static_cast<Eigen::Index>(j) + 1) +=
            prior_prec;
      }
      Eigen::LLT<Eigen::MatrixXd> llt(prec);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("hs_fit: posterior precision not positive definite");
      const Eigen::VectorXd mu = llt.solve(xtwy / sigma2);
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
      coef = mu + llt.matrixU().solve(z);

      // sigma^2 | rest
      const Eigen::VectorXd resid = y - x * coef;
      const double sse_w = resid.array().square().matrix().dot(w);
      sigma2 = rng.inv_gamma(kSigmaA + 0.5 * static_cast<double>(m),
                             kSigmaB + 0.5 * sse_w);
      if (!std::isfinite(sigma2) || sigma2 <= 0.0)
        throw std::runtime_error("hs_fit: sigma^2 update overflowed at iteration " +
                                 std::to_string(iter));

      if (!config.fixed_scale) {
        // lambda_j^2 and nu_j | rest
        double shrunk_sum = 0.0;
        std::size_t shrunk_count = 0;
        for (std::size_t j = 0; j < p; ++j) {
          if (forced && j == *forced) continue;
          const double bj = coef(static_cast<Eigen::Index>(j) + 1);
          const double l2 = rng.inv_gamma(
              1.0, 1.0 / nu(static_cast<Eigen::Index>(j)) + bj * bj / (2.0 * tau2));
          lambda2(static_cast<Eigen::Index>(j)) = std::max(l2, 1e-300);
          nu(static_cast<Eigen::Index>(j)) =
              rng.inv_gamma(1.0, 1.0 + 1.0 / lambda2(static_cast<Eigen::Index>(j)));
          shrunk_sum += bj * bj / lambda2(static_cast<Eigen::Index>(j));
          shrunk_count += 1;
        }
        // tau^2 and xi | rest
        if (shrunk_count > 0) {
          tau2 = std::max(
              rng.inv_gamma(0.5 * (static_cast<double>(shrunk_count) + 1.0),
                            1.0 / xi + 0.5 * shrunk_sum),
              1e-300);
          xi = rng.inv_gamma(1.0, 1.0 + 1.0 / tau2);
        }
      }
      if (!coef.allFinite())
        throw std::runtime_error("hs_fit: coefficient update overflowed at iteration " +
                                 std::to_string(iter));

      if (iter < config.burn_in || (iter - config.burn_in) % config.thin != 0)
        continue;
      const double sigma = std::sqrt(sigma2);
      const double tau = std::sqrt(tau2);
      samples.intercept.push_back(coef(0));
      samples.sigma.push_back(sigma);
      samples.tau.push_back(tau);
      for (std::size_t j = 0; j < p; ++j) {
        samples.beta.push_back(coef(static_cast<Eigen::Index>(j) + 1));
        samples.lambda.push_back(
            std::sqrt(lambda2(static_cast<Eigen::Index>(j))));
      }
      monitor[0][chain].push_back(coef(0));
      for (std::size_t j = 0; j < p; ++j)
        monitor[1 + j][chain].push_back(coef(static_cast<Eigen::Index>(j) + 1));
      monitor[p + 1][chain].push_back(sigma);
      monitor[p + 2][chain].push_back(tau);
    }
  }

  samples.diagnostics.resize(n_monitored);
  samples.max_rhat = 1.0;
  samples.min_ess = static_cast<double>(total);
  for (std::size_t k = 0; k < n_monitored; ++k) {
    auto& d = samples.diagnostics[k];
    if (k == 0)
      d.name = "intercept";
    else if (k <= p)
      d.name = "beta" + std::to_string(k);
    else
      d.name = (k == p + 1) ? "sigma" : "tau";
    d.rhat = hs_detail::split_rhat(monitor[k]);
    d.ess = hs_detail::effective_sample_size(monitor[k]);
    samples.max_rhat = std::max(samples.max_rhat, d.rhat);
    samples.min_ess = std::min(samples.min_ess, d.ess);
  }
  return samples;
}

// One posterior-predictive draw per retained posterior draw for a mean over
// `count` units: N(b0 + x' beta, sigma^2 / count).
inline std::vector<double> hs_predictive(const PosteriorSamples& samples,
                                         std::span<const double> x, double count,
                                         std::uint64_t seed) {
  if (samples.n_draws == 0) throw std::invalid_argument("hs_predictive: no draws");
  if (x.size() != samples.p)
    throw std::invalid_argument("hs_predictive: covariate dimension mismatch");
  if (count <= 0.0)
    throw std::invalid_argument("hs_predictive: no units left to predict");
  Rng rng(seed, {stream::predictive});
  std::vector<double> draws(samples.n_draws);
  for (std::size_t l = 0; l < samples.n_draws; ++l) {
    double mu = samples.intercept[l];
    for (std::size_t j = 0; j < samples.p; ++j)
      mu += samples.beta_at(l, j) * x[j];
    draws[l] = mu + samples.sigma[l] / std::sqrt(count) * rng.normal();
  }
  return draws;
}

inline std::vector<double> hs_predictive(const PosteriorSamples& samples,
                                         const ArealRow& row, std::uint64_t seed) {
  if (row.n_remaining() <= 0)
    throw std::invalid_argument("hs_predictive: area " + row.area_id +
                                " is fully enumerated");
  return hs_predictive(samples, row.xbar_ns,
                       static_cast<double>(row.n_remaining()), seed);
}

// Indices whose equal-tailed 95% credible interval excludes zero.
inline std::vector<std::size_t> hs_selected(const PosteriorSamples& samples) {
  if (samples.n_draws == 0) throw std::invalid_argument("hs_selected: no draws");
  std::vector<std::size_t> out;
  std::vector<double> col(samples.n_draws);
  for (std::size_t j = 0; j < samples.p; ++j) {
    for (std::size_t l = 0; l < samples.n_draws; ++l)
      col[l] = samples.beta_at(l, j);
    std::sort(col.begin(), col.end());
    const double lo = quantile_sorted(col, 0.025);
    const double hi = quantile_sorted(col, 0.975);
    if (lo > 0.0 || hi < 0.0) out.push_back(j);
  }
  return out;
}

struct PosteriorRanks {
  // histograms[c] maps rank (1-based, ascending estimates) to draw count.
  std::vector<std::map<int, int>> histograms;
  bool ties_found = false;
};

// Per-area distribution of the rank of the point estimate across draws.
// `estimates` is draws x areas, row-major; ties are broken by area order and
// flagged.
inline PosteriorRanks posterior_ranks(const std::vector<double>& estimates,
                                      std::size_t n_areas) {
  if (n_areas < 2) throw std::invalid_argument("posterior_ranks: need >= 2 areas");
  if (estimates.empty() || estimates.size() % n_areas != 0)
    throw std::invalid_argument("posterior_ranks: bad estimates shape");
  const std::size_t n_draws = estimates.size() / n_areas;
  PosteriorRanks out;
  out.histograms.resize(n_areas);
  std::vector<std::size_t> order(n_areas);
  for (std::size_t l = 0; l < n_draws; ++l) {
    const double* row = estimates.data() + l * n_areas;
    for (std::size_t c = 0; c < n_areas; ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [row](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    for (std::size_t r = 0; r + 1 < n_areas; ++r)
      if (row[order[r]] == row[order[r + 1]]) out.ties_found = true;
    for (std::size_t r = 0; r < n_areas; ++r)
      out.histograms[order[r]][static_cast<int>(r) + 1] += 1;
  }
  return out;
}

inline void write_samples_csv(const PosteriorSamples& samples,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("hs: cannot write " + path);
  out << "draw,intercept,sigma,tau";
  for (std::size_t j = 0; j < samples.p; ++j) out << ",beta" << (j + 1);
  out << "\n";
  out.precision(10);
  for (std::size_t l = 0; l < samples.n_draws; ++l) {
    out << l << ',' << samples.intercept[l] << ',' << samples.sigma[l] << ','
        << samples.tau[l];
    for (std::size_t j = 0; j < samples.p; ++j) out << ',' << samples.beta_at(l, j);
    out << "\n";
  }
}

}  // namespace sae

#endif  // SAE_HORSESHOE_HPP
