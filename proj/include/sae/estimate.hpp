#ifndef SAE_ESTIMATE_HPP
#define SAE_ESTIMATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sae/areal.hpp"
#include "sae/conformal.hpp"
#include "sae/forest.hpp"
#include "sae/forward.hpp"
#include "sae/horseshoe.hpp"
#include "sae/lasso.hpp"
#include "sae/stats.hpp"

namespace sae {

enum class Method { Forest, Lasso, Forward, Horseshoe };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Forest: return "forest";
    case Method::Lasso: return "lasso";
    case Method::Forward: return "forward";
    case Method::Horseshoe: return "horseshoe";
  }
  throw std::invalid_argument("unknown method");
}

inline Method method_from_string(const std::string& s) {
  if (s == "forest") return Method::Forest;
  if (s == "lasso") return Method::Lasso;
  if (s == "forward") return Method::Forward;
  if (s == "horseshoe") return Method::Horseshoe;
  throw std::invalid_argument("unknown method '" + s + "'");
}

struct LevelInterval {
  double level = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct AreaEstimate {
  std::string area_id;
  std::string method;
  double point = 0.0;
  std::vector<LevelInterval> intervals;  // ascending level
  double frac_sampled = 0.0;
  bool anonymised = false;
  std::uint64_t seed = 0;
};

// Point estimate and intervals for the non-sampled part of one area, before
// the sampling-fraction blend.
struct NsEstimate {
  double yhat_ns = 0.0;
  std::vector<LevelInterval> intervals;
};

// f_c-blend of the observed sampled mean with the non-sampled estimate:
// point = f ybar_s + (1-f) yhat_ns, and the same blend applied to interval
// endpoints.  f = 1 collapses to the observed mean with zero-width intervals.
inline AreaEstimate assemble(const ArealRow& row, const NsEstimate& ns) {
  AreaEstimate est;
  est.area_id = row.area_id;
  est.frac_sampled = row.frac_sampled;
  const double f = row.frac_sampled;
  if (f > 0.0 && !row.ybar_s)
    throw std::invalid_argument("assemble: area " + row.area_id +
                                " has f_c > 0 but no sampled mean");
  const double ybar = row.ybar_s.value_or(0.0);
  if (f >= 1.0) {
    est.point = ybar;
    for (const auto& iv : ns.intervals)
      est.intervals.push_back({iv.level, ybar, ybar});
    return est;
  }
  est.point = f * ybar + (1.0 - f) * ns.yhat_ns;
  for (const auto& iv : ns.intervals) {
    LevelInterval blended{iv.level, f * ybar + (1.0 - f) * iv.lower,
                          f * ybar + (1.0 - f) * iv.upper};
    if (blended.lower > blended.upper)
      throw std::logic_error("assemble: inverted interval");
    est.intervals.push_back(blended);
  }
  return est;
}

struct MethodConfig {
  ForestHyper forest;
  int lasso_grid = 100;
  int lasso_folds = 10;
  HsConfig hs;
  std::optional<std::size_t> forced;  // design variable, all methods
};

// Per-method estimator for non-sampled means.  `count` is the number of units
// the target mean averages over; `area_key` seeds per-area predictive streams.
class NsEstimator {
 public:
  virtual ~NsEstimator() = default;
  virtual NsEstimate estimate(std::span<const double> x, double count,
                              std::span<const double> levels,
                              std::uint64_t area_key) const = 0;
};

namespace estimate_detail {

class ConformalEstimator final : public NsEstimator {
 public:
  explicit ConformalEstimator(ConformalCalibration cal) : cal_(std::move(cal)) {}

  NsEstimate estimate(std::span<const double> x, double count,
                      std::span<const double> levels,
                      std::uint64_t) const override {
    NsEstimate out;
    out.yhat_ns = cal_.trained(x);
    for (double level : levels) {
      const auto iv = conformal_interval_at(cal_, x, count, level);
      out.intervals.push_back({level, iv.lower, iv.upper});
    }
    return out;
  }

  const ConformalCalibration& calibration() const { return cal_; }

 private:
  ConformalCalibration cal_;
};

class ForwardEstimator final : public NsEstimator {
 public:
  explicit ForwardEstimator(ForwardModel model) : model_(std::move(model)) {}

  NsEstimate estimate(std::span<const double> x, double count,
                      std::span<const double> levels,
                      std::uint64_t) const override {
    const auto pred = forward_predict_interval(model_, x, count);
    NsEstimate out;
    out.yhat_ns = pred.yhat_ns;
    const double sd = std::sqrt(std::max(0.0, pred.variance));
    for (double level : levels) {
      const double q = normal_quantile(0.5 + level / 2.0);
      out.intervals.push_back({level, pred.yhat_ns - q * sd, pred.yhat_ns + q * sd});
    }
    return out;
  }

  const ForwardModel& model() const { return model_; }

 private:
  ForwardModel model_;
};

class HorseshoeEstimator final : public NsEstimator {
 public:
  HorseshoeEstimator(std::shared_ptr<PosteriorSamples> samples, std::uint64_t seed)
      : samples_(std::move(samples)), seed_(seed) {}

  NsEstimate estimate(std::span<const double> x, double count,
                      std::span<const double> levels,
                      std::uint64_t area_key) const override {
    auto draws = hs_predictive(*samples_, x, count,
                               derive_seed(seed_, {stream::predictive, area_key}));
    NsEstimate out;
    out.yhat_ns = mean(draws);
    std::sort(draws.begin(), draws.end());
    for (double level : levels) {
      const double alpha = 1.0 - level;
      out.intervals.push_back({level, quantile_sorted(draws, alpha / 2.0),
                               quantile_sorted(draws, 1.0 - alpha / 2.0)});
    }
    return out;
  }

  const PosteriorSamples& samples() const { return *samples_; }

 private:
  std::shared_ptr<PosteriorSamples> samples_;
  std::uint64_t seed_;
};

}  // namespace estimate_detail

inline PredictorFactory forest_factory(ForestHyper hyper) {
  return [hyper](const std::vector<ArealRow>& rows) -> PredictFn {
    auto forest = std::make_shared<Forest>(fit_forest(rows, hyper));
    return [forest](std::span<const double> x) { return forest->predict_point(x); };
  };
}

inline PredictorFactory lasso_factory(int grid_size, int folds, std::uint64_t seed,
                                      std::optional<std::size_t> forced = {}) {
  return [=](const std::vector<ArealRow>& rows) -> PredictFn {
    auto model =
        std::make_shared<LassoModel>(lasso_fit(rows, grid_size, folds, seed, forced));
    return [model](std::span<const double> x) { return lasso_predict(*model, x); };
  };
}

// A fitted method with handles to the concrete model for summaries.
struct MethodFit {
  std::unique_ptr<NsEstimator> estimator;
  std::shared_ptr<ConformalCalibration> conformal;  // forest, lasso
  std::shared_ptr<ForwardModel> forward;
  std::shared_ptr<LassoModel> lasso;  // the S1-trained model behind conformal
  std::shared_ptr<PosteriorSamples> horseshoe;
};

// Fits one method on the sampled rows.  Forest and LASSO points/intervals run
// through scaled split conformal (trained on the S1 half); forward and
// horseshoe fit on all sampled rows with their own interval constructions.
inline MethodFit fit_method(const std::vector<ArealRow>& train, Method method,
                            const MethodConfig& cfg,
                            const std::vector<double>& levels,
                            std::uint64_t seed) {
  MethodFit fit;
  switch (method) {
    case Method::Forest: {
      ForestHyper hyper = cfg.forest;
      hyper.seed = derive_seed(seed, {stream::tree});
      hyper.forced_index = cfg.forced;
      auto cal = calibrate(train, forest_factory(hyper), levels, true,
                           derive_seed(seed, {stream::split}));
      fit.conformal = std::make_shared<ConformalCalibration>(std::move(cal));
      fit.estimator =
          std::make_unique<estimate_detail::ConformalEstimator>(*fit.conformal);
      break;
    }
    case Method::Lasso: {
      std::shared_ptr<LassoModel> captured;
      auto factory = [&](const std::vector<ArealRow>& rows) -> PredictFn {
        auto model = std::make_shared<LassoModel>(
            lasso_fit(rows, cfg.lasso_grid, cfg.lasso_folds,
                      derive_seed(seed, {stream::cv_fold}), cfg.forced));
        captured = model;
        return [model](std::span<const double> x) { return lasso_predict(*model, x); };
      };
      auto cal = calibrate(train, factory, levels, true,
                           derive_seed(seed, {stream::split}));
      fit.lasso = captured;
      fit.conformal = std::make_shared<ConformalCalibration>(std::move(cal));
      fit.estimator =
          std::make_unique<estimate_detail::ConformalEstimator>(*fit.conformal);
      break;
    }
    case Method::Forward: {
      fit.forward = std::make_shared<ForwardModel>(forward_fit(train, cfg.forced));
      fit.estimator = std::make_unique<estimate_detail::ForwardEstimator>(*fit.forward);
      break;
    }
    case Method::Horseshoe: {
      HsConfig hs = cfg.hs;
      hs.seed = derive_seed(seed, {stream::chain});
      fit.horseshoe = std::make_shared<PosteriorSamples>(hs_fit(train, hs, cfg.forced));
      fit.estimator = std::make_unique<estimate_detail::HorseshoeEstimator>(
          fit.horseshoe, derive_seed(seed, {stream::predictive}));
      break;
    }
  }
  return fit;
}

// Estimates for every area of the dataset from an already fitted method.
// Anonymised assembly treats all areas as non-sampled (f_c = 0) while the fit
// stays based on the true sampled aggregates.
inline std::vector<AreaEstimate> estimate_all(const ArealDataset& dataset,
                                              const MethodFit& fit, Method method,
                                              const std::vector<double>& levels,
                                              bool anonymised, std::uint64_t seed) {
  const ArealDataset* view = &dataset;
  ArealDataset anon;
  if (anonymised && !dataset.anonymised) {
    anon = anonymise(dataset);
    view = &anon;
  }
  std::vector<double> sorted_levels = levels;
  std::sort(sorted_levels.begin(), sorted_levels.end());

  std::vector<AreaEstimate> out;
  out.reserve(view->rows.size());
  for (std::size_t i = 0; i < view->rows.size(); ++i) {
    const auto& row = view->rows[i];
    AreaEstimate est;
    if (row.frac_sampled >= 1.0) {
      NsEstimate ns;
      ns.yhat_ns = *row.ybar_s;
      for (double level : sorted_levels) ns.intervals.push_back({level, 0.0, 0.0});
      est = assemble(row, ns);
    } else {
      const auto ns = fit.estimator->estimate(
          row.xbar_ns, static_cast<double>(row.n_remaining()), sorted_levels,
          static_cast<std::uint64_t>(i));
      est = assemble(row, ns);
    }
    est.method = to_string(method);
    est.anonymised = view->anonymised;
    est.seed = seed;
    out.push_back(std::move(est));
  }
  return out;
}

// Convenience wrapper: fit + estimate in one call.
inline std::vector<AreaEstimate> run_method(const ArealDataset& dataset,
                                            Method method, const MethodConfig& cfg,
                                            const std::vector<double>& levels,
                                            bool anonymised, std::uint64_t seed) {
  const auto fit = fit_method(dataset.training_rows(), method, cfg, levels, seed);
  return estimate_all(dataset, fit, method, levels, anonymised, seed);
}

}  // namespace sae

#endif  // SAE_ESTIMATE_HPP
