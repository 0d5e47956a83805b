#ifndef SAE_METRICS_HPP
#define SAE_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sae/estimate.hpp"

namespace sae {

// Proper interval score for a (1-alpha) interval [lower, upper]:
// (U - L) + 2/alpha [(L - t) 1{L > t} + (t - U) 1{U < t}].
inline double interval_score(double lower, double upper, double alpha,
                             double truth) {
  if (lower > upper) throw std::invalid_argument("interval_score: lower > upper");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("interval_score: alpha outside (0,1)");
  double score = upper - lower;
  if (lower > truth) score += 2.0 / alpha * (lower - truth);
  if (upper < truth) score += 2.0 / alpha * (truth - upper);
  return score;
}

// One estimate to score: which area, which replicate, whether the area was
// sampled in that replicate.
struct ScoredEstimate {
  std::string area_id;
  int replicate = 0;
  bool sampled = false;
  double point = 0.0;
  std::vector<LevelInterval> intervals;
};

struct MetricsCell {
  std::string group;  // "sampled", "nonsampled" or "all"
  std::size_t n_pairs = 0;
  std::size_t n_replicates = 0;
  // Mean over areas of |mean over replicates of (estimate - truth)|.
  double bias_area_abs = 0.0;
  // |mean error| pooled over all (area, replicate) pairs; signed errors may
  // cancel across areas.
  double bias_overall_abs = 0.0;
  double mse = 0.0;
  std::vector<std::pair<double, double>> coverage;    // (level, coverage)
  std::vector<std::pair<double, double>> mean_score;  // (level, mean score)
  std::vector<std::pair<double, double>> mean_width;  // (level, mean width)
};

// Scores estimates against per-area truth, split into sampled / non-sampled /
// pooled groups.  Bias is aggregated areas-then-replicates; MSE, coverage and
// proper score pool all (area, replicate) pairs of the group.
inline std::vector<MetricsCell> score_replicates(
    const std::vector<ScoredEstimate>& records,
    const std::unordered_map<std::string, double>& truth) {
  if (records.empty()) throw std::invalid_argument("score_replicates: empty group");

  std::vector<double> levels;
  for (const auto& iv : records.front().intervals) levels.push_back(iv.level);

  struct Accum {
    std::map<std::string, std::pair<double, std::size_t>> area_error;  // sum, n
    std::map<int, bool> replicates;
    double error_sum = 0.0;
    double sq_sum = 0.0;
    std::size_t n = 0;
    std::vector<double> covered, score, width;
  };
  std::map<std::string, Accum> groups;

  for (const auto& rec : records) {
    auto it = truth.find(rec.area_id);
    if (it == truth.end())
      throw std::invalid_argument("score_replicates: area " + rec.area_id +
                                  " missing from truth");
    const double err = rec.point - it->second;
    for (const std::string& g :
         {std::string(rec.sampled ? "sampled" : "nonsampled"), std::string("all")}) {
      auto& acc = groups[g];
      if (acc.covered.empty()) {
        acc.covered.assign(levels.size(), 0.0);
        acc.score.assign(levels.size(), 0.0);
        acc.width.assign(levels.size(), 0.0);
      }
      auto& [sum, count] = acc.area_error[rec.area_id];
      sum += err;
      count += 1;
      acc.replicates[rec.replicate] = true;
      acc.error_sum += err;
      acc.sq_sum += err * err;
      acc.n += 1;
      if (rec.intervals.size() != levels.size())
        throw std::invalid_argument("score_replicates: inconsistent levels");
      for (std::size_t k = 0; k < levels.size(); ++k) {
        const auto& iv = rec.intervals[k];
        if (iv.lower <= it->second && it->second <= iv.upper)
          acc.covered[k] += 1.0;
        acc.score[k] += interval_score(iv.lower, iv.upper, 1.0 - iv.level, it->second);
        acc.width[k] += iv.upper - iv.lower;
      }
    }
  }

  std::vector<MetricsCell> out;
  for (auto& [name, acc] : groups) {
    MetricsCell cell;
    cell.group = name;
    cell.n_pairs = acc.n;
    cell.n_replicates = acc.replicates.size();
    double abs_sum = 0.0;
    for (const auto& [area, se] : acc.area_error)
      abs_sum += std::fabs(se.first / static_cast<double>(se.second));
    cell.bias_area_abs = abs_sum / static_cast<double>(acc.area_error.size());
    cell.bias_overall_abs = std::fabs(acc.error_sum / static_cast<double>(acc.n));
    cell.mse = acc.sq_sum / static_cast<double>(acc.n);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      cell.coverage.emplace_back(levels[k], acc.covered[k] / static_cast<double>(acc.n));
      cell.mean_score.emplace_back(levels[k], acc.score[k] / static_cast<double>(acc.n));
      cell.mean_width.emplace_back(levels[k], acc.width[k] / static_cast<double>(acc.n));
    }
    out.push_back(std::move(cell));
  }
  return out;
}

// Fraction of replicates selecting each covariate index.
inline std::vector<double> selection_frequency(
    const std::vector<std::vector<std::size_t>>& selected_sets, std::size_t p) {
  std::vector<double> freq(p, 0.0);
  if (selected_sets.empty()) return freq;
  for (const auto& set : selected_sets)
    for (std::size_t j : set)
      if (j < p) freq[j] += 1.0;
  for (auto& f : freq) f /= static_cast<double>(selected_sets.size());
  return freq;
}

// Right-continuous empirical CDF as sorted (value, cumulative fraction) steps;
// duplicate values collapse into one step.
inline std::vector<std::pair<double, double>> ecdf(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ecdf: empty input");
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> steps;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    steps.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return steps;
}

}  // namespace sae

#endif  // SAE_METRICS_HPP
