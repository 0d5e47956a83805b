#ifndef SAE_CONFORMAL_HPP
#define SAE_CONFORMAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sae/areal.hpp"
#include "sae/csv.hpp"
#include "sae/predictor.hpp"
#include "sae/rng.hpp"

namespace sae {

// Split-conformal calibration of a predictor on sampled areal rows.  The
// sample is split in half, the predictor trained on S1, and the absolute
// residuals on S2 (multiplied by sqrt(n_c) in the scaled variant) calibrate
// one quantile d per confidence level.  The S1-trained predictor also serves
// as the point-prediction source.
struct ConformalCalibration {
  PredictFn trained;
  bool scaled = true;
  std::uint64_t split_seed = 0;

  struct Residual {
    std::string area_id;
    std::int64_t n_sampled = 0;
    double residual = 0.0;         // |ybar_s - prediction|
    double scaled_residual = 0.0;  // sqrt(n_c) * residual
  };
  std::vector<Residual> calibration_residuals;  // S2, in split order
  std::vector<std::string> s1_area_ids;

  std::vector<std::pair<double, double>> d;  // (level, d_alpha), ascending level

  double quantile_for(double level) const {
    for (const auto& [lvl, value] : d)
      if (std::fabs(lvl - level) < 1e-9) return value;
    throw std::invalid_argument("conformal: level " + std::to_string(level) +
                                " was not calibrated");
  }
};

namespace conformal_detail {

// k_alpha = ceil((|S2|+1)(1-alpha)), guarded against binary representation
// noise in the product.
inline std::size_t order_index(std::size_t s2_size, double level) {
  const double v = (static_cast<double>(s2_size) + 1.0) * level;
  return static_cast<std::size_t>(std::ceil(v - 1e-9));
}

}  // namespace conformal_detail

// Calibration with an explicit S1 (training-half) index set; the public
// calibrate() draws the split at random.  Levels must satisfy
// k_alpha <= |S2|.
inline ConformalCalibration calibrate_with_split(
    const std::vector<ArealRow>& train, const std::vector<std::size_t>& s1,
    const PredictorFactory& factory, const std::vector<double>& levels,
    bool scaled, std::uint64_t split_seed = 0) {
  const std::size_t m = train.size();
  std::vector<bool> in_s1(m, false);
  for (std::size_t i : s1) {
    if (i >= m) throw std::invalid_argument("conformal: split index out of range");
    in_s1[i] = true;
  }
  std::vector<ArealRow> s1_rows;
  std::vector<std::size_t> s2;
  for (std::size_t i = 0; i < m; ++i)
    (in_s1[i] ? (void)s1_rows.push_back(train[i]) : s2.push_back(i));
  if (s1_rows.empty() || s2.empty())
    throw std::invalid_argument("conformal: both halves must be non-empty");

  ConformalCalibration cal;
  cal.scaled = scaled;
  cal.split_seed = split_seed;
  for (const auto& row : s1_rows) cal.s1_area_ids.push_back(row.area_id);
  cal.trained = factory(s1_rows);

  for (std::size_t i : s2) {
    const auto& row = train[i];
    if (!row.ybar_s)
      throw std::invalid_argument("conformal: calibration row without sampled mean");
    ConformalCalibration::Residual r;
    r.area_id = row.area_id;
    r.n_sampled = row.n_sampled;
    r.residual = std::fabs(*row.ybar_s - cal.trained(row.xbar_s));
    r.scaled_residual = std::sqrt(static_cast<double>(row.n_sampled)) * r.residual;
    cal.calibration_residuals.push_back(std::move(r));
  }

  std::vector<double> pool;
  pool.reserve(s2.size());
  for (const auto& r : cal.calibration_residuals)
    pool.push_back(scaled ? r.scaled_residual : r.residual);
  std::sort(pool.begin(), pool.end());

  std::vector<double> sorted_levels = levels;
  std::sort(sorted_levels.begin(), sorted_levels.end());
  for (double level : sorted_levels) {
    if (!(level > 0.0 && level < 1.0))
      throw std::invalid_argument("conformal: level outside (0,1)");
    const std::size_t k = conformal_detail::order_index(s2.size(), level);
    if (k > s2.size()) {
      const double max_level = static_cast<double>(s2.size()) /
                               (static_cast<double>(s2.size()) + 1.0);
      throw std::invalid_argument(
          "conformal: level " + std::to_string(level) +
          " unattainable with " + std::to_string(s2.size()) +
          " calibration areas (max attainable level " +
          std::to_string(max_level) + ")");
    }
    cal.d.emplace_back(level, pool[k - 1]);
  }
  return cal;
}

// Steps: random even split (odd m gives the extra row to S1), train on S1,
// absolute residuals on S2 (times sqrt(n_c) when scaled), and
// d = k-th smallest with k = ceil((|S2|+1)(1-alpha)).
inline ConformalCalibration calibrate(const std::vector<ArealRow>& train,
                                      const PredictorFactory& factory,
                                      const std::vector<double>& levels,
                                      bool scaled, std::uint64_t seed) {
  const std::size_t m = train.size();
  if (m < 4) throw std::invalid_argument("conformal: need >= 4 sampled areas");
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  Rng rng(seed, {stream::split});
  shuffle(order, rng);
  const std::size_t s1_size = (m + 1) / 2;
  order.resize(s1_size);
  return calibrate_with_split(train, order, factory, levels, scaled, seed);
}

// Rebuilds the calibrated quantiles from an existing calibration's residuals
// under the other scaling convention, reusing the trained predictor and split.
inline ConformalCalibration recalibrate(const ConformalCalibration& src,
                                        const std::vector<double>& levels,
                                        bool scaled) {
  ConformalCalibration cal = src;
  cal.scaled = scaled;
  cal.d.clear();
  std::vector<double> pool;
  pool.reserve(cal.calibration_residuals.size());
  for (const auto& r : cal.calibration_residuals)
    pool.push_back(scaled ? r.scaled_residual : r.residual);
  std::sort(pool.begin(), pool.end());
  std::vector<double> sorted_levels = levels;
  std::sort(sorted_levels.begin(), sorted_levels.end());
  for (double level : sorted_levels) {
    const std::size_t k = conformal_detail::order_index(pool.size(), level);
    if (k > pool.size())
      throw std::invalid_argument("conformal: level unattainable");
    cal.d.emplace_back(level, pool[k - 1]);
  }
  return cal;
}

struct ConformalInterval {
  double yhat_ns = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Interval for the mean of `count` remaining units at covariate vector x:
// scaled uses half-width d / sqrt(count), original a constant half-width d.
inline ConformalInterval conformal_interval_at(const ConformalCalibration& cal,
                                               std::span<const double> x,
                                               double count, double level) {
  const double d = cal.quantile_for(level);
  ConformalInterval out;
  out.yhat_ns = cal.trained(x);
  double half = d;
  if (cal.scaled) {
    if (count <= 0.0)
      throw std::invalid_argument(
          "conformal: scaled interval needs a positive remaining count");
    half = d / std::sqrt(count);
  }
  out.lower = out.yhat_ns - half;
  out.upper = out.yhat_ns + half;
  return out;
}

inline ConformalInterval conformal_interval(const ConformalCalibration& cal,
                                            const ArealRow& row, double level) {
  return conformal_interval_at(cal, row.xbar_ns,
                               static_cast<double>(row.n_remaining()), level);
}

// Audit dump of the calibration residuals.
inline void write_audit_csv(const ConformalCalibration& cal,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("conformal: cannot write " + path);
  out << "area_id,n_c,residual,scaled_residual\n";
  for (const auto& r : cal.calibration_residuals)
    out << r.area_id << ',' << r.n_sampled << ',' << fmt_double(r.residual)
        << ',' << fmt_double(r.scaled_residual) << "\n";
}

}  // namespace sae

#endif  // SAE_CONFORMAL_HPP
