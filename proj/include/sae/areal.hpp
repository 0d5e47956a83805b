#ifndef SAE_AREAL_HPP
#define SAE_AREAL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sae {

// One surveyed (or census) unit: outcome may be absent for census units.
struct UnitRecord {
  std::string area_id;
  std::string stratum;
  std::optional<double> y;
  std::vector<double> x;
};

// Census-side information for one area: total unit count and the population
// covariate means.
struct CensusArea {
  std::string area_id;
  std::string stratum;
  std::int64_t n_total = 0;
  std::vector<double> xbar;
};

// Per-area aggregates: the sole input to every predictor.
struct ArealRow {
  std::string area_id;
  std::string stratum;
  std::int64_t n_total = 0;    // N_c
  std::int64_t n_sampled = 0;  // n_c
  double frac_sampled = 0.0;   // f_c = n_c / N_c
  std::optional<double> ybar_s;
  std::vector<double> xbar_s;  // empty when no units sampled
  std::vector<double> xbar;
  std::vector<double> xbar_ns;

  std::int64_t n_remaining() const { return n_total - n_sampled; }
};

struct ArealDataset {
  std::vector<ArealRow> rows;  // one per area; the prediction-side view
  std::size_t p = 0;
  std::vector<std::string> covariate_names;
  std::optional<std::size_t> design_variable_index;
  bool anonymised = false;

  // Sampled-area aggregates used for fitting.  Identical to the sampled
  // subset of `rows` until anonymise() detaches the two views.
  std::vector<ArealRow> fit_rows;

  const std::vector<ArealRow>& training_rows() const {
    if (fit_rows.empty())
      throw std::runtime_error("ArealDataset: no sampled rows to train on");
    return fit_rows;
  }
};

struct AggregateOptions {
  // When set, append a 0/1 indicator covariate for rows whose stratum equals
  // this label and record it as the dataset's design variable.
  std::optional<std::string> stratum_indicator;
  // Labels for the raw covariates; defaults to x1..xp.
  std::vector<std::string> covariate_names;
};

// Collapses unit records into one ArealRow per census area.  Non-sampled
// areas get n_c = 0 and xbar_ns = xbar; partially sampled areas get
// xbar_ns = (xbar - f_c xbar_s) / (1 - f_c) coordinate-wise.
inline ArealDataset aggregate(const std::vector<UnitRecord>& units,
                              const std::vector<CensusArea>& census,
                              const AggregateOptions& opts = {}) {
  if (census.empty()) throw std::invalid_argument("aggregate: empty census");
  const std::size_t p_raw = census.front().xbar.size();

  std::unordered_map<std::string, std::size_t> area_index;
  area_index.reserve(census.size());
  for (std::size_t i = 0; i < census.size(); ++i) {
    const auto& c = census[i];
    if (c.xbar.size() != p_raw)
      throw std::invalid_argument("aggregate: census covariate dimensions differ");
    if (c.n_total < 1)
      throw std::invalid_argument("aggregate: census area " + c.area_id +
                                  " has N < 1");
    if (!area_index.emplace(c.area_id, i).second)
      throw std::invalid_argument("aggregate: duplicate census area_id " +
                                  c.area_id);
  }

  std::vector<std::int64_t> counts(census.size(), 0);
  std::vector<double> y_sums(census.size(), 0.0);
  std::vector<std::vector<double>> x_sums(census.size(),
                                          std::vector<double>(p_raw, 0.0));
  for (const auto& u : units) {
    if (u.area_id.empty())
      throw std::invalid_argument("aggregate: unit with empty area_id");
    auto it = area_index.find(u.area_id);
    if (it == area_index.end())
      throw std::invalid_argument("aggregate: sampled area " + u.area_id +
                                  " missing from census");
    if (u.x.size() != p_raw)
      throw std::invalid_argument(
          "aggregate: unit covariate dimension mismatch in area " + u.area_id);
    if (!u.y.has_value())
      throw std::invalid_argument("aggregate: sampled unit without outcome in area " +
                                  u.area_id);
    const std::size_t i = it->second;
    counts[i] += 1;
    y_sums[i] += *u.y;
    for (std::size_t j = 0; j < p_raw; ++j) x_sums[i][j] += u.x[j];
  }

  ArealDataset ds;
  ds.p = p_raw + (opts.stratum_indicator ? 1 : 0);
  if (opts.stratum_indicator) ds.design_variable_index = p_raw;
  ds.rows.reserve(census.size());

  bool any_sampled = false;
  for (std::size_t i = 0; i < census.size(); ++i) {
    const auto& c = census[i];
    ArealRow row;
    row.area_id = c.area_id;
    row.stratum = c.stratum;
    row.n_total = c.n_total;
    row.n_sampled = counts[i];
    if (row.n_sampled > row.n_total)
      throw std::invalid_argument("aggregate: area " + c.area_id +
                                  " has more sampled units than N");
    row.frac_sampled = static_cast<double>(row.n_sampled) /
                       static_cast<double>(row.n_total);
    row.xbar = c.xbar;
    if (row.n_sampled > 0) {
      any_sampled = true;
      row.ybar_s = y_sums[i] / static_cast<double>(row.n_sampled);
      row.xbar_s.resize(p_raw);
      for (std::size_t j = 0; j < p_raw; ++j)
        row.xbar_s[j] = x_sums[i][j] / static_cast<double>(row.n_sampled);
    }
    if (row.n_sampled == 0 || row.n_sampled == row.n_total) {
      row.xbar_ns = row.xbar;
    } else {
      row.xbar_ns.resize(p_raw);
      const double f = row.frac_sampled;
      for (std::size_t j = 0; j < p_raw; ++j)
        row.xbar_ns[j] = (row.xbar[j] - f * row.xbar_s[j]) / (1.0 - f);
    }
    if (opts.stratum_indicator) {
      const double ind = (row.stratum == *opts.stratum_indicator) ? 1.0 : 0.0;
      row.xbar.push_back(ind);
      row.xbar_ns.push_back(ind);
      if (row.n_sampled > 0) row.xbar_s.push_back(ind);
    }
    ds.rows.push_back(std::move(row));
  }
  if (!any_sampled)
    throw std::invalid_argument("aggregate: no sampled areas");

  if (!opts.covariate_names.empty() && opts.covariate_names.size() != p_raw)
    throw std::invalid_argument("aggregate: covariate_names length mismatch");
  ds.covariate_names.reserve(ds.p);
  if (opts.covariate_names.empty()) {
    for (std::size_t j = 0; j < p_raw; ++j)
      ds.covariate_names.push_back("x" + std::to_string(j + 1));
  } else {
    ds.covariate_names = opts.covariate_names;
  }
  if (opts.stratum_indicator)
    ds.covariate_names.push_back("stratum_is_" + *opts.stratum_indicator);

  for (const auto& row : ds.rows)
    if (row.n_sampled > 0) ds.fit_rows.push_back(row);
  return ds;
}

// Prediction-stage view with f_c = 0 everywhere: every area is treated as
// fully non-sampled while the original sampled aggregates are kept for
// fitting.  Idempotent.
inline ArealDataset anonymise(const ArealDataset& ds) {
  ArealDataset out = ds;
  out.anonymised = true;
  for (auto& row : out.rows) {
    row.n_sampled = 0;
    row.frac_sampled = 0.0;
    row.ybar_s.reset();
    row.xbar_s.clear();
    row.xbar_ns = row.xbar;
  }
  return out;
}

}  // namespace sae

#endif  // SAE_AREAL_HPP
