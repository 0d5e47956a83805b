#ifndef SAE_SAMPLING_HPP
#define SAE_SAMPLING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sae/areal.hpp"
#include "sae/popgen.hpp"
#include "sae/rng.hpp"

namespace sae {

enum class DesignKind { Stratified, OneStage, TwoStage };

struct WithinFraction { double q = 0.5; };
struct WithinFixed { std::int64_t n = 15; };

// Sampling design: which areas are selected and how many units within each.
// Stratified takes all areas; OneStage enumerates every unit of the selected
// areas; TwoStage subsamples units within the selected areas.
struct Design {
  DesignKind kind = DesignKind::Stratified;
  double area_fraction = 1.0;  // 1.0 for Stratified
  std::variant<WithinFraction, WithinFixed> within = WithinFraction{0.5};

  void validate() const {
    if (!(area_fraction > 0.0 && area_fraction <= 1.0))
      throw std::invalid_argument("design: area_fraction outside (0,1]");
    if (kind == DesignKind::Stratified && area_fraction != 1.0)
      throw std::invalid_argument("design: stratified requires area_fraction 1");
    if (const auto* fr = std::get_if<WithinFraction>(&within)) {
      if (!(fr->q > 0.0 && fr->q <= 1.0))
        throw std::invalid_argument("design: within fraction outside (0,1]");
    } else if (const auto* fx = std::get_if<WithinFixed>(&within)) {
      if (fx->n < 1) throw std::invalid_argument("design: within count < 1");
    }
  }
};

namespace sampling_detail {

inline std::int64_t round_half_up(double v) {
  return static_cast<std::int64_t>(std::floor(v + 0.5));
}

}  // namespace sampling_detail

// Draws the unit-level sample for a design: areas by SRSWOR when
// area_fraction < 1, units within selected areas by SRSWOR.  Per-area unit
// draws use substreams derived from (seed, area), so a draw is reproducible
// independently of evaluation order.
inline std::vector<UnitRecord> draw_units(const FinitePopulation& pop,
                                          const Design& design,
                                          std::uint64_t seed) {
  design.validate();
  const std::size_t M = pop.n_areas();
  if (M == 0) throw std::invalid_argument("draw: empty population");

  std::vector<std::size_t> selected;
  if (design.area_fraction >= 1.0) {
    selected.resize(M);
    for (std::size_t c = 0; c < M; ++c) selected[c] = c;
  } else {
    const auto m_target = sampling_detail::round_half_up(
        design.area_fraction * static_cast<double>(M));
    const std::size_t m = static_cast<std::size_t>(
        std::clamp<std::int64_t>(m_target, 1, static_cast<std::int64_t>(M)));
    Rng rng(seed, {stream::draw_areas});
    selected = sample_without_replacement(M, m, rng);
    std::sort(selected.begin(), selected.end());
  }

  std::vector<UnitRecord> units;
  for (std::size_t c : selected) {
    const auto& area = pop.areas[c];
    std::int64_t n_c = 0;
    if (design.kind == DesignKind::OneStage) {
      n_c = area.size;
    } else if (const auto* fr = std::get_if<WithinFraction>(&design.within)) {
      n_c = std::clamp<std::int64_t>(
          sampling_detail::round_half_up(fr->q * static_cast<double>(area.size)),
          1, area.size);
    } else {
      const auto fx = std::get<WithinFixed>(design.within);
      if (fx.n > area.size)
        throw std::invalid_argument("draw: fixed within-area size " +
                                    std::to_string(fx.n) + " exceeds area " +
                                    area.area_id + " size " +
                                    std::to_string(area.size));
      n_c = fx.n;
    }
    Rng rng(seed, {stream::draw_units, static_cast<std::uint64_t>(c)});
    const auto picks = sample_without_replacement(
        static_cast<std::size_t>(area.size), static_cast<std::size_t>(n_c), rng);
    for (std::size_t k : picks) {
      UnitRecord u;
      u.area_id = area.area_id;
      u.stratum = area.stratum;
      u.y = area.y[k];
      u.x.resize(pop.p);
      for (std::size_t j = 0; j < pop.p; ++j) u.x[j] = area.unit_cov(k, j, pop.p);
      units.push_back(std::move(u));
    }
  }
  return units;
}

// One sample aggregated to the areal level, with a row for every area of the
// population.
inline ArealDataset draw(const FinitePopulation& pop, const Design& design,
                         std::uint64_t seed) {
  return aggregate(draw_units(pop, design, seed), census_view(pop));
}

// Partitions the sampled areas of a dataset into k disjoint folds.  With
// stratum_balance, each fold receives floor(count/k) or ceil(count/k) areas
// from every stratum (round-robin after a seeded shuffle, with the starting
// fold rotated across strata to even out totals).
inline std::vector<std::vector<std::string>> kfold_split(
    const ArealDataset& ds, std::size_t k, bool stratum_balance,
    std::uint64_t seed) {
  const auto& train = ds.training_rows();
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (k > train.size())
    throw std::invalid_argument("kfold_split: k exceeds sampled area count");

  std::vector<std::vector<std::string>> folds(k);
  Rng rng(seed, {stream::kfold});
  if (!stratum_balance) {
    std::vector<std::string> ids;
    for (const auto& row : train) ids.push_back(row.area_id);
    shuffle(ids, rng);
    for (std::size_t i = 0; i < ids.size(); ++i)
      folds[i % k].push_back(ids[i]);
    return folds;
  }

  // Strata in order of first appearance among the sampled rows.
  std::vector<std::string> stratum_order;
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& row : train) {
    if (groups.find(row.stratum) == groups.end())
      stratum_order.push_back(row.stratum);
    groups[row.stratum].push_back(row.area_id);
  }
  std::size_t start = 0;
  for (const auto& name : stratum_order) {
    auto& ids = groups[name];
    shuffle(ids, rng);
    for (std::size_t i = 0; i < ids.size(); ++i)
      folds[(start + i) % k].push_back(ids[i]);
    start = (start + ids.size()) % k;
  }
  return folds;
}

}  // namespace sae

#endif  // SAE_SAMPLING_HPP
