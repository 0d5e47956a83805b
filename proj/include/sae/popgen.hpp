#ifndef SAE_POPGEN_HPP
#define SAE_POPGEN_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "sae/areal.hpp"
#include "sae/rng.hpp"

namespace sae {

enum class PopulationKind { S31, A, B, C };

inline std::string to_string(PopulationKind k) {
  switch (k) {
    case PopulationKind::S31: return "s31";
    case PopulationKind::A: return "a";
    case PopulationKind::B: return "b";
    case PopulationKind::C: return "c";
  }
  throw std::invalid_argument("unknown population kind");
}

inline PopulationKind population_kind_from_string(const std::string& s) {
  if (s == "s31") return PopulationKind::S31;
  if (s == "a") return PopulationKind::A;
  if (s == "b") return PopulationKind::B;
  if (s == "c") return PopulationKind::C;
  throw std::invalid_argument("unknown population kind '" + s + "'");
}

struct PopulationSpec {
  PopulationKind kind = PopulationKind::S31;
  std::size_t n_areas = 0;  // 0: kind default (500 for S31, 1000 for A/B/C)
  std::int64_t size_min = 50;
  std::int64_t size_max = 500;
  std::uint64_t seed = 0;

  std::size_t resolved_areas() const {
    if (n_areas > 0) return n_areas;
    return kind == PopulationKind::S31 ? 500 : 1000;
  }
};

inline std::size_t covariate_count(PopulationKind k) {
  return k == PopulationKind::S31 ? 6 : 100;
}

// Generating coefficients for the linear populations (S31, A, B); empty for C.
inline std::vector<double> true_coefficients(PopulationKind k) {
  const std::size_t p = covariate_count(k);
  std::vector<double> beta(p, 0.0);
  switch (k) {
    case PopulationKind::S31: {
      const double v[6] = {1, -1, 2, -1, 2, 1};
      for (std::size_t j = 0; j < 6; ++j) beta[j] = v[j];
      break;
    }
    case PopulationKind::A:
    case PopulationKind::B: {
      const double v[10] = {1, -1, 2, -1, 2, 1, 2, 1, -1, 1};
      const double scale = (k == PopulationKind::B) ? 0.1 : 1.0;
      for (std::size_t j = 0; j < 10; ++j) beta[j] = v[j] * scale;
      break;
    }
    case PopulationKind::C:
      break;
  }
  return beta;
}

struct PopulationArea {
  std::string area_id;
  std::string stratum;
  std::int64_t size = 0;
  std::vector<double> y;       // length size
  std::vector<double> unit_x;  // size x p row-major; empty when covariates are
                               // constant within the area
  std::vector<double> area_x;  // p values when covariates are area-level
  std::vector<double> xbar;    // exact population covariate means
  double true_mean = 0.0;      // exact mean of y over the area

  bool unit_level_x() const { return !unit_x.empty(); }

  double unit_cov(std::size_t unit, std::size_t j, std::size_t p) const {
    return unit_level_x() ? unit_x[unit * p + j] : area_x[j];
  }
};

struct FinitePopulation {
  PopulationSpec spec;
  std::size_t p = 0;
  std::vector<PopulationArea> areas;

  std::size_t n_areas() const { return areas.size(); }
  std::int64_t n_units() const {
    std::int64_t n = 0;
    for (const auto& a : areas) n += a.size;
    return n;
  }
};

// Area sizes drawn uniformly on [size_min, size_max]; the minimum and maximum
// are forced to appear at least once so the stated extremes hold.
inline std::vector<std::int64_t> area_sizes(std::size_t n_areas,
                                            std::int64_t size_min,
                                            std::int64_t size_max,
                                            std::uint64_t seed) {
  if (n_areas < 1) throw std::invalid_argument("area_sizes: need >= 1 area");
  if (size_min < 1 || size_min > size_max)
    throw std::invalid_argument("area_sizes: invalid bounds");
  Rng rng(seed, {stream::area_sizes});
  std::vector<std::int64_t> sizes(n_areas);
  const std::uint64_t span = static_cast<std::uint64_t>(size_max - size_min) + 1;
  for (auto& s : sizes)
    s = size_min + static_cast<std::int64_t>(rng.uniform_int(span));
  if (n_areas >= 2) {
    const std::size_t i = static_cast<std::size_t>(rng.uniform_int(n_areas));
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(n_areas - 1));
    if (j >= i) ++j;
    sizes[i] = size_min;
    sizes[j] = size_max;
  }
  return sizes;
}

namespace popgen_detail {

inline std::string area_label(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "a%05zu", index + 1);
  return buf;
}

}  // namespace popgen_detail

// Deterministic synthetic finite populations.  Per-area substreams are
// derived from the seed, so generation order never affects the result.
//
//   S31: 6 i.i.d. N(0,1) unit covariates, y ~ N(9.5 + x'b, 1).
//   A:   100 i.i.d. N(0,1) unit covariates, y ~ N(20 + x'b, 0.5^2).
//   B:   as A with b/10 and covariates equicorrelated at 0.5 through the
//        one-factor representation x_j = sqrt(.5) u + sqrt(.5) e_j.
//   C:   100 area-level U(-1,1) covariates, y ~ N(x1^2 + exp(x2^2), 0.3).
inline FinitePopulation generate(const PopulationSpec& spec) {
  if (spec.size_min < 1 || spec.size_min > spec.size_max)
    throw std::invalid_argument("generate: invalid size bounds");
  const std::size_t M = spec.resolved_areas();
  if (M < 1) throw std::invalid_argument("generate: need >= 1 area");
  const std::size_t p = covariate_count(spec.kind);
  const std::vector<double> beta = true_coefficients(spec.kind);

  double intercept = 0.0;
  double resid_sd = 1.0;
  switch (spec.kind) {
    case PopulationKind::S31: intercept = 9.5; resid_sd = 1.0; break;
    case PopulationKind::A:
    case PopulationKind::B: intercept = 20.0; resid_sd = 0.5; break;
    case PopulationKind::C: resid_sd = std::sqrt(0.3); break;
  }

  FinitePopulation pop;
  pop.spec = spec;
  pop.p = p;
  pop.areas.resize(M);
  const auto sizes = area_sizes(M, spec.size_min, spec.size_max, spec.seed);

  for (std::size_t c = 0; c < M; ++c) {
    auto& area = pop.areas[c];
    area.area_id = popgen_detail::area_label(c);
    area.stratum = "all";
    area.size = sizes[c];
    const std::size_t n = static_cast<std::size_t>(area.size);
    Rng rng(spec.seed, {stream::population, static_cast<std::uint64_t>(c)});

    area.y.resize(n);
    area.xbar.assign(p, 0.0);
    if (spec.kind == PopulationKind::C) {
      area.area_x.resize(p);
      for (std::size_t j = 0; j < p; ++j) area.area_x[j] = rng.uniform(-1.0, 1.0);
      const double mu =
          area.area_x[0] * area.area_x[0] + std::exp(area.area_x[1] * area.area_x[1]);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        area.y[k] = mu + resid_sd * rng.normal();
        sum += area.y[k];
      }
      area.xbar = area.area_x;
      area.true_mean = sum / static_cast<double>(n);
      continue;
    }

    area.unit_x.resize(n * p);
    double y_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double mu = intercept;
      if (spec.kind == PopulationKind::B) {
        const double shared = rng.normal();
        for (std::size_t j = 0; j < p; ++j) {
          const double xj =
              std::sqrt(0.5) * shared + std::sqrt(0.5) * rng.normal();
          area.unit_x[k * p + j] = xj;
          mu += beta[j] * xj;
          area.xbar[j] += xj;
        }
      } else {
        for (std::size_t j = 0; j < p; ++j) {
          const double xj = rng.normal();
          area.unit_x[k * p + j] = xj;
          mu += beta[j] * xj;
          area.xbar[j] += xj;
        }
      }
      area.y[k] = mu + resid_sd * rng.normal();
      y_sum += area.y[k];
    }
    for (std::size_t j = 0; j < p; ++j) area.xbar[j] /= static_cast<double>(n);
    area.true_mean = y_sum / static_cast<double>(n);
  }
  return pop;
}

inline std::vector<CensusArea> census_view(const FinitePopulation& pop) {
  std::vector<CensusArea> census;
  census.reserve(pop.n_areas());
  for (const auto& a : pop.areas)
    census.push_back({a.area_id, a.stratum, a.size, a.xbar});
  return census;
}

inline std::vector<double> true_means(const FinitePopulation& pop) {
  std::vector<double> mu;
  mu.reserve(pop.n_areas());
  for (const auto& a : pop.areas) mu.push_back(a.true_mean);
  return mu;
}

}  // namespace sae

#endif  // SAE_POPGEN_HPP
