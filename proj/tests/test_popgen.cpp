#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sae/popgen.hpp"

using namespace sae;

TEST_CASE("area sizes honour bounds and forced extremes", "[popgen]") {
  const auto two = area_sizes(2, 50, 500, 7);
  std::vector<std::int64_t> sorted = two;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::int64_t>{50, 500});

  const auto many = area_sizes(100, 50, 500, 11);
  CHECK(*std::min_element(many.begin(), many.end()) == 50);
  CHECK(*std::max_element(many.begin(), many.end()) == 500);
  for (auto s : many) {
    CHECK(s >= 50);
    CHECK(s <= 500);
  }
  CHECK(area_sizes(100, 50, 500, 11) == many);
  CHECK(area_sizes(1, 30, 30, 1) == std::vector<std::int64_t>{30});
  CHECK_THROWS_AS(area_sizes(3, 10, 5, 1), std::invalid_argument);
}

TEST_CASE("generation is reproducible bit for bit", "[popgen]") {
  PopulationSpec spec;
  spec.kind = PopulationKind::A;
  spec.n_areas = 12;
  spec.size_min = 20;
  spec.size_max = 40;
  spec.seed = 123;
  const auto p1 = generate(spec);
  const auto p2 = generate(spec);
  REQUIRE(p1.n_areas() == 12);
  for (std::size_t c = 0; c < 12; ++c) {
    CHECK(p1.areas[c].y == p2.areas[c].y);
    CHECK(p1.areas[c].unit_x == p2.areas[c].unit_x);
    CHECK(p1.areas[c].true_mean == p2.areas[c].true_mean);
  }
}

TEST_CASE("population A has the stated sparse coefficients", "[popgen]") {
  const auto beta = true_coefficients(PopulationKind::A);
  REQUIRE(beta.size() == 100);
  const std::vector<double> head{1, -1, 2, -1, 2, 1, 2, 1, -1, 1};
  int nonzero = 0;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) ++nonzero;
    if (j < 10) CHECK(beta[j] == head[j]);
  }
  CHECK(nonzero == 10);
  const auto beta_b = true_coefficients(PopulationKind::B);
  for (std::size_t j = 0; j < 10; ++j)
    CHECK(beta_b[j] == Catch::Approx(head[j] / 10.0));
}

TEST_CASE("population A regression recovers the coefficients", "[popgen][slow]") {
  PopulationSpec spec;
  spec.kind = PopulationKind::A;
  spec.n_areas = 200;
  spec.size_min = 50;
  spec.size_max = 200;
  spec.seed = 5;
  const auto pop = generate(spec);
  const std::size_t p = pop.p;

  // Unit-level least squares over the whole population via the oracle solver.
  std::vector<std::vector<double>> xtx(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> xty(p + 1, 0.0);
  std::vector<double> row(p + 1);
  for (const auto& area : pop.areas) {
    for (std::int64_t k = 0; k < area.size; ++k) {
      row[0] = 1.0;
      for (std::size_t j = 0; j < p; ++j)
        row[j + 1] = area.unit_cov(static_cast<std::size_t>(k), j, p);
      const double y = area.y[static_cast<std::size_t>(k)];
      for (std::size_t a = 0; a <= p; ++a) {
        xty[a] += row[a] * y;
        for (std::size_t b = a; b <= p; ++b) xtx[a][b] += row[a] * row[b];
      }
    }
  }
  for (std::size_t a = 0; a <= p; ++a)
    for (std::size_t b = 0; b < a; ++b) xtx[a][b] = xtx[b][a];
  const auto coef = oracle::solve_linear(xtx, xty);
  const auto beta = true_coefficients(PopulationKind::A);
  CHECK(std::fabs(coef[0] - 20.0) < 0.01);
  for (std::size_t j = 0; j < p; ++j)
    CHECK(std::fabs(coef[j + 1] - beta[j]) < 0.01);
}

TEST_CASE("population B covariates are equicorrelated at one half", "[popgen][slow]") {
  PopulationSpec spec;
  spec.kind = PopulationKind::B;
  spec.n_areas = 350;
  spec.size_min = 280;
  spec.size_max = 320;
  spec.seed = 9;
  const auto pop = generate(spec);
  REQUIRE(pop.n_units() >= 100000);

  const auto corr = [&](std::size_t a, std::size_t b) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    std::int64_t n = 0;
    for (const auto& area : pop.areas)
      for (std::int64_t k = 0; k < area.size; ++k) {
        const double xa = area.unit_cov(static_cast<std::size_t>(k), a, pop.p);
        const double xb = area.unit_cov(static_cast<std::size_t>(k), b, pop.p);
        sa += xa; sb += xb; saa += xa * xa; sbb += xb * xb; sab += xa * xb;
        ++n;
      }
    const double dn = static_cast<double>(n);
    const double cov = sab / dn - (sa / dn) * (sb / dn);
    const double va = saa / dn - (sa / dn) * (sa / dn);
    const double vb = sbb / dn - (sb / dn) * (sb / dn);
    return cov / std::sqrt(va * vb);
  };
  CHECK(std::fabs(corr(0, 1) - 0.5) < 0.02);
  CHECK(std::fabs(corr(4, 50) - 0.5) < 0.02);
  CHECK(std::fabs(corr(98, 99) - 0.5) < 0.02);
}

TEST_CASE("interval-study population has grand mean near 9.5", "[popgen][slow]") {
  PopulationSpec spec;  // defaults: 500 areas, sizes in [50, 500]
  spec.kind = PopulationKind::S31;
  spec.seed = 21;
  const auto pop = generate(spec);
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& area : pop.areas) {
    for (double y : area.y) sum += y;
    n += area.size;
  }
  CHECK(std::fabs(sum / static_cast<double>(n) - 9.5) < 0.05);
}

TEST_CASE("population C uses area-level covariates and stays above its envelope",
          "[popgen]") {
  PopulationSpec spec;
  spec.kind = PopulationKind::C;
  spec.n_areas = 150;
  spec.size_min = 100;
  spec.size_max = 400;
  spec.seed = 4;
  const auto pop = generate(spec);
  const auto& area = pop.areas[3];
  CHECK(area.unit_x.empty());
  CHECK(area.area_x.size() == 100);
  // every unit of an area shares its covariates
  CHECK(area.unit_cov(0, 7, pop.p) == area.unit_cov(5, 7, pop.p));
  for (double x : area.area_x) {
    CHECK(x >= -1.0);
    CHECK(x <= 1.0);
  }

  // y >= x1^2 + 1 - 3 sd except for a vanishing fraction (exp(x2^2) >= 1).
  const double sd = std::sqrt(0.3);
  std::int64_t below = 0, total = 0;
  for (const auto& a : pop.areas) {
    const double bound = a.area_x[0] * a.area_x[0] + 1.0 - 3.0 * sd;
    for (double y : a.y) {
      if (y < bound) ++below;
      ++total;
    }
  }
  CHECK(static_cast<double>(below) / static_cast<double>(total) < 0.005);
}

TEST_CASE("census view mirrors exact area means", "[popgen]") {
  PopulationSpec spec;
  spec.kind = PopulationKind::S31;
  spec.n_areas = 5;
  spec.size_min = 10;
  spec.size_max = 20;
  spec.seed = 2;
  const auto pop = generate(spec);
  const auto census = census_view(pop);
  REQUIRE(census.size() == 5);
  const auto& area = pop.areas[2];
  double sx = 0.0;
  for (std::int64_t k = 0; k < area.size; ++k)
    sx += area.unit_cov(static_cast<std::size_t>(k), 0, pop.p);
  CHECK(census[2].xbar[0] ==
        Catch::Approx(sx / static_cast<double>(area.size)).epsilon(1e-12));
  CHECK(census[2].n_total == area.size);

  const auto mu = true_means(pop);
  double sy = 0.0;
  for (double y : area.y) sy += y;
  CHECK(mu[2] == Catch::Approx(sy / static_cast<double>(area.size)).epsilon(1e-12));
  CHECK_THROWS_AS(generate(PopulationSpec{PopulationKind::A, 0, 10, 5, 1}),
                  std::invalid_argument);
}
