#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sae/estimate.hpp"
#include "sae/popgen.hpp"
#include "sae/sampling.hpp"

using namespace sae;

namespace {

ArealRow blend_row(double f, std::optional<double> ybar, std::int64_t n_total = 100) {
  ArealRow row;
  row.area_id = "a1";
  row.n_total = n_total;
  row.n_sampled = static_cast<std::int64_t>(f * static_cast<double>(n_total));
  row.frac_sampled = f;
  row.ybar_s = ybar;
  row.xbar_s = {0.0};
  row.xbar = {0.0};
  row.xbar_ns = {0.0};
  return row;
}

NsEstimate ns_of(double yhat, double lo, double hi, double level = 0.8) {
  NsEstimate ns;
  ns.yhat_ns = yhat;
  ns.intervals.push_back({level, lo, hi});
  return ns;
}

ArealDataset tiny_dataset(std::uint64_t seed, std::size_t areas = 24) {
  PopulationSpec spec;
  spec.kind = PopulationKind::S31;
  spec.n_areas = areas;
  spec.size_min = 30;
  spec.size_max = 60;
  spec.seed = seed;
  const auto pop = generate(spec);
  return draw(pop, {DesignKind::Stratified, 1.0, WithinFraction{0.5}}, seed + 1);
}

}  // namespace

TEST_CASE("assembly blends with the sampling fraction", "[estimate]") {
  // f = 0: the estimate is the prediction
  const auto e0 = assemble(blend_row(0.0, std::nullopt), ns_of(8.0, 7.0, 9.0));
  CHECK(e0.point == 8.0);
  CHECK(e0.intervals[0].lower == 7.0);
  CHECK(e0.intervals[0].upper == 9.0);

  // f = 1: the observed mean with a zero-width interval
  const auto e1 = assemble(blend_row(1.0, 5.0), ns_of(123.0, 0.0, 999.0));
  CHECK(e1.point == 5.0);
  CHECK(e1.intervals[0].lower == 5.0);
  CHECK(e1.intervals[0].upper == 5.0);

  // f = 0.5: point 9, interval (8.5, 9.5)
  const auto eh = assemble(blend_row(0.5, 10.0), ns_of(8.0, 7.0, 9.0));
  CHECK(eh.point == Catch::Approx(9.0));
  CHECK(eh.intervals[0].lower == Catch::Approx(8.5));
  CHECK(eh.intervals[0].upper == Catch::Approx(9.5));

  // the blended point stays between the observed and predicted means
  CHECK(eh.point >= 8.0);
  CHECK(eh.point <= 10.0);
}

TEST_CASE("assembly requires a sampled mean when f > 0", "[estimate]") {
  CHECK_THROWS_AS(assemble(blend_row(0.5, std::nullopt), ns_of(1.0, 0.0, 2.0)),
                  std::invalid_argument);
}

TEST_CASE("all four methods produce nested intervals on a common dataset",
          "[estimate][slow]") {
  const auto ds = tiny_dataset(5);
  MethodConfig cfg;
  cfg.forest = {60, 2, 3, 0, {}};
  cfg.lasso_folds = 5;
  cfg.lasso_grid = 40;
  cfg.hs.chains = 1;
  cfg.hs.iterations = 500;
  cfg.hs.burn_in = 250;
  const std::vector<double> levels{0.5, 0.8, 0.95};
  for (Method method : {Method::Forest, Method::Lasso, Method::Forward,
                        Method::Horseshoe}) {
    const auto estimates = run_method(ds, method, cfg, levels, false, 9);
    REQUIRE(estimates.size() == ds.rows.size());
    for (const auto& est : estimates) {
      REQUIRE(est.intervals.size() == 3);
      for (std::size_t k = 0; k + 1 < est.intervals.size(); ++k) {
        CHECK(est.intervals[k].lower >= est.intervals[k + 1].lower - 1e-12);
        CHECK(est.intervals[k].upper <= est.intervals[k + 1].upper + 1e-12);
        CHECK(est.intervals[k].lower <= est.intervals[k].upper);
      }
      CHECK(est.method == to_string(method));
    }
  }
}

TEST_CASE("one-stage sampled areas are estimated exactly", "[estimate]") {
  PopulationSpec spec;
  spec.kind = PopulationKind::S31;
  spec.n_areas = 16;
  spec.size_min = 20;
  spec.size_max = 40;
  spec.seed = 3;
  const auto pop = generate(spec);
  const auto ds = draw(pop, {DesignKind::OneStage, 0.5, WithinFraction{1.0}}, 4);
  MethodConfig cfg;
  const auto estimates = run_method(ds, Method::Forward, cfg, {0.8}, false, 10);
  for (std::size_t c = 0; c < ds.rows.size(); ++c) {
    if (ds.rows[c].frac_sampled < 1.0) continue;
    CHECK(estimates[c].point == Catch::Approx(pop.areas[c].true_mean).epsilon(1e-12));
    CHECK(estimates[c].intervals[0].lower == estimates[c].intervals[0].upper);
  }
}

TEST_CASE("anonymised estimates equal the raw predictions", "[estimate]") {
  const auto ds = tiny_dataset(7);
  MethodConfig cfg;
  const auto fit = fit_method(ds.training_rows(), Method::Forward, cfg, {0.8}, 11);
  const auto anon = estimate_all(ds, fit, Method::Forward, {0.8}, true, 11);
  for (std::size_t c = 0; c < ds.rows.size(); ++c) {
    CHECK(anon[c].anonymised);
    CHECK(anon[c].frac_sampled == 0.0);
    // prediction at the census mean, no blending with the observed mean
    const double direct = forward_predict(*fit.forward, ds.rows[c].xbar);
    CHECK(anon[c].point == Catch::Approx(direct).epsilon(1e-12));
  }
  // known-EA assembly differs on sampled areas
  const auto known = estimate_all(ds, fit, Method::Forward, {0.8}, false, 11);
  bool any_differs = false;
  for (std::size_t c = 0; c < ds.rows.size(); ++c)
    any_differs |= std::fabs(known[c].point - anon[c].point) > 1e-12;
  CHECK(any_differs);
}

TEST_CASE("horseshoe estimates blend empirical predictive quantiles", "[estimate]") {
  const auto ds = tiny_dataset(9, 12);
  MethodConfig cfg;
  cfg.hs.chains = 1;
  cfg.hs.iterations = 400;
  cfg.hs.burn_in = 200;
  const auto estimates = run_method(ds, Method::Horseshoe, cfg, {0.5, 0.95}, false, 13);
  for (const auto& est : estimates) {
    REQUIRE(est.intervals.size() == 2);
    CHECK(est.intervals[0].lower >= est.intervals[1].lower - 1e-12);
    CHECK(est.intervals[0].upper <= est.intervals[1].upper + 1e-12);
  }
}

TEST_CASE("method name round trip", "[estimate]") {
  for (Method m : {Method::Forest, Method::Lasso, Method::Forward, Method::Horseshoe})
    CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(method_from_string("ridge"), std::invalid_argument);
}
