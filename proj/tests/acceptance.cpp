// Acceptance suite: runs the scenario-level checks end to end and prints one
// pass/fail line per criterion.  Exits non-zero if any criterion fails.
//
// Usage: sae_acceptance [criterion ids...]   (default: all)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sae/harness.hpp"

using namespace sae;

namespace {

int g_failures = 0;

void line(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] C%d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void info(const std::string& msg) {
  std::printf("       %s\n", msg.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

double sc_cell(const std::vector<ScCompareCell>& cells, int design,
               const std::string& method, const std::string& variant,
               const std::string& group, double level, bool width = false) {
  for (const auto& c : cells)
    if (c.design == design && c.method == method && c.variant == variant &&
        c.group == group && std::fabs(c.level - level) < 1e-9)
      return width ? c.mean_width : c.coverage;
  throw std::runtime_error("sc cell not found");
}

const MetricsCell& sim_cell(const SimulateResult& result, const std::string& method,
                            int variant, const std::string& group) {
  for (const auto& cell : result.metrics.at(method).at(variant))
    if (cell.group == group) return cell;
  throw std::runtime_error("simulate cell not found: " + method + "/" + group);
}

double cov_at(const MetricsCell& cell, double level) {
  for (const auto& [l, v] : cell.coverage)
    if (std::fabs(l - level) < 1e-9) return v;
  throw std::runtime_error("level not found");
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sae_acc_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// ---------------------------------------------------------------------------

void criterion1() {
  // Two-stage design with 50% within-area sampling, correct-covariate linear
  // predictor, 200 replicates.  Scaled split conformal must hit nominal
  // coverage within 0.03 at every level; the original variant must fall below
  // 0.92 at the 95% level.
  ScCompareOptions opts;
  opts.n_areas = 200;
  opts.size_min = 50;
  opts.size_max = 200;
  opts.replicates = 200;
  opts.designs = {4};
  opts.methods = {"linear-correct"};
  opts.seed = 20260810;
  opts.workers = 1;
  const auto cells = run_sc_compare(opts);

  bool scaled_ok = true;
  std::string detail;
  for (double level : {0.5, 0.8, 0.95}) {
    const double cov = sc_cell(cells, 4, "linear-correct", "scaled-sc", "all", level);
    scaled_ok = scaled_ok && std::fabs(cov - level) <= 0.03;
    detail += "scaled cov" + std::to_string(int(level * 100)) + "=" + fmt(cov) + " ";
  }
  double orig_min = 1.0;
  for (const std::string& group : {std::string("sampled"), std::string("nonsampled"),
                                   std::string("all")}) {
    const double cov = sc_cell(cells, 4, "linear-correct", "original-sc", group, 0.95);
    orig_min = std::min(orig_min, cov);
    detail += "orig cov95[" + group + "]=" + fmt(cov) + " ";
  }
  const bool orig_under = orig_min < 0.92;
  line(1, "scaled split-conformal validity", scaled_ok && orig_under, detail);
  if (!orig_under)
    info("original SC does not under-cover in design 4 at this scale; "
         "see design 2 below for where under-coverage does appear");

  // Context: design 2 (stratified, 70% within) is the setting where the
  // original variant's under-coverage is expected to be visible.
  ScCompareOptions ctx = opts;
  ctx.designs = {2};
  const auto ctx_cells = run_sc_compare(ctx);
  info("context design 2: original cov95[all]=" +
       fmt(sc_cell(ctx_cells, 2, "linear-correct", "original-sc", "all", 0.95)) +
       " scaled cov95[all]=" +
       fmt(sc_cell(ctx_cells, 2, "linear-correct", "scaled-sc", "all", 0.95)));
}

void criterion2() {
  // Constant even area sizes make n_c = N_c - n_c exact under the stratified
  // half design, so the scaled and original intervals must coincide.
  PopulationSpec spec;
  spec.kind = PopulationKind::S31;
  spec.n_areas = 40;
  spec.size_min = 120;
  spec.size_max = 120;
  spec.seed = 31;
  const auto pop = generate(spec);
  const std::vector<double> levels{0.5, 0.8, 0.95};
  double max_diff = 0.0;
  for (int r = 0; r < 3; ++r) {
    const auto ds = draw(pop, s31_design(1), derive_seed(7, {std::uint64_t(r)}));
    const auto scaled = calibrate(ds.training_rows(), ols_factory({0, 1, 2, 3, 4, 5}),
                                  levels, true, derive_seed(8, {std::uint64_t(r)}));
    const auto original = recalibrate(scaled, levels, false);
    for (const auto& row : ds.rows) {
      for (double level : levels) {
        NsEstimate ns_s, ns_o;
        ns_s.yhat_ns = ns_o.yhat_ns = scaled.trained(row.xbar_ns);
        const auto ivs = conformal_interval(scaled, row, level);
        const auto ivo = conformal_interval(original, row, level);
        ns_s.intervals.push_back({level, ivs.lower, ivs.upper});
        ns_o.intervals.push_back({level, ivo.lower, ivo.upper});
        const auto es = assemble(row, ns_s);
        const auto eo = assemble(row, ns_o);
        max_diff = std::max(max_diff,
                            std::fabs(es.intervals[0].lower - eo.intervals[0].lower));
        max_diff = std::max(max_diff,
                            std::fabs(es.intervals[0].upper - eo.intervals[0].upper));
      }
    }
  }
  line(2, "scaled = original when n_c equals the remainder", max_diff <= 1e-12,
       "max endpoint difference " + std::to_string(max_diff));
}

void criterion3() {
  // Orthonormal designs: coefficient-wise soft threshold; lambda = 0: OLS.
  const std::array<std::array<double, 2>, 8> h{{{+1, +1},
                                                {-1, +1},
                                                {+1, -1},
                                                {-1, -1},
                                                {+1, +1},
                                                {-1, +1},
                                                {+1, -1},
                                                {-1, -1}}};
  Rng rng(17);
  bool ok = true;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<ArealRow> rows;
    std::vector<double> y(8);
    double mean_y = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      y[i] = rng.normal(0, 2);
      mean_y += y[i] / 8.0;
      ArealRow row;
      row.area_id = "a" + std::to_string(i);
      row.n_total = 4;
      row.n_sampled = 2;
      row.frac_sampled = 0.5;
      row.ybar_s = y[i];
      row.xbar_s = {h[i][0], h[i][1]};
      row.xbar = row.xbar_s;
      row.xbar_ns = row.xbar_s;
      rows.push_back(row);
    }
    for (double lambda : {0.05, 0.3, 1.0}) {
      const auto model = lasso_fit_fixed(rows, lambda);
      for (std::size_t j = 0; j < 2; ++j) {
        double ols = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
          ols += h[i][j] * (y[i] - mean_y) / 8.0;
        worst = std::max(worst, std::fabs(model.beta[j] -
                                          oracle::soft_threshold(ols, lambda)));
      }
    }
  }
  ok = ok && worst <= 1e-6;

  // lambda = 0 equals least squares on a generic full-rank design
  double worst0 = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<ArealRow> rows;
    std::vector<std::vector<double>> z;
    std::vector<double> y, w;
    for (int i = 0; i < 40; ++i) {
      const std::vector<double> x{rng.normal(), rng.normal(2, 1), rng.normal(-1, 2)};
      const double yi = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + rng.normal(0, 0.3);
      ArealRow row;
      row.area_id = "b" + std::to_string(i);
      row.n_total = 10;
      row.n_sampled = 5;
      row.frac_sampled = 0.5;
      row.ybar_s = yi;
      row.xbar_s = x;
      row.xbar = x;
      row.xbar_ns = x;
      rows.push_back(row);
      z.push_back({1.0, x[0], x[1], x[2]});
      y.push_back(yi);
      w.push_back(1.0);
    }
    const auto ols = oracle::wls(z, y, w);
    const auto model = lasso_fit_fixed(rows, 0.0);
    worst0 = std::max(worst0, std::fabs(model.intercept - ols[0]));
    for (int j = 0; j < 3; ++j)
      worst0 = std::max(worst0, std::fabs(model.beta[j] - ols[j + 1]));
  }
  ok = ok && worst0 <= 1e-6;
  line(3, "lasso oracle equivalence",
       ok, "soft-threshold diff " + std::to_string(worst) + ", ols diff " +
               std::to_string(worst0));
}

void criterion4() {
  // Each forward step must equal the exhaustive one-step AIC minimiser.
  Rng rng(23);
  int mismatches = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 10 + rng.uniform_int(16);
    const std::size_t p = 2 + rng.uniform_int(7);
    std::vector<ArealRow> rows;
    std::vector<double> beta(p, 0.0);
    for (std::size_t j = 0; j < p; ++j)
      if (rng.uniform() < 0.4) beta[j] = rng.normal(0, 2);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> x(p);
      double mu = 0.5;
      for (std::size_t j = 0; j < p; ++j) {
        x[j] = rng.normal();
        mu += beta[j] * x[j];
      }
      ArealRow row;
      row.area_id = "a" + std::to_string(i);
      row.n_total = 100;
      row.n_sampled = static_cast<std::int64_t>(1 + rng.uniform_int(40));
      row.frac_sampled = row.n_sampled / 100.0;
      row.ybar_s = mu + rng.normal(0, 0.8);
      row.xbar_s = x;
      row.xbar = x;
      row.xbar_ns = x;
      rows.push_back(row);
    }
    const auto model = forward_fit(rows);

    // replay the path with the oracle
    std::vector<std::size_t> prefix;
    auto model_aic = [&](const std::vector<std::size_t>& cols) {
      std::vector<std::vector<double>> z;
      std::vector<double> y, w;
      for (const auto& row : rows) {
        std::vector<double> zr{1.0};
        for (auto k : cols) zr.push_back(row.xbar_s[k]);
        z.push_back(std::move(zr));
        y.push_back(*row.ybar_s);
        w.push_back(static_cast<double>(row.n_sampled));
      }
      return oracle::wls_aic(z, y, w);
    };
    double current = model_aic(prefix);
    bool ok = true;
    for (auto j : model.selected) {
      double best_aic = std::numeric_limits<double>::infinity();
      std::size_t best = p;
      for (std::size_t cand = 0; cand < p; ++cand) {
        if (std::find(prefix.begin(), prefix.end(), cand) != prefix.end()) continue;
        auto cols = prefix;
        cols.push_back(cand);
        const double aic = model_aic(cols);
        if (aic < best_aic) {
          best_aic = aic;
          best = cand;
        }
      }
      if (best != j || !(best_aic < current)) ok = false;
      prefix.push_back(j);
      current = best_aic;
    }
    if (ok && prefix.size() + 2 < m) {
      double best_aic = std::numeric_limits<double>::infinity();
      for (std::size_t cand = 0; cand < p; ++cand) {
        if (std::find(prefix.begin(), prefix.end(), cand) != prefix.end()) continue;
        auto cols = prefix;
        cols.push_back(cand);
        best_aic = std::min(best_aic, model_aic(cols));
      }
      if (best_aic < current) ok = false;  // should have kept adding
    }
    if (!ok) ++mismatches;
  }
  line(4, "forward equals the exhaustive AIC oracle", mismatches == 0,
       std::to_string(100 - mismatches) + "/100 datasets match exactly");
}

void criterion5() {
  // plateau recovery
  std::vector<ArealRow> rows;
  for (int i = 0; i < 50; ++i) {
    ArealRow lo, hi;
    lo.area_id = "n" + std::to_string(i);
    lo.n_total = 10;
    lo.n_sampled = 5;
    lo.frac_sampled = 0.5;
    lo.ybar_s = 0.0;
    lo.xbar_s = {-2.0 + 1.9 * i / 49.0};
    lo.xbar = lo.xbar_s;
    lo.xbar_ns = lo.xbar_s;
    hi = lo;
    hi.area_id = "p" + std::to_string(i);
    hi.ybar_s = 10.0;
    hi.xbar_s = {0.1 + 1.9 * i / 49.0};
    hi.xbar = hi.xbar_s;
    hi.xbar_ns = hi.xbar_s;
    rows.push_back(lo);
    rows.push_back(hi);
  }
  const auto plateau = fit_forest(rows, {500, 1, 1, 42, {}});
  const double at_lo = plateau.predict_point(std::vector<double>{-1.0});
  const double at_hi = plateau.predict_point(std::vector<double>{1.0});
  const bool plateau_ok = std::fabs(at_lo) <= 0.5 && std::fabs(at_hi - 10.0) <= 0.5;

  // convexity property over random queries
  Rng rng(29);
  std::vector<ArealRow> rand_rows;
  double y_lo = 1e300, y_hi = -1e300;
  for (int i = 0; i < 50; ++i) {
    ArealRow row;
    row.area_id = "r" + std::to_string(i);
    row.n_total = 10;
    row.n_sampled = 5;
    row.frac_sampled = 0.5;
    row.ybar_s = rng.normal(0, 3);
    row.xbar_s = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    row.xbar = row.xbar_s;
    row.xbar_ns = row.xbar_s;
    y_lo = std::min(y_lo, *row.ybar_s);
    y_hi = std::max(y_hi, *row.ybar_s);
    rand_rows.push_back(row);
  }
  const auto forest = fit_forest(rand_rows, {200, 2, 2, 31, {}});
  bool convex_ok = true;
  double worst_sum = 0.0;
  for (int q = 0; q < 10000; ++q) {
    const std::vector<double> x{rng.normal(0, 2), rng.normal(0, 2), rng.normal(0, 2),
                                rng.normal(0, 2)};
    const auto pred = forest.predict(x);
    double sum = 0.0;
    for (double w : pred.weights) sum += w;
    worst_sum = std::max(worst_sum, std::fabs(sum - 1.0));
    if (pred.point < y_lo - 1e-9 || pred.point > y_hi + 1e-9) convex_ok = false;
  }
  convex_ok = convex_ok && worst_sum <= 1e-12;
  line(5, "forest sanity", plateau_ok && convex_ok,
       "plateau (" + fmt(at_lo) + ", " + fmt(at_hi) + "), worst weight-sum error " +
           std::to_string(worst_sum));
}

void criterion6() {
  Rng rng(101);
  std::vector<ArealRow> rows;
  std::vector<std::vector<double>> z;
  std::vector<double> y, w;
  for (int i = 0; i < 200; ++i) {
    const double x = rng.normal();
    const double yi = 5.0 * x + 0.1 / std::sqrt(25.0) * rng.normal();
    ArealRow row;
    row.area_id = "a" + std::to_string(i);
    row.n_total = 1000;
    row.n_sampled = 25;
    row.frac_sampled = 0.025;
    row.ybar_s = yi;
    row.xbar_s = {x};
    row.xbar = {x};
    row.xbar_ns = {x};
    rows.push_back(row);
    z.push_back({1.0, x});
    y.push_back(yi);
    w.push_back(25.0);
  }
  HsConfig config;
  config.chains = 2;
  config.iterations = 5000;
  config.burn_in = 2500;
  config.seed = 7;
  const auto samples = hs_fit(rows, config);
  double mean_beta = 0.0;
  for (std::size_t l = 0; l < samples.n_draws; ++l)
    mean_beta += samples.beta_at(l, 0);
  mean_beta /= static_cast<double>(samples.n_draws);
  const bool strong_ok =
      std::fabs(mean_beta - 5.0) <= 0.2 && samples.max_rhat < 1.05;

  // wide-prior limit against the oracle weighted least squares
  const auto wls = oracle::wls(z, y, w);
  HsConfig wide = config;
  wide.fixed_scale = 1e6;
  wide.seed = 9;
  const auto flat = hs_fit(rows, wide);
  const auto mc_close = [&](const std::vector<double>& draws, double target,
                            double ess) {
    double mean_d = 0.0, sq = 0.0;
    for (double d : draws) {
      mean_d += d;
      sq += d * d;
    }
    mean_d /= static_cast<double>(draws.size());
    const double sd = std::sqrt(
        std::max(sq / static_cast<double>(draws.size()) - mean_d * mean_d, 1e-30));
    return std::fabs(mean_d - target) <= 3.0 * sd / std::sqrt(std::max(ess, 1.0)) + 1e-9;
  };
  std::vector<double> b(flat.n_draws);
  for (std::size_t l = 0; l < flat.n_draws; ++l) b[l] = flat.beta_at(l, 0);
  const bool flat_ok = mc_close(flat.intercept, wls[0], flat.diagnostics[0].ess) &&
                       mc_close(b, wls[1], flat.diagnostics[1].ess);
  line(6, "horseshoe calibration", strong_ok && flat_ok,
       "posterior mean " + fmt(mean_beta) + " (target 5 +- 0.2), max Rhat " +
           fmt(samples.max_rhat) + ", wide-prior WLS match " +
           (flat_ok ? "yes" : "no"));
}

struct SimCell {
  std::string label;
  SimulateResult result;
};

void criterion7_and_9() {
  const std::vector<Method> all_methods{Method::Forest, Method::Lasso,
                                        Method::Forward, Method::Horseshoe};
  auto base = [&](PopulationKind pop, const std::string& design, bool anon) {
    SimulateOptions opts;
    opts.population = pop;
    opts.n_areas = 200;
    opts.size_min = 50;
    opts.size_max = 500;
    opts.replicates = 20;
    opts.design = parse_design(design);
    opts.design_label = design;
    opts.methods = all_methods;
    opts.anonymised = anon;
    opts.forest_nperm = 0;
    opts.config.forest.n_trees = 500;
    opts.config.hs.chains = 2;
    opts.config.hs.iterations = 5000;
    opts.config.hs.burn_in = 2500;
    opts.seed = 2468;
    opts.workers = 1;
    return opts;
  };

  std::vector<SimCell> ab_cells;
  for (PopulationKind pop : {PopulationKind::A, PopulationKind::B})
    for (const std::string design : {std::string("stratified:n15"),
                                     std::string("twostage:n15")}) {
      auto opts = base(pop, design, false);
      ab_cells.push_back({to_string(pop) + "/" + design, run_simulate(opts)});
    }

  bool ab_ok = true;
  std::string detail;
  for (const auto& cell : ab_cells) {
    for (const auto& method : {"forest", "lasso", "forward", "horseshoe"}) {
      const auto& m = sim_cell(cell.result, method, 0, "all");
      const double bias100 = 100.0 * m.bias_overall_abs;
      const double cov95 = cov_at(m, 0.95);
      const bool ok = bias100 <= 0.8 && std::fabs(cov95 - 0.95) <= 0.05;
      if (!ok)
        detail += cell.label + "/" + method + " bias100=" + fmt(bias100) +
                  " cov95=" + fmt(cov95) + " ";
      ab_ok = ab_ok && ok;
      info(cell.label + " " + method + ": bias100=" + fmt(bias100) +
           " cov95=" + fmt(cov95) + " mse=" + fmt(m.mse));
    }
  }

  auto c_opts = base(PopulationKind::C, "twostage:n15", true);
  const auto c_result = run_simulate(c_opts);
  const double forest_mse = sim_cell(c_result, "forest", 0, "all").mse;
  bool c_mse_ok = true;
  bool c_cov_ok = true;
  for (const auto& method : {"forest", "lasso", "forward", "horseshoe"}) {
    const auto& m = sim_cell(c_result, method, 0, "all");
    const double cov95 = cov_at(m, 0.95);
    info(std::string("c/twostage:n15 ") + method + ": mse=" + fmt(m.mse) +
         " cov95=" + fmt(cov95));
    if (std::string(method) != "forest" && forest_mse >= m.mse) c_mse_ok = false;
    if (cov95 >= 0.90) c_cov_ok = false;
  }
  if (!c_mse_ok) detail += "forest mse not smallest in population c ";
  if (!c_cov_ok) detail += "population c coverage not under 0.90 ";
  line(7, "method-comparison qualitative claims", ab_ok && c_mse_ok && c_cov_ok,
       detail.empty() ? "all population A/B/C clauses hold" : detail);

  // anonymised parity on population C (two-stage)
  bool parity_ok = true;
  std::string parity_detail;
  for (const auto& method : {"forest", "lasso", "forward", "horseshoe"}) {
    const double anon_sampled = sim_cell(c_result, method, 1, "sampled").mse;
    const double anon_nonsampled = sim_cell(c_result, method, 1, "nonsampled").mse;
    const bool ok = anon_sampled <= 1.5 * anon_nonsampled;
    parity_ok = parity_ok && ok;
    parity_detail += std::string(method) + "=" + fmt(anon_sampled) + "/" +
                     fmt(anon_nonsampled) + " ";
  }
  line(9, "anonymised-mode parity", parity_ok, parity_detail);
}

void criterion8() {
  bool ok = std::fabs(interval_score(0.0, 1.0, 0.05, 0.5) - 1.0) < 1e-12 &&
            std::fabs(interval_score(0.0, 1.0, 0.2, 1.5) - 6.0) < 1e-12 &&
            std::fabs(interval_score(-1.0, 1.0, 0.5, -2.0) - 6.0) < 1e-12;
  Rng rng(37);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double lo = rng.normal(0, 3);
    const double hi = lo + std::fabs(rng.normal(0, 2));
    const double alpha = rng.uniform(0.01, 0.99);
    const double truth = rng.normal(0, 4);
    const double k = rng.normal(0, 10);
    worst = std::max(worst, std::fabs(interval_score(lo + k, hi + k, alpha, truth + k) -
                                      interval_score(lo, hi, alpha, truth)));
  }
  ok = ok && worst <= 1e-9;
  line(8, "proper-score identities", ok,
       "translation-invariance worst deviation " + std::to_string(worst));
}

void criterion10() {
  const auto dir = scratch_dir("det");
  ScCompareOptions sc;
  sc.n_areas = 30;
  sc.size_min = 20;
  sc.size_max = 40;
  sc.replicates = 6;
  sc.designs = {1, 4};
  sc.methods = {"linear-correct", "lasso"};
  sc.lasso_grid = 30;
  sc.lasso_folds = 5;
  sc.seed = 55;
  sc.workers = 1;
  sc.out_dir = dir + "/sc_w1";
  cmd_sc_compare(sc);
  sc.workers = 4;
  sc.out_dir = dir + "/sc_w4";
  cmd_sc_compare(sc);
  const bool sc_same = read_bytes(dir + "/sc_w1/sc_compare_coverage.csv") ==
                       read_bytes(dir + "/sc_w4/sc_compare_coverage.csv");

  SimulateOptions sim;
  sim.population = PopulationKind::A;
  sim.n_areas = 40;
  sim.size_min = 20;
  sim.size_max = 60;
  sim.replicates = 4;
  sim.design = parse_design("twostage:n15");
  sim.design_label = "twostage:n15";
  sim.config.forest.n_trees = 50;
  sim.config.lasso_grid = 25;
  sim.config.lasso_folds = 5;
  sim.config.hs.chains = 2;
  sim.config.hs.iterations = 400;
  sim.config.hs.burn_in = 200;
  sim.forest_nperm = 5;
  sim.seed = 66;
  sim.workers = 1;
  sim.out_dir = dir + "/sim_w1";
  cmd_simulate(sim);
  sim.workers = 4;
  sim.out_dir = dir + "/sim_w4";
  cmd_simulate(sim);
  const bool sim_same =
      read_bytes(dir + "/sim_w1/simulate_metrics.csv") ==
          read_bytes(dir + "/sim_w4/simulate_metrics.csv") &&
      read_bytes(dir + "/sim_w1/selection_frequency.csv") ==
          read_bytes(dir + "/sim_w4/selection_frequency.csv");
  line(10, "worker-count determinism", sc_same && sim_same,
       std::string("sc-compare ") + (sc_same ? "identical" : "DIFFERS") +
           ", simulate " + (sim_same ? "identical" : "DIFFERS"));
  std::filesystem::remove_all(dir);
}

void criterion11() {
  const auto dir = scratch_dir("standin");
  StandinSpec spec;  // defaults: 5019 areas, 174 covariates, 8 + 128 sampled
  spec.seed = 2026;
  write_standin(spec, dir + "/survey.csv", dir + "/census.csv");

  // fold layout on the ingested data: 8 folds of 17 = 1 rural + 16 urban
  const auto survey = ingest_survey_csv(dir + "/survey.csv");
  const auto census = ingest_census_csv(dir + "/census.csv");
  const auto ds = dataset_from_csv(survey, census);
  bool folds_ok = ds.fit_rows.size() == 136;
  const auto folds = kfold_split(ds, 8, true, 99);
  for (const auto& fold : folds) {
    int rural = 0;
    for (const auto& id : fold) {
      for (const auto& row : ds.fit_rows)
        if (row.area_id == id && row.stratum == "rural") ++rural;
    }
    folds_ok = folds_ok && fold.size() == 17 && rural == 1;
  }
  bool k_error_ok = false;
  try {
    kfold_split(ds, 200, true, 1);
  } catch (const std::invalid_argument&) {
    k_error_ok = true;
  }

  FitOptions fit;
  fit.survey_csv = dir + "/survey.csv";
  fit.census_csv = dir + "/census.csv";
  fit.methods = {Method::Forest, Method::Lasso, Method::Forward, Method::Horseshoe};
  fit.force_stratum = "urban";
  fit.config.forest.n_trees = 200;
  fit.config.lasso_grid = 60;
  fit.config.hs.chains = 2;
  fit.config.hs.iterations = 1200;
  fit.config.hs.burn_in = 600;
  fit.config.hs.thin = 2;
  fit.rhat_threshold = 0.0;  // shape check only
  fit.anonymised = true;     // the sampled areas are unknown in this regime
  fit.seed = 77;
  fit.out_dir = dir + "/fit";
  cmd_fit(fit);
  std::ifstream est(dir + "/fit/estimates.csv");
  std::string linebuf;
  std::getline(est, linebuf);
  const bool header_ok =
      linebuf == "area_id,method,anonymised,point,lo50,hi50,lo80,hi80,lo95,hi95";
  std::size_t rows = 0;
  while (std::getline(est, linebuf))
    if (!linebuf.empty()) ++rows;
  const bool fit_ok = header_ok && rows == 4 * 5019;

  CvOptions cv;
  cv.survey_csv = dir + "/survey.csv";
  cv.census_csv = dir + "/census.csv";
  cv.folds = 8;
  cv.methods = fit.methods;
  cv.force_stratum = "urban";
  cv.config = fit.config;
  cv.rhat_threshold = 0.0;
  cv.seed = 78;
  cv.out_dir = dir + "/cv";
  cmd_cv(cv);
  std::ifstream report(dir + "/cv/cv_report.csv");
  std::getline(report, linebuf);
  const bool cv_header_ok =
      linebuf == "method,abs_bias,mse,cov95,cov80,cov50,score95,score80,score50";
  std::size_t cv_rows = 0;
  while (std::getline(report, linebuf))
    if (!linebuf.empty()) ++cv_rows;
  const bool cv_ok = cv_header_ok && cv_rows == 4;

  line(11, "survey-scale end-to-end shape", folds_ok && k_error_ok && fit_ok && cv_ok,
       "fit rows " + std::to_string(rows) + "/" + std::to_string(4 * 5019) +
           ", cv rows " + std::to_string(cv_rows) + "/4, fold layout " +
           (folds_ok ? "ok" : "BAD"));
  std::filesystem::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const auto want = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

  if (want(2)) criterion2();
  if (want(3)) criterion3();
  if (want(4)) criterion4();
  if (want(5)) criterion5();
  if (want(8)) criterion8();
  if (want(6)) criterion6();
  if (want(1)) criterion1();
  if (want(10)) criterion10();
  if (want(11)) criterion11();
  if (want(7) || want(9)) criterion7_and_9();

  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
