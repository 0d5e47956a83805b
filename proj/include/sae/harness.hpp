#ifndef SAE_HARNESS_HPP
#define SAE_HARNESS_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sae/areal.hpp"
#include "sae/conformal.hpp"
#include "sae/csv.hpp"
#include "sae/estimate.hpp"
#include "sae/metrics.hpp"
#include "sae/parallel.hpp"
#include "sae/popgen.hpp"
#include "sae/predictor.hpp"
#include "sae/rng.hpp"
#include "sae/sampling.hpp"

namespace sae {

inline const std::vector<double> kDefaultLevels{0.5, 0.8, 0.95};

namespace harness_detail {

inline std::string level_pct(double level) {
  return std::to_string(static_cast<int>(std::llround(level * 100.0)));
}

inline std::vector<double> sorted_levels(std::vector<double> levels) {
  std::sort(levels.begin(), levels.end());
  for (double l : levels)
    if (!(l > 0.0 && l < 1.0))
      throw std::invalid_argument("levels must lie strictly inside (0,1)");
  return levels;
}

inline void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace harness_detail

// Run manifest: config echo plus seed and wall time, one key: value per line.
inline void write_manifest(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  auto out = harness_detail::open_out(path);
  for (const auto& [key, value] : entries) out << key << ": " << value << "\n";
}

class WallTimer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_ = clock::now();
};

// Design grammar for the CLI: kind[:within][:a<fraction>], e.g.
// "stratified:q0.5", "twostage:n15", "onestage", "twostage:q0.5:a0.25".
inline Design parse_design(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ':')) parts.push_back(token);
  if (parts.empty()) throw std::invalid_argument("empty design spec");
  Design design;
  if (parts[0] == "stratified") {
    design.kind = DesignKind::Stratified;
    design.area_fraction = 1.0;
  } else if (parts[0] == "onestage") {
    design.kind = DesignKind::OneStage;
    design.area_fraction = 0.5;
  } else if (parts[0] == "twostage") {
    design.kind = DesignKind::TwoStage;
    design.area_fraction = 0.5;
  } else {
    throw std::invalid_argument("unknown design kind '" + parts[0] + "'");
  }
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto& part = parts[i];
    if (part.empty()) throw std::invalid_argument("empty design token");
    if (part[0] == 'q')
      design.within = WithinFraction{std::stod(part.substr(1))};
    else if (part[0] == 'n')
      design.within = WithinFixed{std::stoll(part.substr(1))};
    else if (part[0] == 'a')
      design.area_fraction = std::stod(part.substr(1));
    else
      throw std::invalid_argument("bad design token '" + part + "'");
  }
  design.validate();
  return design;
}

// The five interval-study sampling designs.
inline Design s31_design(int id) {
  switch (id) {
    case 1: return {DesignKind::Stratified, 1.0, WithinFraction{0.5}};
    case 2: return {DesignKind::Stratified, 1.0, WithinFraction{0.7}};
    case 3: return {DesignKind::OneStage, 0.5, WithinFraction{1.0}};
    case 4: return {DesignKind::TwoStage, 0.5, WithinFraction{0.5}};
    case 5: return {DesignKind::TwoStage, 0.5, WithinFraction{0.7}};
    default: throw std::invalid_argument("design id must be 1..5");
  }
}

// Scenario-dependent forest hyperparameters when not set explicitly:
// interval study (2,5); linear populations (10,5); the non-linear population
// (70,200) stratified and (70,9) otherwise.
inline ForestHyper resolve_forest_hyper(ForestHyper hyper, PopulationKind pop,
                                        DesignKind design) {
  if (hyper.mtry == 0) {
    switch (pop) {
      case PopulationKind::S31: hyper.mtry = 2; break;
      case PopulationKind::A:
      case PopulationKind::B: hyper.mtry = 10; break;
      case PopulationKind::C: hyper.mtry = 70; break;
    }
  }
  if (hyper.nodesize == 0) {
    if (pop == PopulationKind::C)
      hyper.nodesize = design == DesignKind::Stratified ? 200 : 9;
    else
      hyper.nodesize = 5;
  }
  return hyper;
}

// ---------------------------------------------------------------------------
// sc-compare: original vs scaled split conformal across the five designs
// ---------------------------------------------------------------------------

struct ScCompareOptions {
  std::size_t n_areas = 500;
  std::int64_t size_min = 50;
  std::int64_t size_max = 500;
  int replicates = 100;
  std::vector<int> designs = {1, 2, 3, 4, 5};
  // linear-correct, linear-incorrect, forest, lasso
  std::vector<std::string> methods = {"linear-correct", "linear-incorrect",
                                      "forest", "lasso"};
  std::vector<double> levels = kDefaultLevels;
  ForestHyper forest{1000, 2, 5, 0, {}};
  int lasso_grid = 100;
  int lasso_folds = 10;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
};

struct ScCompareCell {
  int design = 0;
  std::string method;
  std::string variant;  // "scaled-sc" or "original-sc"
  std::string group;    // "sampled", "nonsampled", "all"
  double level = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;
  std::size_t pairs = 0;
};

inline std::vector<ScCompareCell> run_sc_compare(const ScCompareOptions& opts) {
  const auto levels = harness_detail::sorted_levels(opts.levels);
  const std::size_t n_levels = levels.size();
  const std::size_t n_methods = opts.methods.size();

  PopulationSpec spec;
  spec.kind = PopulationKind::S31;
  spec.n_areas = opts.n_areas;
  spec.size_min = opts.size_min;
  spec.size_max = opts.size_max;
  spec.seed = derive_seed(opts.seed, {stream::population});
  const FinitePopulation pop = generate(spec);
  const auto truths = true_means(pop);

  // slot layout: method x variant(2) x level x group(3)
  const std::size_t slots = n_methods * 2 * n_levels * 3;
  auto slot = [&](std::size_t mi, int variant, std::size_t li, int gi) {
    return ((mi * 2 + static_cast<std::size_t>(variant)) * n_levels + li) * 3 +
           static_cast<std::size_t>(gi);
  };
  struct Partial {
    std::vector<double> covered, width;
    std::vector<std::size_t> n;
  };

  std::vector<ScCompareCell> cells;
  for (int design_id : opts.designs) {
    const Design design = s31_design(design_id);
    std::vector<Partial> partials(static_cast<std::size_t>(opts.replicates));

    parallel_for(static_cast<std::size_t>(opts.replicates), opts.workers, [&](std::size_t r) {
      auto& part = partials[r];
      part.covered.assign(slots, 0.0);
      part.width.assign(slots, 0.0);
      part.n.assign(slots, 0);
      const std::uint64_t seed_r = derive_seed(
          opts.seed, {stream::replicate, static_cast<std::uint64_t>(design_id), r});
      const ArealDataset ds = draw(pop, design, seed_r);
      const auto& train = ds.training_rows();

      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        const auto& name = opts.methods[mi];
        PredictorFactory factory;
        if (name == "linear-correct") {
          factory = ols_factory({0, 1, 2, 3, 4, 5});
        } else if (name == "linear-incorrect") {
          factory = ols_factory({0, 1, 2});
        } else if (name == "forest") {
          ForestHyper hyper = opts.forest;
          hyper.seed = derive_seed(seed_r, {stream::tree, mi});
          factory = forest_factory(hyper);
        } else if (name == "lasso") {
          factory = lasso_factory(opts.lasso_grid, opts.lasso_folds,
                                  derive_seed(seed_r, {stream::cv_fold, mi}));
        } else {
          throw std::invalid_argument("sc-compare: unknown method '" + name + "'");
        }

        const auto scaled = calibrate(train, factory, levels, true,
                                      derive_seed(seed_r, {stream::split, mi}));
        const auto original = recalibrate(scaled, levels, false);

        for (std::size_t c = 0; c < ds.rows.size(); ++c) {
          const auto& row = ds.rows[c];
          const double truth = truths[c];
          const int gi_base = row.n_sampled > 0 ? 0 : 1;
          for (int variant = 0; variant < 2; ++variant) {
            const auto& cal = variant == 0 ? scaled : original;
            NsEstimate ns;
            if (row.frac_sampled >= 1.0) {
              ns.yhat_ns = *row.ybar_s;
              for (double level : levels) ns.intervals.push_back({level, 0.0, 0.0});
            } else {
              ns.yhat_ns = cal.trained(row.xbar_ns);
              for (double level : levels) {
                const auto iv = conformal_interval(cal, row, level);
                ns.intervals.push_back({level, iv.lower, iv.upper});
              }
            }
            const AreaEstimate est = assemble(row, ns);
            for (std::size_t li = 0; li < n_levels; ++li) {
              const auto& iv = est.intervals[li];
              const bool inside = iv.lower <= truth && truth <= iv.upper;
              for (int gi : {gi_base, 2}) {
                const std::size_t s = slot(mi, variant, li, gi);
                part.covered[s] += inside ? 1.0 : 0.0;
                part.width[s] += iv.upper - iv.lower;
                part.n[s] += 1;
              }
            }
          }
        }
      }
    });

    // Ordered reduce keeps the report independent of the worker count.
    Partial total;
    total.covered.assign(slots, 0.0);
    total.width.assign(slots, 0.0);
    total.n.assign(slots, 0);
    for (const auto& part : partials)
      for (std::size_t s = 0; s < slots; ++s) {
        total.covered[s] += part.covered[s];
        total.width[s] += part.width[s];
        total.n[s] += part.n[s];
      }

    static const char* kGroups[3] = {"sampled", "nonsampled", "all"};
    for (std::size_t mi = 0; mi < n_methods; ++mi)
      for (int variant = 0; variant < 2; ++variant)
        for (std::size_t li = 0; li < n_levels; ++li)
          for (int gi = 0; gi < 3; ++gi) {
            const std::size_t s = slot(mi, variant, li, gi);
            if (total.n[s] == 0) continue;
            ScCompareCell cell;
            cell.design = design_id;
            cell.method = opts.methods[mi];
            cell.variant = variant == 0 ? "scaled-sc" : "original-sc";
            cell.group = kGroups[gi];
            cell.level = levels[li];
            cell.coverage = total.covered[s] / static_cast<double>(total.n[s]);
            cell.mean_width = total.width[s] / static_cast<double>(total.n[s]);
            cell.pairs = total.n[s];
            cells.push_back(std::move(cell));
          }
  }
  return cells;
}

inline void cmd_sc_compare(const ScCompareOptions& opts) {
  WallTimer timer;
  harness_detail::ensure_dir(opts.out_dir);
  const auto cells = run_sc_compare(opts);
  auto out = harness_detail::open_out(opts.out_dir + "/sc_compare_coverage.csv");
  out << "design,method,variant,group,level,coverage,mean_width,pairs\n";
  for (const auto& c : cells)
    out << c.design << ',' << c.method << ',' << c.variant << ',' << c.group
        << ',' << fmt_double(c.level) << ',' << fmt_double(c.coverage) << ','
        << fmt_double(c.mean_width) << ',' << c.pairs << "\n";

  std::string methods;
  for (const auto& m : opts.methods) methods += (methods.empty() ? "" : " ") + m;
  write_manifest(opts.out_dir + "/manifest.txt",
                 {{"command", "sc-compare"},
                  {"areas", std::to_string(opts.n_areas)},
                  {"size_min", std::to_string(opts.size_min)},
                  {"size_max", std::to_string(opts.size_max)},
                  {"replicates", std::to_string(opts.replicates)},
                  {"methods", methods},
                  {"seed", std::to_string(opts.seed)},
                  {"workers", std::to_string(opts.workers)},
                  {"wall_time_s", fmt_double(timer.seconds())}});
}

// ---------------------------------------------------------------------------
// simulate: four-method comparison on populations A/B/C
// ---------------------------------------------------------------------------

struct SimulateOptions {
  PopulationKind population = PopulationKind::A;
  std::size_t n_areas = 1000;
  std::int64_t size_min = 50;
  std::int64_t size_max = 500;
  int replicates = 20;
  Design design{DesignKind::Stratified, 1.0, WithinFixed{15}};
  std::string design_label = "stratified:n15";
  std::vector<Method> methods{Method::Forest, Method::Lasso, Method::Forward,
                              Method::Horseshoe};
  std::vector<double> levels = kDefaultLevels;
  MethodConfig config;
  bool anonymised = true;    // also report the anonymised variant
  int forest_nperm = 20;     // 0 disables forest selection
  double rhat_threshold = 1.1;  // exceedances are counted, not fatal
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
};

struct SimulateResult {
  // metrics[method][variant] with variant 0 = known, 1 = anonymised
  std::map<std::string, std::map<int, std::vector<MetricsCell>>> metrics;
  std::map<std::string, std::vector<double>> selection;  // method -> frequency
  std::vector<std::string> covariate_names;
  int rhat_violations = 0;
};

inline SimulateResult run_simulate(const SimulateOptions& opts) {
  const auto levels = harness_detail::sorted_levels(opts.levels);
  PopulationSpec spec;
  spec.kind = opts.population;
  spec.n_areas = opts.n_areas;
  spec.size_min = opts.size_min;
  spec.size_max = opts.size_max;
  spec.seed = derive_seed(opts.seed, {stream::population});
  const FinitePopulation pop = generate(spec);

  std::unordered_map<std::string, double> truth;
  for (const auto& a : pop.areas) truth[a.area_id] = a.true_mean;

  MethodConfig cfg = opts.config;
  cfg.forest = resolve_forest_hyper(cfg.forest, opts.population, opts.design.kind);

  const int n_variants = opts.anonymised ? 2 : 1;
  struct ReplicateOut {
    // records[method][variant]
    std::vector<std::vector<std::vector<ScoredEstimate>>> records;
    std::vector<std::vector<std::size_t>> selected;  // per method
    int rhat_violations = 0;
  };
  std::vector<ReplicateOut> results(static_cast<std::size_t>(opts.replicates));

  parallel_for(static_cast<std::size_t>(opts.replicates), opts.workers, [&](std::size_t r) {
    auto& out = results[r];
    out.records.assign(opts.methods.size(),
                       std::vector<std::vector<ScoredEstimate>>(
                           static_cast<std::size_t>(n_variants)));
    out.selected.assign(opts.methods.size(), {});
    const std::uint64_t seed_r = derive_seed(opts.seed, {stream::replicate, r});
    const ArealDataset ds = draw(pop, opts.design, seed_r);
    const auto& train = ds.training_rows();

    for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
      const Method method = opts.methods[mi];
      const auto fit = fit_method(train, method, cfg, levels,
                                  derive_seed(seed_r, {stream::method_tag, mi}));
      if (method == Method::Horseshoe && opts.rhat_threshold > 0.0 &&
          fit.horseshoe->max_rhat > opts.rhat_threshold)
        out.rhat_violations += 1;

      for (int variant = 0; variant < n_variants; ++variant) {
        const auto estimates =
            estimate_all(ds, fit, method, levels, variant == 1, seed_r);
        auto& records = out.records[mi][static_cast<std::size_t>(variant)];
        records.reserve(estimates.size());
        for (std::size_t c = 0; c < estimates.size(); ++c) {
          ScoredEstimate rec;
          rec.area_id = estimates[c].area_id;
          rec.replicate = static_cast<int>(r);
          rec.sampled = ds.rows[c].n_sampled > 0;
          rec.point = estimates[c].point;
          rec.intervals = estimates[c].intervals;
          records.push_back(std::move(rec));
        }
      }

      switch (method) {
        case Method::Forward:
          out.selected[mi] = fit.forward->selected;
          break;
        case Method::Lasso: {
          std::vector<std::size_t> sel;
          for (std::size_t j = 0; j < fit.lasso->beta.size(); ++j)
            if (fit.lasso->beta[j] != 0.0) sel.push_back(j);
          out.selected[mi] = std::move(sel);
          break;
        }
        case Method::Horseshoe:
          out.selected[mi] = hs_selected(*fit.horseshoe);
          break;
        case Method::Forest: {
          if (opts.forest_nperm > 0) {
            ForestHyper hyper = cfg.forest;
            hyper.seed = derive_seed(seed_r, {stream::null_refit, mi});
            hyper.forced_index = cfg.forced;
            const auto pvals = importance_pvalues(train, hyper, opts.forest_nperm);
            std::vector<std::size_t> sel;
            for (std::size_t j = 0; j < pvals.size(); ++j)
              if (pvals[j] < 0.05) sel.push_back(j);
            out.selected[mi] = std::move(sel);
          }
          break;
        }
      }
    }
  });

  SimulateResult result;
  // Pull a covariate-name vector from one draw for the selection report.
  result.covariate_names.resize(pop.p);
  for (std::size_t j = 0; j < pop.p; ++j)
    result.covariate_names[j] = "x" + std::to_string(j + 1);

  for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
    const std::string name = to_string(opts.methods[mi]);
    for (int variant = 0; variant < n_variants; ++variant) {
      std::vector<ScoredEstimate> all;
      for (const auto& rep : results) {
        const auto& records = rep.records[mi][static_cast<std::size_t>(variant)];
        all.insert(all.end(), records.begin(), records.end());
      }
      result.metrics[name][variant] = score_replicates(all, truth);
    }
    if (opts.methods[mi] == Method::Forest && opts.forest_nperm <= 0) continue;
    std::vector<std::vector<std::size_t>> sets;
    for (const auto& rep : results) sets.push_back(rep.selected[mi]);
    result.selection[name] = selection_frequency(sets, pop.p);
  }
  for (const auto& rep : results) result.rhat_violations += rep.rhat_violations;
  return result;
}

inline void cmd_simulate(const SimulateOptions& opts) {
  WallTimer timer;
  harness_detail::ensure_dir(opts.out_dir);
  const auto levels = harness_detail::sorted_levels(opts.levels);
  const auto result = run_simulate(opts);

  auto out = harness_detail::open_out(opts.out_dir + "/simulate_metrics.csv");
  out << "population,design,method,anonymised,group,replicates,pairs,"
         "bias_area_abs,bias_overall_abs,mse";
  for (double l : levels) out << ",cov" << harness_detail::level_pct(l);
  for (double l : levels) out << ",score" << harness_detail::level_pct(l);
  for (double l : levels) out << ",width" << harness_detail::level_pct(l);
  out << "\n";
  for (const auto& [method, variants] : result.metrics)
    for (const auto& [variant, cells] : variants)
      for (const auto& cell : cells) {
        out << to_string(opts.population) << ',' << opts.design_label << ','
            << method << ',' << (variant == 1 ? 1 : 0) << ',' << cell.group << ','
            << cell.n_replicates << ',' << cell.n_pairs << ','
            << fmt_double(cell.bias_area_abs) << ','
            << fmt_double(cell.bias_overall_abs) << ',' << fmt_double(cell.mse);
        for (const auto& [l, v] : cell.coverage) out << ',' << fmt_double(v);
        for (const auto& [l, v] : cell.mean_score) out << ',' << fmt_double(v);
        for (const auto& [l, v] : cell.mean_width) out << ',' << fmt_double(v);
        out << "\n";
      }

  auto sel = harness_detail::open_out(opts.out_dir + "/selection_frequency.csv");
  sel << "population,design,method,covariate,name,frequency\n";
  for (const auto& [method, freq] : result.selection)
    for (std::size_t j = 0; j < freq.size(); ++j)
      sel << to_string(opts.population) << ',' << opts.design_label << ','
          << method << ',' << (j + 1) << ',' << result.covariate_names[j] << ','
          << fmt_double(freq[j]) << "\n";

  std::string methods;
  for (const auto& m : opts.methods)
    methods += (methods.empty() ? "" : " ") + to_string(m);
  write_manifest(opts.out_dir + "/manifest.txt",
                 {{"command", "simulate"},
                  {"population", to_string(opts.population)},
                  {"design", opts.design_label},
                  {"areas", std::to_string(opts.n_areas)},
                  {"replicates", std::to_string(opts.replicates)},
                  {"methods", methods},
                  {"anonymised_variant", opts.anonymised ? "yes" : "no"},
                  {"forest_nperm", std::to_string(opts.forest_nperm)},
                  {"hs_rhat_violations", std::to_string(result.rhat_violations)},
                  {"seed", std::to_string(opts.seed)},
                  {"workers", std::to_string(opts.workers)},
                  {"wall_time_s", fmt_double(timer.seconds())}});
}

// ---------------------------------------------------------------------------
// fit: estimates for every area from survey + census files
// ---------------------------------------------------------------------------

struct FitOptions {
  std::string survey_csv;
  std::string census_csv;
  std::vector<Method> methods{Method::Forest, Method::Lasso, Method::Forward,
                              Method::Horseshoe};
  std::vector<double> levels = kDefaultLevels;
  MethodConfig config;
  bool anonymised = false;
  std::optional<std::string> force_stratum;  // stratum label forced into models
  int forest_nperm = 0;  // >0: emit forest importance p-values
  bool audit = false;
  bool dump_samples = false;
  double rhat_threshold = 1.1;  // 0 disables the refusal
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
};

namespace harness_detail {

inline ArealDataset load_dataset(const std::string& survey_csv,
                                 const std::string& census_csv,
                                 const std::optional<std::string>& force_stratum) {
  const auto survey = ingest_survey_csv(survey_csv);
  const auto census = ingest_census_csv(census_csv);
  AggregateOptions opts;
  opts.stratum_indicator = force_stratum;
  return dataset_from_csv(survey, census, opts);
}

inline void check_rhat(const PosteriorSamples& samples, double threshold) {
  if (threshold > 0.0 && samples.max_rhat > threshold) {
    std::string worst;
    for (const auto& d : samples.diagnostics)
      if (d.rhat == samples.max_rhat) worst = d.name;
    throw std::runtime_error(
        "horseshoe: split-Rhat " + std::to_string(samples.max_rhat) + " for " +
        worst + " exceeds " + std::to_string(threshold) +
        "; increase iterations or raise --rhat-threshold");
  }
}

}  // namespace harness_detail

inline void cmd_fit(const FitOptions& opts) {
  WallTimer timer;
  harness_detail::ensure_dir(opts.out_dir);
  const auto levels = harness_detail::sorted_levels(opts.levels);
  ArealDataset dataset = harness_detail::load_dataset(
      opts.survey_csv, opts.census_csv, opts.force_stratum);
  MethodConfig cfg = opts.config;
  if (opts.force_stratum) cfg.forced = dataset.design_variable_index;
  if (cfg.forest.mtry == 0)
    cfg.forest.mtry = std::max<int>(1, static_cast<int>(dataset.p) / 3);
  if (cfg.forest.nodesize == 0) cfg.forest.nodesize = 5;

  auto out = harness_detail::open_out(opts.out_dir + "/estimates.csv");
  out << "area_id,method,anonymised";
  out << ",point";
  for (double l : levels)
    out << ",lo" << harness_detail::level_pct(l) << ",hi"
        << harness_detail::level_pct(l);
  out << "\n";

  for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
    const Method method = opts.methods[mi];
    const auto fit = fit_method(dataset.training_rows(), method, cfg, levels,
                                derive_seed(opts.seed, {stream::method_tag, mi}));
    if (method == Method::Horseshoe)
      harness_detail::check_rhat(*fit.horseshoe, opts.rhat_threshold);
    const auto estimates =
        estimate_all(dataset, fit, method, levels, opts.anonymised, opts.seed);
    for (const auto& est : estimates) {
      out << est.area_id << ',' << est.method << ',' << (est.anonymised ? 1 : 0)
          << ',' << fmt_double(est.point);
      for (const auto& iv : est.intervals)
        out << ',' << fmt_double(iv.lower) << ',' << fmt_double(iv.upper);
      out << "\n";
    }

    const std::string tag = to_string(method);
    if (fit.forward) {
      auto summary = harness_detail::open_out(opts.out_dir + "/model_forward.csv");
      summary << "step,covariate,name\n";
      for (std::size_t k = 0; k < fit.forward->selected.size(); ++k)
        summary << (k + 1) << ',' << (fit.forward->selected[k] + 1) << ','
                << dataset.covariate_names[fit.forward->selected[k]] << "\n";
    }
    if (fit.lasso) {
      auto curve = harness_detail::open_out(opts.out_dir + "/lasso_cv_curve.csv");
      curve << "lambda,cv_error\n";
      for (const auto& [lambda, err] : fit.lasso->cv_curve)
        curve << fmt_double(lambda) << ',' << fmt_double(err) << "\n";
      auto summary = harness_detail::open_out(opts.out_dir + "/model_lasso.csv");
      summary << "covariate,name,coefficient\n";
      for (std::size_t j = 0; j < fit.lasso->beta.size(); ++j)
        if (fit.lasso->beta[j] != 0.0)
          summary << (j + 1) << ',' << dataset.covariate_names[j] << ','
                  << fmt_double(fit.lasso->beta[j]) << "\n";
    }
    if (fit.horseshoe) {
      auto summary = harness_detail::open_out(opts.out_dir + "/model_horseshoe.csv");
      summary << "covariate,name,selected,posterior_mean,rhat,ess\n";
      const auto selected = hs_selected(*fit.horseshoe);
      std::set<std::size_t> sel(selected.begin(), selected.end());
      for (std::size_t j = 0; j < fit.horseshoe->p; ++j) {
        double mean_beta = 0.0;
        for (std::size_t l = 0; l < fit.horseshoe->n_draws; ++l)
          mean_beta += fit.horseshoe->beta_at(l, j);
        mean_beta /= static_cast<double>(fit.horseshoe->n_draws);
        const auto& diag = fit.horseshoe->diagnostics[j + 1];
        summary << (j + 1) << ',' << dataset.covariate_names[j] << ','
                << (sel.count(j) ? 1 : 0) << ',' << fmt_double(mean_beta) << ','
                << fmt_double(diag.rhat) << ',' << fmt_double(diag.ess) << "\n";
      }
      if (opts.dump_samples)
        write_samples_csv(*fit.horseshoe, opts.out_dir + "/hs_samples.csv");
    }
    if (fit.conformal && opts.audit)
      write_audit_csv(*fit.conformal, opts.out_dir + "/conformal_audit_" + tag + ".csv");
    if (method == Method::Forest && opts.forest_nperm > 0) {
      ForestHyper hyper = cfg.forest;
      hyper.seed = derive_seed(opts.seed, {stream::null_refit, mi});
      hyper.forced_index = cfg.forced;
      const auto pvals =
          importance_pvalues(dataset.training_rows(), hyper, opts.forest_nperm);
      auto summary = harness_detail::open_out(opts.out_dir + "/model_forest.csv");
      summary << "covariate,name,pvalue,selected\n";
      for (std::size_t j = 0; j < pvals.size(); ++j)
        summary << (j + 1) << ',' << dataset.covariate_names[j] << ','
                << fmt_double(pvals[j]) << ',' << (pvals[j] < 0.05 ? 1 : 0) << "\n";
    }
  }

  write_manifest(opts.out_dir + "/manifest.txt",
                 {{"command", "fit"},
                  {"survey", opts.survey_csv},
                  {"census", opts.census_csv},
                  {"areas", std::to_string(dataset.rows.size())},
                  {"sampled_areas", std::to_string(dataset.fit_rows.size())},
                  {"covariates", std::to_string(dataset.p)},
                  {"anonymised", opts.anonymised ? "yes" : "no"},
                  {"seed", std::to_string(opts.seed)},
                  {"wall_time_s", fmt_double(timer.seconds())}});
}

// ---------------------------------------------------------------------------
// cv: stratum-balanced k-fold cross-validation on the sampled areas
// ---------------------------------------------------------------------------

struct CvOptions {
  std::string survey_csv;
  std::string census_csv;
  std::size_t folds = 8;
  bool stratum_balance = true;
  std::vector<Method> methods{Method::Forest, Method::Lasso, Method::Forward,
                              Method::Horseshoe};
  std::vector<double> levels = kDefaultLevels;
  MethodConfig config;
  std::optional<std::string> force_stratum;
  double rhat_threshold = 1.1;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
};

struct CvReportRow {
  std::string method;
  double abs_bias = 0.0;
  double mse = 0.0;
  std::vector<std::pair<double, double>> coverage;  // descending level
  std::vector<std::pair<double, double>> score;
};

struct CvResult {
  std::vector<CvReportRow> rows;
  std::map<std::string, std::vector<double>> points;  // method -> predictions
  std::vector<double> observed;                       // held-out sampled means
};

// Held-out sampled areas are scored as prediction targets: the predictor sees
// their sampled covariate means, the interval scale uses n_c units, and the
// observed sampled mean plays the role of the truth.
inline CvResult run_cv(const CvOptions& opts) {
  const auto levels = harness_detail::sorted_levels(opts.levels);
  ArealDataset dataset = harness_detail::load_dataset(
      opts.survey_csv, opts.census_csv, opts.force_stratum);
  MethodConfig cfg = opts.config;
  if (opts.force_stratum) cfg.forced = dataset.design_variable_index;
  if (cfg.forest.mtry == 0)
    cfg.forest.mtry = std::max<int>(1, static_cast<int>(dataset.p) / 3);
  if (cfg.forest.nodesize == 0) cfg.forest.nodesize = 5;

  const auto folds = kfold_split(dataset, opts.folds, opts.stratum_balance,
                                 derive_seed(opts.seed, {stream::kfold}));
  const auto& train_all = dataset.training_rows();
  std::unordered_map<std::string, const ArealRow*> by_id;
  for (const auto& row : train_all) by_id[row.area_id] = &row;

  struct FoldOut {
    // per method: records + points
    std::vector<std::vector<ScoredEstimate>> records;
    std::vector<std::vector<double>> points;
  };
  std::vector<FoldOut> fold_out(folds.size());

  std::unordered_map<std::string, double> truth;
  for (const auto& row : train_all) truth[row.area_id] = *row.ybar_s;

  parallel_for(folds.size(), opts.workers, [&](std::size_t f) {
    auto& out = fold_out[f];
    out.records.assign(opts.methods.size(), {});
    out.points.assign(opts.methods.size(), {});
    std::unordered_set<std::string> held(folds[f].begin(), folds[f].end());
    std::vector<ArealRow> fold_train;
    for (const auto& row : train_all)
      if (!held.count(row.area_id)) fold_train.push_back(row);

    for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
      const Method method = opts.methods[mi];
      const auto fit = fit_method(fold_train, method, cfg, levels,
                                  derive_seed(opts.seed, {stream::method_tag, mi, f}));
      if (method == Method::Horseshoe)
        harness_detail::check_rhat(*fit.horseshoe, opts.rhat_threshold);
      for (std::size_t hi = 0; hi < folds[f].size(); ++hi) {
        const std::string& id = folds[f][hi];
        const ArealRow& h = *by_id.at(id);
        const auto ns = fit.estimator->estimate(
            h.xbar_s, static_cast<double>(h.n_sampled), levels,
            derive_seed(opts.seed, {stream::predictive, f, mi, hi}));
        ScoredEstimate rec;
        rec.area_id = id;
        rec.replicate = static_cast<int>(f);
        rec.sampled = false;
        rec.point = ns.yhat_ns;
        rec.intervals = ns.intervals;
        out.records[mi].push_back(std::move(rec));
        out.points[mi].push_back(ns.yhat_ns);
      }
    }
  });

  CvResult result;
  for (const auto& row : train_all) result.observed.push_back(*row.ybar_s);
  for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
    std::vector<ScoredEstimate> all;
    auto& points = result.points[to_string(opts.methods[mi])];
    for (const auto& fo : fold_out) {
      all.insert(all.end(), fo.records[mi].begin(), fo.records[mi].end());
      points.insert(points.end(), fo.points[mi].begin(), fo.points[mi].end());
    }
    const auto cells = score_replicates(all, truth);
    for (const auto& cell : cells) {
      if (cell.group != "all") continue;
      CvReportRow row;
      row.method = to_string(opts.methods[mi]);
      row.abs_bias = cell.bias_area_abs;
      row.mse = cell.mse;
      for (auto it = cell.coverage.rbegin(); it != cell.coverage.rend(); ++it)
        row.coverage.push_back(*it);
      for (auto it = cell.mean_score.rbegin(); it != cell.mean_score.rend(); ++it)
        row.score.push_back(*it);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

inline void cmd_cv(const CvOptions& opts) {
  WallTimer timer;
  harness_detail::ensure_dir(opts.out_dir);
  const auto levels = harness_detail::sorted_levels(opts.levels);
  const auto result = run_cv(opts);

  auto out = harness_detail::open_out(opts.out_dir + "/cv_report.csv");
  out << "method,abs_bias,mse";
  for (auto it = levels.rbegin(); it != levels.rend(); ++it)
    out << ",cov" << harness_detail::level_pct(*it);
  for (auto it = levels.rbegin(); it != levels.rend(); ++it)
    out << ",score" << harness_detail::level_pct(*it);
  out << "\n";
  for (const auto& row : result.rows) {
    out << row.method << ',' << fmt_double(row.abs_bias) << ','
        << fmt_double(row.mse);
    for (const auto& [l, v] : row.coverage) out << ',' << fmt_double(v);
    for (const auto& [l, v] : row.score) out << ',' << fmt_double(v);
    out << "\n";
  }

  auto ec = harness_detail::open_out(opts.out_dir + "/cv_ecdf.csv");
  ec << "method,value,cum_frac\n";
  for (const auto& [method, points] : result.points)
    for (const auto& [v, f] : ecdf(points))
      ec << method << ',' << fmt_double(v) << ',' << fmt_double(f) << "\n";
  for (const auto& [v, f] : ecdf(result.observed))
    ec << "observed," << fmt_double(v) << ',' << fmt_double(f) << "\n";

  write_manifest(opts.out_dir + "/manifest.txt",
                 {{"command", "cv"},
                  {"survey", opts.survey_csv},
                  {"census", opts.census_csv},
                  {"folds", std::to_string(opts.folds)},
                  {"stratum_balance", opts.stratum_balance ? "yes" : "no"},
                  {"seed", std::to_string(opts.seed)},
                  {"workers", std::to_string(opts.workers)},
                  {"wall_time_s", fmt_double(timer.seconds())}});
}

// ---------------------------------------------------------------------------
// gen-pop: synthetic data files
// ---------------------------------------------------------------------------

// Survey-shaped synthetic stand-in: M areas with an urban/rural stratum, a
// fixed number of sampled areas per stratum, 15 units per sampled area and
// census covariate means for every area.
struct StandinSpec {
  std::size_t n_areas = 5019;
  std::size_t n_covariates = 174;
  int sampled_rural = 8;
  int sampled_urban = 128;
  int units_per_area = 15;
  double rural_fraction = 0.08;
  std::int64_t size_min = 50;
  std::int64_t size_max = 500;
  std::uint64_t seed = 1;
};

inline void write_standin(const StandinSpec& spec, const std::string& survey_path,
                          const std::string& census_path) {
  const std::size_t M = spec.n_areas;
  const std::size_t p = spec.n_covariates;
  const std::size_t n_rural =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::llround(spec.rural_fraction * M)));
  const auto sizes = area_sizes(M, spec.size_min, spec.size_max,
                                derive_seed(spec.seed, {stream::standin}));

  std::vector<std::string> names(p);
  for (std::size_t j = 0; j < p; ++j) names[j] = "v" + std::to_string(j + 1);

  std::vector<CensusArea> census(M);
  std::vector<std::vector<double>> centers(M);
  std::vector<std::size_t> rural_ids, urban_ids;
  for (std::size_t c = 0; c < M; ++c) {
    Rng rng(spec.seed, {stream::standin, static_cast<std::uint64_t>(c)});
    const bool rural = c < n_rural;
    auto& area = census[c];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ea%05zu", c + 1);
    area.area_id = buf;
    area.stratum = rural ? "rural" : "urban";
    area.n_total = sizes[c];
    centers[c].resize(p);
    area.xbar.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      const double shift = (j == 0) ? (rural ? -0.6 : 0.6) : 0.0;
      centers[c][j] = shift + rng.normal();
      area.xbar[j] = centers[c][j] +
                     rng.normal() / std::sqrt(static_cast<double>(sizes[c]));
    }
    (rural ? rural_ids : urban_ids).push_back(c);
  }

  Rng pick_rng(spec.seed, {stream::standin, 0xfeedull});
  shuffle(rural_ids, pick_rng);
  shuffle(urban_ids, pick_rng);
  std::vector<std::size_t> sampled(rural_ids.begin(),
                                   rural_ids.begin() + spec.sampled_rural);
  sampled.insert(sampled.end(), urban_ids.begin(),
                 urban_ids.begin() + spec.sampled_urban);
  std::sort(sampled.begin(), sampled.end());

  std::vector<UnitRecord> units;
  for (std::size_t c : sampled) {
    Rng rng(spec.seed, {stream::standin, static_cast<std::uint64_t>(c), 0x11ull});
    const bool urban = census[c].stratum == "urban";
    for (int k = 0; k < spec.units_per_area; ++k) {
      UnitRecord u;
      u.area_id = census[c].area_id;
      u.stratum = census[c].stratum;
      u.x.resize(p);
      for (std::size_t j = 0; j < p; ++j) u.x[j] = centers[c][j] + rng.normal();
      u.y = 3.0 + 0.5 * (urban ? 1.0 : 0.0) + 0.4 * u.x[0] - 0.25 * u.x[1] +
            0.15 * u.x[2] + 0.5 * rng.normal();
      units.push_back(std::move(u));
    }
  }

  write_survey_csv(survey_path, units, names);
  write_census_csv(census_path, census, names);
}

struct GenPopOptions {
  std::string kind = "s31";  // s31, a, b, c, gama-standin
  std::size_t n_areas = 0;   // 0: kind default
  std::int64_t size_min = 50;
  std::int64_t size_max = 500;
  std::optional<std::string> design;  // draw a sample and write the survey file
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

inline void cmd_gen_pop(const GenPopOptions& opts) {
  WallTimer timer;
  harness_detail::ensure_dir(opts.out_dir);
  const std::string survey_path = opts.out_dir + "/survey.csv";
  const std::string census_path = opts.out_dir + "/census.csv";
  if (opts.kind == "gama-standin") {
    StandinSpec spec;
    if (opts.n_areas > 0) spec.n_areas = opts.n_areas;
    spec.size_min = opts.size_min;
    spec.size_max = opts.size_max;
    spec.seed = opts.seed;
    write_standin(spec, survey_path, census_path);
  } else {
    PopulationSpec spec;
    spec.kind = population_kind_from_string(opts.kind);
    spec.n_areas = opts.n_areas;
    spec.size_min = opts.size_min;
    spec.size_max = opts.size_max;
    spec.seed = derive_seed(opts.seed, {stream::population});
    const auto pop = generate(spec);
    std::vector<std::string> names(pop.p);
    for (std::size_t j = 0; j < pop.p; ++j) names[j] = "x" + std::to_string(j + 1);
    write_census_csv(census_path, census_view(pop), names);
    if (opts.design) {
      const Design design = parse_design(*opts.design);
      const auto units =
          draw_units(pop, design, derive_seed(opts.seed, {stream::draw_units}));
      write_survey_csv(survey_path, units, names);
    }
  }
  write_manifest(opts.out_dir + "/manifest.txt",
                 {{"command", "gen-pop"},
                  {"kind", opts.kind},
                  {"seed", std::to_string(opts.seed)},
                  {"wall_time_s", fmt_double(timer.seconds())}});
}

}  // namespace sae

#endif  // SAE_HARNESS_HPP
