// Command-line runner: simulation studies, data fits and cross-validation.
#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "sae/config.hpp"
#include "sae/harness.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
  std::vector<double> levels = sae::kDefaultLevels;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file,
                  "key = value config file; flags override file values");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--workers", flags.workers, "worker threads (0 = hardware)");
  cmd->add_option("--out-dir", flags.out_dir, "report directory");
  cmd->add_option("--levels", flags.levels, "confidence levels")
      ->expected(-1);
}

// Config-file values fill any option the user did not pass on the line.
void apply_config(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : sae::parse_config_file(path)) {
    const auto opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw CLI::ValidationError("config key '" + key + "' is not an option of " +
                                 cmd->get_name());
    if (opt->count() == 0) opt->add_result(value);
  }
}

std::vector<sae::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<sae::Method> methods;
  for (const auto& name : names) methods.push_back(sae::method_from_string(name));
  return methods;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based small area estimation with conformal intervals"};
  app.require_subcommand(1);

  // ---- sc-compare ----
  auto* sc = app.add_subcommand(
      "sc-compare", "original vs scaled split-conformal interval study");
  CommonFlags sc_common;
  sae::ScCompareOptions sc_opts;
  std::vector<std::string> sc_methods = sc_opts.methods;
  add_common(sc, sc_common);
  sc->add_option("--areas", sc_opts.n_areas, "number of areas");
  sc->add_option("--size-min", sc_opts.size_min, "smallest area size");
  sc->add_option("--size-max", sc_opts.size_max, "largest area size");
  sc->add_option("--replicates", sc_opts.replicates, "sample draws per design");
  sc->add_option("--designs", sc_opts.designs, "design ids (1-5)")->expected(-1);
  sc->add_option("--methods", sc_methods,
                 "linear-correct linear-incorrect forest lasso")
      ->expected(-1);
  sc->add_option("--forest-trees", sc_opts.forest.n_trees, "trees per forest");
  sc->add_option("--forest-mtry", sc_opts.forest.mtry, "covariates per split");
  sc->add_option("--forest-nodesize", sc_opts.forest.nodesize,
                 "max responses per leaf");
  sc->add_option("--lasso-grid", sc_opts.lasso_grid, "penalty grid size");
  sc->add_option("--lasso-folds", sc_opts.lasso_folds, "CV folds");
  sc->callback([&] {
    apply_config(sc, sc_common.config_file);
    sc_opts.methods = sc_methods;
    sc_opts.levels = sc_common.levels;
    sc_opts.seed = sc_common.seed;
    sc_opts.workers = sc_common.workers;
    sc_opts.out_dir = sc_common.out_dir;
    sae::cmd_sc_compare(sc_opts);
  });

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate",
                                 "four-method comparison on a synthetic population");
  CommonFlags sim_common;
  sae::SimulateOptions sim_opts;
  std::string sim_pop = "a";
  std::string sim_design = "stratified:n15";
  std::vector<std::string> sim_methods = {"forest", "lasso", "forward", "horseshoe"};
  bool sim_no_anon = false;
  add_common(sim, sim_common);
  sim->add_option("--pop", sim_pop, "population kind: a, b, c, s31");
  sim->add_option("--areas", sim_opts.n_areas, "number of areas");
  sim->add_option("--size-min", sim_opts.size_min, "smallest area size");
  sim->add_option("--size-max", sim_opts.size_max, "largest area size");
  sim->add_option("--replicates", sim_opts.replicates, "sample draws");
  sim->add_option("--design", sim_design,
                  "design spec, e.g. stratified:n15, twostage:q0.5, onestage");
  sim->add_option("--methods", sim_methods, "subset of the four methods")
      ->expected(-1);
  sim->add_flag("--no-anonymised", sim_no_anon, "skip the anonymised variant");
  sim->add_option("--forest-trees", sim_opts.config.forest.n_trees, "trees");
  sim->add_option("--forest-mtry", sim_opts.config.forest.mtry,
                  "covariates per split (0 = scenario preset)");
  sim->add_option("--forest-nodesize", sim_opts.config.forest.nodesize,
                  "max responses per leaf (0 = scenario preset)");
  sim->add_option("--forest-nperm", sim_opts.forest_nperm,
                  "importance permutations for forest selection (0 = skip)");
  sim->add_option("--lasso-grid", sim_opts.config.lasso_grid, "penalty grid size");
  sim->add_option("--lasso-folds", sim_opts.config.lasso_folds, "CV folds");
  sim->add_option("--hs-chains", sim_opts.config.hs.chains, "MCMC chains");
  sim->add_option("--hs-iters", sim_opts.config.hs.iterations,
                  "iterations per chain (burn-in included)");
  sim->add_option("--hs-burnin", sim_opts.config.hs.burn_in, "burn-in iterations");
  sim->add_option("--hs-thin", sim_opts.config.hs.thin, "thinning factor");
  sim->add_option("--rhat-threshold", sim_opts.rhat_threshold,
                  "count replicates whose split-Rhat exceeds this (0 = off)");
  sim->callback([&] {
    apply_config(sim, sim_common.config_file);
    sim_opts.population = sae::population_kind_from_string(sim_pop);
    sim_opts.design = sae::parse_design(sim_design);
    sim_opts.design_label = sim_design;
    sim_opts.methods = parse_methods(sim_methods);
    sim_opts.anonymised = !sim_no_anon;
    sim_opts.levels = sim_common.levels;
    sim_opts.seed = sim_common.seed;
    sim_opts.workers = sim_common.workers;
    sim_opts.out_dir = sim_common.out_dir;
    sae::cmd_simulate(sim_opts);
  });

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "estimates for all areas from CSV data");
  CommonFlags fit_common;
  sae::FitOptions fit_opts;
  std::vector<std::string> fit_methods = {"forest", "lasso", "forward", "horseshoe"};
  std::string fit_force_stratum;
  add_common(fit, fit_common);
  fit->add_option("--survey", fit_opts.survey_csv, "survey CSV")->required();
  fit->add_option("--census", fit_opts.census_csv, "census CSV")->required();
  fit->add_option("--methods", fit_methods, "subset of the four methods")
      ->expected(-1);
  fit->add_flag("--anonymised", fit_opts.anonymised,
                "assemble with f_c = 0 for every area");
  fit->add_option("--force-stratum", fit_force_stratum,
                  "stratum label forced into every model as an indicator");
  fit->add_option("--forest-trees", fit_opts.config.forest.n_trees, "trees");
  fit->add_option("--forest-mtry", fit_opts.config.forest.mtry,
                  "covariates per split (0 = p/3)");
  fit->add_option("--forest-nodesize", fit_opts.config.forest.nodesize,
                  "max responses per leaf (0 = 5)");
  fit->add_option("--forest-nperm", fit_opts.forest_nperm,
                  "emit forest importance p-values (0 = skip)");
  fit->add_option("--lasso-grid", fit_opts.config.lasso_grid, "penalty grid size");
  fit->add_option("--lasso-folds", fit_opts.config.lasso_folds, "CV folds");
  fit->add_option("--hs-chains", fit_opts.config.hs.chains, "MCMC chains");
  fit->add_option("--hs-iters", fit_opts.config.hs.iterations, "iterations per chain");
  fit->add_option("--hs-burnin", fit_opts.config.hs.burn_in, "burn-in iterations");
  fit->add_option("--hs-thin", fit_opts.config.hs.thin, "thinning factor");
  fit->add_flag("--audit", fit_opts.audit, "dump conformal calibration residuals");
  fit->add_flag("--dump-samples", fit_opts.dump_samples, "dump posterior draws");
  fit->add_option("--rhat-threshold", fit_opts.rhat_threshold,
                  "refuse summaries above this split-Rhat (0 = off)");
  fit->callback([&] {
    apply_config(fit, fit_common.config_file);
    fit_opts.methods = parse_methods(fit_methods);
    if (!fit_force_stratum.empty()) fit_opts.force_stratum = fit_force_stratum;
    fit_opts.levels = fit_common.levels;
    fit_opts.seed = fit_common.seed;
    fit_opts.workers = fit_common.workers;
    fit_opts.out_dir = fit_common.out_dir;
    sae::cmd_fit(fit_opts);
  });

  // ---- cv ----
  auto* cv = app.add_subcommand("cv", "stratum-balanced k-fold cross-validation");
  CommonFlags cv_common;
  sae::CvOptions cv_opts;
  std::vector<std::string> cv_methods = {"forest", "lasso", "forward", "horseshoe"};
  std::string cv_force_stratum;
  bool cv_no_balance = false;
  add_common(cv, cv_common);
  cv->add_option("--survey", cv_opts.survey_csv, "survey CSV")->required();
  cv->add_option("--census", cv_opts.census_csv, "census CSV")->required();
  cv->add_option("--folds,-k", cv_opts.folds, "number of folds");
  cv->add_flag("--no-stratum-balance", cv_no_balance, "plain random folds");
  cv->add_option("--methods", cv_methods, "subset of the four methods")
      ->expected(-1);
  cv->add_option("--force-stratum", cv_force_stratum,
                 "stratum label forced into every model as an indicator");
  cv->add_option("--forest-trees", cv_opts.config.forest.n_trees, "trees");
  cv->add_option("--forest-mtry", cv_opts.config.forest.mtry, "covariates per split");
  cv->add_option("--forest-nodesize", cv_opts.config.forest.nodesize,
                 "max responses per leaf");
  cv->add_option("--lasso-grid", cv_opts.config.lasso_grid, "penalty grid size");
  cv->add_option("--lasso-folds", cv_opts.config.lasso_folds, "CV folds");
  cv->add_option("--hs-chains", cv_opts.config.hs.chains, "MCMC chains");
  cv->add_option("--hs-iters", cv_opts.config.hs.iterations, "iterations per chain");
  cv->add_option("--hs-burnin", cv_opts.config.hs.burn_in, "burn-in iterations");
  cv->add_option("--hs-thin", cv_opts.config.hs.thin, "thinning factor");
  cv->add_option("--rhat-threshold", cv_opts.rhat_threshold,
                 "refuse summaries above this split-Rhat (0 = off)");
  cv->callback([&] {
    apply_config(cv, cv_common.config_file);
    cv_opts.methods = parse_methods(cv_methods);
    if (!cv_force_stratum.empty()) cv_opts.force_stratum = cv_force_stratum;
    cv_opts.stratum_balance = !cv_no_balance;
    cv_opts.levels = cv_common.levels;
    cv_opts.seed = cv_common.seed;
    cv_opts.workers = cv_common.workers;
    cv_opts.out_dir = cv_common.out_dir;
    sae::cmd_cv(cv_opts);
  });

  // ---- gen-pop ----
  auto* gen = app.add_subcommand("gen-pop", "write synthetic survey/census files");
  CommonFlags gen_common;
  sae::GenPopOptions gen_opts;
  std::string gen_design;
  add_common(gen, gen_common);
  gen->add_option("--kind", gen_opts.kind, "s31, a, b, c or gama-standin");
  gen->add_option("--areas", gen_opts.n_areas, "number of areas (0 = kind default)");
  gen->add_option("--size-min", gen_opts.size_min, "smallest area size");
  gen->add_option("--size-max", gen_opts.size_max, "largest area size");
  gen->add_option("--design", gen_design, "draw a sample and write survey.csv");
  gen->callback([&] {
    apply_config(gen, gen_common.config_file);
    if (!gen_design.empty()) gen_opts.design = gen_design;
    gen_opts.seed = gen_common.seed;
    gen_opts.out_dir = gen_common.out_dir;
    sae::cmd_gen_pop(gen_opts);
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
