// prevcal: calibrate population-level class-probability estimates from
// pre-trained classifiers against a small labeled target-domain sample.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prevcal/covariate.hpp"
#include "prevcal/errors.hpp"
#include "prevcal/estimators.hpp"
#include "prevcal/gibbs_ensemble.hpp"
#include "prevcal/gibbs_single.hpp"
#include "prevcal/individual.hpp"
#include "prevcal/io.hpp"
#include "prevcal/map_em.hpp"
#include "prevcal/metrics.hpp"
#include "prevcal/simulate.hpp"

namespace {

using namespace prevcal;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ',';
    out += items[i];
  }
  return out;
}

struct CommonOptions {
  std::vector<std::string> labels;
  std::string unlabeled_path;
  std::string labeled_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  Hyperparams hp;
  ChainConfig chain;
  bool save_draws = false;
};

void add_common_options(CLI::App* cmd, CommonOptions& opt,
                        bool needs_data = true) {
  cmd->add_option("--labels", opt.labels,
                  "Comma-separated class labels, in storage order")
      ->delimiter(',')
      ->required();
  if (needs_data) {
    cmd->add_option("--unlabeled", opt.unlabeled_path,
                    "CSV of predictions on the unlabeled target set")
        ->required();
    cmd->add_option("--labeled", opt.labeled_path,
                    "CSV of (true, predicted) labels on the labeled set")
        ->required();
  }
  cmd->add_option("--out-dir", opt.out_dir, "Output directory");
  cmd->add_option("--seed", opt.seed, "RNG seed")->envname("PREVCAL_SEED");
  cmd->add_option("--chains", opt.chain.n_chains, "Number of MCMC chains");
  cmd->add_option("--burnin", opt.chain.n_burnin, "Burn-in sweeps per chain");
  cmd->add_option("--samples", opt.chain.n_samples,
                  "Retained draws per chain");
  cmd->add_option("--thin", opt.chain.thin, "Thinning interval");
  cmd->add_option("--mh-sd", opt.chain.mh_proposal_sd,
                  "Log-scale Metropolis proposal sd for gamma");
  cmd->add_flag("--adapt-mh", opt.chain.adapt_mh,
                "Tune proposal sd toward 44% acceptance during burn-in");
  cmd->add_option("--epsilon", opt.hp.epsilon, "Prior smoothing epsilon");
  cmd->add_option("--delta", opt.hp.delta, "Dirichlet prior mass on p");
  cmd->add_option("--alpha-gamma", opt.hp.alpha_gamma,
                  "Gamma prior shape for the shrinkage weights");
  cmd->add_option("--beta-gamma", opt.hp.beta_gamma,
                  "Gamma prior rate for the shrinkage weights");
  cmd->add_flag("--save-draws", opt.save_draws,
                "Write retained draws to draws.csv");
}

// Config-file friendliness: values may arrive once from the file and once
// from the command line; the last (command-line) value wins for scalars.
void finalize_subcommand(CLI::App* cmd) {
  cmd->configurable(true);
  cmd->fallthrough(true);
  for (CLI::Option* o : cmd->get_options()) {
    if (o->get_expected_max() == 1) {
      o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }
}

ClassLabelMap make_labels(const CommonOptions& opt) {
  return ClassLabelMap(opt.labels);
}

std::string out_path(const CommonOptions& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  return (std::filesystem::path(opt.out_dir) / name).string();
}

std::map<std::string, std::string> config_echo(const CommonOptions& opt,
                                               const std::string& model) {
  std::map<std::string, std::string> echo;
  echo["model"] = model;
  echo["labels"] = join(opt.labels);
  echo["unlabeled"] = opt.unlabeled_path;
  echo["labeled"] = opt.labeled_path;
  echo["seed"] = std::to_string(opt.seed);
  echo["chains"] = std::to_string(opt.chain.n_chains);
  echo["burnin"] = std::to_string(opt.chain.n_burnin);
  echo["samples"] = std::to_string(opt.chain.n_samples);
  echo["thin"] = std::to_string(opt.chain.thin);
  echo["mh_sd"] = format_double(opt.chain.mh_proposal_sd);
  echo["adapt_mh"] = opt.chain.adapt_mh ? "true" : "false";
  echo["epsilon"] = format_double(opt.hp.epsilon);
  echo["delta"] = format_double(opt.hp.delta);
  echo["alpha_gamma"] = format_double(opt.hp.alpha_gamma);
  echo["beta_gamma"] = format_double(opt.hp.beta_gamma);
  return echo;
}

unsigned pick_classifier(const std::vector<std::string>& algorithms,
                         const std::string& requested) {
  if (requested.empty()) return 0;
  for (unsigned a = 0; a < algorithms.size(); ++a) {
    if (algorithms[a] == requested) return a;
  }
  throw InputError("algorithm '" + requested + "' not present in the data");
}

void require_matching_algorithms(const UnlabeledData& u,
                                 const LabeledData& l) {
  if (u.algorithms != l.algorithms) {
    throw InputError(
        "unlabeled and labeled files carry different algorithm sets");
  }
}

void emit_outputs(const CommonOptions& opt, const PosteriorSummary& summary,
                  const ClassLabelMap& labels, const std::string& model,
                  const std::vector<std::string>& term_names = {}) {
  write_posterior_summary(out_path(opt, "posterior_summary.csv"), summary,
                          labels, term_names);
  write_diagnostics_json(out_path(opt, "diagnostics.json"), summary,
                         config_echo(opt, model));
  if (opt.save_draws) {
    write_draws(out_path(opt, "draws.csv"), summary);
  }
}

int cmd_calibrate(CommonOptions& opt, const std::string& algorithm) {
  const ClassLabelMap labels = make_labels(opt);
  const UnlabeledData unlabeled = load_unlabeled(opt.unlabeled_path, labels);
  const LabeledData labeled = load_labeled(opt.labeled_path, labels);
  require_matching_algorithms(unlabeled, labeled);
  const unsigned a = pick_classifier(unlabeled.algorithms, algorithm);
  ChainConfig cfg = opt.chain;
  cfg.seed = opt.seed;
  cfg.keep_draws = cfg.keep_draws || opt.save_draws;
  const PosteriorSummary summary =
      run_chain(unlabeled.to_counts(labels.size(), a),
                labeled.to_transfer(labels.size(), a), opt.hp, cfg);
  emit_outputs(opt, summary, labels, "single");
  return 0;
}

int cmd_ensemble(CommonOptions& opt, const std::string& model) {
  const ClassLabelMap labels = make_labels(opt);
  const UnlabeledData unlabeled = load_unlabeled(opt.unlabeled_path, labels);
  const LabeledData labeled = load_labeled(opt.labeled_path, labels);
  require_matching_algorithms(unlabeled, labeled);
  ChainConfig cfg = opt.chain;
  cfg.seed = opt.seed;
  cfg.keep_draws = cfg.keep_draws || opt.save_draws;
  const EnsembleCounts counts = unlabeled.to_ensemble_counts(labels.size());
  const EnsembleTransferErrors errors =
      labeled.to_transfer_errors(labels.size());
  const PosteriorSummary summary =
      model == "joint" ? run_joint(counts, errors, opt.hp, cfg)
                       : run_independent(counts, errors, opt.hp, cfg);
  emit_outputs(opt, summary, labels, "ensemble-" + model);
  return 0;
}

int cmd_covariate(CommonOptions& opt, const std::string& algorithm,
                  double beta_prior_variance) {
  const ClassLabelMap labels = make_labels(opt);
  const UnlabeledData unlabeled = load_unlabeled(opt.unlabeled_path, labels);
  const LabeledData labeled = load_labeled(opt.labeled_path, labels);
  require_matching_algorithms(unlabeled, labeled);
  const unsigned a = pick_classifier(unlabeled.algorithms, algorithm);
  const GroupedCovariates grouped =
      group_by_covariates(unlabeled, labels.size(), a);
  ChainConfig cfg = opt.chain;
  cfg.seed = opt.seed;
  cfg.keep_draws = cfg.keep_draws || opt.save_draws;
  const PosteriorSummary summary = run_covariate_chain(
      grouped.counts, grouped.design, labeled.to_transfer(labels.size(), a),
      opt.hp, cfg,
      RegressionPrior::default_for(grouped.design.terms(),
                                   beta_prior_variance));
  emit_outputs(opt, summary, labels, "covariate", grouped.design.term_names);
  return 0;
}

int cmd_map(CommonOptions& opt, const std::string& algorithm,
            long long max_iter, double tol) {
  const ClassLabelMap labels = make_labels(opt);
  const UnlabeledData unlabeled = load_unlabeled(opt.unlabeled_path, labels);
  const LabeledData labeled = load_labeled(opt.labeled_path, labels);
  require_matching_algorithms(unlabeled, labeled);
  const unsigned a = pick_classifier(unlabeled.algorithms, algorithm);
  EmConfig cfg;
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  const EmResult result =
      run_em(unlabeled.to_counts(labels.size(), a),
             labeled.to_transfer(labels.size(), a), opt.hp, cfg);
  write_map_estimate(out_path(opt, "map_estimate.csv"), result.state, labels);
  nlohmann::json j;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["objective"] = result.objective;
  j["floored"] = result.floored;
  j["config"] = config_echo(opt, "map");
  std::ofstream diag(out_path(opt, "diagnostics.json"));
  diag << j.dump(2) << '\n';
  if (result.floored) {
    std::cerr << "warning: some closed-form updates were pinned at the "
                 "interior floor\n";
  }
  return 0;
}

int cmd_simulate(CommonOptions& opt, const std::vector<std::string>& matrices,
                 const std::string& band_name, long long n_labeled,
                 long long n_unlabeled, long long replicates,
                 const std::vector<std::string>& method_names,
                 const Vec& p_u, const Vec& p_l, bool emit_datasets) {
  const ClassLabelMap labels = make_labels(opt);
  ScenarioSpec spec;
  for (const auto& name : matrices) {
    if (name == "M1" || name == "M2" || name == "M3") {
      spec.m.push_back(canonical_matrix(name));
      continue;
    }
    // A CSV file holding one row-stochastic matrix.
    const std::size_t c = labels.size();
    std::ifstream in(name);
    if (!in) throw InputError("cannot open file: " + name);
    Mat m(c, c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
      std::string line;
      if (!std::getline(in, line)) {
        throw InputError(name + ": expected " + std::to_string(c) +
                         " matrix rows");
      }
      std::stringstream ss(line);
      std::string field;
      std::size_t j = 0;
      while (std::getline(ss, field, ',') && j < c) {
        m(i, j++) = std::stod(field);
      }
      if (j != c) {
        throw InputError(name + ": row " + std::to_string(i + 1) +
                         " must have " + std::to_string(c) + " entries");
      }
    }
    spec.m.push_back(std::move(m));
  }
  for (const Mat& m : spec.m) {
    if (m.rows != labels.size()) {
      throw InputError(
          "simulate: matrix size does not match the declared labels (the "
          "canonical matrices are 4x4)");
    }
  }
  spec.band = band_from_name(band_name);
  spec.n_labeled = n_labeled;
  spec.n_unlabeled = n_unlabeled;
  spec.seed = opt.seed;
  if (!p_u.empty()) spec.p_u = p_u;
  if (!p_l.empty()) spec.p_l = p_l;

  std::vector<Method> methods;
  for (const auto& name : method_names) {
    methods.push_back(method_from_name(name));
  }
  EmConfig em_cfg;
  const std::vector<ExperimentRow> rows =
      run_experiment(spec, replicates, methods, opt.hp, opt.chain, em_cfg);
  write_results(out_path(opt, "results.csv"), rows, labels);
  if (emit_datasets) {
    for (long long rep = 0; rep < replicates; ++rep) {
      ScenarioSpec s = spec;
      s.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(rep));
      const SyntheticDataset ds = build_dataset(s);
      const std::string suffix = "_r" + std::to_string(rep + 1) + ".csv";
      write_dataset(out_path(opt, "unlabeled" + suffix),
                    out_path(opt, "labeled" + suffix), ds, labels);
    }
  }
  return 0;
}

int cmd_metrics(CommonOptions& opt, const Vec& estimate, const Vec& truth,
                const std::string& pairs_path, const std::string& ccc_variant) {
  const ClassLabelMap labels = make_labels(opt);
  std::vector<std::pair<std::string, double>> rows;
  if (!estimate.empty() || !truth.empty()) {
    if (estimate.empty() || truth.empty()) {
      throw InputError("metrics: --estimate and --truth go together");
    }
    rows.emplace_back("csmfa", csmf_accuracy(estimate, truth));
  }
  if (!pairs_path.empty()) {
    // CSV with header record_id,true_label,pred_<alg>; CCC of the first
    // prediction column.
    const LabeledData pairs = load_labeled(pairs_path, labels);
    std::vector<std::pair<int, int>> tp;
    for (std::size_t r = 0; r < pairs.true_labels.size(); ++r) {
      tp.emplace_back(pairs.true_labels[r], pairs.predictions[r][0]);
    }
    const auto confusion = ConfusionCounts::from_pairs(labels.size(), tp);
    const CccVariant variant = ccc_variant == "as-written"
                                   ? CccVariant::AsWritten
                                   : CccVariant::Literature;
    rows.emplace_back("ccc_" + ccc_variant, ccc(confusion, variant));
  }
  if (rows.empty()) {
    throw InputError(
        "metrics: nothing to compute (pass --estimate/--truth and/or "
        "--pairs)");
  }
  write_metrics(out_path(opt, "metrics.csv"), rows);
  return 0;
}

int cmd_predict_individual(CommonOptions& opt, const std::string& draws_path) {
  const ClassLabelMap labels = make_labels(opt);
  const UnlabeledData unlabeled = load_unlabeled(opt.unlabeled_path, labels);
  const PosteriorSummary summary = read_draws(draws_path);

  std::set<std::vector<int>> patterns(unlabeled.predictions.begin(),
                                      unlabeled.predictions.end());
  std::vector<std::pair<std::vector<int>, IndividualPosterior>> rows;
  long long warned = 0;
  for (const auto& pattern : patterns) {
    IndividualPosterior post = individual_posterior_ensemble(pattern, summary);
    if (post.skip_warning()) ++warned;
    rows.emplace_back(pattern, std::move(post));
  }
  if (warned > 0) {
    std::cerr << "warning: more than 1% of draws were skipped for " << warned
              << " pattern(s)\n";
  }
  write_individual_posteriors(out_path(opt, "individual_posteriors.csv"),
                              rows, labels);
  return 0;
}

void report_error(const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "prevcal: Bayesian calibration of population-level class probabilities "
      "from pre-trained classifiers and a small labeled target sample"};
  app.require_subcommand(1);
  app.fallthrough(true);
  // One flat key=value file; keys live under a [subcommand] section header.
  app.set_config("--config", "",
                 "Config file ([subcommand] section with key=value lines); "
                 "command-line flags win");

  CommonOptions opt;

  auto* calibrate = app.add_subcommand(
      "calibrate", "Single-classifier calibration (Gibbs sampler)");
  std::string algorithm;
  add_common_options(calibrate, opt);
  calibrate->add_option("--algorithm", algorithm,
                        "Which pred_<name> column to use (default: first)");

  auto* ensemble =
      app.add_subcommand("ensemble", "Multi-classifier ensemble calibration");
  std::string ensemble_model = "independent";
  add_common_options(ensemble, opt);
  ensemble
      ->add_option("--model", ensemble_model,
                   "Ensemble variant: independent (default) or joint")
      ->check(CLI::IsMember({"independent", "joint"}));

  auto* covariate = app.add_subcommand(
      "covariate", "Covariate-stratified calibration (Polya-Gamma sampler)");
  double beta_prior_variance = 100.0;
  add_common_options(covariate, opt);
  covariate->add_option("--algorithm", algorithm,
                        "Which pred_<name> column to use (default: first)");
  covariate->add_option("--beta-prior-variance", beta_prior_variance,
                        "Prior variance of each regression coefficient");

  auto* map_cmd =
      app.add_subcommand("map", "Posterior mode via EM (fast alternative)");
  long long em_max_iter = 10000;
  double em_tol = 1e-8;
  add_common_options(map_cmd, opt);
  map_cmd->add_option("--algorithm", algorithm,
                      "Which pred_<name> column to use (default: first)");
  map_cmd->add_option("--max-iter", em_max_iter, "EM iteration cap");
  map_cmd->add_option("--tol", em_tol, "Relative objective tolerance");

  auto* simulate =
      app.add_subcommand("simulate", "Synthetic benchmark scenarios");
  std::vector<std::string> matrices{"M2"};
  std::string band_name = "none";
  long long n_labeled = 400, n_unlabeled = 800, replicates = 1;
  std::vector<std::string> method_names{"naive", "calibrated-single"};
  Vec p_u_arg, p_l_arg;
  bool emit_datasets = false;
  add_common_options(simulate, opt, /*needs_data=*/false);
  simulate
      ->add_option("--m", matrices,
                   "Misclassification matrices, one per synthetic "
                   "classifier: M1|M2|M3|<file.csv>")
      ->delimiter(',');
  simulate->add_option("--band", band_name,
                       "CSMFA band for the drawn (p_l, p_u) pair: "
                       "low|medium|high|none");
  simulate->add_option("--n-labeled", n_labeled, "Labeled set size");
  simulate->add_option("--n-unlabeled", n_unlabeled, "Unlabeled set size");
  simulate->add_option("--replicates", replicates, "Number of replicates");
  simulate
      ->add_option("--methods", method_names,
                   "naive, calibrated-single, "
                   "calibrated-ensemble-independent, "
                   "calibrated-ensemble-joint, map")
      ->delimiter(',');
  simulate->add_option("--p-u", p_u_arg, "Fix the unlabeled-set truth vector")
      ->delimiter(',');
  simulate->add_option("--p-l", p_l_arg, "Fix the labeled-set truth vector")
      ->delimiter(',');
  simulate->add_flag("--emit-datasets", emit_datasets,
                     "Write the per-replicate synthetic datasets");

  auto* metrics_cmd = app.add_subcommand("metrics", "Evaluation metrics");
  Vec estimate_arg, truth_arg;
  std::string pairs_path;
  std::string ccc_variant = "literature";
  add_common_options(metrics_cmd, opt, /*needs_data=*/false);
  metrics_cmd
      ->add_option("--estimate", estimate_arg,
                   "Estimated probability vector (comma list)")
      ->delimiter(',');
  metrics_cmd
      ->add_option("--truth", truth_arg,
                   "Reference probability vector (comma list)")
      ->delimiter(',');
  metrics_cmd->add_option("--pairs", pairs_path,
                          "CSV of record_id,true_label,pred_<alg> for CCC");
  metrics_cmd
      ->add_option("--ccc-variant", ccc_variant,
                   "literature (default) or as-written")
      ->check(CLI::IsMember({"literature", "as-written"}));

  auto* predict = app.add_subcommand(
      "predict-individual",
      "Per-pattern class-membership posteriors from saved draws");
  std::string draws_path;
  predict->add_option("--labels", opt.labels, "Comma-separated class labels")
      ->delimiter(',')
      ->required();
  predict
      ->add_option("--unlabeled", opt.unlabeled_path,
                   "CSV of predictions whose patterns to score")
      ->required();
  predict
      ->add_option("--draws", draws_path, "draws.csv from a --save-draws run")
      ->required();
  predict->add_option("--out-dir", opt.out_dir, "Output directory");

  for (CLI::App* sub : app.get_subcommands(nullptr)) {
    finalize_subcommand(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(calibrate)) return cmd_calibrate(opt, algorithm);
    if (app.got_subcommand(ensemble)) return cmd_ensemble(opt, ensemble_model);
    if (app.got_subcommand(covariate)) {
      return cmd_covariate(opt, algorithm, beta_prior_variance);
    }
    if (app.got_subcommand(map_cmd)) {
      return cmd_map(opt, algorithm, em_max_iter, em_tol);
    }
    if (app.got_subcommand(simulate)) {
      return cmd_simulate(opt, matrices, band_name, n_labeled, n_unlabeled,
                          replicates, method_names, p_u_arg, p_l_arg,
                          emit_datasets);
    }
    if (app.got_subcommand(metrics_cmd)) {
      return cmd_metrics(opt, estimate_arg, truth_arg, pairs_path,
                         ccc_variant);
    }
    if (app.got_subcommand(predict)) {
      return cmd_predict_individual(opt, draws_path);
    }
  } catch (const InputError& e) {
    report_error("input", e.what());
    return 2;
  } catch (const EmptyDataError& e) {
    report_error("empty-data", e.what());
    return 2;
  } catch (const ParameterError& e) {
    // Bad user-supplied values or an invalid configuration for the data.
    report_error("input", e.what());
    return 2;
  } catch (const ShapeError& e) {
    report_error("input", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("inference", e.what());
    return 1;
  }
  return 0;
}
