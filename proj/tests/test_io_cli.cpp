#include "prevcal/io.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "prevcal/errors.hpp"

using namespace prevcal;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  const fs::path dir = fs::temp_directory_path() / "prevcal_io_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  const fs::path p = test_dir() / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ClassLabelMap labels4() {
  return ClassLabelMap({"pneumonia", "diarrhea", "sepsis", "other"});
}

#ifdef PREVCAL_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(PREVCAL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}
#endif

}  // namespace

TEST_CASE("unlabeled ingestion") {
  SUBCASE("counting") {
    const auto path = write_file("u_basic.csv",
                                 "record_id,pred_tariff\n"
                                 "r1,pneumonia\n"
                                 "r2,diarrhea\n"
                                 "r3,sepsis\n"
                                 "r4,other\n");
    const auto data = load_unlabeled(path, labels4());
    CHECK(data.algorithms == std::vector<std::string>{"tariff"});
    CHECK(data.to_counts(4).v == IVec{1, 1, 1, 1});
  }
  SUBCASE("two algorithms build marginals and sparse combinations") {
    const auto path = write_file("u_two.csv",
                                 "record_id,pred_a,pred_b\n"
                                 "r1,pneumonia,pneumonia\n"
                                 "r2,pneumonia,diarrhea\n");
    const auto data = load_unlabeled(path, labels4());
    const auto counts = data.to_ensemble_counts(4);
    CHECK(counts.v[0] == IVec{2, 0, 0, 0});
    CHECK(counts.v[1] == IVec{1, 1, 0, 0});
    REQUIRE(counts.combos.size() == 2);
    CHECK(counts.combos[0].first == std::vector<int>{0, 0});
    CHECK(counts.combos[1].first == std::vector<int>{0, 1});
  }
  SUBCASE("unknown label names the row") {
    const auto path = write_file("u_bad.csv",
                                 "record_id,pred_a\n"
                                 "r1,pneumonia\n"
                                 "r2,malaria\n");
    try {
      load_unlabeled(path, labels4());
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
      CHECK(std::string(e.what()).find("malaria") != std::string::npos);
    }
  }
  SUBCASE("malformed header") {
    const auto path =
        write_file("u_nohdr.csv", "record_id,tariff\nr1,pneumonia\n");
    try {
      load_unlabeled(path, labels4());
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("pred_") != std::string::npos);
    }
  }
  SUBCASE("empty file") {
    const auto path = write_file("u_empty.csv", "");
    CHECK_THROWS_AS(load_unlabeled(path, labels4()), EmptyDataError);
    const auto header_only =
        write_file("u_hdr_only.csv", "record_id,pred_a\n");
    CHECK_THROWS_AS(load_unlabeled(header_only, labels4()), EmptyDataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_unlabeled("/nonexistent/file.csv", labels4()),
                    InputError);
  }
}

TEST_CASE("labeled ingestion") {
  SUBCASE("transfer counting") {
    const auto path = write_file("l_basic.csv",
                                 "record_id,true_label,pred_a\n"
                                 "r1,pneumonia,pneumonia\n"
                                 "r2,pneumonia,pneumonia\n"
                                 "r3,pneumonia,pneumonia\n"
                                 "r4,pneumonia,diarrhea\n");
    const auto data = load_labeled(path, labels4());
    const auto t = data.to_transfer(4);
    CHECK(t.t(0, 0) == 3);
    CHECK(t.t(0, 1) == 1);
    CHECK(t.row_sums == IVec{4, 0, 0, 0});
  }
  SUBCASE("empty labeled set is a valid all-zero matrix") {
    const auto path =
        write_file("l_empty.csv", "record_id,true_label,pred_a\n");
    const auto data = load_labeled(path, labels4());
    const auto t = data.to_transfer(4);
    CHECK(t.total == 0);
  }
  SUBCASE("bad true label") {
    const auto path = write_file("l_bad.csv",
                                 "record_id,true_label,pred_a\n"
                                 "r1,malaria,pneumonia\n");
    CHECK_THROWS_AS(load_labeled(path, labels4()), InputError);
  }
}

TEST_CASE("round trip: generated datasets reload to identical counts") {
  ScenarioSpec spec;
  spec.m = {canonical_matrix("M2"), canonical_matrix("M3")};
  spec.band = Band::Medium;
  spec.n_unlabeled = 500;
  spec.n_labeled = 200;
  spec.seed = 314;
  const SyntheticDataset ds = build_dataset(spec);
  const auto labels = labels4();
  const auto u_path = (test_dir() / "rt_unlabeled.csv").string();
  const auto l_path = (test_dir() / "rt_labeled.csv").string();
  write_dataset(u_path, l_path, ds, labels);

  const auto u = load_unlabeled(u_path, labels);
  const auto l = load_labeled(l_path, labels);
  const auto loaded = u.to_ensemble_counts(4);
  const auto generated = ds.ensemble_counts();
  CHECK(loaded.v == generated.v);
  CHECK(loaded.combos == generated.combos);
  const auto lt = l.to_transfer_errors(4);
  const auto gt = ds.ensemble_transfer();
  for (int k = 0; k < 2; ++k) {
    CHECK(lt.t[k].t.a == gt.t[k].t.a);
  }
}

TEST_CASE("covariate grouping bins duplicate rows deterministically") {
  const auto path = write_file("u_cov.csv",
                               "record_id,pred_a,age,sex\n"
                               "r1,pneumonia,1,0\n"
                               "r2,diarrhea,0,1\n"
                               "r3,sepsis,1,0\n"
                               "r4,other,0,1\n"
                               "r5,pneumonia,2,1\n");
  const auto data = load_unlabeled(path, labels4());
  CHECK(data.covariate_names == std::vector<std::string>{"age", "sex"});
  const auto grouped = group_by_covariates(data, 4);
  CHECK(grouped.counts.groups() == 3);  // (0,1), (1,0), (2,1) sorted
  CHECK(grouped.design.terms() == 3);   // intercept + 2 covariates
  CHECK(grouped.design.term_names[0] == "intercept");
  // First group is (0,1): diarrhea + other.
  CHECK(grouped.counts.v(0, 1) == 1);
  CHECK(grouped.counts.v(0, 3) == 1);
  CHECK(grouped.counts.group_sizes == IVec{2, 2, 1});
  CHECK(grouped.design.x(1, 1) == 1.0);
  CHECK(grouped.design.x(2, 1) == 2.0);
}

TEST_CASE("doubles round-trip through the 17-digit format") {
  RngStream rng(3, 9);
  for (int rep = 0; rep < 1000; ++rep) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, rep % 30 - 15);
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("draws round-trip through the wide CSV") {
  DrawSchema schema;
  schema.add_vector("p", 3);
  schema.add_matrix("m", 3, 3);
  schema.add_vector("gamma", 3);
  std::vector<ChainDraws> chains(2);
  RngStream rng(12, 1);
  for (auto& chain : chains) {
    for (int it = 0; it < 5; ++it) {
      Vec draw(schema.size());
      for (double& x : draw) x = rng.uniform();
      chain.draws.push_back(draw);
    }
  }
  const auto summary = summarize(schema, chains, true);
  const auto path = (test_dir() / "draws_rt.csv").string();
  write_draws(path, summary);
  const auto loaded = read_draws(path);
  REQUIRE(loaded.chains.size() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(loaded.chains[c].draws == chains[c].draws);
  }
  CHECK(loaded.schema.names.size() == schema.names.size());
  for (std::size_t k = 0; k < schema.size(); ++k) {
    CHECK(loaded.schema.names[k].block == schema.names[k].block);
    CHECK(loaded.schema.names[k].row == schema.names[k].row);
    CHECK(loaded.schema.names[k].col == schema.names[k].col);
  }
}

#ifdef PREVCAL_CLI_PATH

TEST_CASE("cli end-to-end determinism and exit codes" *
          doctest::timeout(600)) {
  const fs::path dir = test_dir() / "cli";
  fs::create_directories(dir);
  const auto u_path = (dir / "unlabeled.csv").string();
  const auto l_path = (dir / "labeled.csv").string();
  {
    ScenarioSpec spec;
    spec.m = {canonical_matrix("M2")};
    spec.band = Band::High;
    spec.n_unlabeled = 300;
    spec.n_labeled = 150;
    spec.seed = 5150;
    write_dataset(u_path, l_path, build_dataset(spec), labels4());
  }
  const std::string common =
      "--labels pneumonia,diarrhea,sepsis,other --unlabeled " + u_path +
      " --labeled " + l_path + " --seed 42 --chains 2 --burnin 200 "
      "--samples 300";

  SUBCASE("identical runs produce byte-identical outputs") {
    const std::string out1 = (dir / "run1").string();
    const std::string out2 = (dir / "run2").string();
    REQUIRE(run_cli("calibrate " + common + " --save-draws --out-dir " +
                    out1) == 0);
    REQUIRE(run_cli("calibrate " + common + " --save-draws --out-dir " +
                    out2) == 0);
    CHECK(slurp(out1 + "/posterior_summary.csv") ==
          slurp(out2 + "/posterior_summary.csv"));
    CHECK(slurp(out1 + "/diagnostics.json") ==
          slurp(out2 + "/diagnostics.json"));
    CHECK(slurp(out1 + "/draws.csv") == slurp(out2 + "/draws.csv"));
    CHECK(!slurp(out1 + "/posterior_summary.csv").empty());
  }
  SUBCASE("missing input file exits with status 2") {
    CHECK(run_cli("calibrate --labels a,b --unlabeled /no/such/file.csv "
                  "--labeled /no/such/labeled.csv --out-dir " +
                  (dir / "x").string()) == 2);
  }
  SUBCASE("mismatched algorithm sets between the files exit with status 2") {
    const auto l_extra = (dir / "l_extra.csv").string();
    {
      const auto lab = load_labeled(l_path, labels4());
      std::ofstream out(l_extra);
      out << "record_id,true_label,pred_alg1,pred_other\n";
      for (std::size_t r = 0; r < lab.predictions.size(); ++r) {
        const auto& pred =
            labels4().label(static_cast<std::size_t>(lab.predictions[r][0]));
        out << 'l' << r + 1 << ','
            << labels4().label(static_cast<std::size_t>(lab.true_labels[r]))
            << ',' << pred << ',' << pred << '\n';
      }
    }
    CHECK(run_cli("calibrate --labels pneumonia,diarrhea,sepsis,other "
                  "--unlabeled " +
                  u_path + " --labeled " + l_extra + " --out-dir " +
                  (dir / "mm").string()) == 2);
  }
  SUBCASE("simulate accepts a custom matrix file") {
    const auto m_path = (dir / "custom_m.csv").string();
    {
      std::ofstream f(m_path);
      f << "0.7,0.1,0.1,0.1\n0.1,0.7,0.1,0.1\n"
           "0.1,0.1,0.7,0.1\n0.1,0.1,0.1,0.7\n";
    }
    const std::string out = (dir / "sim_custom").string();
    REQUIRE(run_cli("simulate --labels a,b,c,d --m " + m_path +
                    " --band none --replicates 1 --n-unlabeled 200 "
                    "--n-labeled 100 --seed 2 --chains 1 --burnin 100 "
                    "--samples 150 --methods naive,map --out-dir " +
                    out) == 0);
    const std::string results = slurp(out + "/results.csv");
    CHECK(results.find("naive,csmfa") != std::string::npos);
    CHECK(results.find("map,csmfa") != std::string::npos);
  }
  SUBCASE("metrics subcommand") {
    const std::string out = (dir / "metrics").string();
    REQUIRE(run_cli("metrics --labels a,b,c,d "
                    "--estimate 0.5,0.5,0,0 --truth 0.25,0.25,0.25,0.25 "
                    "--out-dir " +
                    out) == 0);
    const std::string content = slurp(out + "/metrics.csv");
    CHECK(content.find("csmfa,-1") != std::string::npos);
  }
  SUBCASE("predict-individual consumes saved draws") {
    const std::string fit = (dir / "fit").string();
    REQUIRE(run_cli("calibrate " + common + " --save-draws --out-dir " +
                    fit) == 0);
    const std::string pred = (dir / "pred").string();
    REQUIRE(run_cli("predict-individual --labels "
                    "pneumonia,diarrhea,sepsis,other --unlabeled " +
                    u_path + " --draws " + fit + "/draws.csv --out-dir " +
                    pred) == 0);
    const std::string content = slurp(pred + "/individual_posteriors.csv");
    CHECK(content.find("pattern,p_pneumonia") != std::string::npos);
    CHECK(content.find("\npneumonia,") != std::string::npos);
  }
  SUBCASE("config file reproduces the flag run and flags win") {
    const std::string out_flags = (dir / "cfg_flags").string();
    REQUIRE(run_cli("calibrate " + common + " --out-dir " + out_flags) == 0);
    const auto conf = (dir / "run.conf").string();
    {
      std::ofstream f(conf);
      f << "[calibrate]\n"
        << "labels=pneumonia,diarrhea,sepsis,other\n"
        << "unlabeled=" << u_path << "\n"
        << "labeled=" << l_path << "\n"
        << "seed=42\nchains=2\nburnin=200\nsamples=300\n"
        << "out-dir=" << (dir / "cfg_file").string() << "\n";
    }
    REQUIRE(run_cli("calibrate --config " + conf) == 0);
    CHECK(slurp(out_flags + "/posterior_summary.csv") ==
          slurp((dir / "cfg_file").string() + "/posterior_summary.csv"));
    // A flag on the command line overrides the config value.
    const std::string out_override = (dir / "cfg_override").string();
    REQUIRE(run_cli("calibrate --config " + conf + " --seed 43 --out-dir " +
                    out_override) == 0);
    CHECK(slurp(out_flags + "/posterior_summary.csv") !=
          slurp(out_override + "/posterior_summary.csv"));
  }
  SUBCASE("environment variable supplies the default seed") {
    const std::string out_env = (dir / "env_seed").string();
    const std::string cmd = "PREVCAL_SEED=42 " + std::string(PREVCAL_CLI_PATH) +
                            " calibrate " + common.substr(0, common.find("--seed")) +
                            " --chains 2 --burnin 200 --samples 300 --out-dir " +
                            out_env + " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const std::string out_flag = (dir / "flag_seed").string();
    REQUIRE(run_cli("calibrate " + common + " --out-dir " + out_flag) == 0);
    CHECK(slurp(out_env + "/posterior_summary.csv") ==
          slurp(out_flag + "/posterior_summary.csv"));
  }
  SUBCASE("adaptive proposals stay deterministic") {
    const std::string out1 = (dir / "adapt1").string();
    const std::string out2 = (dir / "adapt2").string();
    REQUIRE(run_cli("calibrate " + common + " --adapt-mh --out-dir " + out1) ==
            0);
    REQUIRE(run_cli("calibrate " + common + " --adapt-mh --out-dir " + out2) ==
            0);
    CHECK(slurp(out1 + "/posterior_summary.csv") ==
          slurp(out2 + "/posterior_summary.csv"));
  }
}

TEST_CASE("cli ensemble, covariate, and map subcommands" *
          doctest::timeout(600)) {
  const fs::path dir = test_dir() / "cli_models";
  fs::create_directories(dir);
  const auto u2_path = (dir / "u2.csv").string();
  const auto l2_path = (dir / "l2.csv").string();
  {
    ScenarioSpec spec;
    spec.m = {canonical_matrix("M1"), canonical_matrix("M2")};
    spec.band = Band::High;
    spec.n_unlabeled = 250;
    spec.n_labeled = 120;
    spec.seed = 99;
    write_dataset(u2_path, l2_path, build_dataset(spec), labels4());
  }
  const std::string common =
      "--labels pneumonia,diarrhea,sepsis,other --unlabeled " + u2_path +
      " --labeled " + l2_path + " --seed 11 --chains 1 --burnin 150 "
      "--samples 250";

  SUBCASE("ensemble fit and ensemble individual prediction") {
    const std::string out = (dir / "ens").string();
    REQUIRE(run_cli("ensemble " + common + " --save-draws --out-dir " + out) ==
            0);
    const std::string summary = slurp(out + "/posterior_summary.csv");
    CHECK(summary.find("\nm1,") != std::string::npos);
    CHECK(summary.find("\nm2,") != std::string::npos);
    const std::string pred = (dir / "ens_pred").string();
    REQUIRE(run_cli("predict-individual --labels "
                    "pneumonia,diarrhea,sepsis,other --unlabeled " +
                    u2_path + " --draws " + out + "/draws.csv --out-dir " +
                    pred) == 0);
    // Patterns carry both classifiers' labels.
    CHECK(slurp(pred + "/individual_posteriors.csv").find("|") !=
          std::string::npos);
  }
  SUBCASE("joint ensemble variant") {
    const std::string out = (dir / "ensj").string();
    REQUIRE(run_cli("ensemble " + common + " --model joint --out-dir " + out) ==
            0);
    CHECK(!slurp(out + "/posterior_summary.csv").empty());
  }
  SUBCASE("map subcommand") {
    const std::string out = (dir / "map").string();
    REQUIRE(run_cli("map " + common + " --out-dir " + out) == 0);
    const std::string est = slurp(out + "/map_estimate.csv");
    CHECK(est.find("parameter,row,col,value") != std::string::npos);
    CHECK(est.find("\ngamma,") != std::string::npos);
    CHECK(slurp(out + "/diagnostics.json").find("\"converged\": true") !=
          std::string::npos);
  }
  SUBCASE("covariate subcommand with a covariate column") {
    // Rewrite both files down to one classifier, with a binary covariate on
    // the unlabeled side.
    const auto ucov = (dir / "ucov.csv").string();
    const auto lcov = (dir / "lcov.csv").string();
    {
      const auto base = load_unlabeled(u2_path, labels4());
      std::ofstream out(ucov);
      out << "record_id,pred_alg1,region\n";
      for (std::size_t r = 0; r < base.predictions.size(); ++r) {
        out << 'r' << r + 1 << ','
            << labels4().label(
                   static_cast<std::size_t>(base.predictions[r][0]))
            << ',' << (r % 2) << '\n';
      }
      const auto lab = load_labeled(l2_path, labels4());
      std::ofstream lout(lcov);
      lout << "record_id,true_label,pred_alg1\n";
      for (std::size_t r = 0; r < lab.predictions.size(); ++r) {
        lout << 'l' << r + 1 << ','
             << labels4().label(static_cast<std::size_t>(lab.true_labels[r]))
             << ','
             << labels4().label(
                    static_cast<std::size_t>(lab.predictions[r][0]))
             << '\n';
      }
    }
    const std::string out = (dir / "cov").string();
    REQUIRE(run_cli("covariate --labels pneumonia,diarrhea,sepsis,other "
                    "--unlabeled " +
                    ucov + " --labeled " + lcov +
                    " --algorithm alg1 --seed 3 --chains 1 --burnin 100 "
                    "--samples 150 --out-dir " +
                    out) == 0);
    const std::string summary = slurp(out + "/posterior_summary.csv");
    CHECK(summary.find("\nbeta,intercept,") != std::string::npos);
    CHECK(summary.find("\nbeta,region,") != std::string::npos);
    CHECK(summary.find("\np_group,") != std::string::npos);
  }
}

#endif  // PREVCAL_CLI_PATH
