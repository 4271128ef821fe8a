#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgm/errors.hpp"
#include "pgm/experiment.hpp"
#include "pgm/pgm.hpp"
#include "pgm/rng.hpp"
#include "pgm/runconfig.hpp"

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct GenDataArgs {
  int n = 0;
  int dim = 0;
  int classes = 0;
  double separation = 1.0;
  double noise_frac = 0.0;
  std::string noise_mode = "label_flip";
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  int skip = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a) {
  if (a.classes < 2) {
    std::cerr << "error: classes must be >= 2\n";
    return 2;
  }
  if (a.n < a.classes || a.dim < 1) {
    std::cerr << "error: need n >= classes and dim >= 1\n";
    return 2;
  }
  if (!(a.noise_frac >= 0.0 && a.noise_frac <= 1.0)) {
    std::cerr << "error: noise fraction must be in [0, 1]\n";
    return 2;
  }
  pgm::NoiseMode mode;
  if (a.noise_mode == "label_flip") {
    mode = pgm::NoiseMode::label_flip;
  } else if (a.noise_mode == "feature_gauss") {
    mode = pgm::NoiseMode::feature_gauss;
  } else {
    std::cerr << "error: noise mode must be label_flip or feature_gauss\n";
    return 2;
  }

  if (a.skip < 0) {
    std::cerr << "error: skip must be >= 0\n";
    return 2;
  }
  pgm::Dataset ds = pgm::generate_synthetic(a.skip + a.n, a.dim, a.classes,
                                            a.separation, a.seed);
  if (a.skip > 0) {
    ds.examples.erase(ds.examples.begin(), ds.examples.begin() + a.skip);
  }
  if (a.noise_frac > 0.0) {
    ds = pgm::inject_noise(ds, a.noise_frac, mode, a.noise_sigma,
                           pgm::noise_seed(a.seed));
  }
  pgm::save_csv(ds, a.out);

  int noisy = 0;
  for (const pgm::Example& e : ds.examples) noisy += e.noisy ? 1 : 0;
  nlohmann::ordered_json summary;
  summary["n"] = ds.size();
  summary["dim"] = ds.dim;
  summary["classes"] = ds.num_classes;
  summary["noisy"] = noisy;
  summary["path"] = a.out;
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string strategy;
  double budget = -1.0;
  long long seed = -1;
  int workers = -1;
  std::string output_dir;
};

pgm::RunConfig load_config_with_overrides(const TrainArgs& a) {
  pgm::RunConfig cfg = pgm::parse_run_config(a.config);
  if (!a.strategy.empty()) {
    cfg.train.strategy = pgm::strategy_from_string(a.strategy);
  }
  if (a.budget >= 0.0) cfg.train.budget_fraction = a.budget;
  if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  if (a.workers >= 1) cfg.train.workers = a.workers;
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw pgm::ConfigError(e.what());
  }
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  const pgm::RunConfig cfg = load_config_with_overrides(a);
  const nlohmann::ordered_json summary = pgm::run_train_command(cfg);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct CompareArgs {
  TrainArgs base;
  std::string strategies = "full,random,pgm";
  std::string budgets = "0.1,0.2,0.3";
  int seeds = 3;
};

int cmd_compare(const CompareArgs& a) {
  const pgm::RunConfig cfg = load_config_with_overrides(a.base);
  std::vector<pgm::Strategy> strategies;
  for (const std::string& s : split_list(a.strategies)) {
    strategies.push_back(pgm::strategy_from_string(s));
  }
  std::vector<double> budgets;
  for (const std::string& b : split_list(a.budgets)) {
    try {
      budgets.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw pgm::ConfigError("bad budget value '" + b + "'");
    }
  }
  const nlohmann::ordered_json out =
      pgm::run_compare(cfg, strategies, budgets, a.seeds);
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct VerifyArgs {
  TrainArgs base;
  int trials = 200;
  std::string partitions = "2,4,8";
};

int cmd_verify_bound(const VerifyArgs& a) {
  const pgm::RunConfig cfg = load_config_with_overrides(a.base);
  std::vector<int> partition_counts;
  for (const std::string& d : split_list(a.partitions)) {
    try {
      partition_counts.push_back(std::stoi(d));
    } catch (const std::exception&) {
      throw pgm::ConfigError("bad partition count '" + d + "'");
    }
  }
  const pgm::BoundReport rep =
      pgm::run_verify_bound(cfg, a.trials, partition_counts);
  nlohmann::ordered_json j;
  j["trials"] = rep.trials;
  j["min_margin"] = rep.min_margin;
  j["mean_margin"] = rep.mean_margin;
  j["violations"] = rep.violations;
  if (rep.violations > 0) j["first_violation_seed"] = rep.first_violation_seed;
  std::cout << j.dump(2) << '\n';
  if (rep.violations > 0) {
    std::cerr << "error: partition bound violated (first trial seed "
              << rep.first_violation_seed << ")\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pgmatch: partitioned gradient matching for data subset selection"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
  gen_cmd->add_option("--n", gen.n, "number of examples")->required();
  gen_cmd->add_option("--dim", gen.dim, "feature dimension")->required();
  gen_cmd->add_option("--classes", gen.classes, "number of classes")->required();
  gen_cmd->add_option("--separation", gen.separation, "class center separation");
  gen_cmd->add_option("--noise-frac", gen.noise_frac, "fraction of noisy examples");
  gen_cmd->add_option("--noise-mode", gen.noise_mode,
                      "label_flip or feature_gauss");
  gen_cmd->add_option("--noise-sigma", gen.noise_sigma,
                      "feature noise standard deviation");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--skip", gen.skip,
                      "skip this many leading draws (carve splits from one stream)");
  gen_cmd->add_option("--out", gen.out, "output CSV path")->required();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "run one training job");
  train_cmd->add_option("--config", train.config, "run config path")->required();
  train_cmd->add_option("--strategy", train.strategy,
                        "override: full|pgm|random|large_only|large_small");
  train_cmd->add_option("--budget", train.budget, "override: budget fraction");
  train_cmd->add_option("--seed", train.seed, "override: run seed");
  train_cmd->add_option("--workers", train.workers, "override: selection workers");
  train_cmd->add_option("--output-dir", train.output_dir, "override: output dir");

  CompareArgs compare;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "run a strategies x budgets x seeds grid");
  compare_cmd->add_option("--config", compare.base.config, "run config path")
      ->required();
  compare_cmd->add_option("--strategies", compare.strategies,
                          "comma list of strategies");
  compare_cmd->add_option("--budgets", compare.budgets, "comma list of budgets");
  compare_cmd->add_option("--seeds", compare.seeds, "number of seeds");
  compare_cmd->add_option("--workers", compare.base.workers,
                          "override: selection workers");
  compare_cmd->add_option("--output-dir", compare.base.output_dir,
                          "override: output dir");

  VerifyArgs verify;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify-bound", "check the partition bound on randomized rounds");
  verify_cmd->add_option("--config", verify.base.config, "run config path")
      ->required();
  verify_cmd->add_option("--trials", verify.trials, "number of random rounds");
  verify_cmd->add_option("--partitions", verify.partitions,
                         "comma list of partition counts to cycle");
  verify_cmd->add_option("--workers", verify.base.workers,
                         "override: selection workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (train_cmd->parsed()) return cmd_train(train);
    if (compare_cmd->parsed()) return cmd_compare(compare);
    if (verify_cmd->parsed()) return cmd_verify_bound(verify);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const pgm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const pgm::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const pgm::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const pgm::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
