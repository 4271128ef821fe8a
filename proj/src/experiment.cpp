#include "pgm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "pgm/errors.hpp"
#include "pgm/rng.hpp"

namespace pgm {

namespace {

constexpr std::uint64_t kNoiseSeedStream = 0x53;
constexpr std::uint64_t kTrialStream = 0x54;
constexpr std::uint64_t kTrialBudgetStream = 0x55;
constexpr std::uint64_t kTrialInitStream = 0x56;
constexpr std::uint64_t kTrialPartitionStream = 0x57;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::uint64_t noise_seed(std::uint64_t gen_seed) {
  return derive_seed(gen_seed, kNoiseSeedStream);
}

LoadedData load_data(const DataSpec& spec) {
  LoadedData data;
  if (spec.generate) {
    // One stream sliced into three splits: same class geometry everywhere,
    // no overlap between them.
    const Dataset all = generate_synthetic(
        spec.gen_n + spec.gen_val_n + spec.gen_test_n, spec.gen_dim,
        spec.gen_classes, spec.gen_separation, spec.gen_seed);
    auto slice = [&](int begin, int count) {
      Dataset out;
      out.dim = all.dim;
      out.num_classes = all.num_classes;
      out.examples.assign(all.examples.begin() + begin,
                          all.examples.begin() + begin + count);
      return out;
    };
    data.train = slice(0, spec.gen_n);
    data.val = slice(spec.gen_n, spec.gen_val_n);
    data.test = slice(spec.gen_n + spec.gen_val_n, spec.gen_test_n);
  } else {
    data.train = load_csv(spec.train_path, spec.classes);
    data.val = load_csv(spec.val_path, spec.classes);
    data.test = load_csv(spec.test_path, spec.classes);
  }
  if (spec.noise_fraction > 0.0) {
    data.train = inject_noise(data.train, spec.noise_fraction, spec.noise_mode,
                              spec.noise_sigma, noise_seed(spec.gen_seed));
  }
  return data;
}

void write_curves_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "epoch,train_loss,val_loss,test_err,subset_size,selection_sec,"
         "training_sec,lr\n";
  for (const EpochRow& r : report.rows) {
    out << r.epoch << ',' << format_double(r.train_loss) << ','
        << format_double(r.val_loss) << ',' << format_double(r.test_err) << ','
        << r.subset_size << ',' << format_double(r.selection_sec) << ','
        << format_double(r.training_sec) << ',' << format_double(r.lr) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string selection_csv_text(const Selection& sel, const Partitioning& part) {
  std::ostringstream out;
  out << "instance_id,weight,partition\n";
  for (std::size_t i = 0; i < sel.instance_ids.size(); ++i) {
    const int id = sel.instance_ids[i];
    out << id << ',' << format_double(sel.instance_weights[i]) << ','
        << part.assignment[id] << '\n';
  }
  return out.str();
}

void write_selection_csv(const Selection& sel, const Partitioning& part,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << selection_csv_text(sel, part);
  if (!out) throw IoError("write failed for '" + path + "'");
}

nlohmann::ordered_json summary_to_json(const RunConfig& cfg,
                                       const MetricsReport& report) {
  const MetricsSummary& s = report.summary;
  nlohmann::ordered_json j;
  j["strategy"] = to_string(cfg.train.strategy);
  j["budget_fraction"] = cfg.train.budget_fraction;
  j["seed"] = cfg.train.seed;
  j["workers"] = cfg.train.workers;
  j["epochs"] = cfg.train.total_epochs;
  j["final_test_error"] = s.final_test_error;
  j["final_train_loss"] = s.final_train_loss;
  j["final_val_loss"] = s.final_val_loss;
  j["final_subset_size"] = s.final_subset_size;
  j["selection_seconds_total"] = s.selection_seconds_total;
  j["training_seconds_total"] = s.training_seconds_total;
  j["overlap_index_per_round"] = s.overlap_index_per_round;
  j["noise_overlap_index"] = opt_json(s.noise_overlap_index);
  j["bound_margin_per_round"] = s.bound_margin_per_round;
  j["relative_test_error"] = opt_json(s.relative_test_error);
  j["speedup"] = opt_json(s.speedup);
  return j;
}

nlohmann::ordered_json run_train_command(const RunConfig& cfg) {
  const LoadedData data = load_data(cfg.data);
  const RunResult result =
      run_training(data.train, data.val, data.test, cfg.model, cfg.train);

  ensure_dir(cfg.output_dir);
  const std::filesystem::path out_dir(cfg.output_dir);

  write_curves_csv(result.report, (out_dir / "curves.csv").string());

  const Partitioning part = run_partitioning(data.train, cfg.train);
  for (const Selection& sel : result.selections) {
    const std::string name = "selection_round_" + std::to_string(sel.round) + ".csv";
    write_selection_csv(sel, part, (out_dir / name).string());
  }

  const nlohmann::ordered_json summary = summary_to_json(cfg, result.report);
  std::ofstream out(out_dir / "metrics.json");
  if (!out) throw IoError("cannot write metrics.json");
  out << summary.dump(2) << '\n';
  return summary;
}

nlohmann::ordered_json run_compare(const RunConfig& cfg,
                                   const std::vector<Strategy>& strategies,
                                   const std::vector<double>& budgets,
                                   int num_seeds) {
  if (num_seeds < 1) throw ConfigError("seeds must be >= 1");
  if (strategies.empty()) throw ConfigError("need at least one strategy");
  if (budgets.empty()) throw ConfigError("need at least one budget");
  for (double b : budgets) {
    if (!(b > 0.0 && b <= 1.0)) throw ConfigError("budgets must be in (0, 1]");
  }

  const LoadedData data = load_data(cfg.data);

  struct CellResult {
    Strategy strategy;
    double budget;
    std::uint64_t seed;
    bool failed = false;
    std::string error;
    double test_err = 0.0;
    std::optional<double> rel_test_err;
    std::optional<double> speedup_v;
    std::optional<double> oi;   // within-run, pgm only
    std::optional<double> noi;
    Selection last_selection;   // for cross-seed overlap
  };

  // Full-training reference per seed; also the "full" cells.
  std::vector<CellResult> full_cells(num_seeds);
  std::vector<double> full_err(num_seeds), full_wall(num_seeds);
  for (int s = 0; s < num_seeds; ++s) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
    tc.strategy = Strategy::full;
    tc.budget_fraction = 1.0;
    const RunResult r = run_training(data.train, data.val, data.test, cfg.model, tc);
    full_err[s] = r.report.summary.final_test_error;
    full_wall[s] = r.report.summary.selection_seconds_total +
                   r.report.summary.training_seconds_total;
    CellResult& cell = full_cells[s];
    cell.strategy = Strategy::full;
    cell.budget = 1.0;
    cell.seed = tc.seed;
    cell.test_err = full_err[s];
    if (full_err[s] > 0.0) cell.rel_test_err = 0.0;
    cell.speedup_v = 1.0;
  }

  std::vector<CellResult> cells;
  for (Strategy strat : strategies) {
    if (strat == Strategy::full) {
      cells.insert(cells.end(), full_cells.begin(), full_cells.end());
      continue;
    }
    for (double budget : budgets) {
      for (int s = 0; s < num_seeds; ++s) {
        CellResult cell;
        cell.strategy = strat;
        cell.budget = budget;
        cell.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
        try {
          TrainConfig tc = cfg.train;
          tc.seed = cell.seed;
          tc.strategy = strat;
          tc.budget_fraction = budget;
          const RunResult r =
              run_training(data.train, data.val, data.test, cfg.model, tc);
          const MetricsSummary& sm = r.report.summary;
          cell.test_err = sm.final_test_error;
          if (full_err[s] > 0.0) {
            cell.rel_test_err = relative_test_error(cell.test_err, full_err[s]);
          }
          const double wall = sm.selection_seconds_total + sm.training_seconds_total;
          if (wall > 0.0 && full_wall[s] > 0.0) {
            cell.speedup_v = speedup(full_wall[s], wall);
          }
          if (strat == Strategy::pgm && !sm.overlap_index_per_round.empty()) {
            cell.oi = mean_of(sm.overlap_index_per_round);
          }
          cell.noi = sm.noise_overlap_index;
          if (!r.selections.empty()) cell.last_selection = r.selections.back();
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        cells.push_back(cell);
      }
    }
  }

  // Aggregates per (strategy, budget). Adaptive runs report the mean
  // within-run overlap; single-selection strategies get the overlap between
  // consecutive seeds' selections instead (their within-run subsets never
  // change, so cross-seed overlap is the meaningful diversity number).
  nlohmann::ordered_json aggregates = nlohmann::ordered_json::array();
  auto aggregate_group = [&](Strategy strat, double budget,
                             const std::vector<const CellResult*>& group) {
    nlohmann::ordered_json a;
    a["strategy"] = to_string(strat);
    a["budget"] = budget;
    std::vector<double> err, rel, spd, oi, noi;
    int failed = 0;
    for (const CellResult* c : group) {
      if (c->failed) {
        ++failed;
        continue;
      }
      err.push_back(c->test_err);
      if (c->rel_test_err) rel.push_back(*c->rel_test_err);
      if (c->speedup_v) spd.push_back(*c->speedup_v);
      if (c->oi) oi.push_back(*c->oi);
      if (c->noi) noi.push_back(*c->noi);
    }
    if (strat != Strategy::pgm && strat != Strategy::full) {
      for (std::size_t i = 0; i + 1 < group.size(); ++i) {
        if (group[i]->failed || group[i + 1]->failed) continue;
        if (group[i]->last_selection.instance_ids.empty()) continue;
        oi.push_back(overlap_index(group[i]->last_selection,
                                   group[i + 1]->last_selection));
      }
    }
    a["seeds"] = static_cast<int>(group.size());
    a["failed"] = failed;
    auto put = [&](const char* name, const std::vector<double>& v) {
      if (v.empty()) {
        a[std::string(name) + "_mean"] = nullptr;
        a[std::string(name) + "_std"] = nullptr;
      } else {
        a[std::string(name) + "_mean"] = mean_of(v);
        a[std::string(name) + "_std"] = stddev_of(v);
      }
    };
    put("test_err", err);
    put("rel_test_err", rel);
    put("speedup", spd);
    put("oi", oi);
    put("noi", noi);
    aggregates.push_back(a);
  };

  for (Strategy strat : strategies) {
    if (strat == Strategy::full) {
      std::vector<const CellResult*> group;
      for (const CellResult& c : full_cells) group.push_back(&c);
      aggregate_group(strat, 1.0, group);
      continue;
    }
    for (double budget : budgets) {
      std::vector<const CellResult*> group;
      for (const CellResult& c : cells) {
        if (c.strategy == strat && c.budget == budget) group.push_back(&c);
      }
      aggregate_group(strat, budget, group);
    }
  }

  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const CellResult& c : cells) {
    nlohmann::ordered_json r;
    r["strategy"] = to_string(c.strategy);
    r["budget"] = c.budget;
    r["seed"] = c.seed;
    r["failed"] = c.failed;
    if (c.failed) {
      r["error"] = c.error;
    } else {
      r["test_err"] = c.test_err;
      r["rel_test_err"] = opt_json(c.rel_test_err);
      r["speedup"] = opt_json(c.speedup_v);
      r["oi"] = opt_json(c.oi);
      r["noi"] = opt_json(c.noi);
    }
    runs.push_back(r);
  }

  nlohmann::ordered_json out;
  out["runs"] = runs;
  out["aggregates"] = aggregates;

  ensure_dir(cfg.output_dir);
  const std::filesystem::path dir(cfg.output_dir);
  {
    std::ofstream jf(dir / "comparison.json");
    if (!jf) throw IoError("cannot write comparison.json");
    jf << out.dump(2) << '\n';
  }
  {
    std::ofstream cf(dir / "comparison.csv");
    if (!cf) throw IoError("cannot write comparison.csv");
    cf << "strategy,budget,seed,failed,test_err,rel_test_err,speedup,oi,noi\n";
    auto field = [&](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    for (const CellResult& c : cells) {
      cf << to_string(c.strategy) << ',' << format_double(c.budget) << ','
         << c.seed << ',' << (c.failed ? 1 : 0) << ',';
      if (c.failed) {
        cf << ",,,,\n";
      } else {
        cf << format_double(c.test_err) << ',' << field(c.rel_test_err) << ','
           << field(c.speedup_v) << ',' << field(c.oi) << ',' << field(c.noi)
           << '\n';
      }
    }
  }
  return out;
}

BoundReport run_verify_bound(const RunConfig& cfg, int trials,
                             const std::vector<int>& partition_counts) {
  if (trials <= 0) throw ConfigError("trials must be positive");
  if (partition_counts.empty()) {
    throw ConfigError("need at least one partition count");
  }
  for (int d : partition_counts) {
    if (d < 1) throw ConfigError("partition counts must be >= 1");
  }

  const LoadedData data = load_data(cfg.data);

  BoundReport rep;
  rep.trials = trials;
  rep.min_margin = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t tseed = derive_seed(cfg.train.seed, kTrialStream, trial);
    const int d = partition_counts[trial % partition_counts.size()];
    if (d > data.train.size()) {
      throw ConfigError("partition count exceeds training set size");
    }
    TrainConfig tc = cfg.train;
    tc.partitions = d;
    tc.seed = tseed;
    Rng rng(derive_seed(tseed, kTrialBudgetStream));
    tc.budget_fraction = 0.1 + 0.4 * rng.uniform();

    const ModelParams params =
        init_params(cfg.model.kind, data.train.dim, cfg.model.hidden_dim,
                    data.train.num_classes, derive_seed(tseed, kTrialInitStream));
    const Partitioning part =
        partition(data.train, d, PartitionStrategy::shuffled,
                  derive_seed(tseed, kTrialPartitionStream));

    RoundGradients grads;
    select_round(params, data.train, part, tc.val_flag ? &data.val : nullptr,
                 tc, trial, &grads);
    const double margin = round_bound_margin(grads, tc.lambda);
    sum += margin;
    rep.min_margin = std::min(rep.min_margin, margin);
    if (margin < -1e-9) {
      if (rep.violations == 0) rep.first_violation_seed = tseed;
      ++rep.violations;
    }
  }
  rep.mean_margin = sum / trials;
  return rep;
}

}  // namespace pgm
