#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgm/pgm.hpp"
#include "pgm/runconfig.hpp"

namespace pgm {

struct LoadedData {
  Dataset train, val, test;
};

// Loads or generates the three splits; noise goes into the training split
// only.
LoadedData load_data(const DataSpec& spec);

// Noise injection stream tied to the generator seed, shared by gen-data and
// generated configs so both produce the same corrupted split.
std::uint64_t noise_seed(std::uint64_t gen_seed);

// curves.csv, fixed header
// epoch,train_loss,val_loss,test_err,subset_size,selection_sec,training_sec,lr
void write_curves_csv(const MetricsReport& report, const std::string& path);

// selection_round_<t>.csv, header instance_id,weight,partition
void write_selection_csv(const Selection& sel, const Partitioning& part,
                         const std::string& path);
std::string selection_csv_text(const Selection& sel, const Partitioning& part);

nlohmann::ordered_json summary_to_json(const RunConfig& cfg,
                                       const MetricsReport& report);

// Runs one training job and writes metrics.json, curves.csv and one
// selection_round_<t>.csv per selection into cfg.output_dir. Returns the
// summary JSON (also what the CLI prints).
nlohmann::ordered_json run_train_command(const RunConfig& cfg);

// Cross product of strategies x budgets x seeds. A full-training reference is
// run once per seed (whether or not "full" was requested) so relative test
// error and speedup are well defined. Failed cells are recorded, not fatal.
// Writes comparison.json and comparison.csv into cfg.output_dir.
nlohmann::ordered_json run_compare(const RunConfig& cfg,
                                   const std::vector<Strategy>& strategies,
                                   const std::vector<double>& budgets,
                                   int num_seeds);

struct BoundReport {
  int trials = 0;
  double min_margin = 0.0;
  double mean_margin = 0.0;
  int violations = 0;
  std::uint64_t first_violation_seed = 0;
};

// Randomized selection rounds (fresh parameters, batching and budget per
// trial; partition counts cycling through `partition_counts`), each checked
// against the partition bound.
BoundReport run_verify_bound(const RunConfig& cfg, int trials,
                             const std::vector<int>& partition_counts);

}  // namespace pgm
