#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pgm {

enum class Strategy { full, pgm, random, large_only, large_small };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy strategy);

// Every knob of the training-with-selection loop.
struct TrainConfig {
  int total_epochs = 30;        // T
  int selection_interval = 5;   // R, reselect when epoch % R == 0
  int warm_start_epochs = 0;    // W, full-data epochs before any selection
  int partitions = 1;           // D
  double budget_fraction = 0.3; // f in (0, 1]
  int batch_size = 32;          // B
  double lambda = 0.01;         // l2 penalty on matching weights
  double epsilon = 1e-6;        // matching stop tolerance
  bool val_flag = false;        // match the validation gradient instead of the partition's
  double learning_rate = 0.5;
  double anneal_factor = 0.8;
  double anneal_threshold = 0.0025;
  std::uint64_t seed = 0;
  int workers = 1;              // G, selection worker threads
  Strategy strategy = Strategy::pgm;
  bool normalize_weights = false;  // rescale selection weights to sum to the subset size

  void validate() const;  // throws std::invalid_argument
};

// One selection round's outcome. Batches are the selection unit; instances
// inherit the weight of the batch that brought them in.
struct Selection {
  int round = 0;  // epoch index the selection was made at
  std::vector<std::pair<int, int>> batch_ids;  // (partition id, batch index)
  std::vector<int> instance_ids;
  std::vector<double> instance_weights;
  std::vector<double> per_partition_objectives;
};

}  // namespace pgm
