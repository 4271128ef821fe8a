#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pgm/dataset.hpp"
#include "pgm/model.hpp"
#include "pgm/selection.hpp"

namespace pgm {

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double test_err = 0.0;
  int subset_size = 0;
  double selection_sec = 0.0;
  double training_sec = 0.0;
  double lr = 0.0;
};

struct MetricsSummary {
  double final_test_error = 0.0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  int final_subset_size = 0;
  double selection_seconds_total = 0.0;
  double training_seconds_total = 0.0;
  std::vector<double> overlap_index_per_round;   // consecutive selection rounds
  std::optional<double> noise_overlap_index;     // mean over rounds; unset if no noisy data
  std::vector<double> bound_margin_per_round;    // pgm runs only
  // Filled when a full-training reference is available (compare command).
  std::optional<double> relative_test_error;
  std::optional<double> speedup;
};

struct MetricsReport {
  std::vector<EpochRow> rows;
  MetricsSummary summary;
};

// (err_subset - err_full) / err_full; err_full must be positive.
double relative_test_error(double err_subset, double err_full);

// wall_full / wall_subset; both must be positive.
double speedup(double wall_full_seconds, double wall_subset_seconds);

// |prev ∩ cur| / |cur| over instance ids; both selections must be nonempty.
double overlap_index(const Selection& prev, const Selection& cur);

// Selected noisy points / all noisy points; the dataset must contain at
// least one noisy example.
double noise_overlap_index(const Selection& sel, const Dataset& ds);

struct GradientMemoryEstimate {
  unsigned long long bytes_per_unit = 0;
  unsigned long long total_bytes = 0;
};

// bytes_per_unit = param_count * bytes_per_scalar; total scales linearly in
// the number of stored units (instances or batches).
GradientMemoryEstimate estimate_gradient_memory(long long param_count,
                                                int bytes_per_scalar,
                                                long long n_units);

// Margin of the partition inequality at one selection round:
//   mean_p E_p  -  [ lambda ||w/D||^2 + || sum_i (w_i/D) g_i - pooled_target || ]
// over the merged selection (global candidate ids + matching weights,
// partition-major order). Nonnegative up to roundoff; exactly zero at D == 1.
double verify_partition_bound(std::span<const double> per_partition_objectives,
                              std::span<const int> merged_candidate_ids,
                              std::span<const double> merged_weights,
                              const GradVec& pooled_target,
                              std::span<const GradVec> candidates,
                              int num_partitions, double lambda);

}  // namespace pgm
