#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgm/dataset.hpp"
#include "pgm/gm.hpp"
#include "pgm/metrics.hpp"
#include "pgm/model.hpp"
#include "pgm/selection.hpp"
#include "pgm/trainer.hpp"

namespace pgm {

using BatchList = std::vector<std::vector<int>>;  // index lists into a dataset

// Deterministic shuffle of the member ids per seed, then consecutive chunks
// of batch_size (last one may be short).
BatchList make_batches(std::span<const int> member_ids, int batch_size,
                       std::uint64_t seed);

// The run's fixed batching: one BatchList per partition, derived only from
// (partitioning, batch_size, run seed) so every selection round sees the same
// batch identities.
std::vector<BatchList> frozen_batches(const Partitioning& part, int batch_size,
                                      std::uint64_t run_seed);

// Everything a selection round computed, kept so the partition bound can be
// evaluated on exactly the quantities gradient matching saw.
struct RoundGradients {
  std::vector<GradVec> candidates;      // all batch gradients, partition-major
  std::vector<int> partition_offsets;   // size D+1, candidate start per partition
  std::vector<GradVec> partition_targets;
  std::vector<GMResult> gm_results;     // one per partition
};

// One adaptive selection round: per partition, match the mean batch gradient
// (or the validation gradient when config.val_flag) with the partition's
// batch gradients as candidates, then merge the partial selections in
// partition-index order. Identical output for any worker count.
Selection select_round(const ModelParams& params, const Dataset& train,
                       const Partitioning& part, const Dataset* valset,
                       const TrainConfig& config, int round,
                       RoundGradients* out_gradients = nullptr);

// Model-independent baselines; all weights 1. random samples uniformly
// without replacement, large_only takes the top costs, large_small takes
// floor(f*N/2) smallest costs plus the rest largest.
Selection baseline_select(const Dataset& ds, double budget_fraction,
                          Strategy strategy, std::uint64_t seed);

// Margin of the partition inequality for one round's gradients.
double round_bound_margin(const RoundGradients& grads, double lambda);

// The shuffled partitioning run_training derives from the run seed; exposed
// so artifact writers can label instances by partition.
Partitioning run_partitioning(const Dataset& train, const TrainConfig& config);

struct ModelSpec {
  ModelKind kind = ModelKind::softmax_linear;
  int hidden_dim = 0;
};

struct RunResult {
  ModelParams params;
  MetricsReport report;
  std::vector<Selection> selections;  // in round order
};

// The full training-with-selection loop: warm start on all data, then per
// strategy either keep training on everything (full), reselect every R
// epochs (pgm), or select once after warm start (baselines). Every epoch
// runs one pass of weighted mini-batch SGD and logs a metrics row.
RunResult run_training(const Dataset& train, const Dataset& val,
                       const Dataset& test, const ModelSpec& model,
                       const TrainConfig& config);

}  // namespace pgm
