#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "pgm/dataset.hpp"
#include "pgm/model.hpp"

namespace pgm {

// Newbob-style schedule: multiply the learning rate by anneal_factor
// whenever the relative validation improvement falls below
// anneal_threshold. The first observation only records the baseline.
struct LrState {
  double current_lr = 1.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double anneal_factor = 0.8;
  double anneal_threshold = 0.0025;
};

LrState maybe_anneal(LrState state, double new_val_loss);

struct EvalResult {
  double mean_nll = 0.0;
  double error_rate = 0.0;  // argmax misclassification fraction, ties -> class 0
};

EvalResult evaluate(const ModelParams& params, const Dataset& ds);

// One epoch of weighted mini-batch SGD: shuffle the subset deterministically
// per seed, chunk into size-B batches, and step
//   theta <- theta - lr * grad[(sum_i w_i nll_i) / (sum_i w_i)]
// per batch. A batch whose weights sum to zero contributes no step. Weights
// must be nonnegative and not all zero.
ModelParams weighted_epoch(const ModelParams& params, const Dataset& ds,
                           std::span<const int> instance_ids,
                           std::span<const double> instance_weights,
                           int batch_size, double lr, std::uint64_t seed);

}  // namespace pgm
