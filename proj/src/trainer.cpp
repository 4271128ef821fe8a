#include "pgm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pgm/errors.hpp"
#include "pgm/rng.hpp"

namespace pgm {

namespace {

constexpr std::uint64_t kEpochShuffleStream = 0x21;

}  // namespace

LrState maybe_anneal(LrState state, double new_val_loss) {
  if (!std::isfinite(new_val_loss)) {
    throw std::invalid_argument("validation loss must be finite");
  }
  if (!std::isfinite(state.best_val_loss)) {
    state.best_val_loss = new_val_loss;  // first observation sets the baseline
    return state;
  }
  const double tiny = 1e-12;
  const double improvement = (state.best_val_loss - new_val_loss) /
                             std::max(std::abs(state.best_val_loss), tiny);
  if (improvement < state.anneal_threshold) {
    state.current_lr *= state.anneal_factor;
  }
  state.best_val_loss = std::min(state.best_val_loss, new_val_loss);
  return state;
}

EvalResult evaluate(const ModelParams& params, const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("dataset must be nonempty");
  std::vector<int> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  EvalResult r;
  r.mean_nll = nll_loss(params, ds, all);

  const bool mlp = params.kind == ModelKind::mlp1;
  Eigen::VectorXd hidden(mlp ? params.hidden_dim : 0);
  Eigen::VectorXd logits(params.num_classes);
  int wrong = 0;
  for (const Example& e : ds.examples) {
    if (mlp) {
      hidden.noalias() = params.w1 * e.features;
      hidden += params.b1;
      hidden = hidden.array().tanh();
      logits.noalias() = params.w2 * hidden;
    } else {
      logits.noalias() = params.w2 * e.features;
    }
    logits += params.b2;
    int pred = 0;
    for (int c = 1; c < params.num_classes; ++c) {
      if (logits[c] > logits[pred]) pred = c;  // ties keep the smaller class
    }
    if (pred != e.label) ++wrong;
  }
  r.error_rate = static_cast<double>(wrong) / ds.size();
  return r;
}

ModelParams weighted_epoch(const ModelParams& params, const Dataset& ds,
                           std::span<const int> instance_ids,
                           std::span<const double> instance_weights,
                           int batch_size, double lr, std::uint64_t seed) {
  if (instance_ids.empty()) {
    throw std::invalid_argument("training subset must be nonempty");
  }
  if (instance_ids.size() != instance_weights.size()) {
    throw std::invalid_argument("instance ids and weights must align");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  double total_weight = 0.0;
  for (double w : instance_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("instance weights must be finite and nonnegative");
    }
    total_weight += w;
  }
  if (!(total_weight > 0.0)) {
    throw std::invalid_argument("instance weights must not all be zero");
  }

  const std::size_t n = instance_ids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kEpochShuffleStream));
  rng.shuffle(order);

  ModelParams theta = params;
  std::vector<int> batch;
  std::vector<double> batch_w;
  for (std::size_t ofs = 0; ofs < n; ofs += batch_size) {
    const std::size_t end = std::min(n, ofs + batch_size);
    batch.clear();
    batch_w.clear();
    double wsum = 0.0;
    for (std::size_t k = ofs; k < end; ++k) {
      batch.push_back(instance_ids[order[k]]);
      batch_w.push_back(instance_weights[order[k]]);
      wsum += batch_w.back();
    }
    if (wsum == 0.0) continue;  // all-zero-weight batch carries no signal

    const GradVec grad = weighted_full_grad(theta, ds, batch, batch_w);
    if (!grad.allFinite()) {
      throw DivergenceError("non-finite gradient in batch " +
                            std::to_string(ofs / batch_size));
    }
    theta = unflatten_params(theta, flatten_params(theta) - lr * grad);
  }
  return theta;
}

}  // namespace pgm
