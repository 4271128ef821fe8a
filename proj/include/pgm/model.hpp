#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>

#include "pgm/dataset.hpp"

namespace pgm {

// Flattened gradient vector. Layout is fixed so vectors from different calls
// are comparable: row-major weight matrix entries first, then the bias, per
// layer, layers in forward order.
using GradVec = Eigen::VectorXd;

enum class ModelKind { softmax_linear, mlp1 };

// softmax_linear: logits = w2 x + b2.
// mlp1:           logits = w2 tanh(w1 x + b1) + b2.
// w2/b2 are always the final ("last") layer; w1/b1 are empty for the linear
// model.
struct ModelParams {
  ModelKind kind = ModelKind::softmax_linear;
  int input_dim = 0;
  int hidden_dim = 0;  // mlp1 only, 0 otherwise
  int num_classes = 0;
  Eigen::MatrixXd w1;  // hidden_dim x input_dim
  Eigen::VectorXd b1;  // hidden_dim
  Eigen::MatrixXd w2;  // num_classes x (hidden_dim or input_dim)
  Eigen::VectorXd b2;  // num_classes

  int last_layer_dim() const;
  int param_count() const;
  // Shape consistency and finiteness. Throws std::invalid_argument.
  void validate() const;
};

ModelParams make_softmax_linear(int input_dim, int num_classes);
ModelParams make_mlp1(int input_dim, int hidden_dim, int num_classes);

// Zero-mean Gaussian init scaled by 1/sqrt(fan_in), deterministic per seed.
ModelParams init_params(ModelKind kind, int input_dim, int hidden_dim,
                        int num_classes, std::uint64_t seed);

// Full parameter vector in the documented flat order
// ([w1 row-major, b1,] w2 row-major, b2) and its inverse. `like` supplies the
// shapes.
Eigen::VectorXd flatten_params(const ModelParams& params);
ModelParams unflatten_params(const ModelParams& like, const Eigen::VectorXd& flat);

// Mean negative log likelihood of the true classes over the batch,
// log-sum-exp stabilized. Batches are index lists into a dataset.
double nll_loss(const ModelParams& params, const Dataset& ds,
                std::span<const int> batch);

// Weighted mean: (sum_i w_i nll_i) / (sum_i w_i). Weights must be
// nonnegative with a positive sum.
double weighted_nll_loss(const ModelParams& params, const Dataset& ds,
                         std::span<const int> batch,
                         std::span<const double> weights);

// Gradient of nll_loss w.r.t. the final layer only (w2 row-major, then b2);
// earlier layers are treated as frozen feature extractors.
GradVec last_layer_grad(const ModelParams& params, const Dataset& ds,
                        std::span<const int> batch);

// Gradient of nll_loss w.r.t. every parameter, in flatten_params order. The
// trailing last_layer_dim() coordinates are bit-identical to
// last_layer_grad.
GradVec full_grad(const ModelParams& params, const Dataset& ds,
                  std::span<const int> batch);

// Gradient of weighted_nll_loss w.r.t. every parameter.
GradVec weighted_full_grad(const ModelParams& params, const Dataset& ds,
                           std::span<const int> batch,
                           std::span<const double> weights);

}  // namespace pgm
