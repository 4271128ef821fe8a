#include "pgm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pgm/rng.hpp"

namespace pgm {

namespace {

void check_batch(const ModelParams& p, const Dataset& ds,
                 std::span<const int> batch) {
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  if (ds.dim != p.input_dim) {
    throw std::invalid_argument("feature dim " + std::to_string(ds.dim) +
                                " does not match model input dim " +
                                std::to_string(p.input_dim));
  }
  for (int i : batch) {
    if (i < 0 || i >= ds.size()) {
      throw std::invalid_argument("batch index " + std::to_string(i) +
                                  " out of range");
    }
    const Example& e = ds.examples[i];
    if (e.features.size() != p.input_dim) {
      throw std::invalid_argument("example " + std::to_string(i) +
                                  " has wrong feature dim");
    }
    if (e.label < 0 || e.label >= p.num_classes) {
      throw std::invalid_argument("example " + std::to_string(i) +
                                  " has label outside [0, num_classes)");
    }
  }
}

void check_weights(std::span<const int> batch, std::span<const double> weights) {
  if (weights.size() != batch.size()) {
    throw std::invalid_argument("weights must align with the batch");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights must be finite and nonnegative");
    }
  }
}

struct GradAccum {
  Eigen::MatrixXd dw1, dw2;
  Eigen::VectorXd db1, db2;
  bool full = false;
};

// Weighted-mean loss over the batch, optionally accumulating the matching
// gradient. weights == nullptr means unit weights; the arithmetic is then
// identical to the unweighted mean (w * x with w == 1.0 is exact).
double accumulate(const ModelParams& p, const Dataset& ds,
                  std::span<const int> batch, const double* weights,
                  GradAccum* acc) {
  const bool mlp = p.kind == ModelKind::mlp1;
  Eigen::VectorXd hidden(mlp ? p.hidden_dim : 0);
  Eigen::VectorXd logits(p.num_classes);
  Eigen::VectorXd probs(p.num_classes);
  Eigen::VectorXd dpre(mlp ? p.hidden_dim : 0);

  double loss_sum = 0.0;
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Example& e = ds.examples[batch[k]];
    const double w = weights ? weights[k] : 1.0;
    weight_sum += w;
    if (w == 0.0 && weights) continue;  // zero weight contributes nothing

    if (mlp) {
      hidden.noalias() = p.w1 * e.features;
      hidden += p.b1;
      hidden = hidden.array().tanh();
      logits.noalias() = p.w2 * hidden;
    } else {
      logits.noalias() = p.w2 * e.features;
    }
    logits += p.b2;

    const double zmax = logits.maxCoeff();
    probs = (logits.array() - zmax).exp();
    const double zsum = probs.sum();
    loss_sum += w * ((zmax - logits[e.label]) + std::log(zsum));

    if (acc) {
      probs /= zsum;           // softmax
      probs[e.label] -= 1.0;   // dL/dlogits
      const Eigen::VectorXd& input = mlp ? hidden : e.features;
      acc->dw2.noalias() += (w * probs) * input.transpose();
      acc->db2 += w * probs;
      if (acc->full && mlp) {
        dpre.noalias() = p.w2.transpose() * probs;
        dpre.array() *= 1.0 - hidden.array().square();
        acc->dw1.noalias() += (w * dpre) * e.features.transpose();
        acc->db1 += w * dpre;
      }
    }
  }
  if (!(weight_sum > 0.0)) {
    throw std::invalid_argument("batch weights must not sum to zero");
  }
  if (acc) {
    acc->dw2 /= weight_sum;
    acc->db2 /= weight_sum;
    if (acc->full && mlp) {
      acc->dw1 /= weight_sum;
      acc->db1 /= weight_sum;
    }
  }
  return loss_sum / weight_sum;
}

int flatten_block(const Eigen::MatrixXd& m, const Eigen::VectorXd& v,
                  Eigen::VectorXd& out, int at) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out[at++] = m(r, c);
  }
  for (int i = 0; i < v.size(); ++i) out[at++] = v[i];
  return at;
}

int unflatten_block(const Eigen::VectorXd& in, int at, Eigen::MatrixXd& m,
                    Eigen::VectorXd& v) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = in[at++];
  }
  for (int i = 0; i < v.size(); ++i) v[i] = in[at++];
  return at;
}

}  // namespace

int ModelParams::last_layer_dim() const {
  return static_cast<int>(w2.rows() * w2.cols() + b2.size());
}

int ModelParams::param_count() const {
  int n = last_layer_dim();
  if (kind == ModelKind::mlp1) {
    n += static_cast<int>(w1.rows() * w1.cols() + b1.size());
  }
  return n;
}

void ModelParams::validate() const {
  if (input_dim <= 0 || num_classes <= 0) {
    throw std::invalid_argument("input_dim and num_classes must be positive");
  }
  const int in2 = kind == ModelKind::mlp1 ? hidden_dim : input_dim;
  if (kind == ModelKind::mlp1) {
    if (hidden_dim <= 0) throw std::invalid_argument("mlp1 needs hidden_dim > 0");
    if (w1.rows() != hidden_dim || w1.cols() != input_dim || b1.size() != hidden_dim) {
      throw std::invalid_argument("w1/b1 shape mismatch");
    }
    if (!w1.allFinite() || !b1.allFinite()) {
      throw std::invalid_argument("parameters must be finite");
    }
  }
  if (w2.rows() != num_classes || w2.cols() != in2 || b2.size() != num_classes) {
    throw std::invalid_argument("w2/b2 shape mismatch");
  }
  if (!w2.allFinite() || !b2.allFinite()) {
    throw std::invalid_argument("parameters must be finite");
  }
}

ModelParams make_softmax_linear(int input_dim, int num_classes) {
  ModelParams p;
  p.kind = ModelKind::softmax_linear;
  p.input_dim = input_dim;
  p.num_classes = num_classes;
  p.w2 = Eigen::MatrixXd::Zero(num_classes, input_dim);
  p.b2 = Eigen::VectorXd::Zero(num_classes);
  p.validate();
  return p;
}

ModelParams make_mlp1(int input_dim, int hidden_dim, int num_classes) {
  ModelParams p;
  p.kind = ModelKind::mlp1;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.num_classes = num_classes;
  p.w1 = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
  p.b1 = Eigen::VectorXd::Zero(hidden_dim);
  p.w2 = Eigen::MatrixXd::Zero(num_classes, hidden_dim);
  p.b2 = Eigen::VectorXd::Zero(num_classes);
  p.validate();
  return p;
}

ModelParams init_params(ModelKind kind, int input_dim, int hidden_dim,
                        int num_classes, std::uint64_t seed) {
  ModelParams p = kind == ModelKind::mlp1
                      ? make_mlp1(input_dim, hidden_dim, num_classes)
                      : make_softmax_linear(input_dim, num_classes);
  Rng rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& m) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
    }
  };
  if (kind == ModelKind::mlp1) fill(p.w1);
  fill(p.w2);
  return p;  // biases stay zero
}

Eigen::VectorXd flatten_params(const ModelParams& params) {
  Eigen::VectorXd out(params.param_count());
  int at = 0;
  if (params.kind == ModelKind::mlp1) {
    at = flatten_block(params.w1, params.b1, out, at);
  }
  flatten_block(params.w2, params.b2, out, at);
  return out;
}

ModelParams unflatten_params(const ModelParams& like, const Eigen::VectorXd& flat) {
  if (flat.size() != like.param_count()) {
    throw std::invalid_argument("flat vector has wrong length");
  }
  ModelParams p = like;
  int at = 0;
  if (p.kind == ModelKind::mlp1) at = unflatten_block(flat, at, p.w1, p.b1);
  unflatten_block(flat, at, p.w2, p.b2);
  return p;
}

double nll_loss(const ModelParams& params, const Dataset& ds,
                std::span<const int> batch) {
  check_batch(params, ds, batch);
  return accumulate(params, ds, batch, nullptr, nullptr);
}

double weighted_nll_loss(const ModelParams& params, const Dataset& ds,
                         std::span<const int> batch,
                         std::span<const double> weights) {
  check_batch(params, ds, batch);
  check_weights(batch, weights);
  return accumulate(params, ds, batch, weights.data(), nullptr);
}

GradVec last_layer_grad(const ModelParams& params, const Dataset& ds,
                        std::span<const int> batch) {
  check_batch(params, ds, batch);
  GradAccum acc;
  acc.dw2 = Eigen::MatrixXd::Zero(params.w2.rows(), params.w2.cols());
  acc.db2 = Eigen::VectorXd::Zero(params.b2.size());
  accumulate(params, ds, batch, nullptr, &acc);
  GradVec out(params.last_layer_dim());
  flatten_block(acc.dw2, acc.db2, out, 0);
  return out;
}

namespace {

GradVec full_grad_impl(const ModelParams& params, const Dataset& ds,
                       std::span<const int> batch, const double* weights) {
  GradAccum acc;
  acc.full = true;
  acc.dw2 = Eigen::MatrixXd::Zero(params.w2.rows(), params.w2.cols());
  acc.db2 = Eigen::VectorXd::Zero(params.b2.size());
  if (params.kind == ModelKind::mlp1) {
    acc.dw1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
    acc.db1 = Eigen::VectorXd::Zero(params.b1.size());
  }
  accumulate(params, ds, batch, weights, &acc);
  GradVec out(params.param_count());
  int at = 0;
  if (params.kind == ModelKind::mlp1) at = flatten_block(acc.dw1, acc.db1, out, at);
  flatten_block(acc.dw2, acc.db2, out, at);
  return out;
}

}  // namespace

GradVec full_grad(const ModelParams& params, const Dataset& ds,
                  std::span<const int> batch) {
  check_batch(params, ds, batch);
  return full_grad_impl(params, ds, batch, nullptr);
}

GradVec weighted_full_grad(const ModelParams& params, const Dataset& ds,
                           std::span<const int> batch,
                           std::span<const double> weights) {
  check_batch(params, ds, batch);
  check_weights(batch, weights);
  return full_grad_impl(params, ds, batch, weights.data());
}

}  // namespace pgm
