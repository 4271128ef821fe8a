#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "pgm/dataset.hpp"
#include "pgm/errors.hpp"
#include "pgm/model.hpp"
#include "pgm/rng.hpp"
#include "pgm/trainer.hpp"

using namespace pgm;

namespace {

std::vector<int> all_ids(const Dataset& ds) {
  std::vector<int> ids(ds.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

// Reference epoch: same shuffle stream, plain (unweighted) batch gradients,
// explicit parameter update. Independent of weighted_epoch's internals.
ModelParams reference_epoch(const ModelParams& params, const Dataset& ds,
                            std::vector<int> ids, int batch_size, double lr,
                            std::uint64_t seed) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x21));  // weighted_epoch's shuffle stream
  rng.shuffle(order);
  ModelParams theta = params;
  for (std::size_t ofs = 0; ofs < ids.size(); ofs += batch_size) {
    const std::size_t end = std::min(ids.size(), ofs + std::size_t(batch_size));
    std::vector<int> batch;
    for (std::size_t k = ofs; k < end; ++k) batch.push_back(ids[order[k]]);
    const GradVec g = full_grad(theta, ds, batch);
    theta = unflatten_params(theta, flatten_params(theta) - lr * g);
  }
  return theta;
}

}  // namespace

TEST_CASE("unit weights reproduce plain sgd bit for bit") {
  const Dataset ds = generate_synthetic(64, 6, 3, 2.0, 3);
  const ModelParams p0 = init_params(ModelKind::mlp1, 6, 5, 3, 4);
  const std::vector<int> ids = all_ids(ds);
  const std::vector<double> ones(ids.size(), 1.0);

  ModelParams a = p0, b = p0;
  for (int epoch = 1; epoch <= 3; ++epoch) {
    const std::uint64_t seed = derive_seed(99, 0x1, epoch);
    a = weighted_epoch(a, ds, ids, ones, 16, 0.2, seed);
    b = reference_epoch(b, ds, ids, 16, 0.2, seed);
  }
  CHECK((flatten_params(a).array() == flatten_params(b).array()).all());
}

TEST_CASE("a single instance's weight value does not matter") {
  const Dataset ds = generate_synthetic(8, 4, 2, 1.5, 5);
  const ModelParams p0 = init_params(ModelKind::softmax_linear, 4, 0, 2, 6);
  const std::vector<int> one = {3};
  const ModelParams a =
      weighted_epoch(p0, ds, one, std::vector<double>{1.0}, 4, 0.1, 1);
  const ModelParams b =
      weighted_epoch(p0, ds, one, std::vector<double>{7.5}, 4, 0.1, 1);
  CHECK((flatten_params(a) - flatten_params(b)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-instance weighted step matches the scalar recomputation") {
  const Dataset ds = generate_synthetic(6, 5, 3, 1.0, 7);
  const ModelParams p0 = init_params(ModelKind::mlp1, 5, 4, 3, 8);
  const std::vector<int> ids = {0, 1};
  const std::vector<double> w = {2.0, 1.0};
  const double lr = 0.3;

  // batch_size 2 -> a single batch; only the within-batch order differs
  const ModelParams stepped = weighted_epoch(p0, ds, ids, w, 2, lr, 11);

  Rng rng(derive_seed(11, 0x21));
  std::vector<std::size_t> order = {0, 1};
  rng.shuffle(order);
  std::vector<int> batch = {ids[order[0]], ids[order[1]]};
  std::vector<double> bw = {w[order[0]], w[order[1]]};
  const GradVec expect = weighted_full_grad(p0, ds, batch, bw);

  const Eigen::VectorXd actual_step =
      flatten_params(p0) - flatten_params(stepped);
  CHECK((actual_step - lr * expect).cwiseAbs().maxCoeff() < 1e-12);

  // and the weighted gradient really is grad[(2 nll_0 + nll_1)/3]
  const GradVec g0 = full_grad(p0, ds, std::vector<int>{0});
  const GradVec g1 = full_grad(p0, ds, std::vector<int>{1});
  const GradVec mix = (2.0 * g0 + g1) / 3.0;
  CHECK((weighted_full_grad(p0, ds, ids, w) - mix).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("uniform weight scaling leaves the trajectory unchanged") {
  const Dataset ds = generate_synthetic(48, 5, 3, 2.0, 9);
  const ModelParams p0 = init_params(ModelKind::mlp1, 5, 6, 3, 10);
  const std::vector<int> ids = all_ids(ds);
  Rng rng(12);
  std::vector<double> w(ids.size());
  for (double& x : w) x = 0.2 + rng.uniform();
  std::vector<double> w3 = w;
  for (double& x : w3) x *= 3.0;

  ModelParams a = p0, b = p0;
  for (int epoch = 1; epoch <= 3; ++epoch) {
    const std::uint64_t seed = derive_seed(77, 0x2, epoch);
    a = weighted_epoch(a, ds, ids, w, 16, 0.2, seed);
    b = weighted_epoch(b, ds, ids, w3, 16, 0.2, seed);
  }
  CHECK((flatten_params(a) - flatten_params(b)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("newbob annealing") {
  LrState s;
  s.current_lr = 2.0;
  s.anneal_factor = 0.8;
  s.anneal_threshold = 0.0025;

  // first observation only records the baseline
  s = maybe_anneal(s, 10.0);
  CHECK(s.current_lr == 2.0);
  CHECK(s.best_val_loss == 10.0);

  // 10% improvement: no anneal
  s = maybe_anneal(s, 9.0);
  CHECK(s.current_lr == 2.0);
  CHECK(s.best_val_loss == 9.0);

  // zero improvement: times 0.8
  s = maybe_anneal(s, 9.0);
  CHECK(s.current_lr == 2.0 * 0.8);

  // k stagnant epochs: lr0 * 0.8^k, exactly
  LrState t;
  t.current_lr = 1.7;
  t.anneal_factor = 0.8;
  t.anneal_threshold = 0.0025;
  t = maybe_anneal(t, 5.0);
  double expect = 1.7;
  for (int k = 1; k <= 6; ++k) {
    t = maybe_anneal(t, 5.0);
    expect *= 0.8;
    CHECK(t.current_lr == expect);
  }

  // tiny improvement below the threshold still anneals
  LrState u;
  u.current_lr = 1.0;
  u = maybe_anneal(u, 100.0);
  u = maybe_anneal(u, 99.99);  // 0.01% improvement < 0.25%
  CHECK(u.current_lr == 0.8);

  CHECK_THROWS_AS(maybe_anneal(u, std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
}

TEST_CASE("evaluate counts argmax errors") {
  // perfect predictor by construction: logits peak at the label coordinate
  Dataset ds;
  ds.dim = 3;
  ds.num_classes = 3;
  for (int i = 0; i < 6; ++i) {
    Example e;
    e.features = Eigen::VectorXd::Zero(3);
    e.features[i % 3] = 1.0;
    e.label = i % 3;
    ds.examples.push_back(e);
  }
  ModelParams p = make_softmax_linear(3, 3);
  p.w2 = 5.0 * Eigen::MatrixXd::Identity(3, 3);
  CHECK(evaluate(p, ds).error_rate == 0.0);

  // uniform logits predict class 0 everywhere; balanced data -> 1 - 1/C
  ModelParams zero = make_softmax_linear(3, 3);
  CHECK(evaluate(zero, ds).error_rate == doctest::Approx(2.0 / 3.0));

  // hand-counted fixture: predictions 0,2,1,0,2 vs labels 0,1,1,2,2 -> 2 wrong
  Dataset five;
  five.dim = 3;
  five.num_classes = 3;
  const int preds[5] = {0, 2, 1, 0, 2};
  const int labels[5] = {0, 1, 1, 2, 2};
  for (int i = 0; i < 5; ++i) {
    Example e;
    e.features = Eigen::VectorXd::Zero(3);
    e.features[preds[i]] = 1.0;
    e.label = labels[i];
    five.examples.push_back(e);
  }
  CHECK(evaluate(p, five).error_rate == doctest::Approx(0.4));

  CHECK_THROWS_AS(evaluate(p, Dataset{}), std::invalid_argument);
}

TEST_CASE("weighted_epoch input validation and divergence") {
  const Dataset ds = generate_synthetic(10, 4, 2, 1.0, 13);
  const ModelParams p0 = init_params(ModelKind::softmax_linear, 4, 0, 2, 14);
  const std::vector<int> ids = all_ids(ds);
  const std::vector<double> ones(ids.size(), 1.0);

  CHECK_THROWS_AS(weighted_epoch(p0, ds, std::vector<int>{},
                                 std::vector<double>{}, 4, 0.1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_epoch(p0, ds, ids, std::vector<double>(3, 1.0), 4,
                                 0.1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_epoch(p0, ds, ids,
                                 std::vector<double>(ids.size(), 0.0), 4, 0.1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_epoch(p0, ds, ids, ones, 0, 0.1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_epoch(p0, ds, ids, ones, 4, 0.0, 1),
                  std::invalid_argument);

  ModelParams bad = p0;
  bad.w2(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    weighted_epoch(bad, ds, ids, ones, 4, 0.1, 1);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("zero-weight instances inside a batch are inert") {
  const Dataset ds = generate_synthetic(6, 4, 2, 1.0, 15);
  const ModelParams p0 = init_params(ModelKind::softmax_linear, 4, 0, 2, 16);
  // batch_size 1: each instance is its own batch; zero-weight ones are skipped
  const std::vector<int> ids = {0, 1, 2};
  const std::vector<double> w = {1.0, 0.0, 1.0};
  const ModelParams stepped = weighted_epoch(p0, ds, ids, w, 1, 0.1, 21);
  CHECK(flatten_params(stepped).allFinite());
}
