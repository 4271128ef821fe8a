#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "pgm/pgm.hpp"
#include "pgm/rng.hpp"

using namespace pgm;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.total_epochs = 12;
  c.selection_interval = 4;
  c.warm_start_epochs = 3;
  c.partitions = 3;
  c.budget_fraction = 0.3;
  c.batch_size = 16;
  c.lambda = 0.01;
  c.epsilon = 1e-6;
  c.learning_rate = 0.4;
  c.seed = 42;
  c.workers = 1;
  c.strategy = Strategy::pgm;
  return c;
}

struct Fixture {
  Dataset train, val, test;
  ModelSpec model{ModelKind::softmax_linear, 0};
};

Fixture make_fixture(int n, std::uint64_t seed) {
  const Dataset all = generate_synthetic(n + 200 + 300, 8, 4, 2.5, seed);
  Fixture f;
  f.train.dim = f.val.dim = f.test.dim = all.dim;
  f.train.num_classes = f.val.num_classes = f.test.num_classes = all.num_classes;
  f.train.examples.assign(all.examples.begin(), all.examples.begin() + n);
  f.val.examples.assign(all.examples.begin() + n, all.examples.begin() + n + 200);
  f.test.examples.assign(all.examples.begin() + n + 200, all.examples.end());
  return f;
}

bool same_selection(const Selection& a, const Selection& b) {
  if (a.batch_ids != b.batch_ids) return false;
  if (a.instance_ids != b.instance_ids) return false;
  if (a.instance_weights.size() != b.instance_weights.size()) return false;
  for (std::size_t i = 0; i < a.instance_weights.size(); ++i) {
    if (a.instance_weights[i] != b.instance_weights[i]) return false;
  }
  if (a.per_partition_objectives.size() != b.per_partition_objectives.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.per_partition_objectives.size(); ++i) {
    if (a.per_partition_objectives[i] != b.per_partition_objectives[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("make_batches chunks a deterministic shuffle") {
  std::vector<int> ids(10);
  std::iota(ids.begin(), ids.end(), 100);

  const BatchList b = make_batches(ids, 4, 9);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 4);
  CHECK(b[1].size() == 4);
  CHECK(b[2].size() == 2);

  const BatchList again = make_batches(ids, 4, 9);
  CHECK(b == again);

  const BatchList one = make_batches(ids, 32, 9);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 10);

  std::vector<int> all;
  for (const auto& batch : b) all.insert(all.end(), batch.begin(), batch.end());
  std::sort(all.begin(), all.end());
  CHECK(all == ids);

  CHECK_THROWS_AS(make_batches(std::vector<int>{}, 4, 9), std::invalid_argument);
}

TEST_CASE("single partition reduces to one pooled gradient match") {
  const Fixture f = make_fixture(240, 7);
  TrainConfig cfg = small_config();
  cfg.partitions = 1;
  const ModelParams params =
      init_params(ModelKind::softmax_linear, f.train.dim, 0,
                  f.train.num_classes, 5);
  const Partitioning part = run_partitioning(f.train, cfg);

  RoundGradients grads;
  const Selection sel = select_round(params, f.train, part, nullptr, cfg, 4, &grads);

  // pooled problem built from the same frozen batches
  const auto batches = frozen_batches(part, cfg.batch_size, cfg.seed);
  REQUIRE(batches.size() == 1);
  GMProblem pooled;
  for (const auto& batch : batches[0]) {
    pooled.candidates.push_back(last_layer_grad(params, f.train, batch));
  }
  pooled.target = GradVec::Zero(pooled.candidates.front().size());
  for (const GradVec& g : pooled.candidates) pooled.target += g;
  pooled.target /= static_cast<double>(pooled.candidates.size());
  pooled.budget = static_cast<int>(std::max<long long>(
      1, std::llround(cfg.budget_fraction * pooled.candidates.size())));
  pooled.lambda = cfg.lambda;
  pooled.epsilon = cfg.epsilon;
  const GMResult direct = gradient_match(pooled);

  REQUIRE(sel.per_partition_objectives.size() == 1);
  CHECK(sel.per_partition_objectives[0] == direct.objective);
  REQUIRE(sel.batch_ids.size() == direct.selected.size());
  for (std::size_t i = 0; i < direct.selected.size(); ++i) {
    CHECK(sel.batch_ids[i].first == 0);
    CHECK(sel.batch_ids[i].second == direct.selected[i]);
  }
  // the single-partition bound margin is exactly zero
  CHECK(round_bound_margin(grads, cfg.lambda) == 0.0);
}

TEST_CASE("full budget with zero tolerance selects every batch") {
  const Fixture f = make_fixture(200, 11);
  TrainConfig cfg = small_config();
  cfg.budget_fraction = 1.0;
  cfg.epsilon = 0.0;
  const ModelParams params = init_params(ModelKind::softmax_linear, f.train.dim,
                                         0, f.train.num_classes, 6);
  const Partitioning part = run_partitioning(f.train, cfg);
  const Selection sel = select_round(params, f.train, part, nullptr, cfg, 4);

  const auto batches = frozen_batches(part, cfg.batch_size, cfg.seed);
  std::size_t total = 0;
  for (const auto& bl : batches) total += bl.size();
  CHECK(sel.batch_ids.size() == total);

  std::set<int> covered(sel.instance_ids.begin(), sel.instance_ids.end());
  CHECK(static_cast<int>(covered.size()) == f.train.size());
}

TEST_CASE("selection is identical for any worker count") {
  const Fixture f = make_fixture(300, 13);
  TrainConfig cfg = small_config();
  cfg.partitions = 4;
  const ModelParams params = init_params(ModelKind::mlp1, f.train.dim, 6,
                                         f.train.num_classes, 7);
  ModelSpec mlp{ModelKind::mlp1, 6};

  const Partitioning part = run_partitioning(f.train, cfg);
  Selection first;
  for (int workers : {1, 2, 4}) {
    TrainConfig wc = cfg;
    wc.workers = workers;
    const Selection sel = select_round(params, f.train, part,
                                       nullptr, wc, 4);
    if (workers == 1) {
      first = sel;
    } else {
      CHECK(same_selection(first, sel));
    }
  }

  // and whole runs produce bit-identical parameters
  Eigen::VectorXd ref;
  for (int workers : {1, 2, 4}) {
    TrainConfig wc = cfg;
    wc.workers = workers;
    const RunResult r = run_training(f.train, f.val, f.test, mlp, wc);
    const Eigen::VectorXd flat = flatten_params(r.params);
    if (workers == 1) {
      ref = flat;
    } else {
      CHECK((ref.array() == flat.array()).all());
    }
  }
}

TEST_CASE("selected subset size is monotone in the budget fraction") {
  const Fixture f = make_fixture(260, 17);
  const ModelParams params = init_params(ModelKind::softmax_linear, f.train.dim,
                                         0, f.train.num_classes, 8);
  TrainConfig cfg = small_config();
  cfg.partitions = 3;
  const Partitioning part = run_partitioning(f.train, cfg);
  std::size_t prev = 0;
  for (double fraction : {0.1, 0.2, 0.35, 0.6, 0.8, 1.0}) {
    TrainConfig c = cfg;
    c.budget_fraction = fraction;
    const Selection sel = select_round(params, f.train, part, nullptr, c, 4);
    CHECK(sel.instance_ids.size() >= prev);
    prev = sel.instance_ids.size();
  }
}

TEST_CASE("selection errors") {
  const Fixture f = make_fixture(60, 19);
  TrainConfig cfg = small_config();
  const ModelParams params = init_params(ModelKind::softmax_linear, f.train.dim,
                                         0, f.train.num_classes, 9);

  // hand-built partitioning with an empty partition
  Partitioning bad;
  bad.num_partitions = 2;
  bad.assignment.assign(f.train.size(), 0);
  cfg.partitions = 2;
  CHECK_THROWS_AS(select_round(params, f.train, bad, nullptr, cfg, 4),
                  std::runtime_error);

  // val_flag without a validation set
  TrainConfig vc = small_config();
  vc.val_flag = true;
  const Partitioning part = run_partitioning(f.train, vc);
  CHECK_THROWS_AS(select_round(params, f.train, part, nullptr, vc, 4),
                  std::invalid_argument);
}

TEST_CASE("validation-gradient targets differ from train targets") {
  const Fixture f = make_fixture(200, 23);
  TrainConfig cfg = small_config();
  cfg.val_flag = true;
  const ModelParams params = init_params(ModelKind::softmax_linear, f.train.dim,
                                         0, f.train.num_classes, 10);
  const Partitioning part = run_partitioning(f.train, cfg);
  RoundGradients grads;
  select_round(params, f.train, part, &f.val, cfg, 4, &grads);
  // every partition matches against the same validation gradient
  for (const GradVec& t : grads.partition_targets) {
    CHECK((t.array() == grads.partition_targets.front().array()).all());
  }
  CHECK(round_bound_margin(grads, cfg.lambda) >= -1e-9);
}

TEST_CASE("baseline selectors") {
  Dataset ds = generate_synthetic(10, 3, 2, 1.0, 29);
  for (int i = 0; i < 10; ++i) ds.examples[i].cost = 1.0 + i;  // increasing

  const Selection all = baseline_select(ds, 1.0, Strategy::large_only, 1);
  CHECK(all.instance_ids == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  const Selection top = baseline_select(ds, 0.3, Strategy::large_only, 1);
  CHECK(top.instance_ids == std::vector<int>{7, 8, 9});
  CHECK(top.instance_weights == std::vector<double>(3, 1.0));

  // floor(0.4*10/2) = 2 smallest plus 2 largest
  const Selection mix = baseline_select(ds, 0.4, Strategy::large_small, 1);
  CHECK(mix.instance_ids == std::vector<int>{0, 1, 8, 9});

  const Selection r1 = baseline_select(ds, 0.3, Strategy::random, 31);
  const Selection r2 = baseline_select(ds, 0.3, Strategy::random, 31);
  CHECK(r1.instance_ids == r2.instance_ids);
  CHECK(r1.instance_ids.size() == 3);
  const Selection r3 = baseline_select(ds, 0.3, Strategy::random, 32);
  CHECK(r1.instance_ids != r3.instance_ids);  // overwhelmingly likely

  CHECK_THROWS_AS(baseline_select(ds, 0.0, Strategy::random, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(baseline_select(ds, 0.3, Strategy::pgm, 1),
                  std::invalid_argument);
}

TEST_CASE("full strategy never selects") {
  const Fixture f = make_fixture(150, 37);
  TrainConfig cfg = small_config();
  cfg.strategy = Strategy::full;
  cfg.total_epochs = 6;
  const RunResult r = run_training(f.train, f.val, f.test, f.model, cfg);
  CHECK(r.selections.empty());
  for (const EpochRow& row : r.report.rows) {
    CHECK(row.subset_size == f.train.size());
    CHECK(row.selection_sec == 0.0);
  }
  CHECK(r.report.summary.bound_margin_per_round.empty());
  CHECK(r.report.rows.size() == 6);
}

TEST_CASE("pgm runs reselect on schedule and keep the bound") {
  const Fixture f = make_fixture(300, 41);
  TrainConfig cfg = small_config();  // T=12 R=4 W=3 -> rounds at 4, 8, 12
  const RunResult r = run_training(f.train, f.val, f.test, f.model, cfg);
  REQUIRE(r.selections.size() == 3);
  CHECK(r.selections[0].round == 4);
  CHECK(r.selections[1].round == 8);
  CHECK(r.selections[2].round == 12);
  REQUIRE(r.report.summary.bound_margin_per_round.size() == 3);
  for (double m : r.report.summary.bound_margin_per_round) CHECK(m >= -1e-9);
  CHECK(r.report.summary.overlap_index_per_round.size() == 2);
  for (double oi : r.report.summary.overlap_index_per_round) {
    CHECK(oi >= 0.0);
    CHECK(oi <= 1.0);
  }
  // warm-start epochs train on everything
  CHECK(r.report.rows[0].subset_size == f.train.size());
  CHECK(r.report.rows[2].subset_size == f.train.size());
  // post-selection epochs train on roughly the budgeted fraction
  const int target = static_cast<int>(0.3 * f.train.size());
  CHECK(std::abs(r.report.rows[4].subset_size - target) <=
        2 * cfg.batch_size);
  CHECK_FALSE(r.report.summary.noise_overlap_index.has_value());
}

TEST_CASE("baseline runs select once and keep the subset") {
  const Fixture f = make_fixture(200, 43);
  TrainConfig cfg = small_config();
  cfg.strategy = Strategy::random;
  const RunResult r = run_training(f.train, f.val, f.test, f.model, cfg);
  REQUIRE(r.selections.size() == 1);
  CHECK(r.selections[0].round == cfg.warm_start_epochs + 1);
  const int size_after = r.report.rows[cfg.warm_start_epochs].subset_size;
  for (std::size_t i = cfg.warm_start_epochs; i < r.report.rows.size(); ++i) {
    CHECK(r.report.rows[i].subset_size == size_after);
  }
  CHECK(size_after == static_cast<int>(std::llround(0.3 * f.train.size())));
}

TEST_CASE("whole runs are reproducible") {
  const Fixture f = make_fixture(180, 47);
  TrainConfig cfg = small_config();
  cfg.total_epochs = 8;
  const RunResult a = run_training(f.train, f.val, f.test, f.model, cfg);
  const RunResult b = run_training(f.train, f.val, f.test, f.model, cfg);
  CHECK((flatten_params(a.params).array() == flatten_params(b.params).array()).all());
  REQUIRE(a.report.rows.size() == b.report.rows.size());
  for (std::size_t i = 0; i < a.report.rows.size(); ++i) {
    CHECK(a.report.rows[i].train_loss == b.report.rows[i].train_loss);
    CHECK(a.report.rows[i].test_err == b.report.rows[i].test_err);
    CHECK(a.report.rows[i].lr == b.report.rows[i].lr);
    CHECK(a.report.rows[i].subset_size == b.report.rows[i].subset_size);
  }
}

TEST_CASE("pgm at full budget tracks full training") {
  // frozen after measuring: at f=1.0 the weighted subset covers the full
  // dataset, so the final errors agree within run-to-run noise
  double worst_gap = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Fixture f = make_fixture(240, 100 + seed);
    TrainConfig cfg = small_config();
    cfg.total_epochs = 10;
    cfg.seed = seed;
    cfg.budget_fraction = 1.0;
    cfg.epsilon = 0.0;
    const RunResult pgm_run = run_training(f.train, f.val, f.test, f.model, cfg);
    TrainConfig full = cfg;
    full.strategy = Strategy::full;
    const RunResult full_run = run_training(f.train, f.val, f.test, f.model, full);
    worst_gap = std::max(worst_gap,
                         std::abs(pgm_run.report.summary.final_test_error -
                                  full_run.report.summary.final_test_error));
  }
  CHECK(worst_gap <= 0.03);
}

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  c.total_epochs = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.selection_interval = 20;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.warm_start_epochs = 12;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.budget_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.budget_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.anneal_factor = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_THROWS_AS(strategy_from_string("bogus"), std::invalid_argument);
  CHECK(to_string(strategy_from_string("large_small")) == "large_small");
}
