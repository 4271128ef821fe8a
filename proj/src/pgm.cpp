#include "pgm/pgm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "pgm/errors.hpp"
#include "pgm/rng.hpp"

namespace pgm {

namespace {

constexpr std::uint64_t kBatchStream = 0x31;
constexpr std::uint64_t kInitStream = 0x32;
constexpr std::uint64_t kRunPartitionStream = 0x33;
constexpr std::uint64_t kBaselineStream = 0x34;
constexpr std::uint64_t kEpochStream = 0x35;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Static partition->worker map plus an ordered merge keeps results identical
// for every worker count.
void run_jobs(int count, int workers, const std::function<void(int)>& job) {
  const int g = std::max(1, std::min(workers, count));
  if (g == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::vector<std::exception_ptr> errors(g);
  std::vector<std::thread> threads;
  threads.reserve(g);
  for (int t = 0; t < g; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (int i = t; i < count; i += g) job(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<int> iota_ids(int n) {
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
  if (name == "full") return Strategy::full;
  if (name == "pgm") return Strategy::pgm;
  if (name == "random") return Strategy::random;
  if (name == "large_only") return Strategy::large_only;
  if (name == "large_small") return Strategy::large_small;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::full: return "full";
    case Strategy::pgm: return "pgm";
    case Strategy::random: return "random";
    case Strategy::large_only: return "large_only";
    case Strategy::large_small: return "large_small";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (total_epochs < 1) throw std::invalid_argument("total_epochs must be >= 1");
  if (selection_interval < 1 || selection_interval > total_epochs) {
    throw std::invalid_argument("selection_interval must be in [1, total_epochs]");
  }
  if (warm_start_epochs < 0 || warm_start_epochs >= total_epochs) {
    throw std::invalid_argument("warm_start_epochs must be in [0, total_epochs)");
  }
  if (partitions < 1) throw std::invalid_argument("partitions must be >= 1");
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) {
    throw std::invalid_argument("budget_fraction must be in (0, 1]");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (!(anneal_factor > 0.0 && anneal_factor < 1.0)) {
    throw std::invalid_argument("anneal_factor must be in (0, 1)");
  }
  if (!(anneal_threshold >= 0.0)) {
    throw std::invalid_argument("anneal_threshold must be >= 0");
  }
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

BatchList make_batches(std::span<const int> member_ids, int batch_size,
                       std::uint64_t seed) {
  if (member_ids.empty()) {
    throw std::invalid_argument("cannot batch an empty partition");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<int> ids(member_ids.begin(), member_ids.end());
  Rng rng(seed);
  rng.shuffle(ids);
  BatchList batches;
  for (std::size_t ofs = 0; ofs < ids.size(); ofs += batch_size) {
    const std::size_t end = std::min(ids.size(), ofs + batch_size);
    batches.emplace_back(ids.begin() + ofs, ids.begin() + end);
  }
  return batches;
}

std::vector<BatchList> frozen_batches(const Partitioning& part, int batch_size,
                                      std::uint64_t run_seed) {
  const auto members = part.members();
  std::vector<BatchList> out(part.num_partitions);
  for (int p = 0; p < part.num_partitions; ++p) {
    if (members[p].empty()) {
      throw std::runtime_error("partition " + std::to_string(p) + " is empty");
    }
    out[p] = make_batches(members[p], batch_size,
                          derive_seed(run_seed, kBatchStream, p));
  }
  return out;
}

Selection select_round(const ModelParams& params, const Dataset& train,
                       const Partitioning& part, const Dataset* valset,
                       const TrainConfig& config, int round,
                       RoundGradients* out_gradients) {
  config.validate();
  params.validate();
  const int D = part.num_partitions;
  if (static_cast<int>(part.assignment.size()) != train.size()) {
    throw std::invalid_argument("partitioning does not match dataset");
  }

  const auto batches = frozen_batches(part, config.batch_size, config.seed);
  int total_batches = 0;
  for (const auto& bl : batches) total_batches += static_cast<int>(bl.size());

  // Batch budget: round(f * b_n) overall, floored at one batch, split as
  // floor(K/D) per partition with the remainder on the first partitions.
  const long long k_total = std::max<long long>(
      1, std::llround(config.budget_fraction * total_batches));
  const long long base = k_total / D;
  const long long rem = k_total % D;

  GradVec val_target;
  if (config.val_flag) {
    if (valset == nullptr || valset->size() == 0) {
      throw std::invalid_argument("val_flag requires a nonempty validation set");
    }
    val_target = last_layer_grad(params, *valset, iota_ids(valset->size()));
  }

  std::vector<GMResult> results(D);
  std::vector<std::vector<GradVec>> cands(D);
  std::vector<GradVec> targets(D);
  auto job = [&](int p) {
    const BatchList& bl = batches[p];
    std::vector<GradVec> grads;
    grads.reserve(bl.size());
    for (const auto& batch : bl) {
      grads.push_back(last_layer_grad(params, train, batch));
    }
    GradVec target;
    if (config.val_flag) {
      target = val_target;
    } else {
      target = GradVec::Zero(grads.front().size());
      for (const GradVec& g : grads) target += g;
      target /= static_cast<double>(grads.size());
    }
    GMProblem problem;
    problem.target = std::move(target);
    problem.candidates = std::move(grads);
    problem.budget = static_cast<int>(std::min<long long>(
        static_cast<long long>(bl.size()), base + (p < rem ? 1 : 0)));
    problem.lambda = config.lambda;
    problem.epsilon = config.epsilon;
    results[p] = gradient_match(problem);
    cands[p] = std::move(problem.candidates);
    targets[p] = std::move(problem.target);
  };
  run_jobs(D, config.workers, job);

  Selection sel;
  sel.round = round;
  for (int p = 0; p < D; ++p) {
    const GMResult& r = results[p];
    sel.per_partition_objectives.push_back(r.objective);
    for (std::size_t i = 0; i < r.selected.size(); ++i) {
      const int b = r.selected[i];
      const double w = r.weights[i];
      sel.batch_ids.emplace_back(p, b);
      for (int id : batches[p][b]) {
        sel.instance_ids.push_back(id);
        sel.instance_weights.push_back(w);
      }
    }
  }

  if (out_gradients != nullptr) {
    RoundGradients& rg = *out_gradients;
    rg.candidates.clear();
    rg.partition_offsets.assign(1, 0);
    for (int p = 0; p < D; ++p) {
      for (GradVec& g : cands[p]) rg.candidates.push_back(std::move(g));
      rg.partition_offsets.push_back(static_cast<int>(rg.candidates.size()));
    }
    rg.partition_targets = std::move(targets);
    rg.gm_results = std::move(results);
  }
  return sel;
}

double round_bound_margin(const RoundGradients& grads, double lambda) {
  const int D = static_cast<int>(grads.partition_targets.size());
  if (D < 1) throw std::invalid_argument("round has no partitions");
  GradVec pooled = GradVec::Zero(grads.partition_targets.front().size());
  for (const GradVec& t : grads.partition_targets) pooled += t;
  pooled /= static_cast<double>(D);

  std::vector<double> objectives;
  std::vector<int> ids;
  std::vector<double> weights;
  for (int p = 0; p < D; ++p) {
    const GMResult& r = grads.gm_results[p];
    objectives.push_back(r.objective);
    for (std::size_t i = 0; i < r.selected.size(); ++i) {
      ids.push_back(grads.partition_offsets[p] + r.selected[i]);
      weights.push_back(r.weights[i]);
    }
  }
  return verify_partition_bound(objectives, ids, weights, pooled,
                                grads.candidates, D, lambda);
}

Partitioning run_partitioning(const Dataset& train, const TrainConfig& config) {
  return partition(train, config.partitions, PartitionStrategy::shuffled,
                   derive_seed(config.seed, kRunPartitionStream));
}

Selection baseline_select(const Dataset& ds, double budget_fraction,
                          Strategy strategy, std::uint64_t seed) {
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) {
    throw std::invalid_argument("budget_fraction must be in (0, 1]");
  }
  const int n = ds.size();
  const int k = static_cast<int>(
      std::max<long long>(1, std::llround(budget_fraction * n)));

  std::vector<int> chosen;
  switch (strategy) {
    case Strategy::random: {
      std::vector<int> ids = iota_ids(n);
      Rng rng(derive_seed(seed, kBaselineStream));
      for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.below(n - i));
        std::swap(ids[i], ids[j]);
      }
      chosen.assign(ids.begin(), ids.begin() + k);
      break;
    }
    case Strategy::large_only: {
      std::vector<int> ids = iota_ids(n);
      std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double ca = ds.examples[a].cost, cb = ds.examples[b].cost;
        return ca != cb ? ca > cb : a < b;
      });
      chosen.assign(ids.begin(), ids.begin() + k);
      break;
    }
    case Strategy::large_small: {
      std::vector<int> ids = iota_ids(n);
      std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double ca = ds.examples[a].cost, cb = ds.examples[b].cost;
        return ca != cb ? ca < cb : a < b;
      });
      const int k_small = static_cast<int>(budget_fraction * n / 2.0);
      const int k_large = k - k_small;
      chosen.assign(ids.begin(), ids.begin() + k_small);
      chosen.insert(chosen.end(), ids.end() - k_large, ids.end());
      break;
    }
    case Strategy::full: {
      chosen = iota_ids(n);
      break;
    }
    case Strategy::pgm:
      throw std::invalid_argument("pgm is not a baseline strategy");
  }
  std::sort(chosen.begin(), chosen.end());

  Selection sel;
  sel.instance_ids = std::move(chosen);
  sel.instance_weights.assign(sel.instance_ids.size(), 1.0);
  return sel;
}

RunResult run_training(const Dataset& train, const Dataset& val,
                       const Dataset& test, const ModelSpec& model,
                       const TrainConfig& config) {
  config.validate();
  if (train.size() == 0 || val.size() == 0 || test.size() == 0) {
    throw std::invalid_argument("all three datasets must be nonempty");
  }
  if (val.dim != train.dim || test.dim != train.dim ||
      val.num_classes != train.num_classes ||
      test.num_classes != train.num_classes) {
    throw std::invalid_argument("datasets must share dim and num_classes");
  }
  if (config.partitions > train.size()) {
    throw std::invalid_argument("more partitions than training examples");
  }

  const int n = train.size();
  ModelParams params =
      init_params(model.kind, train.dim, model.hidden_dim, train.num_classes,
                  derive_seed(config.seed, kInitStream));
  const Partitioning part = run_partitioning(train, config);

  LrState lr_state;
  lr_state.current_lr = config.learning_rate;
  lr_state.anneal_factor = config.anneal_factor;
  lr_state.anneal_threshold = config.anneal_threshold;

  bool has_noisy = false;
  for (const Example& e : train.examples) has_noisy = has_noisy || e.noisy;

  std::vector<int> subset_ids = iota_ids(n);
  std::vector<double> subset_weights(n, 1.0);

  RunResult out;
  std::vector<double> noi_values;

  auto adopt_selection = [&](const Selection& sel) {
    if (sel.instance_ids.empty()) {
      throw std::runtime_error("selection produced an empty subset");
    }
    subset_ids = sel.instance_ids;
    subset_weights = sel.instance_weights;
    if (config.normalize_weights) {
      double sum = 0.0;
      for (double w : subset_weights) sum += w;
      if (sum > 0.0) {
        const double scale = static_cast<double>(subset_weights.size()) / sum;
        for (double& w : subset_weights) w *= scale;
      }
    }
    if (!out.selections.empty()) {
      out.report.summary.overlap_index_per_round.push_back(
          overlap_index(out.selections.back(), sel));
    }
    if (has_noisy) noi_values.push_back(noise_overlap_index(sel, train));
    out.selections.push_back(sel);
  };

  for (int epoch = 1; epoch <= config.total_epochs; ++epoch) {
    double selection_sec = 0.0;
    if (config.strategy == Strategy::pgm && epoch > config.warm_start_epochs &&
        epoch % config.selection_interval == 0) {
      const auto t0 = std::chrono::steady_clock::now();
      RoundGradients grads;
      Selection sel = select_round(params, train, part,
                                   config.val_flag ? &val : nullptr, config,
                                   epoch, &grads);
      selection_sec = seconds_since(t0);
      out.report.summary.bound_margin_per_round.push_back(
          round_bound_margin(grads, config.lambda));
      adopt_selection(sel);
    } else if (config.strategy != Strategy::pgm &&
               config.strategy != Strategy::full &&
               epoch == config.warm_start_epochs + 1) {
      const auto t0 = std::chrono::steady_clock::now();
      Selection sel = baseline_select(train, config.budget_fraction,
                                      config.strategy, config.seed);
      sel.round = epoch;
      selection_sec = seconds_since(t0);
      adopt_selection(sel);
    }

    const auto t1 = std::chrono::steady_clock::now();
    try {
      params = weighted_epoch(params, train, subset_ids, subset_weights,
                              config.batch_size, lr_state.current_lr,
                              derive_seed(config.seed, kEpochStream, epoch));
    } catch (const DivergenceError& e) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double training_sec = seconds_since(t1);
    const double lr_used = lr_state.current_lr;

    const EvalResult on_train = evaluate(params, train);
    const EvalResult on_val = evaluate(params, val);
    const EvalResult on_test = evaluate(params, test);
    if (!std::isfinite(on_train.mean_nll) || !std::isfinite(on_val.mean_nll) ||
        !std::isfinite(on_test.mean_nll)) {
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
    }
    lr_state = maybe_anneal(lr_state, on_val.mean_nll);

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = on_train.mean_nll;
    row.val_loss = on_val.mean_nll;
    row.test_err = on_test.error_rate;
    row.subset_size = static_cast<int>(subset_ids.size());
    row.selection_sec = selection_sec;
    row.training_sec = training_sec;
    row.lr = lr_used;
    out.report.rows.push_back(row);
  }

  MetricsSummary& s = out.report.summary;
  const EpochRow& last = out.report.rows.back();
  s.final_test_error = last.test_err;
  s.final_train_loss = last.train_loss;
  s.final_val_loss = last.val_loss;
  s.final_subset_size = last.subset_size;
  for (const EpochRow& r : out.report.rows) {
    s.selection_seconds_total += r.selection_sec;
    s.training_seconds_total += r.training_sec;
  }
  if (!noi_values.empty()) {
    double sum = 0.0;
    for (double v : noi_values) sum += v;
    s.noise_overlap_index = sum / noi_values.size();
  }
  out.params = std::move(params);
  return out;
}

}  // namespace pgm
