#include "pgm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "pgm/gm.hpp"

namespace pgm {

double relative_test_error(double err_subset, double err_full) {
  if (!(err_full > 0.0)) {
    throw std::invalid_argument("full-training error must be positive");
  }
  return (err_subset - err_full) / err_full;
}

double speedup(double wall_full_seconds, double wall_subset_seconds) {
  if (!(wall_full_seconds > 0.0) || !(wall_subset_seconds > 0.0)) {
    throw std::invalid_argument("wall-clock times must be positive");
  }
  return wall_full_seconds / wall_subset_seconds;
}

double overlap_index(const Selection& prev, const Selection& cur) {
  if (prev.instance_ids.empty() || cur.instance_ids.empty()) {
    throw std::invalid_argument("selections must be nonempty");
  }
  std::unordered_set<int> prev_ids(prev.instance_ids.begin(),
                                   prev.instance_ids.end());
  std::size_t common = 0;
  for (int id : cur.instance_ids) common += prev_ids.count(id);
  return static_cast<double>(common) / cur.instance_ids.size();
}

double noise_overlap_index(const Selection& sel, const Dataset& ds) {
  long total_noisy = 0;
  for (const Example& e : ds.examples) total_noisy += e.noisy ? 1 : 0;
  if (total_noisy == 0) {
    throw std::invalid_argument("dataset has no noisy examples");
  }
  long selected_noisy = 0;
  for (int id : sel.instance_ids) {
    if (id < 0 || id >= ds.size()) {
      throw std::invalid_argument("selection index out of range");
    }
    selected_noisy += ds.examples[id].noisy ? 1 : 0;
  }
  return static_cast<double>(selected_noisy) / total_noisy;
}

GradientMemoryEstimate estimate_gradient_memory(long long param_count,
                                                int bytes_per_scalar,
                                                long long n_units) {
  if (param_count <= 0 || bytes_per_scalar <= 0 || n_units <= 0) {
    throw std::invalid_argument("memory estimate inputs must be positive");
  }
  GradientMemoryEstimate e;
  e.bytes_per_unit = static_cast<unsigned long long>(param_count) *
                     static_cast<unsigned long long>(bytes_per_scalar);
  e.total_bytes = e.bytes_per_unit * static_cast<unsigned long long>(n_units);
  return e;
}

double verify_partition_bound(std::span<const double> per_partition_objectives,
                              std::span<const int> merged_candidate_ids,
                              std::span<const double> merged_weights,
                              const GradVec& pooled_target,
                              std::span<const GradVec> candidates,
                              int num_partitions, double lambda) {
  if (num_partitions < 1) {
    throw std::invalid_argument("num_partitions must be >= 1");
  }
  if (static_cast<int>(per_partition_objectives.size()) != num_partitions) {
    throw std::invalid_argument("need one objective per partition");
  }
  if (merged_candidate_ids.size() != merged_weights.size()) {
    throw std::invalid_argument("merged ids and weights must align");
  }
  for (int id : merged_candidate_ids) {
    if (id < 0 || id >= static_cast<int>(candidates.size())) {
      throw std::invalid_argument("merged candidate id out of range");
    }
    if (candidates[id].size() != pooled_target.size()) {
      throw std::invalid_argument("candidate dim does not match pooled target");
    }
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");

  double lhs = 0.0;
  for (double v : per_partition_objectives) lhs += v;
  lhs /= num_partitions;

  const double rhs = detail::combo_objective(
      candidates, merged_candidate_ids, merged_weights,
      1.0 / num_partitions, pooled_target, lambda);
  return lhs - rhs;
}

}  // namespace pgm
