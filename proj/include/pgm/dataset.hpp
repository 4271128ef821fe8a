#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace pgm {

// One labeled instance. `cost` is a size-like scalar (the generator uses the
// feature L2 norm) that the cost-ranked baselines sort on; `noisy` marks
// examples touched by inject_noise.
struct Example {
  Eigen::VectorXd features;
  int label = 0;
  double cost = 0.0;
  bool noisy = false;
};

bool operator==(const Example& a, const Example& b);

struct Dataset {
  std::vector<Example> examples;
  int dim = 0;
  int num_classes = 0;

  int size() const { return static_cast<int>(examples.size()); }
};

bool operator==(const Dataset& a, const Dataset& b);

enum class NoiseMode { label_flip, feature_gauss };

enum class PartitionStrategy { contiguous, shuffled };

// Assignment of every example index to one of `num_partitions` groups whose
// sizes differ by at most one.
struct Partitioning {
  int num_partitions = 1;
  std::vector<int> assignment;  // example index -> partition id

  // Per-partition member index lists, ascending within each partition.
  std::vector<std::vector<int>> members() const;
};

// Gaussian class blobs with unit-norm class centers scaled by `separation`.
// Labels cycle 0..C-1 so classes are balanced to within one example.
Dataset generate_synthetic(int n, int dim, int num_classes, double separation,
                           std::uint64_t seed);

// Marks exactly round(fraction * N) examples noisy. label_flip replaces the
// label with a uniformly random other class; feature_gauss adds N(0, sigma^2)
// per coordinate. Everything else is copied untouched.
Dataset inject_noise(const Dataset& ds, double fraction, NoiseMode mode,
                     double sigma, std::uint64_t seed);

// Balanced split into D partitions (sizes floor(N/D) or ceil(N/D), the first
// N mod D partitions take the extra element). `shuffled` permutes indices
// first, deterministically per seed.
Partitioning partition(const Dataset& ds, int num_partitions,
                       PartitionStrategy strategy, std::uint64_t seed = 0);

// CSV with header f0..f{d-1},label,cost,noisy; reals at 17 significant
// digits so the round trip is lossless.
void save_csv(const Dataset& ds, const std::string& path);

// num_classes == 0 infers max(label)+1; > 0 additionally rejects labels
// outside [0, num_classes) naming the offending line.
Dataset load_csv(const std::string& path, int num_classes = 0);

}  // namespace pgm
