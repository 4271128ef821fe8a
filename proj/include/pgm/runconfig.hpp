#pragma once

#include <cstdint>
#include <string>

#include "pgm/dataset.hpp"
#include "pgm/pgm.hpp"
#include "pgm/selection.hpp"

namespace pgm {

// Where the run's data comes from: either three CSV paths (plus the class
// count for label validation) or the synthetic generator. Noise, when
// requested, is injected into the training split only.
struct DataSpec {
  // file mode
  std::string train_path, val_path, test_path;
  int classes = 0;
  // generator mode
  bool generate = false;
  int gen_n = 0;
  int gen_dim = 0;
  int gen_classes = 0;
  double gen_separation = 1.0;
  std::uint64_t gen_seed = 0;
  int gen_val_n = 0;
  int gen_test_n = 0;
  // noise (train split only)
  double noise_fraction = 0.0;
  NoiseMode noise_mode = NoiseMode::label_flip;
  double noise_sigma = 1.0;
};

// Parsed key=value run configuration; see the README for the key list.
struct RunConfig {
  ModelSpec model;
  DataSpec data;
  TrainConfig train;
  std::string output_dir;
};

// Flat key=value format, one pair per line, '#' starts a comment. Unknown,
// duplicate, or missing required keys are hard errors (ConfigError).
RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config(const std::string& path);

}  // namespace pgm
