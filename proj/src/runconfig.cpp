#include "pgm/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "pgm/errors.hpp"

namespace pgm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key=value pairs with '#' comments; duplicates are errors.
std::map<std::string, std::string> read_pairs(const std::string& text) {
  std::map<std::string, std::string> pairs;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    if (pairs.count(key)) {
      throw ConfigError("duplicate config key '" + key + "'");
    }
    pairs[key] = value;
  }
  return pairs;
}

class KeyReader {
 public:
  explicit KeyReader(std::map<std::string, std::string> pairs)
      : pairs_(std::move(pairs)) {}

  bool has(const std::string& key) const { return pairs_.count(key) > 0; }

  std::string require(const std::string& key) {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) {
      throw ConfigError("missing required config key '" + key + "'");
    }
    used_.insert(key);
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  long long require_int(const std::string& key) { return to_int(key, require(key)); }
  double require_double(const std::string& key) { return to_double(key, require(key)); }

  long long int_or(const std::string& key, long long fallback) {
    return has(key) ? to_int(key, require(key)) : fallback;
  }
  double double_or(const std::string& key, double fallback) {
    return has(key) ? to_double(key, require(key)) : fallback;
  }
  bool bool_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = require(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config key '" + key + "' must be true or false");
  }

  void finish() const {
    for (const auto& [key, value] : pairs_) {
      if (!used_.count(key)) {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  }

 private:
  long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "' must be an integer, got '" +
                        v + "'");
    }
    return out;
  }
  double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "' must be a number, got '" + v +
                        "'");
    }
    return out;
  }

  std::map<std::string, std::string> pairs_;
  std::set<std::string> used_;
};

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
  KeyReader keys(read_pairs(text));
  RunConfig cfg;

  // model
  const std::string kind = keys.require("model.kind");
  if (kind == "softmax_linear") {
    cfg.model.kind = ModelKind::softmax_linear;
    cfg.model.hidden_dim = 0;
  } else if (kind == "mlp1") {
    cfg.model.kind = ModelKind::mlp1;
    cfg.model.hidden_dim = static_cast<int>(keys.require_int("model.hidden_dim"));
    if (cfg.model.hidden_dim < 1) {
      throw ConfigError("model.hidden_dim must be >= 1");
    }
  } else {
    throw ConfigError("model.kind must be softmax_linear or mlp1");
  }

  // data: file paths or generator, exactly one of the two
  const bool has_files = keys.has("data.train");
  const bool has_gen = keys.has("gen.n");
  if (has_files == has_gen) {
    throw ConfigError(
        "config must provide either data.train/data.val/data.test or a gen.* block");
  }
  if (has_files) {
    cfg.data.generate = false;
    cfg.data.train_path = keys.require("data.train");
    cfg.data.val_path = keys.require("data.val");
    cfg.data.test_path = keys.require("data.test");
    cfg.data.classes = static_cast<int>(keys.require_int("data.classes"));
    if (cfg.data.classes < 2) throw ConfigError("data.classes must be >= 2");
  } else {
    cfg.data.generate = true;
    cfg.data.gen_n = static_cast<int>(keys.require_int("gen.n"));
    cfg.data.gen_dim = static_cast<int>(keys.require_int("gen.dim"));
    cfg.data.gen_classes = static_cast<int>(keys.require_int("gen.classes"));
    cfg.data.gen_separation = keys.require_double("gen.separation");
    cfg.data.gen_seed = static_cast<std::uint64_t>(keys.require_int("gen.seed"));
    cfg.data.gen_val_n = static_cast<int>(keys.require_int("gen.val_n"));
    cfg.data.gen_test_n = static_cast<int>(keys.require_int("gen.test_n"));
    if (cfg.data.gen_classes < 2) throw ConfigError("gen.classes must be >= 2");
    if (cfg.data.gen_n < cfg.data.gen_classes || cfg.data.gen_val_n < 1 ||
        cfg.data.gen_test_n < 1 || cfg.data.gen_dim < 1) {
      throw ConfigError("gen.* sizes out of range");
    }
  }

  // noise (train split only)
  cfg.data.noise_fraction = keys.double_or("noise.fraction", 0.0);
  if (!(cfg.data.noise_fraction >= 0.0 && cfg.data.noise_fraction <= 1.0)) {
    throw ConfigError("noise.fraction must be in [0, 1]");
  }
  if (cfg.data.noise_fraction > 0.0) {
    const std::string mode = keys.require("noise.mode");
    if (mode == "label_flip") {
      cfg.data.noise_mode = NoiseMode::label_flip;
    } else if (mode == "feature_gauss") {
      cfg.data.noise_mode = NoiseMode::feature_gauss;
      cfg.data.noise_sigma = keys.require_double("noise.sigma");
      if (!(cfg.data.noise_sigma >= 0.0)) {
        throw ConfigError("noise.sigma must be >= 0");
      }
    } else {
      throw ConfigError("noise.mode must be label_flip or feature_gauss");
    }
  }

  // training loop
  TrainConfig& t = cfg.train;
  t.total_epochs = static_cast<int>(keys.require_int("epochs"));
  t.selection_interval = static_cast<int>(keys.require_int("selection_interval"));
  t.warm_start_epochs = static_cast<int>(keys.require_int("warm_start"));
  t.partitions = static_cast<int>(keys.require_int("partitions"));
  t.budget_fraction = keys.require_double("budget");
  t.batch_size = static_cast<int>(keys.require_int("batch_size"));
  t.lambda = keys.require_double("lambda");
  t.epsilon = keys.require_double("epsilon");
  t.val_flag = keys.bool_or("val_flag", false);
  t.learning_rate = keys.require_double("learning_rate");
  t.anneal_factor = keys.require_double("anneal_factor");
  t.anneal_threshold = keys.require_double("anneal_threshold");
  t.seed = static_cast<std::uint64_t>(keys.require_int("seed"));
  t.workers = static_cast<int>(keys.int_or("workers", 1));
  t.strategy = strategy_from_string(keys.get_or("strategy", "pgm"));
  t.normalize_weights = keys.bool_or("normalize_weights", false);

  cfg.output_dir = keys.require("output_dir");

  keys.finish();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str());
}

}  // namespace pgm
