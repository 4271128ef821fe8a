#include "pgm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pgm/errors.hpp"
#include "pgm/rng.hpp"

namespace pgm {

namespace {

constexpr std::uint64_t kCenterStream = 0x11;
constexpr std::uint64_t kSampleStream = 0x12;
constexpr std::uint64_t kNoiseStream = 0x13;
constexpr std::uint64_t kPartitionStream = 0x14;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double_field(const std::string& s, int line_no, const char* what) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " +
                     std::string(what) + " value '" + s + "'");
  }
  return v;
}

long parse_int_field(const std::string& s, int line_no, const char* what) {
  long v = 0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " +
                     std::string(what) + " value '" + s + "'");
  }
  return v;
}

}  // namespace

bool operator==(const Example& a, const Example& b) {
  return a.label == b.label && a.cost == b.cost && a.noisy == b.noisy &&
         a.features.size() == b.features.size() &&
         (a.features.array() == b.features.array()).all();
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.dim == b.dim && a.num_classes == b.num_classes &&
         a.examples == b.examples;
}

std::vector<std::vector<int>> Partitioning::members() const {
  std::vector<std::vector<int>> out(num_partitions);
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i) {
    out[assignment[i]].push_back(i);
  }
  return out;
}

Dataset generate_synthetic(int n, int dim, int num_classes, double separation,
                           std::uint64_t seed) {
  if (n <= 0 || dim <= 0) throw std::invalid_argument("n and dim must be positive");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (n < num_classes) throw std::invalid_argument("n must be >= num_classes");
  if (!std::isfinite(separation) || separation < 0.0) {
    throw std::invalid_argument("separation must be finite and nonnegative");
  }

  // Unit-direction class centers scaled by `separation`.
  Rng center_rng(derive_seed(seed, kCenterStream));
  std::vector<Eigen::VectorXd> centers(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    Eigen::VectorXd u(dim);
    for (int j = 0; j < dim; ++j) u[j] = center_rng.normal();
    double norm = u.norm();
    if (norm == 0.0) {
      u[0] = 1.0;
      norm = 1.0;
    }
    centers[c] = (separation / norm) * u;
  }

  Rng rng(derive_seed(seed, kSampleStream));
  Dataset ds;
  ds.dim = dim;
  ds.num_classes = num_classes;
  ds.examples.reserve(n);
  for (int i = 0; i < n; ++i) {
    Example e;
    e.label = i % num_classes;
    e.features = centers[e.label];
    for (int j = 0; j < dim; ++j) e.features[j] += rng.normal();
    e.cost = e.features.norm();
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

Dataset inject_noise(const Dataset& ds, double fraction, NoiseMode mode,
                     double sigma, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("noise fraction must be in [0, 1]");
  }
  if (mode == NoiseMode::feature_gauss && !(sigma >= 0.0)) {
    throw std::invalid_argument("noise sigma must be nonnegative");
  }
  Dataset out = ds;
  const int n = ds.size();
  const int n_flag = static_cast<int>(std::llround(fraction * n));
  if (n_flag == 0) return out;

  Rng rng(derive_seed(seed, kNoiseStream));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < n_flag; ++i) {
    const int j = i + static_cast<int>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::sort(idx.begin(), idx.begin() + n_flag);

  for (int k = 0; k < n_flag; ++k) {
    Example& e = out.examples[idx[k]];
    e.noisy = true;
    if (mode == NoiseMode::label_flip) {
      const int draw = static_cast<int>(rng.below(ds.num_classes - 1));
      e.label = draw >= e.label ? draw + 1 : draw;
    } else {
      for (int j = 0; j < ds.dim; ++j) e.features[j] += sigma * rng.normal();
    }
  }
  return out;
}

Partitioning partition(const Dataset& ds, int num_partitions,
                       PartitionStrategy strategy, std::uint64_t seed) {
  const int n = ds.size();
  if (num_partitions < 1 || num_partitions > n) {
    throw std::invalid_argument("partition count must be in [1, dataset size]");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (strategy == PartitionStrategy::shuffled) {
    Rng rng(derive_seed(seed, kPartitionStream));
    rng.shuffle(order);
  }
  Partitioning part;
  part.num_partitions = num_partitions;
  part.assignment.resize(n);
  const int base = n / num_partitions;
  const int rem = n % num_partitions;
  int pos = 0;
  for (int p = 0; p < num_partitions; ++p) {
    const int size = base + (p < rem ? 1 : 0);
    for (int k = 0; k < size; ++k) part.assignment[order[pos++]] = p;
  }
  return part;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (int j = 0; j < ds.dim; ++j) out << 'f' << j << ',';
  out << "label,cost,noisy\n";
  for (const Example& e : ds.examples) {
    for (int j = 0; j < ds.dim; ++j) out << format_double(e.features[j]) << ',';
    out << e.label << ',' << format_double(e.cost) << ',' << (e.noisy ? 1 : 0)
        << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset load_csv(const std::string& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line) || line.empty()) throw ParseError("empty dataset");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_fields(line);
  const int dim = static_cast<int>(header.size()) - 3;
  if (dim < 1) throw ParseError("line 1: header must be f0..f{d-1},label,cost,noisy");
  for (int j = 0; j < dim; ++j) {
    if (header[j] != 'f' + std::to_string(j)) {
      throw ParseError("line 1: expected column 'f" + std::to_string(j) +
                       "', got '" + header[j] + "'");
    }
  }
  if (header[dim] != "label" || header[dim + 1] != "cost" ||
      header[dim + 2] != "noisy") {
    throw ParseError("line 1: trailing columns must be label,cost,noisy");
  }

  Dataset ds;
  ds.dim = dim;
  int max_label = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (static_cast<int>(fields.size()) != dim + 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim + 3) + " fields, got " +
                       std::to_string(fields.size()));
    }
    Example e;
    e.features.resize(dim);
    for (int j = 0; j < dim; ++j) {
      e.features[j] = parse_double_field(fields[j], line_no, "feature");
    }
    const long label = parse_int_field(fields[dim], line_no, "label");
    if (label < 0 || (num_classes > 0 && label >= num_classes)) {
      throw ParseError("line " + std::to_string(line_no) + ": label " +
                       std::to_string(label) + " out of range");
    }
    e.label = static_cast<int>(label);
    e.cost = parse_double_field(fields[dim + 1], line_no, "cost");
    if (!(e.cost >= 0.0)) {
      throw ParseError("line " + std::to_string(line_no) + ": cost must be >= 0");
    }
    const long noisy = parse_int_field(fields[dim + 2], line_no, "noisy");
    if (noisy != 0 && noisy != 1) {
      throw ParseError("line " + std::to_string(line_no) + ": noisy must be 0 or 1");
    }
    e.noisy = noisy == 1;
    max_label = std::max(max_label, e.label);
    ds.examples.push_back(std::move(e));
  }
  if (ds.examples.empty()) throw ParseError("empty dataset");
  ds.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  return ds;
}

}  // namespace pgm
