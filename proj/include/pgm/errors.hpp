#pragma once

#include <stdexcept>

namespace pgm {

// Unusable run configuration (bad key, missing key, bad value).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure (cannot open/read/write).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed content in an otherwise readable file; messages carry the line.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or gradient.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pgm
