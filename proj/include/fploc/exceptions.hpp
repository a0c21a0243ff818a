#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fploc {

// Base for all library errors. `kind()` is a stable machine-readable tag
// used by the CLI for exit-code mapping and --json-errors output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Matrix/tensor dimension mismatches.
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error("shape", w) {}
};

// Invalid domain inputs: asymmetric adjacency, empty dataset, bad labels,
// degenerate geometry.
struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error("validation", w) {}
};

// Bad configuration: unknown keys, out-of-range values, unknown schemes.
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};

// Malformed input files (CSV schema, non-numeric cells, bad containers).
struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error("parse", w) {}
};

// Non-finite values, training divergence.
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error("numeric", w) {}
};

// Filesystem failures.
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

}  // namespace fploc
