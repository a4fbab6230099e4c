#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace supcon {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A row whose Euclidean norm is below the normalization guard.
struct DegenerateRowError : Error {
  explicit DegenerateRowError(std::size_t row)
      : Error("degenerate row " + std::to_string(row) + ": norm below eps"),
        row(row) {}
  std::size_t row;
};

// An anchor with no same-label row from a different source sample.
struct MissingCrossPositiveError : Error {
  explicit MissingCrossPositiveError(std::size_t anchor)
      : Error("anchor " + std::to_string(anchor) +
              " has no same-label row from a different source"),
        anchor(anchor) {}
  std::size_t anchor;
};

// A class-weight vector entry outside (0, 1].
struct InvalidAlphaError : Error {
  explicit InvalidAlphaError(double alpha)
      : Error("class weight " + std::to_string(alpha) + " outside (0, 1]"),
        alpha(alpha) {}
  double alpha;
};

struct CsvParseError : Error {
  CsvParseError(std::size_t line, const std::string& what)
      : Error("csv line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace supcon
