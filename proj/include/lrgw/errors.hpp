#pragma once

#include <stdexcept>
#include <string>

namespace lrgw {

// Caller handed us something malformed: bad shape, out-of-range parameter,
// violated precondition.
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// File-format or filesystem problem while reading/writing artifacts.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A dense/oracle path refused to run because the problem exceeds its
// memory or size guard.
struct guard_exceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hard numerical failure (non-convergence, degenerate data).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Factorization hit a pivot below the singularity threshold.
struct singular_matrix : numeric_error {
  singular_matrix(const std::string& msg, int pivot)
      : numeric_error(msg + " (pivot index " + std::to_string(pivot) + ")"),
        pivot_index(pivot) {}
  int pivot_index;
};

}  // namespace lrgw
