#pragma once

#include <stdexcept>
#include <string>

namespace psdl {

// Violated precondition or type invariant (caller bug / bad configuration).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The problem instance itself is unsolvable (e.g. rank-deficient lighting).
struct IllPosedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Noise injection cannot be calibrated for the given stack.
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File system / decoding failures; message carries the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace psdl
