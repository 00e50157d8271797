#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace syneval {

// Error categories map onto CLI exit codes (see pipeline.hpp).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedInputError : ValidationError {
  std::size_t offset;
  MalformedInputError(const std::string& msg, std::size_t at)
      : ValidationError(msg + " (byte offset " + std::to_string(at) + ")"), offset(at) {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BeamExhaustedError : std::runtime_error {
  std::size_t word_index;
  BeamExhaustedError(const std::string& msg, std::size_t word)
      : std::runtime_error(msg), word_index(word) {}
};

struct TransitionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidStateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace syneval
