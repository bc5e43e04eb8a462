#pragma once

#include <stdexcept>
#include <string>

namespace txl {

// Shape/dimension mismatch between tensors handed to an op.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// A softmax row with no unmasked entry, or a loss with no active position.
struct MaskError : std::runtime_error {
  explicit MaskError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration values (dims, fractions, CLI/config file contents).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Token id outside the vocabulary.
struct VocabError : std::runtime_error {
  explicit VocabError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf produced by a forward op, or a non-finite loss.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// File I/O and serialization failures.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace txl
