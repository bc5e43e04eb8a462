#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "txl/errors.hpp"

namespace txl {

// One recorded op. Parents are kept only for topological ordering; the
// backprop closure owns everything it needs (parent grad buffers, saved
// intermediates, the output grad buffer).
struct TapeNode {
  const char* op = "";
  std::vector<std::shared_ptr<TapeNode>> parents;
  std::function<void()> backprop;
};

// Dense row-major tensor of doubles with optional gradient tracking.
// Copies are shallow handles: data, grad and tape node are shared.
class Tensor {
 public:
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::shared_ptr<TapeNode> node;  // null for leaves

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  std::int64_t numel() const;
  bool defined() const { return static_cast<bool>(data); }
  bool is_scalar() const { return numel() == 1; }
  bool is_matrix() const { return shape.size() == 2; }

  int rows() const;
  int cols() const;

  double& at(int i) { return (*data)[static_cast<std::size_t>(i)]; }
  double at(int i) const { return (*data)[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return (*data)[static_cast<std::size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return (*data)[static_cast<std::size_t>(i) * cols() + j]; }

  double value() const;  // scalar tensors only

  // Deep copy of values; result is a leaf with no tape.
  Tensor detached_copy() const;

  void ensure_grad();
  void zero_grad();

  std::string shape_str() const;
};

// Runs reverse-mode accumulation from a scalar loss. Every requires_grad
// tensor reachable through the tape receives its gradient; tensors behind a
// stop-gradient boundary receive nothing.
void backward(Tensor& loss);

// Gradient recording switch (thread-local). Ops run under a NoGradGuard
// produce plain values with no tape.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

// Forward-op NaN/Inf detection (thread-local, default on). When enabled,
// ops that can produce non-finite values from finite inputs throw
// NumericError instead of propagating them.
bool finite_checks_enabled();
void set_finite_checks(bool enabled);
void guard_finite(const Tensor& t, const char* op);

int64_t shape_numel(const std::vector<int>& shape);

}  // namespace txl
