#include "txl/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace txl {

namespace {
thread_local bool g_grad_enabled = true;
thread_local bool g_finite_checks = true;
}  // namespace

int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int extent : shape) {
    if (extent < 0) throw ShapeError("negative extent in shape");
    n *= extent;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t;
  const std::int64_t n = shape_numel(shape);
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), 0.0);
  t.requires_grad = requires_grad && g_grad_enabled;
  if (t.requires_grad) t.ensure_grad();
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  const std::int64_t n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("value count does not match shape");
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(std::move(values));
  t.requires_grad = requires_grad && g_grad_enabled;
  if (t.requires_grad) t.ensure_grad();
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

std::int64_t Tensor::numel() const {
  return data ? static_cast<std::int64_t>(data->size()) : 0;
}

int Tensor::rows() const {
  if (!is_matrix()) throw ShapeError("rows(): tensor is not a matrix: " + shape_str());
  return shape[0];
}

int Tensor::cols() const {
  if (!is_matrix()) throw ShapeError("cols(): tensor is not a matrix: " + shape_str());
  return shape[1];
}

double Tensor::value() const {
  if (!is_scalar()) throw ShapeError("value(): tensor is not scalar: " + shape_str());
  return (*data)[0];
}

Tensor Tensor::detached_copy() const {
  Tensor t;
  t.shape = shape;
  t.data = std::make_shared<std::vector<double>>(*data);
  return t;
}

void Tensor::ensure_grad() {
  if (!grad) grad = std::make_shared<std::vector<double>>(data->size(), 0.0);
}

void Tensor::zero_grad() {
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

std::string Tensor::shape_str() const {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void backward(Tensor& loss) {
  if (!loss.is_scalar()) {
    throw ShapeError("backward(): loss must be scalar, got " + loss.shape_str());
  }
  if (!loss.requires_grad) return;
  loss.ensure_grad();
  (*loss.grad)[0] += 1.0;
  if (!loss.node) return;

  // Iterative post-order DFS; nodes come out children-before-parents, so the
  // reversed order visits each node after everything that consumes it.
  std::vector<TapeNode*> order;
  std::unordered_set<TapeNode*> visited;
  std::vector<std::pair<TapeNode*, std::size_t>> stack;
  stack.emplace_back(loss.node.get(), 0);
  visited.insert(loss.node.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TapeNode* parent = node->parents[next++].get();
      if (parent && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop();
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = saved_; }

bool finite_checks_enabled() { return g_finite_checks; }
void set_finite_checks(bool enabled) { g_finite_checks = enabled; }

void guard_finite(const Tensor& t, const char* op) {
  if (!g_finite_checks) return;
  for (double v : *t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": produced non-finite value");
    }
  }
}

}  // namespace txl
