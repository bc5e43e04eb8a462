#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "txl/rng.hpp"
#include "txl/tensor.hpp"

namespace txl::ops {

// Attention visibility mask; 1 = the (query, key) pair may attend.
struct BoolMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> visible;

  static BoolMatrix all_visible(int rows, int cols);
  // Query i may attend key j iff j <= i + mem_len (keys run over
  // [memory | segment], queries over the segment).
  static BoolMatrix causal(int seg_len, int mem_len);

  std::uint8_t at(int i, int j) const {
    return visible[static_cast<std::size_t>(i) * cols + j];
  }
};

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& x, const Tensor& r);  // [m,n] + [n] per row
Tensor broadcast_rows(const Tensor& r, int m);        // [n] -> [m,n]
Tensor relu(const Tensor& x);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);
Tensor masked_softmax(const Tensor& scores, const BoolMatrix& mask);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor dropout(const Tensor& x, double p, Rng& rng);
Tensor sum(const Tensor& x);

// Passes the value through and blocks the gradient. Memory insertion uses
// this; anything upstream of the result receives no gradient.
Tensor stop_gradient(const Tensor& x);

// Sum of negative log-likelihood (nats) over active positions. active may be
// empty (= all positions active). active_count, when given, receives the
// number of active positions.
Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::int32_t> targets,
                         std::span<const std::uint8_t> active, int* active_count = nullptr);
// Mean negative log-likelihood over active positions.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> active);

// Value-only per-position nll (no tape); used by evaluation paths.
std::vector<double> nll_per_position(const Tensor& logits, std::span<const std::int32_t> targets);

}  // namespace txl::ops
