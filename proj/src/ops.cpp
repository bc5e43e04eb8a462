#include "txl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "txl/kernels.hpp"

namespace txl::ops {

namespace {

using kernels::active;

bool tracked(const Tensor& t) { return grad_enabled() && t.requires_grad; }

// Wires the output's tape node. parents supplies topo ordering; the backprop
// closure owns every buffer it touches.
void attach(Tensor& out, const char* op, std::initializer_list<const Tensor*> parents,
            std::function<void()> backprop) {
  out.node = std::make_shared<TapeNode>();
  out.node->op = op;
  for (const Tensor* p : parents) {
    if (p->node) out.node->parents.push_back(p->node);
  }
  out.node->backprop = std::move(backprop);
}

void check_matrix(const Tensor& t, const char* op) {
  if (!t.is_matrix()) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + t.shape_str());
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

}  // namespace

BoolMatrix BoolMatrix::all_visible(int rows, int cols) {
  BoolMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.visible.assign(static_cast<std::size_t>(rows) * cols, 1);
  return m;
}

BoolMatrix BoolMatrix::causal(int seg_len, int mem_len) {
  BoolMatrix m;
  m.rows = seg_len;
  m.cols = mem_len + seg_len;
  m.visible.assign(static_cast<std::size_t>(m.rows) * m.cols, 0);
  for (int i = 0; i < seg_len; ++i) {
    for (int j = 0; j <= i + mem_len; ++j) {
      m.visible[static_cast<std::size_t>(i) * m.cols + j] = 1;
    }
  }
  return m;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + a.shape_str() + " x " + b.shape_str());
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n}, tracked(a) || tracked(b));
  active().gemm_nn(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  guard_finite(out, "matmul");
  if (out.requires_grad) {
    attach(out, "matmul", {&a, &b}, [a, b, dy = out.grad, m, k, n] {
      if (a.requires_grad) active().gemm_nt(dy->data(), b.data->data(), a.grad->data(), m, n, k);
      if (b.requires_grad) active().gemm_tn(a.data->data(), dy->data(), b.grad->data(), k, m, n);
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul_nt");
  check_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions disagree " + a.shape_str() + " x " + b.shape_str() + "^T");
  }
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out = Tensor::zeros({m, n}, tracked(a) || tracked(b));
  active().gemm_nt(a.data->data(), b.data->data(), out.data->data(), m, k, n);
  guard_finite(out, "matmul_nt");
  if (out.requires_grad) {
    attach(out, "matmul_nt", {&a, &b}, [a, b, dy = out.grad, m, k, n] {
      if (a.requires_grad) active().gemm_nn(dy->data(), b.data->data(), a.grad->data(), m, n, k);
      if (b.requires_grad) active().gemm_tn(dy->data(), a.data->data(), b.grad->data(), n, m, k);
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape, tracked(a) || tracked(b));
  active().add(a.data->data(), b.data->data(), out.data->data(), out.data->size());
  if (out.requires_grad) {
    attach(out, "add", {&a, &b}, [a, b, dy = out.grad] {
      if (a.requires_grad) active().axpy(1.0, dy->data(), a.grad->data(), dy->size());
      if (b.requires_grad) active().axpy(1.0, dy->data(), b.grad->data(), dy->size());
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape, tracked(a) || tracked(b));
  for (std::size_t i = 0; i < out.data->size(); ++i) {
    (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
  }
  if (out.requires_grad) {
    attach(out, "sub", {&a, &b}, [a, b, dy = out.grad] {
      if (a.requires_grad) active().axpy(1.0, dy->data(), a.grad->data(), dy->size());
      if (b.requires_grad) active().axpy(-1.0, dy->data(), b.grad->data(), dy->size());
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape, tracked(a) || tracked(b));
  active().mul(a.data->data(), b.data->data(), out.data->data(), out.data->size());
  guard_finite(out, "mul");
  if (out.requires_grad) {
    attach(out, "mul", {&a, &b}, [a, b, dy = out.grad] {
      const std::size_t n = dy->size();
      if (a.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) (*a.grad)[i] += (*dy)[i] * (*b.data)[i];
      }
      if (b.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) (*b.grad)[i] += (*dy)[i] * (*a.data)[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape, tracked(a));
  active().scale(s, a.data->data(), out.data->data(), out.data->size());
  guard_finite(out, "scale");
  if (out.requires_grad) {
    attach(out, "scale", {&a}, [a, s, dy = out.grad] {
      active().axpy(s, dy->data(), a.grad->data(), dy->size());
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& r) {
  check_matrix(x, "add_rowvec");
  const int m = x.rows(), n = x.cols();
  if (r.numel() != n) {
    throw ShapeError("add_rowvec: row vector length " + r.shape_str() + " vs cols " + std::to_string(n));
  }
  Tensor out = Tensor::zeros(x.shape, tracked(x) || tracked(r));
  for (int i = 0; i < m; ++i) {
    active().add(x.data->data() + static_cast<std::size_t>(i) * n, r.data->data(),
                 out.data->data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n));
  }
  if (out.requires_grad) {
    attach(out, "add_rowvec", {&x, &r}, [x, r, dy = out.grad, m, n] {
      if (x.requires_grad) active().axpy(1.0, dy->data(), x.grad->data(), dy->size());
      if (r.requires_grad) {
        for (int i = 0; i < m; ++i) {
          active().axpy(1.0, dy->data() + static_cast<std::size_t>(i) * n, r.grad->data(),
                        static_cast<std::size_t>(n));
        }
      }
    });
  }
  return out;
}

Tensor broadcast_rows(const Tensor& r, int m) {
  const int n = static_cast<int>(r.numel());
  Tensor out = Tensor::zeros({m, n}, tracked(r));
  for (int i = 0; i < m; ++i) {
    std::copy(r.data->begin(), r.data->end(), out.data->begin() + static_cast<std::size_t>(i) * n);
  }
  if (out.requires_grad) {
    attach(out, "broadcast_rows", {&r}, [r, dy = out.grad, m, n] {
      for (int i = 0; i < m; ++i) {
        active().axpy(1.0, dy->data() + static_cast<std::size_t>(i) * n, r.grad->data(),
                      static_cast<std::size_t>(n));
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape, tracked(x));
  active().relu(x.data->data(), out.data->data(), out.data->size());
  if (out.requires_grad) {
    attach(out, "relu", {&x}, [x, dy = out.grad] {
      active().relu_grad(x.data->data(), dy->data(), x.grad->data(), dy->size());
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: element count mismatch " + x.shape_str());
  }
  Tensor out = Tensor::zeros(std::move(shape), tracked(x));
  std::copy(x.data->begin(), x.data->end(), out.data->begin());
  if (out.requires_grad) {
    attach(out, "reshape", {&x}, [x, dy = out.grad] {
      active().axpy(1.0, dy->data(), x.grad->data(), dy->size());
    });
  }
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.numel() == 0) {
    Tensor out = b;  // shares data; callers treat op outputs as immutable
    return out;
  }
  if (b.numel() == 0) return a;
  check_matrix(a, "concat_rows");
  check_matrix(b, "concat_rows");
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: column mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  const int ma = a.rows(), mb = b.rows(), n = a.cols();
  Tensor out = Tensor::zeros({ma + mb, n}, tracked(a) || tracked(b));
  std::copy(a.data->begin(), a.data->end(), out.data->begin());
  std::copy(b.data->begin(), b.data->end(), out.data->begin() + a.data->size());
  if (out.requires_grad) {
    attach(out, "concat_rows", {&a, &b}, [a, b, dy = out.grad, ma, mb, n] {
      if (a.requires_grad) {
        active().axpy(1.0, dy->data(), a.grad->data(), static_cast<std::size_t>(ma) * n);
      }
      if (b.requires_grad) {
        active().axpy(1.0, dy->data() + static_cast<std::size_t>(ma) * n, b.grad->data(),
                      static_cast<std::size_t>(mb) * n);
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, int start, int len) {
  check_matrix(x, "slice_rows");
  if (start < 0 || len < 0 || start + len > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of " + x.shape_str());
  }
  const int n = x.cols();
  Tensor out = Tensor::zeros({len, n}, tracked(x));
  std::copy(x.data->begin() + static_cast<std::size_t>(start) * n,
            x.data->begin() + static_cast<std::size_t>(start + len) * n, out.data->begin());
  if (out.requires_grad) {
    attach(out, "slice_rows", {&x}, [x, dy = out.grad, start, len, n] {
      active().axpy(1.0, dy->data(), x.grad->data() + static_cast<std::size_t>(start) * n,
                    static_cast<std::size_t>(len) * n);
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const int m = parts[0].rows();
  int total = 0;
  bool req = false;
  for (const Tensor& p : parts) {
    check_matrix(p, "concat_cols");
    if (p.rows() != m) throw ShapeError("concat_cols: row mismatch");
    total += p.cols();
    req = req || tracked(p);
  }
  Tensor out = Tensor::zeros({m, total}, req);
  int offset = 0;
  for (const Tensor& p : parts) {
    const int n = p.cols();
    for (int i = 0; i < m; ++i) {
      std::copy(p.data->begin() + static_cast<std::size_t>(i) * n,
                p.data->begin() + static_cast<std::size_t>(i + 1) * n,
                out.data->begin() + static_cast<std::size_t>(i) * total + offset);
    }
    offset += n;
  }
  if (out.requires_grad) {
    out.node = std::make_shared<TapeNode>();
    out.node->op = "concat_cols";
    for (const Tensor& p : parts) {
      if (p.node) out.node->parents.push_back(p.node);
    }
    out.node->backprop = [parts, dy = out.grad, m, total] {
      int offset = 0;
      for (const Tensor& p : parts) {
        const int n = p.cols();
        if (p.requires_grad) {
          for (int i = 0; i < m; ++i) {
            active().axpy(1.0, dy->data() + static_cast<std::size_t>(i) * total + offset,
                          p.grad->data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n));
          }
        }
        offset += n;
      }
    };
  }
  return out;
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  check_matrix(x, "slice_cols");
  if (start < 0 || len < 0 || start + len > x.cols()) {
    throw ShapeError("slice_cols: range out of " + x.shape_str());
  }
  const int m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, len}, tracked(x));
  for (int i = 0; i < m; ++i) {
    std::copy(x.data->begin() + static_cast<std::size_t>(i) * n + start,
              x.data->begin() + static_cast<std::size_t>(i) * n + start + len,
              out.data->begin() + static_cast<std::size_t>(i) * len);
  }
  if (out.requires_grad) {
    attach(out, "slice_cols", {&x}, [x, dy = out.grad, start, len, m, n] {
      for (int i = 0; i < m; ++i) {
        active().axpy(1.0, dy->data() + static_cast<std::size_t>(i) * len,
                      x.grad->data() + static_cast<std::size_t>(i) * n + start,
                      static_cast<std::size_t>(len));
      }
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  check_matrix(table, "embedding");
  const int vocab = table.rows(), d = table.cols();
  for (std::int32_t id : ids) {
    if (id < 0 || id >= vocab) {
      throw VocabError("embedding: token id " + std::to_string(id) + " outside vocab of " +
                       std::to_string(vocab));
    }
  }
  const int m = static_cast<int>(ids.size());
  Tensor out = Tensor::zeros({m, d}, tracked(table));
  for (int i = 0; i < m; ++i) {
    std::copy(table.data->begin() + static_cast<std::size_t>(ids[i]) * d,
              table.data->begin() + static_cast<std::size_t>(ids[i] + 1) * d,
              out.data->begin() + static_cast<std::size_t>(i) * d);
  }
  if (out.requires_grad) {
    std::vector<std::int32_t> saved_ids(ids.begin(), ids.end());
    attach(out, "embedding", {&table}, [table, dy = out.grad, saved_ids, d] {
      for (std::size_t i = 0; i < saved_ids.size(); ++i) {
        active().axpy(1.0, dy->data() + i * d,
                      table.grad->data() + static_cast<std::size_t>(saved_ids[i]) * d,
                      static_cast<std::size_t>(d));
      }
    });
  }
  return out;
}

Tensor masked_softmax(const Tensor& scores, const BoolMatrix& mask) {
  check_matrix(scores, "masked_softmax");
  const int m = scores.rows(), n = scores.cols();
  if (mask.rows != m || mask.cols != n) {
    throw ShapeError("masked_softmax: mask shape mismatch");
  }
  Tensor out = Tensor::zeros(scores.shape, tracked(scores));
  for (int i = 0; i < m; ++i) {
    const double* row = scores.data->data() + static_cast<std::size_t>(i) * n;
    double* orow = out.data->data() + static_cast<std::size_t>(i) * n;
    double max_v = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (mask.at(i, j) && row[j] > max_v) max_v = row[j];
    }
    if (max_v == -std::numeric_limits<double>::infinity()) {
      throw MaskError("masked_softmax: row " + std::to_string(i) + " is fully masked");
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      if (mask.at(i, j)) {
        orow[j] = std::exp(row[j] - max_v);
        denom += orow[j];
      }
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < n; ++j) orow[j] *= inv;
  }
  guard_finite(out, "masked_softmax");
  if (out.requires_grad) {
    attach(out, "masked_softmax", {&scores}, [scores, y = out.data, dy = out.grad, m, n] {
      for (int i = 0; i < m; ++i) {
        const double* yrow = y->data() + static_cast<std::size_t>(i) * n;
        const double* grow = dy->data() + static_cast<std::size_t>(i) * n;
        const double inner = active().dot(yrow, grow, static_cast<std::size_t>(n));
        double* dst = scores.grad->data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) dst[j] += yrow[j] * (grow[j] - inner);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  check_matrix(x, "layer_norm");
  const int m = x.rows(), d = x.cols();
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias length must equal last axis " + std::to_string(d));
  }
  Tensor out = Tensor::zeros(x.shape, tracked(x) || tracked(gain) || tracked(bias));
  auto xhat = std::make_shared<std::vector<double>>(x.data->size());
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (int i = 0; i < m; ++i) {
    const double* row = x.data->data() + static_cast<std::size_t>(i) * d;
    double mean = active().sum(row, d) / d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= d;  // biased estimator
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    double* hrow = xhat->data() + static_cast<std::size_t>(i) * d;
    double* orow = out.data->data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) {
      hrow[j] = (row[j] - mean) * inv;
      orow[j] = hrow[j] * (*gain.data)[j] + (*bias.data)[j];
    }
  }
  guard_finite(out, "layer_norm");
  if (out.requires_grad) {
    attach(out, "layer_norm", {&x, &gain, &bias},
           [x, gain, bias, xhat, inv_std, dy = out.grad, m, d] {
             for (int i = 0; i < m; ++i) {
               const double* hrow = xhat->data() + static_cast<std::size_t>(i) * d;
               const double* grow = dy->data() + static_cast<std::size_t>(i) * d;
               if (x.requires_grad) {
                 double m1 = 0.0, m2 = 0.0;
                 for (int j = 0; j < d; ++j) {
                   const double dxhat = grow[j] * (*gain.data)[j];
                   m1 += dxhat;
                   m2 += dxhat * hrow[j];
                 }
                 m1 /= d;
                 m2 /= d;
                 double* dst = x.grad->data() + static_cast<std::size_t>(i) * d;
                 const double inv = (*inv_std)[i];
                 for (int j = 0; j < d; ++j) {
                   const double dxhat = grow[j] * (*gain.data)[j];
                   dst[j] += (dxhat - m1 - hrow[j] * m2) * inv;
                 }
               }
               if (gain.requires_grad) {
                 for (int j = 0; j < d; ++j) (*gain.grad)[j] += grow[j] * hrow[j];
               }
               if (bias.requires_grad) {
                 for (int j = 0; j < d; ++j) (*bias.grad)[j] += grow[j];
               }
             }
           });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
  if (p == 0.0) return x;  // no-op, draws nothing from rng
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.data->size());
  Tensor out = Tensor::zeros(x.shape, tracked(x));
  for (std::size_t i = 0; i < x.data->size(); ++i) {
    const double keep = rng.uniform() >= p ? keep_scale : 0.0;
    (*mask)[i] = keep;
    (*out.data)[i] = (*x.data)[i] * keep;
  }
  if (out.requires_grad) {
    attach(out, "dropout", {&x}, [x, mask, dy = out.grad] {
      for (std::size_t i = 0; i < dy->size(); ++i) (*x.grad)[i] += (*dy)[i] * (*mask)[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::zeros({1}, tracked(x));
  (*out.data)[0] = active().sum(x.data->data(), x.data->size());
  guard_finite(out, "sum");
  if (out.requires_grad) {
    attach(out, "sum", {&x}, [x, dy = out.grad] {
      const double g = (*dy)[0];
      for (std::size_t i = 0; i < x.grad->size(); ++i) (*x.grad)[i] += g;
    });
  }
  return out;
}

Tensor stop_gradient(const Tensor& x) {
  if (!x.requires_grad && !x.node) return x;
  Tensor out;
  out.shape = x.shape;
  out.data = x.data;  // value passes through, tape does not
  return out;
}

Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::int32_t> targets,
                         std::span<const std::uint8_t> active_mask, int* active_count) {
  check_matrix(logits, "cross_entropy");
  const int m = logits.rows(), vocab = logits.cols();
  if (static_cast<int>(targets.size()) != m) {
    throw ShapeError("cross_entropy: target count mismatch");
  }
  if (!active_mask.empty() && static_cast<int>(active_mask.size()) != m) {
    throw ShapeError("cross_entropy: active mask length mismatch");
  }
  auto is_active = [&](int i) { return active_mask.empty() || active_mask[i] != 0; };
  int count = 0;
  for (int i = 0; i < m; ++i) {
    if (targets[i] < 0 || targets[i] >= vocab) {
      throw VocabError("cross_entropy: target id " + std::to_string(targets[i]) + " outside vocab");
    }
    if (is_active(i)) ++count;
  }
  if (count == 0) throw MaskError("cross_entropy: no active positions");
  if (active_count) *active_count = count;

  auto probs = std::make_shared<std::vector<double>>(logits.data->size());
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const double* row = logits.data->data() + static_cast<std::size_t>(i) * vocab;
    double* prow = probs->data() + static_cast<std::size_t>(i) * vocab;
    double max_v = row[0];
    for (int j = 1; j < vocab; ++j) max_v = std::max(max_v, row[j]);
    double denom = 0.0;
    for (int j = 0; j < vocab; ++j) {
      prow[j] = std::exp(row[j] - max_v);
      denom += prow[j];
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < vocab; ++j) prow[j] *= inv;
    if (is_active(i)) {
      total += std::log(denom) + max_v - row[targets[i]];
    }
  }
  Tensor out = Tensor::zeros({1}, tracked(logits));
  (*out.data)[0] = total;
  guard_finite(out, "cross_entropy");
  if (out.requires_grad) {
    std::vector<std::int32_t> saved_targets(targets.begin(), targets.end());
    std::vector<std::uint8_t> saved_active(active_mask.begin(), active_mask.end());
    attach(out, "cross_entropy", {&logits},
           [logits, probs, saved_targets, saved_active, dy = out.grad, m, vocab] {
             const double g = (*dy)[0];
             for (int i = 0; i < m; ++i) {
               if (!saved_active.empty() && saved_active[i] == 0) continue;
               const double* prow = probs->data() + static_cast<std::size_t>(i) * vocab;
               double* dst = logits.grad->data() + static_cast<std::size_t>(i) * vocab;
               for (int j = 0; j < vocab; ++j) dst[j] += g * prow[j];
               dst[saved_targets[i]] -= g;
             }
           });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> active_mask) {
  int count = 0;
  Tensor total = cross_entropy_sum(logits, targets, active_mask, &count);
  return scale(total, 1.0 / count);
}

std::vector<double> nll_per_position(const Tensor& logits, std::span<const std::int32_t> targets) {
  check_matrix(logits, "nll_per_position");
  const int m = logits.rows(), vocab = logits.cols();
  if (static_cast<int>(targets.size()) != m) {
    throw ShapeError("nll_per_position: target count mismatch");
  }
  std::vector<double> nll(m);
  for (int i = 0; i < m; ++i) {
    if (targets[i] < 0 || targets[i] >= vocab) {
      throw VocabError("nll_per_position: target id outside vocab");
    }
    const double* row = logits.data->data() + static_cast<std::size_t>(i) * vocab;
    double max_v = row[0];
    for (int j = 1; j < vocab; ++j) max_v = std::max(max_v, row[j]);
    double denom = 0.0;
    for (int j = 0; j < vocab; ++j) denom += std::exp(row[j] - max_v);
    nll[i] = std::log(denom) + max_v - row[targets[i]];
  }
  return nll;
}

}  // namespace txl::ops
