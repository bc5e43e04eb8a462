#include "txl/relattn.hpp"

#include <cmath>
#include <map>
#include <string>

#include "txl/errors.hpp"
#include "txl/kernels.hpp"

namespace txl::relattn {

namespace ops = txl::ops;

Tensor sinusoid_table(int max_dist, int d) {
  if (d <= 0 || d % 2 != 0) {
    throw ConfigError("sinusoid_table: dimension must be positive and even, got " + std::to_string(d));
  }
  if (max_dist < 0) throw ConfigError("sinusoid_table: negative distance count");
  Tensor table = Tensor::zeros({max_dist, d});
  for (int i = 0; i < max_dist; ++i) {
    double* row = table.data->data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j * 2 < d; ++j) {
      const double freq = std::pow(10000.0, -2.0 * j / d);
      const double angle = i * freq;
      row[2 * j] = std::sin(angle);
      row[2 * j + 1] = std::cos(angle);
    }
  }
  return table;
}

const Tensor& sinusoid_cache(int d, int min_rows) {
  thread_local std::map<int, Tensor> cache;
  Tensor& entry = cache[d];
  if (!entry.defined() || entry.shape[0] < min_rows) {
    int rows = entry.defined() ? entry.shape[0] : 64;
    while (rows < min_rows) rows *= 2;
    entry = sinusoid_table(rows, d);
  }
  return entry;
}

Tensor reversed_rows(const Tensor& table, int span) {
  if (table.rows() < span) {
    throw ShapeError("reversed_rows: table has " + std::to_string(table.rows()) + " rows, need " +
                     std::to_string(span));
  }
  const int d = table.cols();
  Tensor out = Tensor::zeros({span, d});
  for (int k = 0; k < span; ++k) {
    const int src = span - 1 - k;
    std::copy(table.data->begin() + static_cast<std::size_t>(src) * d,
              table.data->begin() + static_cast<std::size_t>(src + 1) * d,
              out.data->begin() + static_cast<std::size_t>(k) * d);
  }
  return out;
}

Tensor rel_shift(const Tensor& shifted_scores) {
  const int seg_len = shifted_scores.rows();
  const int span = shifted_scores.cols();
  if (span < seg_len) throw ShapeError("rel_shift: span shorter than segment " + shifted_scores.shape_str());
  const int mem_len = span - seg_len;
  const bool req = grad_enabled() && shifted_scores.requires_grad;
  Tensor out = Tensor::zeros(shifted_scores.shape, req);
  for (int i = 0; i < seg_len; ++i) {
    const int shift = seg_len - 1 - i;
    const double* src = shifted_scores.data->data() + static_cast<std::size_t>(i) * span;
    double* dst = out.data->data() + static_cast<std::size_t>(i) * span;
    for (int k = 0; k <= mem_len + i; ++k) dst[k] = src[k + shift];
  }
  if (out.requires_grad) {
    out.node = std::make_shared<TapeNode>();
    out.node->op = "rel_shift";
    if (shifted_scores.node) out.node->parents.push_back(shifted_scores.node);
    out.node->backprop = [in = shifted_scores, dy = out.grad, seg_len, span, mem_len] {
      for (int i = 0; i < seg_len; ++i) {
        const int shift = seg_len - 1 - i;
        const double* g = dy->data() + static_cast<std::size_t>(i) * span;
        double* dst = in.grad->data() + static_cast<std::size_t>(i) * span;
        for (int k = 0; k <= mem_len + i; ++k) dst[k + shift] += g[k];
      }
    };
  }
  return out;
}

Tensor rel_scores_naive(const Tensor& q, const Tensor& keys, const Tensor& r_table,
                        const Tensor& wkr_head, const Tensor& u_head, const Tensor& v_head,
                        std::uint64_t* matvec_count) {
  const int seg_len = q.rows();
  const int d_head = q.cols();
  const int span = keys.rows();
  const int mem_len = span - seg_len;
  const int d = wkr_head.rows();
  if (keys.cols() != d_head || wkr_head.cols() != d_head) {
    throw ShapeError("rel_scores_naive: head dimension mismatch");
  }
  if (r_table.rows() < span || r_table.cols() != d) {
    throw ShapeError("rel_scores_naive: distance table too small");
  }
  if (mem_len < 0) throw ShapeError("rel_scores_naive: more queries than keys");

  Tensor out = Tensor::zeros({seg_len, span});
  std::vector<double> proj(d_head);
  for (int i = 0; i < seg_len; ++i) {
    const double* qrow = q.data->data() + static_cast<std::size_t>(i) * d_head;
    double* orow = out.data->data() + static_cast<std::size_t>(i) * span;
    for (int j = 0; j <= mem_len + i; ++j) {
      const int dist = mem_len + i - j;
      // Fresh projection of the distance encoding for this pair.
      const double* rrow = r_table.data->data() + static_cast<std::size_t>(dist) * d;
      std::fill(proj.begin(), proj.end(), 0.0);
      for (int r = 0; r < d; ++r) {
        const double rv = rrow[r];
        const double* wrow = wkr_head.data->data() + static_cast<std::size_t>(r) * d_head;
        for (int c = 0; c < d_head; ++c) proj[c] += rv * wrow[c];
      }
      if (matvec_count) ++*matvec_count;
      const double* krow = keys.data->data() + static_cast<std::size_t>(j) * d_head;
      const auto& kt = kernels::active();
      orow[j] = kt.dot(qrow, krow, d_head) + kt.dot(qrow, proj.data(), d_head) +
                kt.dot(u_head.data->data(), krow, d_head) +
                kt.dot(v_head.data->data(), proj.data(), d_head);
    }
  }
  return out;
}

Tensor rel_scores_fast(const Tensor& q, const Tensor& keys, const Tensor& r_table,
                       const Tensor& wkr_head, const Tensor& u_head, const Tensor& v_head) {
  const int seg_len = q.rows();
  const int d_head = q.cols();
  const int span = keys.rows();
  if (span < seg_len) throw ShapeError("rel_scores_fast: more queries than keys");

  // Terms (a) + (c): one matmul of biased queries against the keys.
  Tensor content = ops::matmul_nt(ops::add_rowvec(q, u_head), keys);

  // All distance projections at once, reverse-ordered so Q[k] encodes
  // distance span-1-k.
  Tensor q_rel = ops::matmul(reversed_rows(r_table, span), wkr_head);  // [span x d_head]

  // Term (b).
  Tensor pos = rel_shift(ops::matmul_nt(q, q_rel));

  // Term (d): one projection-vector product, broadcast per row, shifted.
  Tensor bias_row = ops::reshape(ops::matmul(q_rel, ops::reshape(v_head, {d_head, 1})), {1, span});
  Tensor bias = rel_shift(ops::broadcast_rows(bias_row, seg_len));

  return ops::add(ops::add(content, pos), bias);
}

Tensor abs_scores(const Tensor& q_in, const Tensor& ext_in, const AbsAttnParams& params,
                  const Tensor& u_table) {
  const int seg_len = q_in.rows();
  const int span = ext_in.rows();
  const int d = q_in.cols();
  if (u_table.rows() < seg_len || u_table.cols() != d) {
    throw ShapeError("abs_scores: position table too small");
  }
  Tensor q_pos = Tensor::zeros({seg_len, d});
  for (int i = 0; i < seg_len; ++i) {
    std::copy(u_table.data->begin() + static_cast<std::size_t>(i) * d,
              u_table.data->begin() + static_cast<std::size_t>(i + 1) * d,
              q_pos.data->begin() + static_cast<std::size_t>(i) * d);
  }
  // Every segment-sized block of the extended context reuses the same rows,
  // so content-identical segments become positionally indistinguishable.
  Tensor e_pos = Tensor::zeros({span, d});
  for (int r = 0; r < span; ++r) {
    const int src = r % seg_len;
    std::copy(u_table.data->begin() + static_cast<std::size_t>(src) * d,
              u_table.data->begin() + static_cast<std::size_t>(src + 1) * d,
              e_pos.data->begin() + static_cast<std::size_t>(r) * d);
  }
  Tensor q_proj = ops::matmul(ops::add(q_in, q_pos), params.wq);
  Tensor k_proj = ops::matmul(ops::add(ext_in, e_pos), params.wk);
  return ops::matmul_nt(q_proj, k_proj);
}

namespace {

Tensor multihead_attention(const Tensor& h, const Tensor& mem, const Tensor& wq, const Tensor& wk,
                           const Tensor& wv, const Tensor& wo, const RelAttnParams* rel,
                           const Tensor* r_table, const AttnOptions& opt) {
  const int seg_len = h.rows();
  const int d = h.cols();
  const int mem_len = (mem.defined() && mem.numel() > 0) ? mem.rows() : 0;
  if (opt.n_heads <= 0 || d % opt.n_heads != 0) {
    throw ConfigError("attention: head count must divide the model dimension");
  }
  const int d_head = d / opt.n_heads;

  Tensor ext = h;
  if (mem_len > 0) ext = ops::concat_rows(ops::stop_gradient(mem), h);

  Tensor q_all = ops::matmul(h, wq);
  Tensor k_all = ops::matmul(ext, wk);
  Tensor v_all = ops::matmul(ext, wv);
  const ops::BoolMatrix mask = ops::BoolMatrix::causal(seg_len, mem_len);

  std::vector<Tensor> heads;
  heads.reserve(opt.n_heads);
  for (int head = 0; head < opt.n_heads; ++head) {
    Tensor qh = ops::slice_cols(q_all, head * d_head, d_head);
    Tensor kh = ops::slice_cols(k_all, head * d_head, d_head);
    Tensor vh = ops::slice_cols(v_all, head * d_head, d_head);
    Tensor scores;
    if (rel != nullptr) {
      Tensor wkr_h = ops::slice_cols(rel->wkr, head * d_head, d_head);
      Tensor u_h = ops::slice_rows(rel->u, head, 1);
      Tensor v_h = ops::slice_rows(rel->v, head, 1);
      scores = rel_scores_fast(qh, kh, *r_table, wkr_h, u_h, v_h);
    } else {
      scores = ops::matmul_nt(qh, kh);
    }
    Tensor weights = ops::masked_softmax(ops::scale(scores, opt.score_scale), mask);
    if (opt.train && opt.dropout > 0.0) {
      if (opt.rng == nullptr) throw ConfigError("attention: dropout requires an rng");
      weights = ops::dropout(weights, opt.dropout, *opt.rng);
    }
    heads.push_back(ops::matmul(weights, vh));
  }
  Tensor merged = opt.n_heads == 1 ? heads[0] : ops::concat_cols(heads);
  return ops::matmul(merged, wo);
}

}  // namespace

Tensor rel_attention_sublayer(const Tensor& h, const Tensor& mem, const RelAttnParams& params,
                              const Tensor& ln_gain, const Tensor& ln_bias, double ln_eps,
                              const Tensor& r_table, const AttnOptions& opt) {
  Tensor attn = multihead_attention(h, mem, params.wq, params.wke, params.wv, params.wo, &params,
                                    &r_table, opt);
  return ops::layer_norm(ops::add(attn, h), ln_gain, ln_bias, ln_eps);
}

Tensor abs_attention_sublayer(const Tensor& h, const Tensor& mem, const AbsAttnParams& params,
                              const Tensor& ln_gain, const Tensor& ln_bias, double ln_eps,
                              const AttnOptions& opt) {
  Tensor attn = multihead_attention(h, mem, params.wq, params.wk, params.wv, params.wo, nullptr,
                                    nullptr, opt);
  return ops::layer_norm(ops::add(attn, h), ln_gain, ln_bias, ln_eps);
}

}  // namespace txl::relattn
