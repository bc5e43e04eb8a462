#pragma once

#include <cstdint>

#include "txl/ops.hpp"
#include "txl/tensor.hpp"

namespace txl::relattn {

// Attention parameters with the key projection split into a content matrix
// (wke) and a distance matrix (wkr), plus the global content/position bias
// vectors u and v (one row per head). Projections are stored input-major
// ([d_in x d_out]) so `x * W` applies them.
struct RelAttnParams {
  Tensor wq, wke, wkr, wv, wo;  // [d x d]
  Tensor u, v;                  // [n_heads x d_head]
};

// Baseline attention: plain content projections; positions enter by adding
// table rows to the inputs before projection.
struct AbsAttnParams {
  Tensor wq, wk, wv, wo;  // [d x d]
};

// Distance encoding table: row i holds [sin(i*w_0), cos(i*w_0), sin(i*w_1),
// cos(i*w_1), ...] with w_j = 10000^(-2j/d). Rows 0..max_dist-1. No
// learnable content; regenerating with more rows leaves old rows unchanged.
Tensor sinusoid_table(int max_dist, int d);

// Cached table with at least min_rows rows (grown on demand, thread-local).
const Tensor& sinusoid_cache(int d, int min_rows);

// Rows of `table` in reverse order over [0, span): row k = table row
// (span-1-k). Plain value tensor.
Tensor reversed_rows(const Tensor& table, int span);

// The left-shift that turns the distance-indexed score matrix into its
// query-aligned layout: out[i, k] = in[i, k + L-1-i] for k <= M+i, else 0
// (L = rows, S = cols, M = S-L). Differentiable.
Tensor rel_shift(const Tensor& shifted_scores);

// Four-term attention scores for one head, computed pair by pair with an
// independent distance projection per (query, key) pair. Reference oracle
// for rel_scores_fast; quadratic in the number of score entries. Entries
// with j > i+M (future keys) are left at zero; callers mask them anyway.
// Each distance projection bumps *matvec_count when given.
Tensor rel_scores_naive(const Tensor& q, const Tensor& keys, const Tensor& r_table,
                        const Tensor& wkr_head, const Tensor& u_head, const Tensor& v_head,
                        std::uint64_t* matvec_count = nullptr);

// Same scores via one projection per distance plus row shifts: terms (a)+(c)
// as (q+u) keys^T, term (b) as rel_shift(q Q^T), term (d) as a shifted
// broadcast of (Q v)^T, where Q holds the reverse-ordered distance
// projections. Linear in the attention span; differentiable. Performs
// exactly keys.rows() distance projections.
Tensor rel_scores_fast(const Tensor& q, const Tensor& keys, const Tensor& r_table,
                       const Tensor& wkr_head, const Tensor& u_head, const Tensor& v_head);

// Baseline scores with absolute encodings added to the inputs before
// projection: ((x_q + U) wq) ((x_ext + U') wk)^T. Extended-context rows
// reuse the same per-segment table rows (row r gets U[r mod L]), which is
// exactly the ambiguity that motivates the relative form.
Tensor abs_scores(const Tensor& q_in, const Tensor& ext_in, const AbsAttnParams& params,
                  const Tensor& u_table);

struct AttnOptions {
  int n_heads = 1;
  double score_scale = 1.0;
  double dropout = 0.0;
  bool train = false;
  Rng* rng = nullptr;
};

// Full attention sublayer: queries from the segment, keys/values from
// [memory | segment] (memory gradient-blocked), per-head scores, causal
// masked softmax, head concat, output projection, residual, layer norm.
Tensor rel_attention_sublayer(const Tensor& h, const Tensor& mem, const RelAttnParams& params,
                              const Tensor& ln_gain, const Tensor& ln_bias, double ln_eps,
                              const Tensor& r_table, const AttnOptions& opt);

// Content-only variant for the absolute-encoding baseline.
Tensor abs_attention_sublayer(const Tensor& h, const Tensor& mem, const AbsAttnParams& params,
                              const Tensor& ln_gain, const Tensor& ln_bias, double ln_eps,
                              const AttnOptions& opt);

}  // namespace txl::relattn
