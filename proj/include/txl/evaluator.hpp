#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "txl/model.hpp"

namespace txl::evaluator {

struct EvalResult {
  double bpc = 0.0;
  double ppl = 0.0;
  std::vector<double> nll;  // one entry per scored position (stream index 1..T-1)
  std::int64_t positions = 0;
  double tokens_per_sec = 0.0;
};

// Memory-reuse evaluation: the stream is processed in segments of seg_len
// with a carried cache of mem_len rows, so every token is encoded once.
// mem_len = 0 degenerates to independent fixed-window chunks.
EvalResult eval_xl(const model::ModelParams& params, std::span<const std::int32_t> stream,
                   int mem_len, int seg_len);

// Per-token sliding-window evaluation: each position is scored by a full
// forward over the previous `window` tokens (shorter near the stream head),
// reading only the last output. No state is reused between steps.
EvalResult eval_vanilla_sliding(const model::ModelParams& params,
                                std::span<const std::int32_t> stream, int window);

struct BenchRow {
  std::string regime;  // "xl" or "vanilla"
  int context = 0;
  double per_token_seconds = 0.0;
  double slowdown_vs_xl = 1.0;  // this row's per-token time / xl time at same context
};

// Per-token times for both regimes at each context length, warmup excluded.
// xl_tokens and vanilla_tokens bound how many positions each measurement
// scores (sliding evaluation is the expensive side).
std::vector<BenchRow> bench_speed(const model::ModelParams& params,
                                  std::span<const std::int32_t> stream,
                                  const std::vector<int>& contexts, int seg_len,
                                  std::int64_t xl_tokens, std::int64_t vanilla_tokens);

// Per-token losses at fixed context lengths for the RECL metric. Every row
// covers positions [t0, T) with t0 = max(contexts), so tables of different
// models align position-for-position.
struct LossTable {
  std::string model_id;
  std::string stream_id;
  std::vector<int> contexts;
  std::int64_t t0 = 0;
  std::int64_t count = 0;
  std::vector<std::vector<double>> losses;  // [contexts.size()][count]

  const std::vector<double>& at_context(int c) const;
};

// Context length c is realized per model family: without recurrence, a
// sliding window of exactly c tokens; with recurrence, segments of
// min(segment_len, c) carrying a cache of c - seg rows (positions then see
// between c-seg and c-1 real tokens of context; the configured c is what the
// table reports).
LossTable export_losses(const model::ModelParams& params, std::span<const std::int32_t> stream,
                        const std::vector<int>& contexts, const std::string& model_id);

std::string stream_fingerprint(std::span<const std::int32_t> stream);

void save_loss_table(const std::string& path, const LossTable& table);
LossTable load_loss_table(const std::string& path);

}  // namespace txl::evaluator
