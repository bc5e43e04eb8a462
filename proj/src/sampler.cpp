#include "txl/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "txl/errors.hpp"
#include "txl/rng.hpp"

namespace txl::sampler {

namespace {

constexpr int kMaxSeedContext = 512;

// Renormalized top-k draw from one logits row. Ties in probability resolve
// toward the lower token id, so a fixed seed fixes the output.
std::int32_t sample_top_k(std::span<const double> logits, int top_k, double temperature, Rng& rng) {
  const int vocab = static_cast<int>(logits.size());
  double max_v = logits[0] / temperature;
  std::vector<double> scaled(vocab);
  for (int i = 0; i < vocab; ++i) {
    scaled[i] = logits[i] / temperature;
    max_v = std::max(max_v, scaled[i]);
  }
  double denom = 0.0;
  for (int i = 0; i < vocab; ++i) {
    scaled[i] = std::exp(scaled[i] - max_v);
    denom += scaled[i];
  }
  for (int i = 0; i < vocab; ++i) scaled[i] /= denom;

  std::vector<std::int32_t> order(vocab);
  for (int i = 0; i < vocab; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (scaled[a] != scaled[b]) return scaled[a] > scaled[b];
    return a < b;
  });
  order.resize(top_k);

  double kept = 0.0;
  for (std::int32_t id : order) kept += scaled[id];
  double renorm_sum = 0.0;
  for (std::int32_t id : order) renorm_sum += scaled[id] / kept;
  if (std::abs(renorm_sum - 1.0) > 1e-12) {
    throw NumericError("sampler: renormalized top-k distribution does not sum to 1");
  }

  const double draw = rng.uniform();
  double cumulative = 0.0;
  for (std::int32_t id : order) {
    cumulative += scaled[id] / kept;
    if (draw < cumulative) return id;
  }
  return order.back();  // draw landed in the rounding tail
}

}  // namespace

GenerateResult generate(const model::ModelParams& params, std::span<const std::int32_t> seed_tokens,
                        int n_tokens, const GenerateOptions& opt) {
  if (seed_tokens.empty()) throw ConfigError("generate: seed must be non-empty");
  if (n_tokens < 0) throw ConfigError("generate: n_tokens must be >= 0");
  if (opt.top_k < 1) throw ConfigError("generate: top_k must be >= 1");
  if (opt.temperature <= 0.0) throw ConfigError("generate: temperature must be positive");

  GenerateResult result;
  int top_k = opt.top_k;
  if (top_k > params.config.vocab_size) {
    top_k = params.config.vocab_size;
    result.top_k_clamped = true;
  }
  const int mem_len = opt.mem_len >= 0 ? opt.mem_len : params.config.mem_len_eval;
  const int seg_len = opt.seg_len >= 1 ? opt.seg_len : params.config.segment_len;

  if (seed_tokens.size() > kMaxSeedContext) {
    seed_tokens = seed_tokens.subspan(seed_tokens.size() - kMaxSeedContext);
  }

  NoGradGuard no_grad;
  Rng rng(opt.seed);
  model::MemoryState memory;
  model::ForwardOptions fwd;
  fwd.mem_target = mem_len;

  // With recurrence the decode loop feeds one token per step and relies on
  // the carried memory; without it (or with no memory budget) each step
  // re-feeds a sliding window of the recent context.
  const bool incremental = params.config.recurrence && mem_len > 0;

  Tensor last_logits;
  std::vector<std::int32_t> context(seed_tokens.begin(), seed_tokens.end());
  if (incremental) {
    // Ingest the seed; the last segment's final row is the first next-token
    // distribution.
    std::size_t cursor = 0;
    while (cursor < context.size()) {
      const std::size_t take = std::min<std::size_t>(seg_len, context.size() - cursor);
      model::LMOutput out = model::forward_segment(
          params, std::span<const std::int32_t>(context).subspan(cursor, take), memory, fwd);
      memory = std::move(out.memory);
      last_logits = out.logits;
      cursor += take;
    }
  } else {
    const std::size_t take = std::min<std::size_t>(seg_len, context.size());
    model::LMOutput out = model::forward_segment(
        params, std::span<const std::int32_t>(context).last(take), memory, fwd);
    last_logits = out.logits;
  }

  result.tokens.reserve(n_tokens);
  for (int produced = 0; produced < n_tokens; ++produced) {
    const int last = last_logits.rows() - 1;
    std::span<const double> row{last_logits.data->data() + static_cast<std::size_t>(last) * last_logits.cols(),
                                static_cast<std::size_t>(last_logits.cols())};
    const std::int32_t token = sample_top_k(row, top_k, opt.temperature, rng);
    result.tokens.push_back(token);
    if (memory.len() > mem_len) {
      throw NumericError("sampler: memory exceeded its configured length");
    }
    if (produced + 1 == n_tokens) break;
    if (incremental) {
      const std::int32_t step_input[1] = {token};
      model::LMOutput out = model::forward_segment(params, step_input, memory, fwd);
      memory = std::move(out.memory);
      last_logits = out.logits;
    } else {
      context.push_back(token);
      const std::size_t take = std::min<std::size_t>(seg_len, context.size());
      model::LMOutput out = model::forward_segment(
          params, std::span<const std::int32_t>(context).last(take), memory, fwd);
      last_logits = out.logits;
    }
  }
  return result;
}

}  // namespace txl::sampler
