#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "txl/model.hpp"

namespace txl::sampler {

struct GenerateOptions {
  int top_k = 40;
  double temperature = 1.0;  // applied before the top-k cut
  std::uint64_t seed = 0;
  int mem_len = -1;  // -1 = config mem_len_eval
  int seg_len = -1;  // -1 = config segment_len (seed ingestion chunk size)
};

struct GenerateResult {
  std::vector<std::int32_t> tokens;
  bool top_k_clamped = false;  // top_k exceeded the vocabulary and was clamped
};

// Feeds the seed through the model in segments (keeping at most the last 512
// seed tokens), then decodes one token per step with carried memory: sample
// from the re-normalized top-k of each step's next-token distribution,
// append, repeat.
GenerateResult generate(const model::ModelParams& params, std::span<const std::int32_t> seed_tokens,
                        int n_tokens, const GenerateOptions& opt = {});

}  // namespace txl::sampler
