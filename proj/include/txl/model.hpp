#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "txl/relattn.hpp"
#include "txl/rng.hpp"
#include "txl/tensor.hpp"

namespace txl::model {

enum class Encoding { relative, absolute };
enum class LossMode { full, half };

struct ModelConfig {
  int vocab_size = 0;
  int n_layers = 2;
  int d_model = 64;
  int n_heads = 2;
  int d_head = 32;
  int d_ff = 128;
  int segment_len = 16;
  int mem_len_train = 16;
  int mem_len_eval = 16;
  Encoding encoding = Encoding::relative;
  bool recurrence = true;
  LossMode loss_mode = LossMode::full;
  double dropout = 0.0;
  bool tie_embeddings = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LayerParams {
  Tensor wq, wv, wo;            // [d x d]
  Tensor wke, wkr;              // relative encoding only
  Tensor u, v;                  // [n_heads x d_head], relative only
  Tensor wk;                    // absolute encoding only
  Tensor ln1_gain, ln1_bias;    // after attention
  Tensor ln2_gain, ln2_bias;    // after feed-forward
  Tensor ffn_w1, ffn_b1;        // [d x d_ff], [d_ff]
  Tensor ffn_w2, ffn_b2;        // [d_ff x d], [d]
};

struct ModelParams {
  ModelConfig config;
  Tensor embedding;  // [V x d]
  Tensor out_proj;   // [d x V]; undefined when tie_embeddings
  std::vector<LayerParams> layers;

  // Deterministic (name, tensor) walk over every learnable tensor; the order
  // fixes initialization draws, optimizer state layout and checkpoint layout.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
};

// Per-layer cached hidden-state sequences. layers[n] feeds layer n+1 and
// holds that layer's input-side states from previous segments. Entries carry
// no tape; gradient is blocked at insertion.
struct MemoryState {
  std::vector<Tensor> layers;

  bool empty() const;
  int len() const;  // cached positions (identical across layers)
};

struct LMOutput {
  Tensor logits;            // [L' x V]
  MemoryState memory;       // updated cache
  std::vector<double> nll;  // per position, when targets were given
};

struct ForwardOptions {
  bool train = false;
  Rng* rng = nullptr;  // needed when train and dropout > 0
  // Memory rows to keep in the returned state; -1 picks mem_len_train or
  // mem_len_eval from the config based on `train`.
  int mem_target = -1;
  std::span<const std::int32_t> targets = {};
};

ModelParams init_model(const ModelConfig& config);
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

// Learnable scalar count for a config; checked against enumeration in tests.
std::int64_t param_count(const ModelConfig& config);

// One segment through the stack. Layer n consumes [SG(mem_n) | h^(n-1)] as
// key/value context and the current h^(n-1) as queries. Returns logits for
// every position plus the updated memory (empty when recurrence is off).
LMOutput forward_segment(const ModelParams& params, std::span<const std::int32_t> tokens,
                         const MemoryState& mem, const ForwardOptions& opt = {});

// New cache = last mem_target rows of [old | fresh] per layer, gradient
// blocked. mem_target may exceed the segment length, in which case the cache
// spans several past segments.
MemoryState update_memory(const MemoryState& old, const std::vector<Tensor>& layer_inputs,
                          int mem_target);

// Positions the loss covers: all of them, or the most recent half
// (index >= ceil(L'/2); a single-position segment keeps its one position).
std::vector<std::uint8_t> loss_positions(int seg_len, LossMode mode);

// Mean nll over the mode's positions.
Tensor segment_loss(const LMOutput& output, std::span<const std::int32_t> targets, LossMode mode);
// Sum + active count, for exact averaging across batch lanes.
Tensor segment_loss_sum(const Tensor& logits, std::span<const std::int32_t> targets, LossMode mode,
                        int* active_count);

std::string encoding_name(Encoding e);
std::string loss_mode_name(LossMode m);
Encoding encoding_from_name(const std::string& name);
LossMode loss_mode_from_name(const std::string& name);

}  // namespace txl::model
