#include "txl/model.hpp"

#include <cmath>

#include "txl/errors.hpp"

namespace txl::model {

namespace ops = txl::ops;
namespace relattn = txl::relattn;

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;
constexpr double kInitTrunc = 2.0;

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw ConfigError("config: vocab_size must be positive");
  if (n_layers < 0) throw ConfigError("config: n_layers must be >= 0");
  if (d_model <= 0 || n_heads <= 0 || d_head <= 0) throw ConfigError("config: bad dimensions");
  if (d_model != n_heads * d_head) {
    throw ConfigError("config: d_model must equal n_heads * d_head");
  }
  if (d_model % 2 != 0) throw ConfigError("config: d_model must be even for sinusoid encodings");
  if (d_ff <= 0) throw ConfigError("config: d_ff must be positive");
  if (segment_len < 1) throw ConfigError("config: segment_len must be >= 1");
  if (mem_len_train < 0 || mem_len_eval < 0) throw ConfigError("config: memory lengths must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("config: dropout must be in [0, 1)");
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> named;
  named.emplace_back("embedding", &embedding);
  for (std::size_t n = 0; n < layers.size(); ++n) {
    LayerParams& layer = layers[n];
    const std::string prefix = "layers." + std::to_string(n) + ".";
    named.emplace_back(prefix + "attn.wq", &layer.wq);
    if (config.encoding == Encoding::relative) {
      named.emplace_back(prefix + "attn.wke", &layer.wke);
      named.emplace_back(prefix + "attn.wkr", &layer.wkr);
    } else {
      named.emplace_back(prefix + "attn.wk", &layer.wk);
    }
    named.emplace_back(prefix + "attn.wv", &layer.wv);
    named.emplace_back(prefix + "attn.wo", &layer.wo);
    if (config.encoding == Encoding::relative) {
      named.emplace_back(prefix + "attn.u", &layer.u);
      named.emplace_back(prefix + "attn.v", &layer.v);
    }
    named.emplace_back(prefix + "ln1.gain", &layer.ln1_gain);
    named.emplace_back(prefix + "ln1.bias", &layer.ln1_bias);
    named.emplace_back(prefix + "ffn.w1", &layer.ffn_w1);
    named.emplace_back(prefix + "ffn.b1", &layer.ffn_b1);
    named.emplace_back(prefix + "ffn.w2", &layer.ffn_w2);
    named.emplace_back(prefix + "ffn.b2", &layer.ffn_b2);
    named.emplace_back(prefix + "ln2.gain", &layer.ln2_gain);
    named.emplace_back(prefix + "ln2.bias", &layer.ln2_bias);
  }
  if (!config.tie_embeddings) named.emplace_back("out_proj", &out_proj);
  return named;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  auto mutable_named = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named;
  named.reserve(mutable_named.size());
  for (auto& [name, tensor] : mutable_named) named.emplace_back(name, tensor);
  return named;
}

bool MemoryState::empty() const { return len() == 0; }

int MemoryState::len() const {
  if (layers.empty()) return 0;
  const Tensor& first = layers.front();
  return (first.defined() && first.numel() > 0) ? first.rows() : 0;
}

namespace {

void fill_truncated_normal(Tensor& t, Rng& rng) {
  for (double& v : *t.data) v = rng.truncated_normal(0.0, kInitStd, kInitTrunc);
}

}  // namespace

ModelParams init_model(const ModelConfig& config) { return init_model(config, config.seed); }

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  params.config = config;
  const int d = config.d_model;

  params.embedding = Tensor::zeros({config.vocab_size, d}, true);
  if (!config.tie_embeddings) params.out_proj = Tensor::zeros({d, config.vocab_size}, true);
  params.layers.resize(config.n_layers);
  for (LayerParams& layer : params.layers) {
    layer.wq = Tensor::zeros({d, d}, true);
    layer.wv = Tensor::zeros({d, d}, true);
    layer.wo = Tensor::zeros({d, d}, true);
    if (config.encoding == Encoding::relative) {
      layer.wke = Tensor::zeros({d, d}, true);
      layer.wkr = Tensor::zeros({d, d}, true);
      layer.u = Tensor::zeros({config.n_heads, config.d_head}, true);
      layer.v = Tensor::zeros({config.n_heads, config.d_head}, true);
    } else {
      layer.wk = Tensor::zeros({d, d}, true);
    }
    layer.ln1_gain = Tensor::zeros({d}, true);
    layer.ln1_bias = Tensor::zeros({d}, true);
    layer.ln2_gain = Tensor::zeros({d}, true);
    layer.ln2_bias = Tensor::zeros({d}, true);
    layer.ffn_w1 = Tensor::zeros({d, config.d_ff}, true);
    layer.ffn_b1 = Tensor::zeros({config.d_ff}, true);
    layer.ffn_w2 = Tensor::zeros({config.d_ff, d}, true);
    layer.ffn_b2 = Tensor::zeros({d}, true);
  }

  // Draw in named order so a seed pins every weight.
  Rng rng(seed);
  for (auto& [name, tensor] : params.named_tensors()) {
    if (name.ends_with("ln1.gain") || name.ends_with("ln2.gain")) {
      std::fill(tensor->data->begin(), tensor->data->end(), 1.0);
    } else if (name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2") ||
               name.ends_with("attn.u") || name.ends_with("attn.v")) {
      // zeros: biases and the global attention bias vectors
    } else {
      fill_truncated_normal(*tensor, rng);
    }
  }
  return params;
}

std::int64_t param_count(const ModelConfig& config) {
  const std::int64_t d = config.d_model;
  const std::int64_t dff = config.d_ff;
  std::int64_t per_layer = 0;
  if (config.encoding == Encoding::relative) {
    per_layer += 5 * d * d;  // wq, wke, wkr, wv, wo
    per_layer += 2 * d;      // u, v
  } else {
    per_layer += 4 * d * d;  // wq, wk, wv, wo
  }
  per_layer += 2 * (d * dff) + dff + d;  // ffn
  per_layer += 4 * d;                    // two layer norms
  std::int64_t total = static_cast<std::int64_t>(config.vocab_size) * d + config.n_layers * per_layer;
  if (!config.tie_embeddings) total += d * static_cast<std::int64_t>(config.vocab_size);
  return total;
}

MemoryState update_memory(const MemoryState& old, const std::vector<Tensor>& layer_inputs,
                          int mem_target) {
  if (mem_target < 0) throw ConfigError("update_memory: negative target length");
  MemoryState next;
  next.layers.resize(layer_inputs.size());
  if (mem_target == 0) return next;
  NoGradGuard no_grad;
  for (std::size_t n = 0; n < layer_inputs.size(); ++n) {
    Tensor fresh = ops::stop_gradient(layer_inputs[n]);
    const Tensor* old_layer = (n < old.layers.size() && old.layers[n].defined() &&
                               old.layers[n].numel() > 0)
                                  ? &old.layers[n]
                                  : nullptr;
    Tensor merged = old_layer ? ops::concat_rows(*old_layer, fresh) : fresh;
    const int keep = std::min(mem_target, merged.rows());
    next.layers[n] = ops::slice_rows(merged, merged.rows() - keep, keep);
  }
  return next;
}

LMOutput forward_segment(const ModelParams& params, std::span<const std::int32_t> tokens,
                         const MemoryState& mem, const ForwardOptions& opt) {
  const ModelConfig& config = params.config;
  const int seg_len = static_cast<int>(tokens.size());
  if (seg_len < 1) throw ConfigError("forward_segment: empty segment");
  // seg_len may exceed config.segment_len: evaluation is allowed to extend
  // the window beyond the training length; both encodings extrapolate their
  // sinusoid tables.
  const int d = config.d_model;

  const bool use_memory = config.recurrence && !mem.empty();
  const int mem_len = use_memory ? mem.len() : 0;

  Tensor h = ops::scale(ops::embedding(params.embedding, tokens), std::sqrt(static_cast<double>(d)));
  if (config.encoding == Encoding::absolute) {
    const Tensor& u_table = relattn::sinusoid_cache(d, seg_len);
    Tensor pos = ops::slice_rows(u_table, 0, seg_len);
    h = ops::add(h, pos);
  }

  relattn::AttnOptions attn_opt;
  attn_opt.n_heads = config.n_heads;
  attn_opt.score_scale = 1.0 / std::sqrt(static_cast<double>(config.d_head));
  attn_opt.dropout = config.dropout;
  attn_opt.train = opt.train;
  attn_opt.rng = opt.rng;

  std::vector<Tensor> layer_inputs;  // h^(n-1) per layer, for the memory update
  layer_inputs.reserve(config.n_layers);

  for (int n = 0; n < config.n_layers; ++n) {
    const LayerParams& layer = params.layers[n];
    layer_inputs.push_back(h);
    Tensor layer_mem;
    if (use_memory && n < static_cast<int>(mem.layers.size())) layer_mem = mem.layers[n];

    Tensor attn_out;
    if (config.encoding == Encoding::relative) {
      relattn::RelAttnParams rel{layer.wq, layer.wke, layer.wkr, layer.wv, layer.wo,
                                 layer.u,  layer.v};
      const Tensor& r_table = relattn::sinusoid_cache(d, mem_len + seg_len);
      attn_out = relattn::rel_attention_sublayer(h, layer_mem, rel, layer.ln1_gain, layer.ln1_bias,
                                                 kLayerNormEps, r_table, attn_opt);
    } else {
      relattn::AbsAttnParams abs{layer.wq, layer.wk, layer.wv, layer.wo};
      attn_out = relattn::abs_attention_sublayer(h, layer_mem, abs, layer.ln1_gain, layer.ln1_bias,
                                                 kLayerNormEps, attn_opt);
    }

    Tensor inner = ops::relu(ops::add_rowvec(ops::matmul(attn_out, layer.ffn_w1), layer.ffn_b1));
    if (opt.train && config.dropout > 0.0) {
      if (opt.rng == nullptr) throw ConfigError("forward_segment: dropout requires an rng");
      inner = ops::dropout(inner, config.dropout, *opt.rng);
    }
    Tensor ffn = ops::add_rowvec(ops::matmul(inner, layer.ffn_w2), layer.ffn_b2);
    h = ops::layer_norm(ops::add(ffn, attn_out), layer.ln2_gain, layer.ln2_bias, kLayerNormEps);
  }

  LMOutput out;
  out.logits = config.tie_embeddings ? ops::matmul_nt(h, params.embedding)
                                     : ops::matmul(h, params.out_proj);

  if (config.recurrence) {
    int target = opt.mem_target;
    if (target < 0) target = opt.train ? config.mem_len_train : config.mem_len_eval;
    out.memory = update_memory(mem, layer_inputs, target);
  }

  if (!opt.targets.empty()) {
    if (static_cast<int>(opt.targets.size()) != seg_len) {
      throw ShapeError("forward_segment: target count mismatch");
    }
    out.nll = ops::nll_per_position(out.logits, opt.targets);
  }
  return out;
}

std::vector<std::uint8_t> loss_positions(int seg_len, LossMode mode) {
  std::vector<std::uint8_t> active(seg_len, 1);
  if (mode == LossMode::half && seg_len > 1) {
    const int first_active = (seg_len + 1) / 2;  // ceil(L'/2)
    for (int i = 0; i < first_active; ++i) active[i] = 0;
  }
  return active;
}

Tensor segment_loss(const LMOutput& output, std::span<const std::int32_t> targets, LossMode mode) {
  const auto active = loss_positions(static_cast<int>(targets.size()), mode);
  return ops::cross_entropy(output.logits, targets, active);
}

Tensor segment_loss_sum(const Tensor& logits, std::span<const std::int32_t> targets, LossMode mode,
                        int* active_count) {
  const auto active = loss_positions(static_cast<int>(targets.size()), mode);
  return ops::cross_entropy_sum(logits, targets, active, active_count);
}

std::string encoding_name(Encoding e) {
  return e == Encoding::relative ? "relative" : "absolute";
}

std::string loss_mode_name(LossMode m) { return m == LossMode::full ? "full" : "half"; }

Encoding encoding_from_name(const std::string& name) {
  if (name == "relative") return Encoding::relative;
  if (name == "absolute") return Encoding::absolute;
  throw ConfigError("unknown encoding: " + name);
}

LossMode loss_mode_from_name(const std::string& name) {
  if (name == "full") return LossMode::full;
  if (name == "half") return LossMode::half;
  throw ConfigError("unknown loss mode: " + name);
}

}  // namespace txl::model
