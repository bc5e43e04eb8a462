#include "txl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "txl/errors.hpp"
#include "txl/kernels.hpp"
#include "txl/ops.hpp"

namespace txl::trainer {

namespace ops = txl::ops;

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (batch_lanes <= 0) throw ConfigError("train: batch_lanes must be positive");
  if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
  if (clip_norm <= 0.0) throw ConfigError("train: clip_norm must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("train: Adam betas must be in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
}

std::int64_t TrainConfig::resolved_warmup() const {
  if (warmup_steps >= 0) return warmup_steps;
  return steps / 20;  // 5%
}

Trainer::Trainer(model::ModelParams params, TrainConfig config, std::span<const std::int32_t> stream)
    : params_(std::move(params)),
      config_(config),
      batcher_(stream, config.batch_lanes, params_.config.segment_len),
      rng_(config.seed) {
  config_.validate();
  lane_memory_.resize(config_.batch_lanes);
  for (auto& [name, tensor] : params_.named_tensors()) {
    (void)name;
    adam_m_.push_back(Tensor::zeros(tensor->shape));
    adam_v_.push_back(Tensor::zeros(tensor->shape));
  }
}

double Trainer::lr_at(std::int64_t step) const {
  const std::int64_t warmup = config_.resolved_warmup();
  if (warmup > 0 && step < warmup) {
    return config_.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (config_.schedule == Schedule::constant || config_.steps <= warmup) return config_.lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(config_.steps - warmup);
  return config_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

StepResult Trainer::step() {
  std::optional<corpus::SegmentBatch> batch = batcher_.next();
  if (!batch) {
    batcher_.reset();
    batch = batcher_.next();
    if (!batch) throw ConfigError("train: stream exhausted even after reset");
  }
  return step_on(*batch);
}

StepResult Trainer::step_on(const corpus::SegmentBatch& batch) {
  if (batch.lanes != config_.batch_lanes) throw ConfigError("train: lane count mismatch");

  for (auto& [name, tensor] : params_.named_tensors()) {
    (void)name;
    tensor->zero_grad();
  }

  Tensor total;
  int total_count = 0;
  std::vector<model::MemoryState> fresh_memory(batch.lanes);
  for (int lane = 0; lane < batch.lanes; ++lane) {
    if (batch.continuation[lane] == 0) lane_memory_[lane] = model::MemoryState{};
    model::ForwardOptions opt;
    opt.train = true;
    opt.rng = &rng_;
    model::LMOutput out = model::forward_segment(params_, batch.lane_inputs(lane),
                                                 lane_memory_[lane], opt);
    fresh_memory[lane] = std::move(out.memory);
    int count = 0;
    Tensor lane_sum = model::segment_loss_sum(out.logits, batch.lane_targets(lane),
                                              params_.config.loss_mode, &count);
    total_count += count;
    total = total.defined() ? ops::add(total, lane_sum) : lane_sum;
  }
  Tensor loss = ops::scale(total, 1.0 / total_count);
  const double loss_value = loss.value();
  if (!std::isfinite(loss_value)) {
    throw NumericError("train: non-finite loss at step " + std::to_string(step_ + 1));
  }

  backward(loss);
  clip_gradients();
  const double lr = lr_at(step_);
  apply_adam(lr);
  lane_memory_ = std::move(fresh_memory);

  ++step_;
  StepResult result;
  result.step = step_;
  result.loss = loss_value;
  result.bpc = loss_value / std::numbers::ln2;
  result.lr = lr;
  result.tokens = static_cast<std::int64_t>(batch.lanes) * batch.seg_len;
  return result;
}

double clip_global_norm(const std::vector<Tensor*>& tensors, double max_norm) {
  const auto& kt = kernels::active();
  double sq = 0.0;
  for (Tensor* tensor : tensors) {
    sq += kt.dot(tensor->grad->data(), tensor->grad->data(), tensor->grad->size());
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor* tensor : tensors) {
      kt.scale(factor, tensor->grad->data(), tensor->grad->data(), tensor->grad->size());
    }
  }
  return norm;
}

double Trainer::clip_gradients() {
  std::vector<Tensor*> tensors;
  for (auto& [name, tensor] : params_.named_tensors()) {
    (void)name;
    tensors.push_back(tensor);
  }
  return clip_global_norm(tensors, config_.clip_norm);
}

void Trainer::apply_adam(double lr) {
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_ + 1));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_ + 1));
  auto named = params_.named_tensors();
  for (std::size_t p = 0; p < named.size(); ++p) {
    Tensor& t = *named[p].second;
    std::vector<double>& m = *adam_m_[p].data;
    std::vector<double>& v = *adam_v_[p].data;
    const std::vector<double>& g = *t.grad;
    std::vector<double>& w = *t.data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      double update = m_hat / (std::sqrt(v_hat) + config_.adam_eps);
      if (config_.weight_decay > 0.0) update += config_.weight_decay * w[i];
      w[i] -= lr * update;
    }
  }
}

checkpoint::Checkpoint Trainer::to_checkpoint() const {
  checkpoint::Checkpoint ckpt = checkpoint::from_model(params_);
  ckpt.aux = nlohmann::json{{"format", "trainer.v1"},
                            {"step", step_},
                            {"cursor", batcher_.cursor()},
                            {"lanes", config_.batch_lanes},
                            {"rng", rng_.serialize()}};
  auto named = params_.named_tensors();
  for (std::size_t p = 0; p < named.size(); ++p) {
    ckpt.aux_tensors.emplace_back("adam.m." + named[p].first, adam_m_[p].detached_copy());
    ckpt.aux_tensors.emplace_back("adam.v." + named[p].first, adam_v_[p].detached_copy());
  }
  for (std::size_t lane = 0; lane < lane_memory_.size(); ++lane) {
    const model::MemoryState& mem = lane_memory_[lane];
    for (std::size_t layer = 0; layer < mem.layers.size(); ++layer) {
      if (!mem.layers[layer].defined() || mem.layers[layer].numel() == 0) continue;
      ckpt.aux_tensors.emplace_back(
          "mem." + std::to_string(lane) + "." + std::to_string(layer),
          mem.layers[layer].detached_copy());
    }
  }
  return ckpt;
}

void Trainer::restore(const checkpoint::Checkpoint& ckpt) {
  if (ckpt.aux.is_null() || ckpt.aux.value("format", "") != "trainer.v1") {
    throw IoError("trainer: checkpoint has no trainer state");
  }
  if (ckpt.aux.at("lanes").get<int>() != config_.batch_lanes) {
    throw ConfigError("trainer: lane count differs from checkpoint");
  }
  params_ = checkpoint::to_model(ckpt);
  step_ = ckpt.aux.at("step").get<std::int64_t>();
  batcher_.seek(ckpt.aux.at("cursor").get<std::int64_t>());
  rng_.deserialize(ckpt.aux.at("rng").get<std::string>());

  auto named = params_.named_tensors();
  adam_m_.clear();
  adam_v_.clear();
  for (auto& [name, tensor] : named) {
    const Tensor* m = ckpt.find_aux("adam.m." + name);
    const Tensor* v = ckpt.find_aux("adam.v." + name);
    if (m == nullptr || v == nullptr) throw IoError("trainer: missing Adam state for " + name);
    if (m->shape != tensor->shape || v->shape != tensor->shape) {
      throw IoError("trainer: Adam state shape mismatch for " + name);
    }
    adam_m_.push_back(m->detached_copy());
    adam_v_.push_back(v->detached_copy());
  }

  lane_memory_.assign(config_.batch_lanes, model::MemoryState{});
  for (int lane = 0; lane < config_.batch_lanes; ++lane) {
    model::MemoryState mem;
    mem.layers.resize(params_.config.n_layers);
    bool any = false;
    for (int layer = 0; layer < params_.config.n_layers; ++layer) {
      const Tensor* t = ckpt.find_aux("mem." + std::to_string(lane) + "." + std::to_string(layer));
      if (t != nullptr) {
        mem.layers[layer] = t->detached_copy();
        any = true;
      }
    }
    if (any) lane_memory_[lane] = std::move(mem);
  }
}

void train_loop(Trainer& trainer, const MetricsSink& on_metrics,
                const std::function<void(const Trainer&, std::int64_t)>& on_checkpoint) {
  const TrainConfig& config = trainer.config();
  while (trainer.step_count() < config.steps) {
    const StepResult result = trainer.step();
    const bool last = result.step >= config.steps;
    if (on_metrics && (last || config.log_every <= 0 || result.step % config.log_every == 0)) {
      on_metrics(result);
    }
    if (on_checkpoint && !last && config.ckpt_every > 0 && result.step % config.ckpt_every == 0) {
      on_checkpoint(trainer, result.step);
    }
  }
  if (on_checkpoint) on_checkpoint(trainer, trainer.step_count());
}

}  // namespace txl::trainer
