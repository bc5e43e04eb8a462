#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "txl/checkpoint.hpp"
#include "txl/corpus.hpp"
#include "txl/model.hpp"
#include "txl/rng.hpp"

namespace txl::trainer {

enum class Schedule { cosine, constant };

struct TrainConfig {
  std::int64_t steps = 1000;
  int batch_lanes = 8;
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  std::int64_t warmup_steps = -1;  // -1 = 5% of steps
  Schedule schedule = Schedule::cosine;
  std::int64_t log_every = 50;
  std::int64_t ckpt_every = 0;  // 0 = final checkpoint only
  std::uint64_t seed = 0;

  void validate() const;
  std::int64_t resolved_warmup() const;
};

struct StepResult {
  std::int64_t step = 0;   // 1-based after the update
  double loss = 0.0;       // mean nll (nats) over active positions
  double bpc = 0.0;
  double lr = 0.0;
  std::int64_t tokens = 0;
};

// Segment-level training: per-lane carried memory, loss over the configured
// positions, backward, global-norm clip, Adam, memory update. Gradients stay
// within the segment; the carried state is value-only.
class Trainer {
 public:
  Trainer(model::ModelParams params, TrainConfig config, std::span<const std::int32_t> stream);

  StepResult step();
  StepResult step_on(const corpus::SegmentBatch& batch);

  const model::ModelParams& params() const { return params_; }
  model::ModelParams& params() { return params_; }
  const TrainConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  double lr_at(std::int64_t step) const;

  // Full trainer state (params + moments + lane memory + rng + cursor);
  // loading reproduces the uninterrupted run exactly.
  checkpoint::Checkpoint to_checkpoint() const;
  void restore(const checkpoint::Checkpoint& ckpt);

 private:
  model::ModelParams params_;
  TrainConfig config_;
  corpus::SegmentBatcher batcher_;
  std::vector<model::MemoryState> lane_memory_;
  std::vector<Tensor> adam_m_, adam_v_;
  std::int64_t step_ = 0;
  Rng rng_;

  double clip_gradients();
  void apply_adam(double lr);
};

// Scales every gradient by max_norm/norm when the global norm exceeds
// max_norm (direction preserved); returns the pre-clip norm.
double clip_global_norm(const std::vector<Tensor*>& tensors, double max_norm);

using MetricsSink = std::function<void(const StepResult&)>;

// Runs the remaining steps, emitting metrics every log_every steps and
// checkpoints every ckpt_every steps plus a final one.
void train_loop(Trainer& trainer, const MetricsSink& on_metrics,
                const std::function<void(const Trainer&, std::int64_t)>& on_checkpoint);

}  // namespace txl::trainer
