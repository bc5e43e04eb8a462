#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "txl/model.hpp"
#include "txl/tensor.hpp"

namespace txl::checkpoint {

// Versioned binary container: a JSON config record, the named model tensors,
// and an optional auxiliary section (JSON + named tensors) used for trainer
// state. All tensor payloads are raw little-endian float64.
struct Checkpoint {
  nlohmann::json config;
  std::vector<std::pair<std::string, Tensor>> tensors;
  nlohmann::json aux;  // null when absent
  std::vector<std::pair<std::string, Tensor>> aux_tensors;

  const Tensor* find(const std::string& name) const;
  const Tensor* find_aux(const std::string& name) const;
};

void save(const std::string& path, const Checkpoint& ckpt);
Checkpoint load(const std::string& path);

nlohmann::json config_to_json(const model::ModelConfig& config);
model::ModelConfig config_from_json(const nlohmann::json& j);

// Model params <-> checkpoint sections (aux left untouched).
Checkpoint from_model(const model::ModelParams& params);
model::ModelParams to_model(const Checkpoint& ckpt);

}  // namespace txl::checkpoint
