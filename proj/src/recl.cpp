#include "txl/recl.hpp"

#include <algorithm>
#include <cmath>

#include "txl/errors.hpp"

namespace txl::recl {

void ReclConfig::validate() const {
  if (!(r > 0.0 && r <= 1.0)) throw ConfigError("recl: r must be in (0, 1]");
  if (delta < 1) throw ConfigError("recl: delta must be >= 1");
  if (initial_c < 1) throw ConfigError("recl: initial context must be >= 1");
  if (threshold <= 0.0) throw ConfigError("recl: threshold must be positive");
  if (max_c < 0) throw ConfigError("recl: max context must be >= 0");
}

void ModelGroup::validate() const {
  if (tables.empty()) throw ConfigError("recl: empty model group");
  const evaluator::LossTable& first = tables.front();
  for (const evaluator::LossTable& table : tables) {
    if (table.contexts != first.contexts || table.count != first.count || table.t0 != first.t0 ||
        table.stream_id != first.stream_id) {
      throw ConfigError("recl: loss tables do not cover identical positions and contexts");
    }
  }
}

int ModelGroup::model_index(const std::string& model_id) const {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (tables[i].model_id == model_id) return static_cast<int>(i);
  }
  throw ConfigError("recl: no model named " + model_id + " in the group");
}

const std::vector<int>& ModelGroup::contexts() const {
  if (tables.empty()) throw ConfigError("recl: empty model group");
  return tables.front().contexts;
}

std::int64_t ModelGroup::positions() const {
  return tables.empty() ? 0 : tables.front().count;
}

std::vector<double> baseline(const ModelGroup& group, int c) {
  group.validate();
  std::vector<double> best = group.tables.front().at_context(c);
  for (std::size_t i = 1; i < group.tables.size(); ++i) {
    const std::vector<double>& losses = group.tables[i].at_context(c);
    for (std::size_t t = 0; t < best.size(); ++t) best[t] = std::min(best[t], losses[t]);
  }
  return best;
}

std::vector<std::int64_t> top_r_positions(std::span<const double> baseline_losses, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw ConfigError("recl: r must be in (0, 1]");
  const std::int64_t n = static_cast<std::int64_t>(baseline_losses.size());
  const std::int64_t keep = static_cast<std::int64_t>(
      std::ceil(r * static_cast<double>(n)));
  std::vector<std::int64_t> order(n);
  for (std::int64_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    if (baseline_losses[a] != baseline_losses[b]) return baseline_losses[a] > baseline_losses[b];
    return a < b;  // tie: earlier position wins
  });
  order.resize(static_cast<std::size_t>(std::min(keep, n)));
  return order;
}

double relative_loss(const ModelGroup& group, int model_index, int c, int c_prime,
                     std::span<const std::int64_t> positions) {
  if (positions.empty()) throw ConfigError("recl: empty position set");
  const std::vector<double> base = baseline(group, c);
  const std::vector<double>& model_losses =
      group.tables.at(static_cast<std::size_t>(model_index)).at_context(c_prime);
  double total = 0.0;
  for (std::int64_t t : positions) {
    total += std::min(base[static_cast<std::size_t>(t)], model_losses[static_cast<std::size_t>(t)]);
  }
  return total / static_cast<double>(positions.size());
}

double relative_gain(const ModelGroup& group, int model_index, int c, int c_prime,
                     std::span<const std::int64_t> positions) {
  const double f_short = relative_loss(group, model_index, c, c, positions);
  const double f_long = relative_loss(group, model_index, c, c_prime, positions);
  return (std::exp(f_short) - std::exp(f_long)) / std::exp(f_short);
}

ReclResult recl_search(const ModelGroup& group, int model_index, const ReclConfig& config) {
  group.validate();
  config.validate();
  const std::vector<int>& contexts = group.contexts();
  const int max_c = config.max_c > 0 ? config.max_c : contexts.back();

  auto has_context = [&](int c) {
    return std::find(contexts.begin(), contexts.end(), c) != contexts.end();
  };
  if (!has_context(config.initial_c)) {
    throw ConfigError("recl: tables have no losses at the initial context " +
                      std::to_string(config.initial_c));
  }

  ReclResult result;
  result.model_id = group.tables.at(static_cast<std::size_t>(model_index)).model_id;

  int c = config.initial_c;
  while (true) {
    const int c_prime = c + config.delta;
    if (c_prime > max_c) {
      result.recl = c;
      result.saturated = false;
      return result;
    }
    if (!has_context(c_prime)) {
      throw ConfigError("recl: tables have no losses at context " + std::to_string(c_prime));
    }
    const std::vector<double> base = baseline(group, c);
    const std::vector<std::int64_t> top = top_r_positions(base, config.r);
    const double gain = relative_gain(group, model_index, c, c_prime, top);
    result.trace.push_back({c, c_prime, gain});
    if (gain < config.threshold) {
      result.recl = c;
      result.saturated = true;
      return result;
    }
    c = c_prime;
  }
}

nlohmann::json result_to_json(const ReclResult& result, const ReclConfig& config) {
  nlohmann::json trace = nlohmann::json::array();
  for (const TraceEntry& entry : result.trace) {
    trace.push_back({{"c", entry.c}, {"c_prime", entry.c_prime}, {"gain", entry.gain}});
  }
  return nlohmann::json{{"model", result.model_id},
                        {"r", config.r},
                        {"delta", config.delta},
                        {"initial_c", config.initial_c},
                        {"threshold", config.threshold},
                        {"recl", result.recl},
                        {"saturated", result.saturated},
                        {"trace", trace}};
}

}  // namespace txl::recl
