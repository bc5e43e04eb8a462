#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "txl/evaluator.hpp"

namespace txl::recl {

struct ReclConfig {
  double r = 0.1;            // fraction of hardest positions kept
  int initial_c = 0;         // starting short context
  int delta = 0;             // context step
  double threshold = 0.01;   // strict: the search continues while gain >= threshold
  int max_c = 0;             // 0 = largest context present in the tables

  void validate() const;
};

// Loss tables of the compared models, all over the same positions and
// context lengths.
struct ModelGroup {
  std::vector<evaluator::LossTable> tables;

  void validate() const;
  int model_index(const std::string& model_id) const;
  const std::vector<int>& contexts() const;
  std::int64_t positions() const;
};

// b(c, t): per-position minimum loss across the group at context c.
std::vector<double> baseline(const ModelGroup& group, int c);

// Indices of the ceil(r * n) positions with the largest baseline loss;
// ties resolved toward the lower position index.
std::vector<std::int64_t> top_r_positions(std::span<const double> baseline_losses, double r);

// f_i(c, c'): mean over the selected positions of min(b(c,t), l_i(c',t)).
double relative_loss(const ModelGroup& group, int model_index, int c, int c_prime,
                     std::span<const std::int64_t> positions);

// g_i(c, c') = (exp f_i(c,c) - exp f_i(c,c')) / exp f_i(c,c).
double relative_gain(const ModelGroup& group, int model_index, int c, int c_prime,
                     std::span<const std::int64_t> positions);

struct TraceEntry {
  int c = 0;
  int c_prime = 0;
  double gain = 0.0;
};

struct ReclResult {
  std::string model_id;
  int recl = 0;
  bool saturated = true;  // false when the search ran out of contexts first
  std::vector<TraceEntry> trace;
};

// Walks c' = c + delta, returning the first c whose gain drops below the
// threshold; a gain exactly at the threshold continues the search. Runs out
// of contexts -> largest visited c with saturated = false.
ReclResult recl_search(const ModelGroup& group, int model_index, const ReclConfig& config);

nlohmann::json result_to_json(const ReclResult& result, const ReclConfig& config);

}  // namespace txl::recl
