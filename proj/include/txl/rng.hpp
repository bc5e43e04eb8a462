#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace txl {

// Seeded RNG with a fully pinned-down draw sequence. Normal variates use
// Box-Muller on top of the raw mt19937_64 stream instead of
// std::normal_distribution, so two builds of the toolkit draw the same
// numbers and checkpoint resume can replay the stream exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::int64_t uniform_int(std::int64_t n);
  // Standard normal.
  double normal();
  // Normal(mean, stddev) rejected outside mean +/- trunc*stddev.
  double truncated_normal(double mean, double stddev, double trunc);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace txl
