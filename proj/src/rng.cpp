#include "txl/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "txl/errors.hpp"

namespace txl {

double Rng::uniform() {
  // 53 random bits -> [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t n) {
  if (n <= 0) throw ConfigError("uniform_int: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::int64_t>(x % un);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::truncated_normal(double mean, double stddev, double trunc) {
  double z;
  do {
    z = normal();
  } while (std::abs(z) > trunc);
  return mean + stddev * z;
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_ << ' ' << (have_spare_ ? 1 : 0) << ' ';
  out.precision(17);
  out << spare_;
  return out.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream in(state);
  int spare_flag = 0;
  in >> engine_ >> spare_flag >> spare_;
  if (!in) throw IoError("Rng::deserialize: malformed state");
  have_spare_ = spare_flag != 0;
}

}  // namespace txl
