#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "privmon/common.hpp"

namespace privmon {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based splittable random stream. Streams are identified by
/// (seed, name, index); distinct names/indices give independent streams,
/// which keeps mechanism noise independent of plant noise by construction.
/// Normal variates come from Box-Muller on the raw uniform stream, so a
/// given stream reproduces bit-identical sequences on every platform.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = detail::splitmix64(s);
    s ^= detail::fnv1a64(name);
    std::uint64_t b = detail::splitmix64(s);
    s ^= index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
    std::uint64_t c = detail::splitmix64(s);
    state_ = a ^ (b * 0x94D049BB133111EBULL) ^ c;
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Vector standard_normal(Index n) {
    Vector z(n);
    for (Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

 private:
  std::uint64_t state_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Draws x ~ N(mean, Sigma) by coloring standard normals with the symmetric
/// square root of Sigma (PSD-but-singular covariances are fine).
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& sigma) : root_(symmetric_sqrt(sigma)) {}
  GaussianSampler(Vector mean, const Matrix& sigma)
      : mean_(std::move(mean)), root_(symmetric_sqrt(sigma)) {}

  Vector draw(RngStream& stream) const {
    Vector z = root_ * stream.standard_normal(root_.cols());
    if (mean_.size() > 0) z += mean_;
    return z;
  }

  const Matrix& root() const { return root_; }

 private:
  Vector mean_;
  Matrix root_;
};

}  // namespace privmon
