#pragma once

#include <array>
#include <cstdint>

namespace embprobe {

// Anything that yields uniform doubles in [0, 1). Seeding code consumes this
// interface so tests can script the draws.
class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual double uniform() = 0;
};

std::uint64_t splitmix64(std::uint64_t& state);

// Sub-seed for stream `index` of a run seeded with `seed`:
//   s = seed; splitmix64(s) ^ splitmix64-finalize(index + 1)
// Restart i of fit_best_of uses derive_seed(rng_seed, i).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// xoshiro256** seeded through splitmix64. Portable: no std distributions, so
// a seed produces the same stream on every platform and standard library.
class Rng final : public UniformSource {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform() override;
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace embprobe
