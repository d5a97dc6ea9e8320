#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace turnrl {

// Mixes a master seed with a component label and index into an independent
// stream seed. Every random draw in the library goes through a stream derived
// this way, so adding a consumer never shifts another consumer's numbers.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng derive(std::uint64_t master, std::string_view label,
                    std::uint64_t index = 0) {
    return Rng(derive_seed(master, label, index));
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  // Index drawn with probability proportional to weights (need not sum to 1).
  int categorical(std::span<const double> weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace turnrl
