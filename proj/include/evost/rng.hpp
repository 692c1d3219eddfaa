#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace evost {

uint64_t fnv1a64(std::string_view s);
uint64_t splitmix64(uint64_t x);

// One raw block (10 rounds); exposed for known-answer vectors.
void philox4x32_10(const uint32_t counter[4], const uint32_t key[2], uint32_t out[4]);

// Counter-based generator: Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3").  A stream is (key, counter); the counter is
// bumped per block, so jumping between streams never aliases.  Streams are
// derived hierarchically from a master seed plus a purpose tag and optional
// indices, which keeps every consumer of randomness (splits, init, GOM per
// individual per generation, ...) on its own reproducible substream.
class Rng {
 public:
  explicit Rng(uint64_t key);

  static Rng stream(uint64_t seed, std::string_view tag);
  static Rng stream(uint64_t seed, std::string_view tag, uint64_t a);
  static Rng stream(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b);

  // Key derivation without constructing the generator (audit trail).
  static uint64_t derive_key(uint64_t seed, std::string_view tag);
  static uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a);
  static uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b);

  uint64_t key() const { return key64_; }

  uint32_t next_u32();
  uint64_t next_u64();

  // 32-bit words consumed so far (reproducibility audits).
  uint64_t words_drawn() const { return words_; }

  // [0,1) from the top 53 bits.
  double uniform01();
  // (0,1): never returns an endpoint, safe under log().
  double uniform_open();
  double uniform(double lo, double hi);

  // Unbiased integer in [0,n), n >= 1 (rejection sampling).
  uint64_t below(uint64_t n);

  double exponential(double scale);
  double normal();  // Box-Muller, consumes two uniforms
  // Marsaglia-Tsang; any shape > 0.
  double gamma(double shape, double scale);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  void refill();

  uint64_t key64_;
  uint32_t key_[2];
  uint32_t ctr_[4];
  uint32_t buf_[4];
  int buf_pos_;
  uint64_t words_ = 0;
};

}  // namespace evost
