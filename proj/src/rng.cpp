#include "evost/rng.hpp"

#include <cmath>
#include <cstring>

namespace evost {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(uint32_t ctr[4], uint32_t k0, uint32_t k1) {
  uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * ctr[0];
  uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * ctr[2];
  uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
  uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
  ctr[0] = hi1 ^ ctr[1] ^ k0;
  ctr[1] = lo1;
  ctr[2] = hi0 ^ ctr[3] ^ k1;
  ctr[3] = lo0;
}

}  // namespace

void philox4x32_10(const uint32_t counter[4], const uint32_t key[2], uint32_t out[4]) {
  uint32_t c[4] = {counter[0], counter[1], counter[2], counter[3]};
  uint32_t k0 = key[0], k1 = key[1];
  for (int r = 0; r < 10; ++r) {
    philox_round(c, k0, k1);
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  out[0] = c[0];
  out[1] = c[1];
  out[2] = c[2];
  out[3] = c[3];
}

Rng::Rng(uint64_t key) : key64_(key), buf_pos_(4) {
  key_[0] = static_cast<uint32_t>(key);
  key_[1] = static_cast<uint32_t>(key >> 32);
  ctr_[0] = ctr_[1] = ctr_[2] = ctr_[3] = 0;
}

uint64_t Rng::derive_key(uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ fnv1a64(tag));
}
uint64_t Rng::derive_key(uint64_t seed, std::string_view tag, uint64_t a) {
  return splitmix64(derive_key(seed, tag) ^ splitmix64(a));
}
uint64_t Rng::derive_key(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b) {
  return splitmix64(derive_key(seed, tag, a) ^ splitmix64(~b));
}

Rng Rng::stream(uint64_t seed, std::string_view tag) { return Rng(derive_key(seed, tag)); }
Rng Rng::stream(uint64_t seed, std::string_view tag, uint64_t a) {
  return Rng(derive_key(seed, tag, a));
}
Rng Rng::stream(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b) {
  return Rng(derive_key(seed, tag, a, b));
}

void Rng::refill() {
  philox4x32_10(ctr_, key_, buf_);
  // 128-bit counter increment.
  if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
  buf_pos_ = 0;
}

uint32_t Rng::next_u32() {
  if (buf_pos_ >= 4) refill();
  ++words_;
  return buf_[buf_pos_++];
}

uint64_t Rng::next_u64() {
  uint64_t lo = next_u32();
  uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

uint64_t Rng::below(uint64_t n) {
  // Reject the tail that would bias the modulus.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::exponential(double scale) { return -scale * std::log(uniform_open()); }

double Rng::normal() {
  double u1 = uniform_open();
  double u2 = uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Rng::gamma(double shape, double scale) {
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
    double u = uniform_open();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = uniform_open();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v * scale;
  }
}

}  // namespace evost
