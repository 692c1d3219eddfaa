#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "evost/rng.hpp"

using namespace evost;

TEST_CASE("philox known-answer vectors") {
  uint32_t out[4];

  const uint32_t zero_ctr[4] = {0, 0, 0, 0};
  const uint32_t zero_key[2] = {0, 0};
  philox4x32_10(zero_ctr, zero_key, out);
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  const uint32_t ones_ctr[4] = {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu};
  const uint32_t ones_key[2] = {0xffffffffu, 0xffffffffu};
  philox4x32_10(ones_ctr, ones_key, out);
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);

  const uint32_t pi_ctr[4] = {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u};
  const uint32_t pi_key[2] = {0xa4093822u, 0x299f31d0u};
  philox4x32_10(pi_ctr, pi_key, out);
  CHECK(out[0] == 0xd16cfe09u);
  CHECK(out[1] == 0x94fdccebu);
  CHECK(out[2] == 0x5001e420u);
  CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("zero-key stream replays the zero known-answer block") {
  Rng rng(0);
  CHECK(rng.next_u32() == 0x6627e8d5u);
  CHECK(rng.next_u32() == 0xe169c58du);
  CHECK(rng.next_u32() == 0xbc57ac4cu);
  CHECK(rng.next_u32() == 0x9b00dbd8u);
  CHECK(rng.words_drawn() == 4);
}

TEST_CASE("derived stream key and first draws are frozen") {
  CHECK(Rng::derive_key(42, "unit") == 0xfe14a66ed4919590ull);
  Rng rng = Rng::stream(42, "unit");
  CHECK(rng.key() == 0xfe14a66ed4919590ull);
  CHECK(rng.next_u64() == 0x5c3d4d31e8b04b28ull);
  CHECK(rng.next_u64() == 0x6b515332af38c06cull);
  CHECK(rng.next_u64() == 0x668ab541f0f74a63ull);
  CHECK(rng.next_u64() == 0xdd6ba5b624e53444ull);
  CHECK(rng.words_drawn() == 8);
}

TEST_CASE("stream derivation separates tags and indices") {
  std::set<uint64_t> keys;
  keys.insert(Rng::derive_key(7, "a"));
  keys.insert(Rng::derive_key(7, "b"));
  keys.insert(Rng::derive_key(8, "a"));
  keys.insert(Rng::derive_key(7, "a", 0));
  keys.insert(Rng::derive_key(7, "a", 1));
  keys.insert(Rng::derive_key(7, "a", 0, 0));
  keys.insert(Rng::derive_key(7, "a", 0, 1));
  keys.insert(Rng::derive_key(7, "a", 1, 0));
  CHECK(keys.size() == 8);

  // Same derivation twice gives the same stream.
  Rng a = Rng::stream(123, "gom", 4, 2);
  Rng b = Rng::stream(123, "gom", 4, 2);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform01 and uniform_open stay inside their ranges") {
  Rng rng = Rng::stream(1, "range");
  for (int i = 0; i < 20000; ++i) {
    double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = rng.uniform_open();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("below is in range and roughly uniform") {
  Rng rng = Rng::stream(2, "below");
  std::vector<int> counts(10, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    uint64_t x = rng.below(10);
    REQUIRE(x < 10);
    ++counts[x];
  }
  for (int c : counts) {
    CHECK(c > draws / 10 - 600);  // ~6 sigma
    CHECK(c < draws / 10 + 600);
  }
  CHECK(rng.below(1) == 0);
}

TEST_CASE("shuffle is a permutation and differs across streams") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng rng = Rng::stream(3, "shuffle");
  rng.shuffle(w);
  std::vector<int> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);
  CHECK(w != v);  // 1/100! chance of a false alarm

  std::vector<int> w2(100);
  std::iota(w2.begin(), w2.end(), 0);
  Rng rng2 = Rng::stream(3, "shuffle");
  rng2.shuffle(w2);
  CHECK(w2 == w);
}

TEST_CASE("moment checks for the distribution samplers") {
  Rng rng = Rng::stream(4, "moments");
  const int n = 200000;

  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = rng.exponential(2.0);
    CHECK(x >= 0.0);
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(var == doctest::Approx(4.0).epsilon(0.06));

  sum = sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1).scale(0.02));
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));

  // Gamma(k, theta): mean k*theta, var k*theta^2; include a shape < 1 case.
  for (double shape : {0.5, 2.0, 4.5}) {
    sum = sum2 = 0;
    for (int i = 0; i < n; ++i) {
      double x = rng.gamma(shape, 1.5);
      CHECK(x > 0.0);
      sum += x;
      sum2 += x * x;
    }
    mean = sum / n;
    var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(shape * 1.5).epsilon(0.03));
    CHECK(var == doctest::Approx(shape * 2.25).epsilon(0.08));
  }
}

TEST_CASE("bootstrap coverage matches the 1 - 1/e law") {
  // Fraction of distinct indices drawn in an n-out-of-n resample -> 0.632.
  Rng rng = Rng::stream(5, "boot");
  const size_t n = 20000;
  std::vector<uint8_t> seen(n, 0);
  for (size_t i = 0; i < n; ++i) seen[rng.below(n)] = 1;
  double frac = std::accumulate(seen.begin(), seen.end(), 0.0) / double(n);
  CHECK(frac == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.02));
}
