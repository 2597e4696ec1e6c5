#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace interceptor {

/// Named, seeded random stream. Streams with different names drawn from the
/// same scenario seed are independent of each other and of call order elsewhere.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view name) : engine_(derive(seed, name)) {}

  // 53-bit mantissa draw in [0, 1). mt19937_64 output is fully specified, so
  // this is reproducible across standard libraries (unlike std distributions).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next() { return engine_(); }

 private:
  static std::uint64_t derive(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    std::uint64_t z = seed ^ h;  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace interceptor
