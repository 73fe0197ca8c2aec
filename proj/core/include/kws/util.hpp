#ifndef KWS_UTIL_HPP
#define KWS_UTIL_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace kws {

// Seeded generator with a pinned uniform mapping so draws are identical on
// every platform (mt19937 output is standardized; distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

  std::uint32_t next_u32() { return gen_(); }

  // uniform in [0, 1)
  double next_double() {
    return next_u32() * (1.0 / 4294967296.0);
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // uniform integer in [0, n), n >= 1; rejection-free modulo bias is
  // negligible for the pool sizes used here but avoid it anyway
  std::uint32_t next_below(std::uint32_t n) {
    const std::uint32_t limit = 0xffffffffu - 0xffffffffu % n;
    std::uint32_t v = next_u32();
    while (v >= limit) v = next_u32();
    return v % n;
  }

 private:
  std::mt19937 gen_;
};

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a(std::uint64_t h, const void* data,
                           std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s) {
  return fnv1a(kFnvOffset, s.data(), s.size());
}

}  // namespace kws

#endif
