#ifndef DUALHOM_EXACT_SUM_HPP
#define DUALHOM_EXACT_SUM_HPP

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>

namespace dualhom {

// Order-independent accumulation of doubles into a fixed-point register
// spanning the full exponent range (2^-1074 .. 2^1024 in 32-bit limbs).
// Sums are exact, so permuting the inputs cannot change the rounded result;
// the cell solver relies on this for its translation-equivariance guarantee.
class ExactAccumulator {
 public:
  void add(double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    const std::uint64_t expo = (bits >> 52) & 0x7FF;
    std::uint64_t mant = bits & 0xFFFFFFFFFFFFFull;
    if (expo == 0x7FF) {  // inf/nan: poison the register
      nonfinite_ = true;
      poison_ = v;
      return;
    }
    int p;  // offset of the value's 2^-1074 bit
    if (expo == 0) {
      if (mant == 0) return;
      p = 0;
    } else {
      mant |= 1ull << 52;
      p = static_cast<int>(expo) - 1;
    }
    __int128 m = static_cast<__int128>(mant);
    if (bits >> 63) m = -m;
    const int q = p >> 5;
    const int r = p & 31;
    __int128 ms = m << r;  // fits in 85 bits
    // three 32-bit chunks, low two non-negative
    const std::int64_t c0 = static_cast<std::int64_t>(ms & 0xFFFFFFFF);
    ms = (ms - c0) >> 32;
    const std::int64_t c1 = static_cast<std::int64_t>(ms & 0xFFFFFFFF);
    ms = (ms - c1) >> 32;
    const std::int64_t c2 = static_cast<std::int64_t>(ms);
    limb_[q] += c0;
    limb_[q + 1] += c1;
    limb_[q + 2] += c2;
    if (++pending_ >= kNormalizeEvery) normalize();
  }

  void add_product(double a, double b) { add(a * b); }

  double value() const {
    if (nonfinite_) return poison_;
    std::array<std::int64_t, kLimbs> t = limb_;
    carry_propagate(t);
    long double acc = 0.0L;
    for (int i = kLimbs - 1; i >= 0; --i) {
      if (t[i] != 0 || acc != 0.0L) {
        acc += std::ldexp(static_cast<long double>(t[i]), 32 * i - 1074);
      }
    }
    return static_cast<double>(acc);
  }

 private:
  // 2098 bits of range plus headroom for carries.
  static constexpr int kLimbs = 70;
  static constexpr int kNormalizeEvery = 1 << 28;

  void normalize() {
    carry_propagate(limb_);
    pending_ = 0;
  }

  static void carry_propagate(std::array<std::int64_t, kLimbs>& t) {
    for (int i = 0; i + 1 < kLimbs; ++i) {
      const std::int64_t carry = t[i] >> 32;
      t[i] -= carry << 32;
      t[i + 1] += carry;
    }
  }

  std::array<std::int64_t, kLimbs> limb_{};
  long pending_ = 0;
  bool nonfinite_ = false;
  double poison_ = 0.0;
};

inline double exact_sum(std::span<const double> v) {
  ExactAccumulator acc;
  for (double x : v) acc.add(x);
  return acc.value();
}

inline double exact_dot(std::span<const double> a, std::span<const double> b) {
  ExactAccumulator acc;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) acc.add(a[i] * b[i]);
  return acc.value();
}

}  // namespace dualhom

#endif
