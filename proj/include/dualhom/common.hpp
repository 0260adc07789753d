#ifndef DUALHOM_COMMON_HPP
#define DUALHOM_COMMON_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dualhom {

// Spatial dimension is 1 or 2 throughout; vectors are fixed-size with the
// unused component kept at zero.
using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

inline Vec2 vec2(double a, double b = 0.0) { return {a, b}; }

inline double dot(const Vec2& a, const Vec2& b, int dim) {
  double s = a[0] * b[0];
  if (dim > 1) s += a[1] * b[1];
  return s;
}

inline double norm2(const Vec2& a, int dim) { return std::sqrt(dot(a, a, dim)); }

// Axis-aligned box domain.
struct Box {
  int dim = 1;
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};

  double extent(int i) const { return hi[i] - lo[i]; }
  double volume() const {
    double v = extent(0);
    if (dim > 1) v *= extent(1);
    return v;
  }
  bool contains(const Vec2& x, double slack = 1e-12) const {
    for (int i = 0; i < dim; ++i) {
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    }
    return true;
  }
  double boundary_distance(const Vec2& x) const {
    double d = extent(0);
    for (int i = 0; i < dim; ++i) {
      d = std::min(d, x[i] - lo[i]);
      d = std::min(d, hi[i] - x[i]);
    }
    return d;
  }
};

struct ParseError : std::runtime_error {
  std::size_t offset;
  ParseError(const std::string& what, std::size_t off)
      : std::runtime_error(what + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or data that downstream solvers refuse.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear-solver or assembly failure.
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest round-trippable decimal form; used everywhere output must be
// byte-reproducible.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// FNV-1a, used for config/coefficient hashing in cache keys and metadata.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 1469598103934665603ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline double frac01(double v) {
  double f = v - std::floor(v);
  if (f >= 1.0) f = 0.0;  // guards against floor rounding at exact integers
  return f;
}

}  // namespace dualhom

#endif
