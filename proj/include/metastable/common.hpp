#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace metastable {

using Vec = std::vector<double>;

// Error taxonomy mirrored by the CLI exit codes.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};
struct StaleArtifact : std::runtime_error {
  explicit StaleArtifact(const std::string& what) : std::runtime_error(what) {}
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double dist2(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline Vec axpy(double alpha, const Vec& x, const Vec& y) {
  Vec r(y);
  for (size_t i = 0; i < x.size(); ++i) r[i] += alpha * x[i];
  return r;
}

inline void scale_inplace(Vec& x, double alpha) {
  for (double& v : x) v *= alpha;
}

// Halton low-discrepancy sequence, used for default sample clouds.
inline double halton(uint64_t index, uint64_t base) {
  double f = 1.0, r = 0.0;
  uint64_t i = index;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

inline std::vector<Vec> halton_box(size_t n, const Vec& lo, const Vec& hi) {
  static const uint64_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  const size_t d = lo.size();
  std::vector<Vec> pts(n, Vec(d));
  for (size_t k = 0; k < n; ++k)
    for (size_t j = 0; j < d; ++j)
      pts[k][j] = lo[j] + (hi[j] - lo[j]) * halton(k + 1, primes[j % 10]);
  return pts;
}

// FNV-1a 64-bit, used to chain artifacts to the spec they came from.
inline uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace metastable
