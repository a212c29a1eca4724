#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace metastable {

// Philox-4x32-10 counter-based generator (Salmon et al., SC 2011). Each
// trajectory owns a stream keyed by (seed, trajectory index), so parallel
// and serial runs produce identical draws.
class PhiloxStream {
 public:
  PhiloxStream(uint64_t seed, uint64_t stream) {
    key_[0] = static_cast<uint32_t>(seed);
    key_[1] = static_cast<uint32_t>(seed >> 32);
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = static_cast<uint32_t>(stream);
    ctr_[3] = static_cast<uint32_t>(stream >> 32);
  }

  // Uniform on (0,1) with a 53-bit mantissa, never exactly 0 or 1.
  double uniform() {
    if (have_ < 2) refill();
    const uint32_t hi = buf_[--have_];
    const uint32_t lo = buf_[--have_];
    const uint64_t bits = (static_cast<uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the Marsaglia polar method; pairs are cached. The
  // rejection candidates use single 32-bit words, which quarters the Philox
  // block consumption of the simulation loop.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * u32_unit() - 1.0;
      v = 2.0 * u32_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  double u32_unit() {
    if (have_ == 0) refill();
    return (static_cast<double>(buf_[--have_]) + 0.5) * 0x1.0p-32;
  }

  void refill() {
    std::array<uint32_t, 4> x = ctr_;
    uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const uint64_t p0 = 0xD2511F53ull * x[0];
      const uint64_t p1 = 0xCD9E8D57ull * x[2];
      const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
      const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
      x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_ = x;
    have_ = 4;
    if (++ctr_[0] == 0) ++ctr_[1];  // 2^64 blocks per stream
  }

  std::array<uint32_t, 4> ctr_{};
  std::array<uint32_t, 2> key_{};
  std::array<uint32_t, 4> buf_{};
  int have_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace metastable
