#pragma once

// Seeded RNG with hand-rolled distributions. std:: distributions are
// implementation-defined, so we draw bits from mt19937_64 and map them
// ourselves to keep results identical across standard libraries.

#include <cstdint>
#include <random>

#include "softdsl/la.hpp"

namespace sdsl {

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0.
  uint64_t uniform_index(uint64_t n) {
    // Rejection sampling over the largest multiple of n.
    uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  Vec3 uniform_vec3(const Vec3& lo, const Vec3& hi) {
    return {uniform(lo.x, hi.x), uniform(lo.y, hi.y), uniform(lo.z, hi.z)};
  }

  double normal() {
    // Box-Muller; one value per call keeps the draw sequence simple.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform rotation (Shoemake).
  Quat uniform_quat() {
    double u1 = uniform(), u2 = uniform(), u3 = uniform();
    double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    double t1 = 6.283185307179586 * u2, t2 = 6.283185307179586 * u3;
    return qnormalize({b * std::cos(t2), a * std::sin(t1), a * std::cos(t1), b * std::sin(t2)});
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sdsl
