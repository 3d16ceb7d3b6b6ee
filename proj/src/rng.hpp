#pragma once

// Internal helpers: portable uniform draws and compensated summation.

#include <cmath>
#include <cstdint>
#include <random>

namespace sedlab::detail {

// mt19937_64 is fully specified by the standard; the distributions are not, so map bits by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }
  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

struct Neumaier {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x)) c += (s - t) + x;
    else c += (x - t) + s;
    s = t;
  }
  double sum() const { return s + c; }
};

}  // namespace sedlab::detail
