#pragma once

#include <cmath>
#include <cstdint>

namespace pushmpc {

// Deterministic RNG used everywhere reproducibility matters.  The
// distribution helpers are implemented by hand because the std::*_distribution
// classes are implementation-defined; with these, a given seed produces the
// same stream on every platform/compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds (0, 1, 2, ...) decorrelate immediately.
    next();
    next();
  }

  // splitmix64 step; full 64-bit output.
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method (deterministic given the stream).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // Derive an independent stream (e.g. per worker / per restart).
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    Rng r(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
    return r.next();
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Composite Gauss-Legendre quadrature over [lo, hi] with `panels`
// subintervals of a fixed 16-point rule.  Plenty for the smooth 1-D
// integrands used in this project.
template <typename F>
double integrate(F&& f, double lo, double hi, int panels = 32) {
  // Abscissae/weights of the 16-point Gauss-Legendre rule on [-1, 1]
  // (positive half; the rule is symmetric).
  static constexpr double kX[8] = {
      0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
      0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
      0.9445750230732326, 0.9894009349916499};
  static constexpr double kW[8] = {
      0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
      0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
      0.0622535239386479, 0.0271524594117541};
  const double hw = (hi - lo) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * hw;
    const double mid = a + 0.5 * hw;
    const double half = 0.5 * hw;
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
      s += kW[i] * (f(mid + half * kX[i]) + f(mid - half * kX[i]));
    }
    total += s * half;
  }
  return total;
}

}  // namespace pushmpc
