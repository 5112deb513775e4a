#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace beamlearn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derived stream seed for (master seed, stream index); collision-resistant
// enough for sample-parallel generation.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x51ed2701ULL));
}

// Seeded generator with explicit draw algorithms so that results depend only
// on the seed, not on library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  std::size_t uniform_index(std::size_t n) {
    // Rejection-free modulo is fine here; n is tiny compared to 2^64.
    return static_cast<std::size_t>(gen_() % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller (deterministic across platforms).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Circularly-symmetric complex Gaussian with E|z|^2 = var.
  std::complex<double> cgauss(double var = 1.0) {
    double s = std::sqrt(var / 2.0);
    double re = s * normal();
    double im = s * normal();
    return {re, im};
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace beamlearn
