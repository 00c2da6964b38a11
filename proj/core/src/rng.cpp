#include "fddlab/rng.hpp"

#include <cmath>

namespace fddlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t s = splitmix64(root);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

CVector complex_normal(Rng& rng, Index n) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CVector out(n);
  for (Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    out[i] = Complex(re, im);
  }
  return out;
}

CMatrix complex_normal(Rng& rng, Index rows, Index cols) {
  CVector flat = complex_normal(rng, rows * cols);
  return Eigen::Map<CMatrix>(flat.data(), rows, cols);
}

}  // namespace fddlab
