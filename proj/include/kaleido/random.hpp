#pragma once

// Seeded random instances: factors, K-matrices, permutations, dense matrices.

#include <random>

#include "kaleido/permutation.hpp"

namespace kaleido {

using Rng = std::mt19937_64;

inline Scalar random_scalar(Rng& rng, bool complex = true) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double re = g(rng);
  return complex ? Scalar(re, g(rng)) : Scalar(re, 0.0);
}

inline Vector random_vector(Rng& rng, std::size_t n, bool complex = true) {
  Vector v(n);
  for (auto& z : v) z = random_scalar(rng, complex);
  return v;
}

/// Gaussian entries scaled by `scale`.
inline ButterflyFactorMatrix random_factor(Rng& rng, std::size_t n, std::size_t k, double scale = 1.0,
                                           bool complex = true) {
  ButterflyFactorMatrix f(n, k);
  for (std::size_t p = 0; p < f.pairs(); ++p)
    f.set_block(p, scale * random_scalar(rng, complex), scale * random_scalar(rng, complex),
                scale * random_scalar(rng, complex), scale * random_scalar(rng, complex));
  return f;
}

/// Butterfly matrix with 2x2 blocks scaled by 1/sqrt(2), so E[M^* M] = I for real Gaussian entries.
inline ButterflyMatrix random_butterfly(Rng& rng, std::size_t n, bool complex = true) {
  std::vector<ButterflyFactorMatrix> fs;
  const double s = complex ? 0.5 : std::sqrt(0.5);
  for (std::size_t k = n; k >= 2; k /= 2) fs.push_back(random_factor(rng, n, k, s, complex));
  return ButterflyMatrix(n, std::move(fs));
}

inline KMatrix random_kmatrix(Rng& rng, std::size_t n, std::size_t w, std::size_t e = 1, bool complex = true) {
  std::vector<BBSegment> segs;
  for (std::size_t i = 0; i < w; ++i) {
    ButterflyMatrix left = random_butterfly(rng, n * e, complex);
    ButterflyMatrix right = random_butterfly(rng, n * e, complex);
    segs.push_back({std::move(left), std::move(right)});
  }
  return KMatrix(n, segs);
}

/// Well-conditioned butterfly: every block is a perturbation of the identity.
inline ButterflyMatrix random_invertible_butterfly(Rng& rng, std::size_t n, double spread = 0.3) {
  std::vector<ButterflyFactorMatrix> fs;
  for (std::size_t k = n; k >= 2; k /= 2) {
    ButterflyFactorMatrix f(n, k);
    for (std::size_t p = 0; p < f.pairs(); ++p)
      f.set_block(p, 1.0 + spread * random_scalar(rng), spread * random_scalar(rng), spread * random_scalar(rng),
                  1.0 + spread * random_scalar(rng));
    fs.push_back(std::move(f));
  }
  return ButterflyMatrix(n, std::move(fs));
}

inline Permutation random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> m(n);
  std::iota(m.begin(), m.end(), std::size_t{0});
  std::shuffle(m.begin(), m.end(), rng);
  return Permutation(std::move(m));
}

inline DenseMatrix random_dense(Rng& rng, std::size_t rows, std::size_t cols, bool complex = true) {
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = random_scalar(rng, complex);
  return m;
}

}  // namespace kaleido
