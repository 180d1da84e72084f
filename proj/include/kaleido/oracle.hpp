#pragma once

// Brute-force O(n^2) reference matrices. Depends only on the dense layer.

#include <numbers>

#include "kaleido/dense.hpp"

namespace kaleido::oracle {

/// F[j][k] = exp(-2 pi i j k / n), unnormalized.
inline DenseMatrix dft(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
      m(j, k) = std::polar(1.0, ang);
    }
  return m;
}

/// Sylvester construction H_{2m} = [[H, H], [H, -H]].
inline DenseMatrix hadamard(std::size_t n) {
  if (!is_pow2(n)) throw std::invalid_argument("oracle::hadamard: n must be a power of two");
  DenseMatrix h(1, 1);
  h(0, 0) = 1.0;
  for (std::size_t m = 1; m < n; m *= 2) {
    DenseMatrix g(2 * m, 2 * m);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < m; ++c) {
        g(r, c) = g(r, c + m) = g(r + m, c) = h(r, c);
        g(r + m, c + m) = -h(r, c);
      }
    h = std::move(g);
  }
  return h;
}

/// DCT-II: X[k] = sum_m x[m] cos(pi (2m + 1) k / (2n)).
inline DenseMatrix dct2(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      m(k, j) = std::cos(std::numbers::pi * static_cast<double>((2 * j + 1) * k) / static_cast<double>(2 * n));
  return m;
}

/// DST-II: X[k] = sum_m x[m] sin(pi (2m + 1) (k + 1) / (2n)).
inline DenseMatrix dst2(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      m(k, j) = std::sin(std::numbers::pi * static_cast<double>((2 * j + 1) * (k + 1)) / static_cast<double>(2 * n));
  return m;
}

/// C[i][j] = c[(i - j) mod n].
inline DenseMatrix circulant(std::span<const Scalar> c) {
  const std::size_t n = c.size();
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = c[(i + n - j) % n];
  return m;
}

/// T[i][j] = t[i - j + n - 1] for packed t of length 2n - 1.
inline DenseMatrix toeplitz(std::span<const Scalar> t) {
  if (t.size() % 2 == 0) throw std::invalid_argument("oracle::toeplitz: packed length must be odd");
  const std::size_t n = (t.size() + 1) / 2;
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = t[i + n - 1 - j];
  return m;
}

/// Row-major 2-D DFT on n x n images: entry ((a, b), (c, d)) = w^(a c + b d).
inline DenseMatrix dft2d(std::size_t n) {
  DenseMatrix m(n * n, n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) {
          const double ang = -2.0 * std::numbers::pi * static_cast<double>((a * c + b * d) % n) / static_cast<double>(n);
          m(a * n + b, c * n + d) = std::polar(1.0, ang);
        }
  return m;
}

inline DenseMatrix by_name(const std::string& name, std::size_t n) {
  if (name == "dft") return dft(n);
  if (name == "hadamard") return hadamard(n);
  if (name == "dct") return dct2(n);
  if (name == "dst") return dst2(n);
  if (name == "dft2d") return dft2d(n);
  if (name == "identity") return DenseMatrix::identity(n);
  throw std::invalid_argument("unknown oracle '" + name + "'");
}

}  // namespace kaleido::oracle
