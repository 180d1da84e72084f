#pragma once

// Exact K-matrix factorizations of fast transforms.

#include <numbers>

#include "kaleido/hierarchy.hpp"

namespace kaleido {

/// Decimation-in-time butterfly: block size k has blocks [[1, w_k^i], [1, -w_k^i]], w_k = exp(sign 2 pi i / k).
inline ButterflyMatrix dit_butterfly(std::size_t n, double sign = -1.0) {
  ButterflyMatrix b(n);
  for (auto& f : b.factors()) {
    const std::size_t k = f.k(), h = k / 2;
    for (std::size_t p = 0; p < f.pairs(); ++p) {
      const std::size_t i = p % h;
      const Scalar tw = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k));
      f.set_block(p, 1.0, tw, 1.0, -tw);
    }
  }
  return b;
}

inline ButterflyMatrix hadamard_butterfly(std::size_t n) {
  ButterflyMatrix b(n);
  for (auto& f : b.factors())
    for (std::size_t p = 0; p < f.pairs(); ++p) f.set_block(p, 1.0, 1.0, 1.0, -1.0);
  return b;
}

namespace detail {

inline KMatrix segments_then(std::size_t n, std::vector<BBSegment> segs, const KMatrix& tail) {
  for (auto& s : tail.segments()) segs.push_back(std::move(s));
  return KMatrix(n, segs);
}

/// x -> v with v[m] = x[2m], v[n-1-m] = x[2m+1].
inline Permutation even_odd_fold(std::size_t n) {
  std::vector<std::size_t> m(n);
  for (std::size_t j = 0; j < n / 2; ++j) {
    m[2 * j] = j;
    m[2 * j + 1] = n - 1 - j;
  }
  return Permutation(std::move(m));
}

}  // namespace detail

/// F_n = B P_br. Width 2.
inline KMatrix dft_kmatrix(std::size_t n) {
  return detail::segments_then(n, {{dit_butterfly(n), ButterflyMatrix(n)}}, perm_to_bb(bit_reversal_perm(n)));
}

/// Sylvester Hadamard in a single butterfly. Width 1.
inline KMatrix hadamard_kmatrix(std::size_t n) {
  return KMatrix(n, std::vector<BBSegment>{{hadamard_butterfly(n), ButterflyMatrix(n)}});
}

/// Complex K whose real part is the unnormalized DCT-II. Width 2.
inline KMatrix dct_kmatrix(std::size_t n) {
  ButterflyMatrix b = dit_butterfly(n);
  Vector tw(n);
  for (std::size_t k = 0; k < n; ++k)
    tw[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k) / static_cast<double>(2 * n));
  b.factors().front().scale_rows(tw);
  return detail::segments_then(n, {{std::move(b), ButterflyMatrix(n)}},
                               perm_to_bb(bit_reversal_perm(n) * detail::even_odd_fold(n)));
}

/// Complex K whose real part is the unnormalized DST-II. Width 2.
inline KMatrix dst_kmatrix(std::size_t n) {
  const std::size_t bits = log2_exact(n);
  ButterflyMatrix b = dit_butterfly(n);
  Vector out(n), mod(n), sign(n);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = std::polar(1.0, std::numbers::pi * static_cast<double>(n - 1 - k) / static_cast<double>(2 * n));
  // diag(w^m) moved through the bit reversal lands on the columns of the last factor.
  for (std::size_t i = 0; i < n; ++i)
    mod[i] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(reverse_bits(i, bits)) / static_cast<double>(n));
  for (std::size_t m = 0; m < n; ++m) sign[m] = m % 2 ? -1.0 : 1.0;
  b.factors().front().scale_rows(out);
  b.factors().back().scale_columns(mod);
  const KMatrix perm = fold_diagonal_right(perm_to_bb(bit_reversal_perm(n) * detail::even_odd_fold(n)), sign);
  return detail::segments_then(n, {{std::move(b), ButterflyMatrix(n)}}, perm);
}

/// Re(K) x for real or complex x: (K x + conj(K conj(x))) / 2.
inline Vector real_part_apply(const KMatrix& k, std::span<const Scalar> x) {
  Vector y = kmatrix_matvec(k, x);
  Vector xc(x.begin(), x.end());
  for (auto& z : xc) z = std::conj(z);
  const Vector yc = kmatrix_matvec(k, xc);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.5 * (y[i] + std::conj(yc[i]));
  return y;
}

/// A F^{-1} diag(d) F as conj(B) (P_br diag(d) P_br) conj(B)^{-1}, with A folded into the left. Width 1.
inline KMatrix afdf_kmatrix(std::span<const Scalar> a, std::span<const Scalar> d) {
  const std::size_t n = d.size();
  if (a.size() != n) throw std::invalid_argument("afdf_kmatrix: diagonal lengths differ");
  const std::size_t bits = log2_exact(n);
  ButterflyMatrix bbar = dit_butterfly(n, 1.0);
  ButterflyMatrix inv = butterfly_inverse(bbar);
  Vector dp(n);
  for (std::size_t i = 0; i < n; ++i) dp[reverse_bits(i, bits)] = d[i];
  bbar.factors().back().scale_columns(dp);
  bbar.factors().front().scale_rows(a);
  return KMatrix(n, std::vector<BBSegment>{{std::move(bbar), std::move(inv)}});
}

/// Circulant with first column c. Width 1.
inline KMatrix circulant_kmatrix(std::span<const Scalar> c) {
  const std::size_t n = c.size();
  const Vector d = kmatrix_matvec(dft_kmatrix(n), c);
  return afdf_kmatrix(Vector(n, 1.0), d);
}

/// Packed t[d + n - 1] = t_d, d in (-n, n); T[i][j] = t_{i-j}. Expansion 2, width 1.
inline KMatrix toeplitz_kmatrix(std::span<const Scalar> t) {
  if (t.size() % 2 == 0) throw std::invalid_argument("toeplitz_kmatrix: packed length must be 2n - 1");
  const std::size_t n = (t.size() + 1) / 2;
  if (!is_pow2(n)) throw std::invalid_argument("toeplitz_kmatrix: n must be a power of two");
  Vector c(2 * n);
  for (std::size_t i = 0; i < n; ++i) c[i] = t[i + n - 1];
  for (std::size_t j = 1; j < n; ++j) c[n + j] = t[j - 1];
  return with_logical_dim(circulant_kmatrix(c), n);
}

/// S H D P H B with H the Hadamard transform. Width 2.
inline KMatrix fastfood_kmatrix(std::span<const Scalar> s, std::span<const Scalar> d, const Permutation& p,
                                std::span<const Scalar> b) {
  const std::size_t n = p.n();
  if (s.size() != n || d.size() != n || b.size() != n) throw std::invalid_argument("fastfood_kmatrix: size mismatch");
  const BsbForm form = perm_to_bsb(p);
  ButterflyMatrix shd = hadamard_butterfly(n);
  shd.factors().front().scale_rows(s);
  shd.factors().back().scale_columns(d);
  ButterflyMatrix hb = hadamard_butterfly(n);
  Vector bc(b.begin(), b.end());
  for (auto& z : bc) z = std::conj(z);
  hb.factors().front().scale_rows(bc);
  return KMatrix(n, std::vector<BBSegment>{{std::move(shd), form.m1}, {form.m2, std::move(hb)}});
}

/// F_n (x) F_n on row-major n x n images, as one butterfly times a permutation. Width 2.
inline KMatrix dft2d_kmatrix(std::size_t n) {
  const std::size_t big = n * n;
  const ButterflyMatrix b = dit_butterfly(n);
  ButterflyMatrix out(big);
  for (auto& f : out.factors()) {
    const std::size_t k = f.k();
    const bool outer = k > n;  // acts on the row index: B_{k/n} (x) I_n
    const auto& g = b.factor_with_block(outer ? k / n : k);
    for (std::size_t p = 0; p < f.pairs(); ++p) {
      const std::size_t t = f.pair_top(p);
      const std::size_t src = outer ? g.pair_of(t / n) : g.pair_of(t % n);
      f.set_block(p, g.block(src));
    }
  }
  const Permutation br = bit_reversal_perm(n);
  std::vector<std::size_t> m(big);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] = br[i] * n + br[j];
  return detail::segments_then(big, {{std::move(out), ButterflyMatrix(big)}}, perm_to_bb(Permutation(std::move(m))));
}

}  // namespace kaleido
