#pragma once

// Permutations and their exact butterfly decompositions.

#include <numeric>

#include "kaleido/core.hpp"

namespace kaleido {

/// Bijection on [0, n). map()[j] is the row holding the 1 in column j, so (P x)[map[j]] = x[j].
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
    std::vector<char> seen(map_.size(), 0);
    for (std::size_t j = 0; j < map_.size(); ++j) {
      if (map_[j] >= map_.size())
        throw std::invalid_argument("Permutation: entry " + std::to_string(map_[j]) + " out of range");
      if (seen[map_[j]]++) throw std::invalid_argument("Permutation: repeated entry " + std::to_string(map_[j]));
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> m(n);
    std::iota(m.begin(), m.end(), std::size_t{0});
    return Permutation(std::move(m));
  }

  std::size_t n() const { return map_.size(); }
  const std::vector<std::size_t>& map() const { return map_; }
  std::size_t operator[](std::size_t j) const { return map_[j]; }

  Permutation inverse() const {
    std::vector<std::size_t> inv(n());
    for (std::size_t j = 0; j < n(); ++j) inv[map_[j]] = j;
    return Permutation(std::move(inv));
  }

  /// Matrix product: (a * b) e_j = a e_{b[j]}.
  friend Permutation operator*(const Permutation& a, const Permutation& b) {
    if (a.n() != b.n()) throw std::invalid_argument("Permutation product: size mismatch");
    std::vector<std::size_t> m(a.n());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = a.map_[b.map_[j]];
    return Permutation(std::move(m));
  }

  template <class T>
  std::vector<T> apply(std::span<const T> x) const {
    if (x.size() != n()) throw std::invalid_argument("Permutation::apply: dimension mismatch");
    std::vector<T> y(n());
    for (std::size_t j = 0; j < n(); ++j) y[map_[j]] = x[j];
    return y;
  }
  Vector apply(const Vector& x) const { return apply<Scalar>(std::span<const Scalar>(x)); }

  DenseMatrix to_dense() const {
    DenseMatrix m(n(), n());
    for (std::size_t j = 0; j < n(); ++j) m(map_[j], j) = 1.0;
    return m;
  }

  bool is_identity() const {
    for (std::size_t j = 0; j < n(); ++j)
      if (map_[j] != j) return false;
    return true;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<std::size_t> map_;
};

inline std::size_t reverse_bits(std::size_t i, std::size_t bits) {
  std::size_t r = 0;
  for (std::size_t b = 0; b < bits; ++b)
    if (i >> b & 1U) r |= std::size_t{1} << (bits - 1 - b);
  return r;
}

inline Permutation bit_reversal_perm(std::size_t n) {
  const std::size_t bits = log2_exact(n);
  std::vector<std::size_t> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = reverse_bits(i, bits);
  return Permutation(std::move(m));
}

/// True when every aligned chunk of k columns has distinct row residues mod k/2 within each half.
inline bool satisfies_balance(const Permutation& p, std::size_t k) {
  const std::size_t h = k / 2;
  for (std::size_t c0 = 0; c0 < p.n(); c0 += h) {
    std::vector<char> seen(h, 0);
    for (std::size_t j = c0; j < c0 + h; ++j)
      if (seen[p[j] % h]++) return false;
  }
  return true;
}

/// Satisfies every k-balance condition, hence lies in the butterfly class.
inline bool is_modular_balanced(const Permutation& p) {
  for (std::size_t k = p.n(); k >= 2; k /= 2)
    if (!satisfies_balance(p, k)) return false;
  return true;
}

/// Identity/swap factor matrix: swap[p] selects the anti-diagonal block for pair p.
inline ButterflyFactorMatrix swap_factor(std::size_t n, std::size_t k, const std::vector<char>& swap) {
  ButterflyFactorMatrix f(n, k);
  for (std::size_t p = 0; p < f.pairs(); ++p)
    if (swap[p]) f.set_block(p, 0.0, 1.0, 1.0, 0.0);
  return f;
}

namespace detail {

/// Orients the union-of-cycles graph of one chunk and returns which column pairs to swap.
inline std::vector<char> orient_chunk(const std::vector<std::size_t>& row, std::size_t c0, std::size_t k) {
  const std::size_t h = k / 2;
  std::vector<std::size_t> a(h), b(h);
  std::vector<std::vector<std::size_t>> incident(h);
  for (std::size_t i = 0; i < h; ++i) {
    a[i] = row[c0 + i] % h;
    b[i] = row[c0 + i + h] % h;
    incident[a[i]].push_back(i);
    if (b[i] != a[i]) incident[b[i]].push_back(i);
  }
  for (auto& inc : incident) std::sort(inc.begin(), inc.end());
  std::vector<char> used(h, 0), visited(h, 0), swap(h, 0);
  for (std::size_t start = 0; start < h; ++start) {
    if (visited[start]) continue;
    std::size_t u = start;
    for (;;) {
      visited[u] = 1;
      std::size_t edge = h;
      for (std::size_t e : incident[u])
        if (!used[e]) {
          edge = e;
          break;
        }
      if (edge == h) break;
      used[edge] = 1;
      if (a[edge] == u) {
        u = b[edge];
      } else {
        swap[edge] = 1;
        u = a[edge];
      }
    }
  }
  return swap;
}

}  // namespace detail

/// Result of the balancing loop: L = P * R^{-1} is modular-balanced, R = S_2 S_4 ... S_n.
struct BalancedSplit {
  Permutation balanced;
  std::vector<ButterflyFactorMatrix> column_swaps;  // S_2, S_4, ..., S_n
};

inline BalancedSplit balance_permutation(const Permutation& p) {
  const std::size_t n = p.n();
  log2_exact(n);
  if (n < 2) throw std::invalid_argument("balance_permutation: n must be >= 2");
  std::vector<std::size_t> row = p.map();
  std::vector<ButterflyFactorMatrix> swaps;
  for (std::size_t k = n; k >= 2; k /= 2) {
    const std::size_t h = k / 2;
    std::vector<char> all(n / 2, 0);
    for (std::size_t c0 = 0; c0 < n; c0 += k) {
      const auto s = detail::orient_chunk(row, c0, k);
      for (std::size_t i = 0; i < h; ++i)
        if (s[i]) {
          std::swap(row[c0 + i], row[c0 + i + h]);
          all[(c0 / k) * h + i] = 1;
        }
    }
    swaps.push_back(swap_factor(n, k, all));
  }
  std::reverse(swaps.begin(), swaps.end());
  return {Permutation(std::move(row)), std::move(swaps)};
}

/// Factors a modular-balanced permutation as B_n B_{n/2} ... B_2 with 0/1 blocks.
inline ButterflyMatrix balanced_to_butterfly(const Permutation& l) {
  const std::size_t n = l.n();
  if (!is_modular_balanced(l)) throw std::invalid_argument("balanced_to_butterfly: permutation is not modular-balanced");
  std::vector<std::size_t> cur = l.map();
  std::vector<ButterflyFactorMatrix> factors;
  for (std::size_t k = n; k >= 2; k /= 2) {
    const std::size_t h = k / 2;
    std::vector<char> swap(n / 2, 0);
    for (std::size_t c0 = 0; c0 < n; c0 += k) {
      for (std::size_t j = c0; j < c0 + k; ++j) {
        const std::size_t local = cur[j] - c0;
        const std::size_t res = local % h;
        if (j < c0 + h && local >= h) swap[(c0 / k) * h + res] = 1;
        cur[j] = c0 + (j < c0 + h ? 0 : h) + res;
      }
    }
    factors.push_back(swap_factor(n, k, swap));
  }
  return ButterflyMatrix(n, std::move(factors));
}

/// P as a width-1 K-matrix: P = L R with L a butterfly and R = (S_n ... S_2)^*.
inline KMatrix perm_to_bb(const Permutation& p) {
  auto split = balance_permutation(p);
  ButterflyMatrix left = balanced_to_butterfly(split.balanced);
  // Transposed segment stores S_n..S_2 in descending order; S_k is real symmetric.
  std::reverse(split.column_swaps.begin(), split.column_swaps.end());
  ButterflyMatrix right(p.n(), std::move(split.column_swaps));
  return KMatrix(p.n(), std::vector<BBSegment>{{std::move(left), std::move(right)}});
}

/// Returns M2 with dense(M)^* = P_br dense(M2) P_br.
inline ButterflyMatrix conjugate_by_bitreversal(const ButterflyMatrix& m) {
  const std::size_t n = m.n();
  const std::size_t bits = log2_exact(n);
  ButterflyMatrix out(n);
  for (const auto& f : m.factors()) {
    const std::size_t k2 = 2 * n / f.k();
    auto& g = out.factor_with_block(k2);
    for (std::size_t p = 0; p < f.pairs(); ++p) {
      const std::size_t t = f.pair_top(p);
      const auto blk = f.block(p);
      g.set_block(g.pair_of(reverse_bits(t, bits)), std::conj(blk[0]), std::conj(blk[2]), std::conj(blk[1]),
                  std::conj(blk[3]));
    }
  }
  return out;
}

/// P = M1^* M2 with M1, M2 butterfly matrices.
struct BsbForm {
  ButterflyMatrix m1;
  ButterflyMatrix m2;

  /// Chain with transposed stages (ascending) followed by forward stages (descending).
  FactorChain chain() const {
    std::vector<Stage> st;
    for (auto it = m1.factors().rbegin(); it != m1.factors().rend(); ++it) st.push_back({StageTag::Transposed, *it});
    for (const auto& f : m2.factors()) st.push_back({StageTag::Forward, f});
    return FactorChain(m1.n(), std::move(st));
  }

  DenseMatrix to_dense() const { return m1.to_dense().adjoint() * m2.to_dense(); }
};

inline BsbForm perm_to_bsb(const Permutation& p) {
  const Permutation br = bit_reversal_perm(p.n());
  const KMatrix conj = perm_to_bb(br * p * br);
  const auto seg = conj.segments().front();
  return {conjugate_by_bitreversal(seg.left), conjugate_by_bitreversal(seg.right)};
}

}  // namespace kaleido
