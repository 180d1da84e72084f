#pragma once

// Closure algebra of the hierarchy and the sparse-matrix construction.

#include "kaleido/sparse.hpp"

namespace kaleido {

/// D K: scales the rows of the leftmost stored factor. D has the chain dimension.
inline KMatrix fold_diagonal_left(const KMatrix& k, std::span<const Scalar> d) {
  if (d.size() != k.dim()) throw std::invalid_argument("fold_diagonal_left: diagonal length mismatch");
  auto st = k.chain().stages();
  st.front().factor.scale_rows(d);
  return KMatrix(k.n(), FactorChain(k.dim(), std::move(st)));
}

/// K D: the rightmost stage is transposed, so its stored factor gets rows scaled by conj(D).
inline KMatrix fold_diagonal_right(const KMatrix& k, std::span<const Scalar> d) {
  if (d.size() != k.dim()) throw std::invalid_argument("fold_diagonal_right: diagonal length mismatch");
  auto st = k.chain().stages();
  Vector c(d.begin(), d.end());
  for (auto& z : c) z = std::conj(z);
  st.back().factor.scale_rows(c);
  return KMatrix(k.n(), FactorChain(k.dim(), std::move(st)));
}

/// diag(I_n, 0) at dimension dim.
inline Vector corner_projector(std::size_t n, std::size_t dim) {
  Vector d(dim, 0.0);
  std::fill(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n), Scalar(1.0));
  return d;
}

/// A B with widths added. Requires equal n and e.
inline KMatrix k_product(const KMatrix& a, const KMatrix& b) {
  if (a.n() != b.n()) throw std::invalid_argument("k_product: logical dimensions differ");
  if (a.e() != b.e()) throw std::invalid_argument("k_product: expansions differ");
  auto st = a.chain().stages();
  auto bst = b.chain().stages();
  if (b.e() > 1) bst.front().factor.scale_rows(corner_projector(b.n(), b.dim()));
  st.insert(st.end(), bst.begin(), bst.end());
  return KMatrix(a.n(), FactorChain(a.dim(), std::move(st)));
}

/// Permutation acting on the first n coordinates of an e n dimensional space, identity elsewhere.
inline KMatrix perm_kmatrix(const Permutation& p, std::size_t e = 1) {
  if (e == 1) return perm_to_bb(p);
  std::vector<std::size_t> m(p.n() * e);
  std::iota(m.begin(), m.end(), std::size_t{0});
  std::copy(p.map().begin(), p.map().end(), m.begin());
  return with_logical_dim(perm_to_bb(Permutation(std::move(m))), p.n());
}

namespace detail {

inline void check_uniform(const std::vector<KMatrix>& ks, const char* who) {
  if (ks.empty()) throw std::invalid_argument(std::string(who) + ": empty list");
  for (const auto& k : ks)
    if (k.n() != ks[0].n() || k.w() != ks[0].w() || k.e() != ks[0].e())
      throw std::invalid_argument(std::string(who) + ": all operands need the same n, w and e");
}

/// Block-diagonal chain of full chains (all of one dimension and width); widths unchanged.
inline FactorChain block_diag_chains(const std::vector<const FactorChain*>& cs) {
  const std::size_t m = cs.size(), d = cs[0]->dim(), big = m * d;
  std::vector<Stage> st;
  const auto& ref = cs[0]->stages();
  const std::size_t levels = log2_exact(d), big_levels = log2_exact(big);
  const std::size_t w = ref.size() / (2 * levels);
  for (std::size_t s = 0; s < w; ++s) {
    for (std::size_t i = 0; i < big_levels; ++i) {
      const std::size_t k = big >> i;
      ButterflyFactorMatrix f(big, k);
      if (k <= d) {
        const std::size_t src = s * 2 * levels + (i - (big_levels - levels));
        for (std::size_t b = 0; b < m; ++b) {
          const auto& g = cs[b]->stages()[src].factor;
          for (std::size_t p = 0; p < g.pairs(); ++p) f.set_block(b * g.pairs() + p, g.block(p));
        }
      }
      st.push_back({StageTag::Forward, std::move(f)});
    }
    for (std::size_t i = 0; i < big_levels; ++i) {
      const std::size_t k = std::size_t{2} << i;
      ButterflyFactorMatrix f(big, k);
      if (k <= d) {
        const std::size_t src = s * 2 * levels + levels + i;
        for (std::size_t b = 0; b < m; ++b) {
          const auto& g = cs[b]->stages()[src].factor;
          for (std::size_t p = 0; p < g.pairs(); ++p) f.set_block(b * g.pairs() + p, g.block(p));
        }
      }
      st.push_back({StageTag::Transposed, std::move(f)});
    }
  }
  return FactorChain(big, std::move(st));
}

}  // namespace detail

/// Diag(A_1, ..., A_m). Width w for e = 1, w + 2 otherwise. m must be a power of two.
inline KMatrix k_block_diag(const std::vector<KMatrix>& ks) {
  detail::check_uniform(ks, "k_block_diag");
  const std::size_t m = ks.size(), k = ks[0].n(), e = ks[0].e();
  if (!is_pow2(m)) throw std::invalid_argument("k_block_diag: block count must be a power of two");
  std::vector<const FactorChain*> cs;
  for (const auto& a : ks) cs.push_back(&a.chain());
  FactorChain diag = detail::block_diag_chains(cs);
  if (e == 1) return KMatrix(m * k, std::move(diag));
  // Q moves logical block i (rows i k .. i k + k - 1) to the corner of inner block i.
  const std::size_t big = m * e * k;
  // Indices past m k fill the remaining slots in order.
  std::vector<std::size_t> q(big);
  std::vector<char> taken(big, 0);
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t r = 0; r < k; ++r) {
      q[b * k + r] = b * e * k + r;
      taken[b * e * k + r] = 1;
    }
  std::size_t slot = 0;
  for (std::size_t next = m * k; next < big; ++next) {
    while (taken[slot]) ++slot;
    q[next] = slot++;
  }
  const Permutation qp(std::move(q));
  const KMatrix qk = with_logical_dim(perm_to_bb(qp), m * k);
  const KMatrix qinv = with_logical_dim(perm_to_bb(qp.inverse()), m * k);
  const KMatrix inner(m * k, std::move(diag));
  // Full-dimension products: Q maps the embedded input exactly, so no corner projection is needed.
  auto concat = [&](const KMatrix& a, const KMatrix& b) {
    auto st = a.chain().stages();
    st.insert(st.end(), b.chain().stages().begin(), b.chain().stages().end());
    return KMatrix(m * k, FactorChain(big, std::move(st)));
  };
  return concat(concat(qinv, inner), qk);
}

/// Sum of m K-matrices with equal n, w, e. Width m w, expansion 4 e.
inline KMatrix k_sum(const std::vector<KMatrix>& ks) {
  detail::check_uniform(ks, "k_sum");
  const std::size_t n = ks[0].n(), inner = ks[0].dim(), big = 4 * inner;
  const std::size_t levels = log2_exact(inner), big_levels = levels + 2;
  std::vector<Stage> st;
  for (std::size_t idx = 0; idx < ks.size(); ++idx) {
    const bool last = idx + 1 == ks.size();
    const auto& src = ks[idx].chain().stages();
    const std::size_t w = ks[idx].w();
    for (std::size_t s = 0; s < w; ++s) {
      // Forward part: block sizes 4E, 2E, then the operand's factors on inner block 2.
      for (std::size_t i = 0; i < big_levels; ++i) {
        const std::size_t k = big >> i;
        ButterflyFactorMatrix f(big, k);
        if (i == 0 && s == 0) {
          for (std::size_t p = 0; p < f.pairs(); ++p) f.set_block(p, 1.0, 1.0, 0.0, 0.0);
        } else if (k <= inner) {
          const auto& g = src[s * 2 * levels + (i - 2)].factor;
          const std::size_t per = inner / 2;
          for (std::size_t p = 0; p < g.pairs(); ++p) f.set_block(2 * per + p, g.block(p));
          if (s == 0 && k == inner)
            for (std::size_t p = 0; p < per; ++p) f.set_block(3 * per + p, 0.0, 0.0, 0.0, 0.0);
        }
        st.push_back({StageTag::Forward, std::move(f)});
      }
      for (std::size_t i = 0; i < big_levels; ++i) {
        const std::size_t k = std::size_t{2} << i;
        ButterflyFactorMatrix f(big, k);
        if (k <= inner) {
          const auto& g = src[s * 2 * levels + levels + i].factor;
          const std::size_t per = inner / 2;
          for (std::size_t p = 0; p < g.pairs(); ++p) f.set_block(2 * per + p, g.block(p));
        } else if (s + 1 == w && k == 2 * inner) {
          // Swap within the first (last == true) or second block pair.
          const std::size_t per = inner;
          for (std::size_t p = 0; p < per; ++p) f.set_block((last ? 0 : per) + p, 0.0, 1.0, 1.0, 0.0);
        } else if (s + 1 == w && k == big) {
          for (std::size_t p = 0; p < f.pairs(); ++p) f.set_block(p, 1.0, 1.0, 0.0, 0.0);
        }
        st.push_back({StageTag::Transposed, std::move(f)});
      }
    }
  }
  return KMatrix(n, FactorChain(big, std::move(st)));
}

class SingularFactor : public std::invalid_argument {
 public:
  SingularFactor(std::size_t stage, std::size_t block)
      : std::invalid_argument("singular 2x2 block " + std::to_string(block) + " in factor " + std::to_string(stage)),
        stage_(stage),
        block_(block) {}
  std::size_t stage() const { return stage_; }
  std::size_t block() const { return block_; }

 private:
  std::size_t stage_, block_;
};

/// Returns G with dense(M)^{-1} = dense(G)^*, by blockwise 2x2 inversion.
inline ButterflyMatrix butterfly_inverse(const ButterflyMatrix& m) {
  std::vector<ButterflyFactorMatrix> out;
  for (std::size_t s = 0; s < m.factors().size(); ++s) {
    const auto& f = m.factors()[s];
    ButterflyFactorMatrix g(f.n(), f.k());
    for (std::size_t p = 0; p < f.pairs(); ++p) {
      const auto [a, b, c, d] = f.block(p);
      const Scalar det = a * d - b * c;
      if (std::abs(det) <= 1e-12) throw SingularFactor(s, p);
      // Inverse is [[d, -b], [-c, a]] / det; store its conjugate transpose.
      const Scalar id = 1.0 / det;
      g.set_block(p, std::conj(d * id), std::conj(-c * id), std::conj(-b * id), std::conj(a * id));
    }
    out.push_back(std::move(g));
  }
  return ButterflyMatrix(m.n(), std::move(out));
}

/// Grid transpose: index i * cols + j moves to j * rows + i.
inline Permutation grid_transpose_perm(std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> m(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i * cols + j] = j * rows + i;
  return Permutation(std::move(m));
}

/// A (x) B = P^{-1} (I (x) A) P (I (x) B). Width w1 + w2 + 6, or w1 + w2 + 2 when e = 1.
inline KMatrix k_kronecker(const KMatrix& a, const KMatrix& b) {
  if (a.e() != b.e()) throw std::invalid_argument("k_kronecker: expansions differ");
  const std::size_t n1 = a.n(), n2 = b.n(), e = a.e();
  const KMatrix ib = k_block_diag(std::vector<KMatrix>(n1, b));
  const KMatrix ia = k_block_diag(std::vector<KMatrix>(n2, a));
  // (A (x) I) x lives on row-major (i, j); P sends it to (j, i) where I (x) A acts.
  const Permutation p = grid_transpose_perm(n1, n2);
  const KMatrix pk = perm_kmatrix(p, e), pinv = perm_kmatrix(p.inverse(), e);
  return k_product(k_product(k_product(pinv, ia), pk), ib);
}

/// Width-4 construction for at most n nonzeros.
inline KMatrix sparse_chunk_to_kmatrix(const SparseMatrix& s) {
  const auto dec = sparse_decompose_step(s);
  const std::size_t n = s.n();
  const auto l1 = perm_to_bb(dec.p1).segments().front();
  const auto l3 = perm_to_bb(dec.p3).segments().front();
  const auto p2 = perm_to_bsb(dec.p2);
  const ButterflyMatrix h = hstep_to_butterfly(dec.h);
  const ButterflyMatrix v = vstep_to_butterfly_star(dec.v);
  return KMatrix(n, std::vector<BBSegment>{l1, {h, p2.m1}, {p2.m2, v}, l3});
}

/// Width 4 ceil(s/n); expansion 1 when s <= n, else 4.
inline KMatrix sparse_to_kmatrix(const SparseMatrix& s) {
  const std::size_t n = s.n();
  std::vector<SparseEntry> nz;
  for (const auto& e : s.row_major())
    if (e.value != Scalar{}) nz.push_back(e);
  if (nz.size() <= n) return sparse_chunk_to_kmatrix(SparseMatrix(n, std::move(nz)));
  std::vector<KMatrix> parts;
  for (std::size_t b = 0; b < nz.size(); b += n) {
    std::vector<SparseEntry> chunk(nz.begin() + static_cast<std::ptrdiff_t>(b),
                                   nz.begin() + static_cast<std::ptrdiff_t>(std::min(nz.size(), b + n)));
    parts.push_back(sparse_chunk_to_kmatrix(SparseMatrix(n, std::move(chunk))));
  }
  return k_sum(parts);
}

/// Width bound 4 ceil(s/n), with s = 0 counted as one chunk.
inline std::size_t sparse_width_bound(std::size_t nnz, std::size_t n) {
  return 4 * std::max<std::size_t>(1, (nnz + n - 1) / n);
}

}  // namespace kaleido
