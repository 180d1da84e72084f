#pragma once

// Orthogonal kaleidoscope hierarchy: chains of O1 diag(D) O2^* stages with unitary butterflies.

#include "kaleido/hierarchy.hpp"
#include "kaleido/linalg.hpp"

namespace kaleido {

inline constexpr double kUnitaryTol = 1e-10;

/// max over 2x2 blocks of the largest entry of |B^* B - I|.
inline double factor_unitarity_error(const ButterflyFactorMatrix& f) {
  double worst = 0.0;
  for (std::size_t p = 0; p < f.pairs(); ++p) {
    const auto [a, b, c, d] = f.block(p);
    const Scalar g00 = std::conj(a) * a + std::conj(c) * c - 1.0;
    const Scalar g11 = std::conj(b) * b + std::conj(d) * d - 1.0;
    const Scalar g01 = std::conj(a) * b + std::conj(c) * d;
    worst = std::max({worst, std::abs(g00), std::abs(g11), std::abs(g01)});
  }
  return worst;
}

inline double butterfly_unitarity_error(const ButterflyMatrix& b) {
  double worst = 0.0;
  for (const auto& f : b.factors()) worst = std::max(worst, factor_unitarity_error(f));
  return worst;
}

/// O1 diag(d) O2^*; o2 holds the stored factors of the transposed part.
struct ObbStage {
  ButterflyMatrix o1;
  Vector d;
  ButterflyMatrix o2;

  static ObbStage identity(std::size_t dim) { return {ButterflyMatrix(dim), Vector(dim, 1.0), ButterflyMatrix(dim)}; }
  static ObbStage diagonal(Vector d) {
    const std::size_t dim = d.size();
    return {ButterflyMatrix(dim), std::move(d), ButterflyMatrix(dim)};
  }
  friend bool operator==(const ObbStage&, const ObbStage&) = default;
};

class ObbChain {
 public:
  ObbChain() = default;

  /// Throws if shapes disagree or any butterfly factor is further than kUnitaryTol from unitary.
  ObbChain(std::size_t n, std::vector<ObbStage> stages) : n_(n), stages_(std::move(stages)) {
    if (stages_.empty()) throw std::invalid_argument("ObbChain: at least one stage required");
    dim_ = stages_.front().d.size();
    log2_exact(dim_);
    if (dim_ < 2) throw std::invalid_argument("ObbChain: inner dimension must be >= 2");
    if (n_ == 0 || n_ > dim_ || dim_ % n_ != 0 || !is_pow2(dim_ / n_))
      throw std::invalid_argument("ObbChain: logical n must divide the inner dimension by a power of two");
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      const auto& s = stages_[i];
      if (s.o1.n() != dim_ || s.o2.n() != dim_ || s.d.size() != dim_)
        throw std::invalid_argument("ObbChain: stage " + std::to_string(i) + " has mismatched dimension");
      if (!std::all_of(s.d.begin(), s.d.end(), [](Scalar z) { return is_finite(z); }))
        throw std::invalid_argument("ObbChain: stage " + std::to_string(i) + " has a non-finite diagonal");
      const double err = std::max(butterfly_unitarity_error(s.o1), butterfly_unitarity_error(s.o2));
      if (!(err <= kUnitaryTol))
        throw std::invalid_argument("ObbChain: stage " + std::to_string(i) + " butterfly is not unitary (error " +
                                    std::to_string(err) + ")");
    }
  }

  std::size_t n() const { return n_; }
  std::size_t dim() const { return dim_; }
  std::size_t e() const { return dim_ / n_; }
  std::size_t w() const { return stages_.size(); }
  const std::vector<ObbStage>& stages() const { return stages_; }

  /// Inner-dimension application.
  void apply_inplace(std::span<Scalar> x) const {
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
      it->o2.apply_adjoint_inplace(x);
      for (std::size_t i = 0; i < dim_; ++i) x[i] *= it->d[i];
      it->o1.apply_inplace(x);
    }
  }

  /// Logical matvec: pads x with zeros and keeps the first n outputs.
  Vector apply(std::span<const Scalar> x) const {
    if (x.size() != n_) throw std::invalid_argument("ObbChain::apply: vector length mismatch");
    Vector y(dim_);
    std::copy(x.begin(), x.end(), y.begin());
    apply_inplace(y);
    y.resize(n_);
    return y;
  }

  DenseMatrix to_dense() const {
    DenseMatrix m(n_, n_);
    for (std::size_t j = 0; j < n_; ++j) {
      Vector e(n_);
      e[j] = 1.0;
      m.set_column(j, apply(e));
    }
    return m;
  }

  /// Same matrix as a K-matrix: D folded into the columns of O1's block-size-2 factor.
  KMatrix to_kmatrix() const {
    std::vector<BBSegment> segs;
    for (const auto& s : stages_) {
      ButterflyMatrix left = s.o1;
      left.factors().back().scale_columns(s.d);
      segs.push_back({std::move(left), s.o2});
    }
    return KMatrix(n_, segs);
  }

  double max_unitarity_error() const {
    double worst = 0.0;
    for (const auto& s : stages_)
      worst = std::max({worst, butterfly_unitarity_error(s.o1), butterfly_unitarity_error(s.o2)});
    return worst;
  }

  friend bool operator==(const ObbChain&, const ObbChain&) = default;

 private:
  std::size_t n_ = 0, dim_ = 0;
  std::vector<ObbStage> stages_;
};

/// Concatenation A B for chains with equal n and inner dimension.
inline ObbChain obb_product(const ObbChain& a, const ObbChain& b) {
  if (a.n() != b.n() || a.dim() != b.dim()) throw std::invalid_argument("obb_product: shapes differ");
  if (a.e() > 1) throw std::invalid_argument("obb_product: expansion > 1 would need a corner projection");
  auto st = a.stages();
  st.insert(st.end(), b.stages().begin(), b.stages().end());
  return ObbChain(a.n(), std::move(st));
}

/// I - 2 u u^* as a single stage with D = I.
inline ObbChain householder_to_obb(std::span<const Scalar> u) {
  const std::size_t n = u.size();
  log2_exact(n);
  if (n < 2) throw std::invalid_argument("householder_to_obb: n must be >= 2");
  if (std::abs(norm2(u) - 1.0) > 1e-10) throw std::invalid_argument("householder_to_obb: u is not a unit vector");
  ButterflyMatrix o1(n), o2(n);
  Vector cur(u.begin(), u.end());
  for (std::size_t k = n; k >= 4; k /= 2) {
    const std::size_t h = k / 2;
    // L maps the first k entries of cur to (pair norms, 0); F_k = L^* on the first chunk.
    ButterflyFactorMatrix l(n, k);
    Vector next(h);
    for (std::size_t i = 0; i < h; ++i) {
      const Scalar a = cur[i], b = cur[i + h];
      const double r = std::sqrt(std::norm(a) + std::norm(b));
      const Scalar v0 = r > 0.0 ? a / r : Scalar(1.0), v1 = r > 0.0 ? b / r : Scalar(0.0);
      l.set_block(i, std::conj(v0), std::conj(v1), v1, -v0);
      next[i] = r;
    }
    o1.factor_with_block(k) = l.adjoint();
    o2.factor_with_block(k) = l.adjoint();
    cur = std::move(next);
  }
  const Scalar w0 = cur[0], w1 = cur[1];
  o1.factor_with_block(2).set_block(0, 1.0 - 2.0 * std::norm(w0), -2.0 * w0 * std::conj(w1),
                                    -2.0 * w1 * std::conj(w0), 1.0 - 2.0 * std::norm(w1));
  return ObbChain(n, {ObbStage{std::move(o1), Vector(n, 1.0), std::move(o2)}});
}

/// Q = H_0 ... H_{n-2} R with R's unit phases folded into the last stage. Exactly n - 1 stages.
inline ObbChain unitary_to_obb(const DenseMatrix& q) {
  if (!q.square() || q.rows() < 2) throw std::invalid_argument("unitary_to_obb: square input of size >= 2 required");
  log2_exact(q.rows());
  if (!(unitarity_error(q) <= 1e-8)) throw std::invalid_argument("unitary_to_obb: input is not unitary");
  const std::size_t n = q.rows();
  const auto qr = householder_qr(q);
  std::vector<ObbStage> st;
  for (const auto& u : qr.reflectors) st.push_back(householder_to_obb(u).stages().front());
  Vector phase(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar r = qr.r(i, i);
    phase[i] = std::conj(std::abs(r) > 0.0 ? r / std::abs(r) : Scalar(1.0));
  }
  st.back().o2.factors().front().scale_rows(phase);
  return ObbChain(n, std::move(st));
}

inline bool is_diagonal(const DenseMatrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (r != c && m(r, c) != Scalar{}) return false;
  return true;
}

/// U Sigma V^*: n - 1 stages for U, one diagonal stage, n - 1 for V^*. A diagonal input gives one stage.
inline ObbChain dense_to_obb(const DenseMatrix& m) {
  if (!m.square() || m.rows() < 2) throw std::invalid_argument("dense_to_obb: square input of size >= 2 required");
  const std::size_t n = m.rows();
  log2_exact(n);
  if (is_diagonal(m)) {
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = m(i, i);
    return ObbChain(n, {ObbStage::diagonal(std::move(d))});
  }
  const auto svd = jacobi_svd(m);
  auto st = unitary_to_obb(svd.u).stages();
  st.push_back(ObbStage::diagonal(Vector(svd.sigma.begin(), svd.sigma.end())));
  const auto vs = unitary_to_obb(svd.v.adjoint()).stages();
  st.insert(st.end(), vs.begin(), vs.end());
  return ObbChain(n, std::move(st));
}

/// Any n x n matrix as a width 2n - 2 K-matrix (width 1 when diagonal).
inline KMatrix dense_to_kmatrix_full(const DenseMatrix& m) {
  const ObbChain obb = dense_to_obb(m);
  if (obb.w() == 1) return obb.to_kmatrix();
  const std::size_t n = obb.n();
  std::vector<BBSegment> segs;
  for (std::size_t i = 0; i < obb.w(); ++i) {
    const auto& s = obb.stages()[i];
    if (i == n - 1) continue;  // Sigma
    ButterflyMatrix left = s.o1, right = s.o2;
    left.factors().back().scale_columns(s.d);
    if (i + 1 == n - 1) {
      Vector sig = obb.stages()[n - 1].d;
      for (auto& z : sig) z = std::conj(z);
      right.factors().front().scale_rows(sig);
    }
    segs.push_back({std::move(left), std::move(right)});
  }
  return KMatrix(n, segs);
}

/// D' with P D = D' P.
inline Vector perm_commute(const Permutation& p, std::span<const Scalar> d) {
  if (d.size() != p.n()) throw std::invalid_argument("perm_commute: size mismatch");
  Vector out(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) out[p[j]] = d[j];
  return out;
}

/// D'' with D P = P D''.
inline Vector perm_commute_right(std::span<const Scalar> d, const Permutation& p) {
  if (d.size() != p.n()) throw std::invalid_argument("perm_commute_right: size mismatch");
  Vector out(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) out[j] = d[p[j]];
  return out;
}

/// The permutation realized by a butterfly of 0/1 permutation blocks (or its adjoint).
inline Permutation butterfly_permutation(const ButterflyMatrix& b, bool adjoint = false) {
  const std::size_t n = b.n();
  Vector idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<double>(i);
  const Vector y = adjoint ? b.apply_adjoint(idx) : b.apply(idx);
  std::vector<std::size_t> m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const double v = y[r].real();
    const auto c = static_cast<std::size_t>(std::llround(v));
    if (y[r].imag() != 0.0 || v < 0.0 || c >= n || std::abs(v - static_cast<double>(c)) > 1e-9 || m[c] != n)
      throw std::invalid_argument("butterfly_permutation: not a permutation butterfly");
    m[c] = r;
  }
  return Permutation(std::move(m));
}

namespace detail {

/// Splits a 2x2 block with orthogonal rows as diag(r1, r2) O with O unitary.
inline std::pair<std::array<double, 2>, std::array<Scalar, 4>> split_block(const std::array<Scalar, 4>& blk) {
  const auto [a, b, c, d] = blk;
  const double n1 = std::sqrt(std::norm(a) + std::norm(b)), n2 = std::sqrt(std::norm(c) + std::norm(d));
  if (std::abs(a * std::conj(c) + b * std::conj(d)) > 1e-12 * std::max(1.0, n1 * n2))
    throw std::invalid_argument("orth split: block rows are not orthogonal");
  if (n1 > 0.0 && n2 > 0.0) return {{n1, n2}, {a / n1, b / n1, c / n2, d / n2}};
  if (n1 > 0.0) return {{n1, 0.0}, {a / n1, b / n1, std::conj(b) / n1, -std::conj(a) / n1}};
  if (n2 > 0.0) return {{0.0, n2}, {std::conj(d) / n2, -std::conj(c) / n2, c / n2, d / n2}};
  return {{0.0, 0.0}, {1.0, 0.0, 0.0, 1.0}};
}

}  // namespace detail

struct OrthStep {
  Vector d;
  ButterflyMatrix o;
  DenseMatrix to_dense() const { return DenseMatrix::diagonal(d) * o.to_dense(); }
};

/// H = diag(d) O with O a unitary butterfly.
inline OrthStep orth_hstep_decompose(const StepMatrix& h) {
  ButterflyMatrix b = hstep_to_butterfly(h);
  const std::size_t n = b.n();
  Vector carry(n, 1.0);
  for (auto it = b.factors().rbegin(); it != b.factors().rend(); ++it) {
    it->scale_columns(carry);
    for (std::size_t p = 0; p < it->pairs(); ++p) {
      const auto [dd, o] = detail::split_block(it->block(p));
      const std::size_t t = it->pair_top(p);
      carry[t] = dd[0];
      carry[t + it->half()] = dd[1];
      it->set_block(p, o);
    }
  }
  return {std::move(carry), std::move(b)};
}

/// S with at most n nonzeros as four stages: P1 H | P2 | V | P3.
inline ObbChain orth_sparse_chunk(const SparseMatrix& s) {
  const auto dec = sparse_decompose_step(s);
  const std::size_t n = s.n();
  const auto l1 = perm_to_bb(dec.p1).segments().front();
  const auto l3 = perm_to_bb(dec.p3).segments().front();
  const auto p2 = perm_to_bsb(dec.p2);
  const OrthStep hs = orth_hstep_decompose(dec.h);
  // V^* is a horizontal step matrix: V^* = D O, so V = O^* D.
  const OrthStep vs = orth_hstep_decompose(StepMatrix(StepKind::Horizontal, dec.v.entries().adjoint()));
  const Vector d1 = perm_commute(butterfly_permutation(l1.right, true), hs.d);
  const Vector d4 = perm_commute_right(vs.d, butterfly_permutation(l3.left));
  return ObbChain(n, {ObbStage{l1.left, d1, l1.right}, ObbStage{hs.o, Vector(n, 1.0), p2.m1},
                      ObbStage{p2.m2, Vector(n, 1.0), vs.o}, ObbStage{l3.left, d4, l3.right}});
}

/// Sum of m chains with equal n and e; widths are padded with identity stages. Width m max(w), expansion 4 e.
inline ObbChain obb_sum(const std::vector<ObbChain>& parts) {
  if (parts.empty()) throw std::invalid_argument("obb_sum: empty list");
  const std::size_t n = parts[0].n(), inner = parts[0].dim(), big = 4 * inner;
  std::size_t w = 0;
  for (const auto& p : parts) {
    if (p.n() != n || p.dim() != inner) throw std::invalid_argument("obb_sum: all operands need the same n and e");
    w = std::max(w, p.w());
  }
  const double r = 1.0 / std::sqrt(2.0);
  const auto embed = [&](const ButterflyMatrix& src, ButterflyMatrix& dst) {
    for (const auto& f : src.factors()) {
      auto& g = dst.factor_with_block(f.k());
      for (std::size_t p = 0; p < f.pairs(); ++p) g.set_block(inner + p, f.block(p));
    }
  };
  std::vector<ObbStage> out;
  for (std::size_t idx = 0; idx < parts.size(); ++idx) {
    const bool last = idx + 1 == parts.size();
    for (std::size_t j = 0; j < w; ++j) {
      const ObbStage src = j < parts[idx].w() ? parts[idx].stages()[j] : ObbStage::identity(inner);
      ObbStage st = ObbStage::identity(big);
      embed(src.o1, st.o1);
      embed(src.o2, st.o2);
      std::copy(src.d.begin(), src.d.end(), st.d.begin() + static_cast<std::ptrdiff_t>(2 * inner));
      if (j == 0) {
        auto& h = st.o1.factor_with_block(big);
        for (std::size_t p = 0; p < h.pairs(); ++p) h.set_block(p, r, r, r, -r);
        std::fill(st.d.begin() + static_cast<std::ptrdiff_t>(3 * inner), st.d.end(), Scalar{});
        const double scale = last ? 2.0 : std::sqrt(2.0);
        for (auto& z : st.d) z *= scale;
      }
      if (j + 1 == w) {
        // Swap the third and fourth E-blocks; the last summand swaps the first two after spreading x.
        auto& sw = st.o2.factor_with_block(2 * inner);
        for (std::size_t p = 0; p < inner; ++p) sw.set_block((last ? 0 : inner) + p, 0.0, 1.0, 1.0, 0.0);
        if (last) {
          auto& h = st.o2.factor_with_block(big);
          for (std::size_t p = 0; p < h.pairs(); ++p) h.set_block(p, r, r, r, -r);
        }
      }
      out.push_back(std::move(st));
    }
  }
  return ObbChain(n, std::move(out));
}

/// Width 4 ceil(s/n) with all scalings in the diagonals; expansion 1 when s <= n, else 4.
inline ObbChain orth_sparse_to_obb(const SparseMatrix& s) {
  const std::size_t n = s.n();
  std::vector<SparseEntry> nz;
  for (const auto& e : s.row_major())
    if (e.value != Scalar{}) nz.push_back(e);
  if (nz.size() <= n) return orth_sparse_chunk(SparseMatrix(n, std::move(nz)));
  std::vector<ObbChain> parts;
  for (std::size_t b = 0; b < nz.size(); b += n) {
    std::vector<SparseEntry> chunk(nz.begin() + static_cast<std::ptrdiff_t>(b),
                                   nz.begin() + static_cast<std::ptrdiff_t>(std::min(nz.size(), b + n)));
    parts.push_back(orth_sparse_chunk(SparseMatrix(n, std::move(chunk))));
  }
  return obb_sum(parts);
}

}  // namespace kaleido
