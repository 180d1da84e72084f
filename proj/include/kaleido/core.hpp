#pragma once

// Butterfly factors, butterfly matrices and K-matrix chains.
//
// A K-matrix of logical size n, expansion e and width w is the upper-left n x n
// corner of a product of w segments, each segment being a butterfly matrix
// times the conjugate transpose of another butterfly matrix, all of size e*n.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <utility>

#include "kaleido/dense.hpp"

namespace kaleido {

/// One butterfly factor matrix B_k^(n): n/k diagonal 2x2-structured blocks.
///
/// The four diagonals are stored flattened across blocks: pair index
/// p = block * (k/2) + i couples rows/columns (block*k + i, block*k + i + k/2).
class ButterflyFactorMatrix {
 public:
  ButterflyFactorMatrix() = default;

  /// Identity factor matrix.
  ButterflyFactorMatrix(std::size_t n, std::size_t k) : n_(n), k_(k) {
    check_shape(n, k);
    const std::size_t m = n / 2;
    d_ = {Vector(m, 1.0), Vector(m, 0.0), Vector(m, 0.0), Vector(m, 1.0)};
  }

  ButterflyFactorMatrix(std::size_t n, std::size_t k, Vector d1, Vector d2, Vector d3, Vector d4)
      : n_(n), k_(k), d_{std::move(d1), std::move(d2), std::move(d3), std::move(d4)} {
    check_shape(n, k);
    for (const auto& d : d_) {
      if (d.size() != n / 2) throw std::invalid_argument("ButterflyFactorMatrix: every diagonal needs n/2 entries");
      for (const auto& z : d)
        if (!is_finite(z)) throw std::invalid_argument("ButterflyFactorMatrix: non-finite entry");
    }
  }

  static ButterflyFactorMatrix identity(std::size_t n, std::size_t k) { return {n, k}; }

  static ButterflyFactorMatrix zero(std::size_t n, std::size_t k) {
    ButterflyFactorMatrix f(n, k);
    for (auto& d : f.d_) std::fill(d.begin(), d.end(), Scalar{});
    return f;
  }

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t half() const { return k_ / 2; }
  std::size_t pairs() const { return n_ / 2; }

  const Vector& d1() const { return d_[0]; }
  const Vector& d2() const { return d_[1]; }
  const Vector& d3() const { return d_[2]; }
  const Vector& d4() const { return d_[3]; }
  const Vector& diag(int which) const { return d_.at(static_cast<std::size_t>(which)); }

  /// Top row index of pair p; the bottom row is top + k/2.
  std::size_t pair_top(std::size_t p) const { return (p / half()) * k_ + p % half(); }
  /// Pair index that contains row/column r.
  std::size_t pair_of(std::size_t r) const { return (r / k_) * half() + (r % k_) % half(); }

  /// 2x2 block of pair p as {top-left, top-right, bottom-left, bottom-right}.
  std::array<Scalar, 4> block(std::size_t p) const { return {d_[0][p], d_[1][p], d_[2][p], d_[3][p]}; }

  void set_block(std::size_t p, Scalar a, Scalar b, Scalar c, Scalar d) {
    if (!is_finite(a) || !is_finite(b) || !is_finite(c) || !is_finite(d))
      throw std::invalid_argument("ButterflyFactorMatrix: non-finite entry");
    d_[0][p] = a;
    d_[1][p] = b;
    d_[2][p] = c;
    d_[3][p] = d;
  }
  void set_block(std::size_t p, const std::array<Scalar, 4>& b) { set_block(p, b[0], b[1], b[2], b[3]); }

  /// Left-multiply by diag(s): scales row r by s[r].
  void scale_rows(std::span<const Scalar> s) {
    check_len(s);
    for (std::size_t p = 0; p < pairs(); ++p) {
      const std::size_t t = pair_top(p), b = t + half();
      d_[0][p] *= s[t];
      d_[1][p] *= s[t];
      d_[2][p] *= s[b];
      d_[3][p] *= s[b];
    }
  }

  /// Right-multiply by diag(s): scales column c by s[c].
  void scale_columns(std::span<const Scalar> s) {
    check_len(s);
    for (std::size_t p = 0; p < pairs(); ++p) {
      const std::size_t t = pair_top(p), b = t + half();
      d_[0][p] *= s[t];
      d_[2][p] *= s[t];
      d_[1][p] *= s[b];
      d_[3][p] *= s[b];
    }
  }

  /// Conjugate transpose, as a factor matrix of the same block size.
  ButterflyFactorMatrix adjoint() const {
    ButterflyFactorMatrix a(n_, k_);
    for (std::size_t p = 0; p < pairs(); ++p)
      a.set_block(p, std::conj(d_[0][p]), std::conj(d_[2][p]), std::conj(d_[1][p]), std::conj(d_[3][p]));
    return a;
  }

  /// x <- F x. Performs 2n complex multiplications; counts them when `mults` is set.
  void apply_inplace(std::span<Scalar> x, std::uint64_t* mults = nullptr) const {
    check_len(x);
    const std::size_t h = half();
    const Scalar *a = d_[0].data(), *b = d_[1].data(), *c = d_[2].data(), *d = d_[3].data();
    std::size_t p = 0;
    for (std::size_t base = 0; base < n_; base += k_) {
      Scalar* top = x.data() + base;
      Scalar* bot = top + h;
      for (std::size_t i = 0; i < h; ++i, ++p) {
        const Scalar u = top[i], v = bot[i];
        top[i] = a[p] * u + b[p] * v;
        bot[i] = c[p] * u + d[p] * v;
      }
    }
    if (mults) *mults += 2 * n_;
  }

  /// x <- F^* x without materializing F^*.
  void apply_adjoint_inplace(std::span<Scalar> x, std::uint64_t* mults = nullptr) const {
    check_len(x);
    const std::size_t h = half();
    const Scalar *a = d_[0].data(), *b = d_[1].data(), *c = d_[2].data(), *d = d_[3].data();
    std::size_t p = 0;
    for (std::size_t base = 0; base < n_; base += k_) {
      Scalar* top = x.data() + base;
      Scalar* bot = top + h;
      for (std::size_t i = 0; i < h; ++i, ++p) {
        const Scalar u = top[i], v = bot[i];
        top[i] = std::conj(a[p]) * u + std::conj(c[p]) * v;
        bot[i] = std::conj(b[p]) * u + std::conj(d[p]) * v;
      }
    }
    if (mults) *mults += 2 * n_;
  }

  DenseMatrix to_dense() const {
    DenseMatrix m(n_, n_);
    for (std::size_t p = 0; p < pairs(); ++p) {
      const std::size_t t = pair_top(p), b = t + half();
      m(t, t) = d_[0][p];
      m(t, b) = d_[1][p];
      m(b, t) = d_[2][p];
      m(b, b) = d_[3][p];
    }
    return m;
  }

  std::size_t stored_entries() const { return 4 * pairs(); }

  friend bool operator==(const ButterflyFactorMatrix&, const ButterflyFactorMatrix&) = default;

 private:
  static void check_shape(std::size_t n, std::size_t k) {
    if (!is_pow2(k) || k < 2) throw std::invalid_argument("butterfly block size must be a power of two >= 2");
    if (!is_pow2(n) || n < k) throw std::invalid_argument("butterfly factor matrix size must be a power of two >= k");
  }
  template <class T>
  void check_len(std::span<T> s) const {
    if (s.size() != n_)
      throw std::invalid_argument("butterfly factor matrix of size " + std::to_string(n_) + " applied to length " +
                                  std::to_string(s.size()));
  }

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::array<Vector, 4> d_;
};

inline Vector factor_matvec(const ButterflyFactorMatrix& f, std::span<const Scalar> x) {
  Vector y(x.begin(), x.end());
  f.apply_inplace(y);
  return y;
}

inline Vector factor_matvec_transposed(const ButterflyFactorMatrix& f, std::span<const Scalar> x) {
  Vector y(x.begin(), x.end());
  f.apply_adjoint_inplace(y);
  return y;
}

/// Product B_n B_{n/2} ... B_2 of factor matrices; factors()[i] has block size n >> i.
class ButterflyMatrix {
 public:
  ButterflyMatrix() = default;

  explicit ButterflyMatrix(std::size_t n) : n_(n) {
    for (std::size_t k = n; k >= 2; k /= 2) factors_.emplace_back(n, k);
  }

  ButterflyMatrix(std::size_t n, std::vector<ButterflyFactorMatrix> factors) : n_(n), factors_(std::move(factors)) {
    const std::size_t levels = log2_exact(n);
    if (n < 2 || factors_.size() != levels)
      throw std::invalid_argument("ButterflyMatrix: need log2(n) factor matrices");
    for (std::size_t i = 0; i < levels; ++i)
      if (factors_[i].n() != n || factors_[i].k() != (n >> i))
        throw std::invalid_argument("ButterflyMatrix: factor " + std::to_string(i) + " has wrong block size");
  }

  static ButterflyMatrix identity(std::size_t n) { return ButterflyMatrix(n); }

  std::size_t n() const { return n_; }
  const std::vector<ButterflyFactorMatrix>& factors() const { return factors_; }
  std::vector<ButterflyFactorMatrix>& factors() { return factors_; }
  /// Factor with block size k.
  ButterflyFactorMatrix& factor_with_block(std::size_t k) { return factors_.at(log2_exact(n_ / k)); }
  const ButterflyFactorMatrix& factor_with_block(std::size_t k) const { return factors_.at(log2_exact(n_ / k)); }

  void apply_inplace(std::span<Scalar> x) const {
    for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) it->apply_inplace(x);
  }
  void apply_adjoint_inplace(std::span<Scalar> x) const {
    for (const auto& f : factors_) f.apply_adjoint_inplace(x);
  }

  Vector apply(std::span<const Scalar> x) const {
    Vector y(x.begin(), x.end());
    apply_inplace(y);
    return y;
  }
  Vector apply_adjoint(std::span<const Scalar> x) const {
    Vector y(x.begin(), x.end());
    apply_adjoint_inplace(y);
    return y;
  }

  DenseMatrix to_dense() const {
    DenseMatrix m(n_, n_);
    for (std::size_t j = 0; j < n_; ++j) {
      Vector e(n_);
      e[j] = 1.0;
      apply_inplace(e);
      m.set_column(j, e);
    }
    return m;
  }

  friend bool operator==(const ButterflyMatrix&, const ButterflyMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<ButterflyFactorMatrix> factors_;
};

enum class StageTag { Forward, Transposed };

/// One chain entry. A Transposed stage applies the conjugate transpose of its stored factor.
struct Stage {
  StageTag tag = StageTag::Forward;
  ButterflyFactorMatrix factor;

  friend bool operator==(const Stage&, const Stage&) = default;
};

/// Segment `left * right^*` of a chain, with both parts stored as butterfly matrices.
struct BBSegment {
  ButterflyMatrix left;
  ButterflyMatrix right;

  static BBSegment identity(std::size_t n) { return {ButterflyMatrix(n), ButterflyMatrix(n)}; }
};

class GrammarError : public std::invalid_argument {
 public:
  GrammarError(std::size_t stage, const std::string& what)
      : std::invalid_argument("chain grammar violated at stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  std::size_t stage() const { return stage_; }

 private:
  std::size_t stage_;
};

/// Stages in multiplication order: stages()[0] is the leftmost factor and is applied last.
class FactorChain {
 public:
  FactorChain() = default;
  FactorChain(std::size_t dim, std::vector<Stage> stages) : dim_(dim), stages_(std::move(stages)) {}

  explicit FactorChain(const std::vector<BBSegment>& segments) {
    if (segments.empty()) throw std::invalid_argument("FactorChain: no segments");
    dim_ = segments.front().left.n();
    for (const auto& s : segments) {
      if (s.left.n() != dim_ || s.right.n() != dim_) throw std::invalid_argument("FactorChain: segment size mismatch");
      for (const auto& f : s.left.factors()) stages_.push_back({StageTag::Forward, f});
      for (auto it = s.right.factors().rbegin(); it != s.right.factors().rend(); ++it)
        stages_.push_back({StageTag::Transposed, *it});
    }
  }

  std::size_t dim() const { return dim_; }
  const std::vector<Stage>& stages() const { return stages_; }

  /// Splits a grammatical chain back into its segments.
  std::vector<BBSegment> segments() const;

  /// x <- chain * x, applying stages right to left.
  void apply_inplace(std::span<Scalar> x, std::uint64_t* mults = nullptr) const {
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
      if (it->tag == StageTag::Forward)
        it->factor.apply_inplace(x, mults);
      else
        it->factor.apply_adjoint_inplace(x, mults);
    }
  }

  /// x <- chain^* x.
  void apply_adjoint_inplace(std::span<Scalar> x) const {
    for (const auto& s : stages_) {
      if (s.tag == StageTag::Forward)
        s.factor.apply_adjoint_inplace(x);
      else
        s.factor.apply_inplace(x);
    }
  }

  friend bool operator==(const FactorChain&, const FactorChain&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<Stage> stages_;
};

/// Checks the (B B^*)^w grammar and returns w.
inline std::size_t validate_chain(const FactorChain& c) {
  const std::size_t dim = c.dim();
  if (!is_pow2(dim) || dim < 2) throw GrammarError(0, "chain dimension must be a power of two >= 2");
  const std::size_t levels = log2_exact(dim);
  const std::size_t seg = 2 * levels;
  const auto& st = c.stages();
  if (st.empty()) throw GrammarError(0, "empty chain");
  for (std::size_t i = 0; i < st.size(); ++i) {
    const std::size_t pos = i % seg;
    const StageTag want_tag = pos < levels ? StageTag::Forward : StageTag::Transposed;
    const std::size_t want_k = pos < levels ? (dim >> pos) : (std::size_t{2} << (pos - levels));
    if (st[i].factor.n() != dim)
      throw GrammarError(i, "stage size " + std::to_string(st[i].factor.n()) + " != " + std::to_string(dim));
    if (st[i].tag != want_tag)
      throw GrammarError(i, want_tag == StageTag::Forward ? "expected a forward stage" : "expected a transposed stage");
    if (st[i].factor.k() != want_k)
      throw GrammarError(i, "block size " + std::to_string(st[i].factor.k()) + ", expected " + std::to_string(want_k));
  }
  if (st.size() % seg != 0) throw GrammarError(st.size(), "chain ends inside a segment");
  return st.size() / seg;
}

inline std::vector<BBSegment> FactorChain::segments() const {
  const std::size_t w = validate_chain(*this);
  const std::size_t levels = log2_exact(dim_);
  std::vector<BBSegment> out;
  out.reserve(w);
  for (std::size_t s = 0; s < w; ++s) {
    const std::size_t base = s * 2 * levels;
    std::vector<ButterflyFactorMatrix> left, right;
    for (std::size_t i = 0; i < levels; ++i) left.push_back(stages_[base + i].factor);
    for (std::size_t i = 0; i < levels; ++i) right.push_back(stages_[base + 2 * levels - 1 - i].factor);
    out.push_back({ButterflyMatrix(dim_, std::move(left)), ButterflyMatrix(dim_, std::move(right))});
  }
  return out;
}

/// Element of (B B^*)^w_e. Immutable after construction.
class KMatrix {
 public:
  KMatrix(std::size_t n, FactorChain chain) : n_(n), chain_(std::move(chain)) {
    if (!is_pow2(n)) throw std::invalid_argument("KMatrix: logical dimension must be a power of two");
    if (chain_.dim() % n != 0 || !is_pow2(chain_.dim() / n))
      throw std::invalid_argument("KMatrix: chain dimension must be a power-of-two multiple of n");
    w_ = validate_chain(chain_);
    e_ = chain_.dim() / n;
  }

  KMatrix(std::size_t n, const std::vector<BBSegment>& segments) : KMatrix(n, FactorChain(segments)) {}

  std::size_t n() const { return n_; }
  std::size_t e() const { return e_; }
  std::size_t w() const { return w_; }
  std::size_t dim() const { return chain_.dim(); }
  const FactorChain& chain() const { return chain_; }
  std::vector<BBSegment> segments() const { return chain_.segments(); }

  friend bool operator==(const KMatrix&, const KMatrix&) = default;

 private:
  std::size_t n_;
  FactorChain chain_;
  std::size_t w_ = 0;
  std::size_t e_ = 1;
};

/// K x: zero-pad to e*n, apply the chain, keep the first n entries.
inline Vector kmatrix_matvec(const KMatrix& k, std::span<const Scalar> x, std::uint64_t* mults = nullptr) {
  if (x.size() != k.n())
    throw std::invalid_argument("kmatrix_matvec: expected length " + std::to_string(k.n()) + ", got " +
                                std::to_string(x.size()));
  Vector buf(k.dim());
  std::copy(x.begin(), x.end(), buf.begin());
  k.chain().apply_inplace(buf, mults);
  buf.resize(k.n());
  return buf;
}

/// K^* x, the adjoint of the logical map.
inline Vector kmatrix_matvec_adjoint(const KMatrix& k, std::span<const Scalar> x) {
  if (x.size() != k.n()) throw std::invalid_argument("kmatrix_matvec_adjoint: dimension mismatch");
  Vector buf(k.dim());
  std::copy(x.begin(), x.end(), buf.begin());
  k.chain().apply_adjoint_inplace(buf);
  buf.resize(k.n());
  return buf;
}

/// Worker count for batch densification, capped by KALEIDO_THREADS (default 1).
inline std::size_t densify_threads() {
  if (const char* env = std::getenv("KALEIDO_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

/// Column j is K e_j. Columns are independent so the result does not depend on thread count.
inline DenseMatrix kmatrix_to_dense(const KMatrix& k) {
  const std::size_t n = k.n();
  DenseMatrix m(n, n);
  auto fill = [&](std::size_t begin, std::size_t end) {
    Vector buf(k.dim());
    for (std::size_t j = begin; j < end; ++j) {
      std::fill(buf.begin(), buf.end(), Scalar{});
      buf[j] = 1.0;
      k.chain().apply_inplace(buf);
      for (std::size_t r = 0; r < n; ++r) m(r, j) = buf[r];
    }
  };
  const std::size_t threads = std::min(densify_threads(), n);
  if (threads <= 1) {
    fill(0, n);
    return m;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(fill, b, e);
  }
  for (auto& th : pool) th.join();
  return m;
}

/// 4 w (e n) log2(e n): two stored diagonals' worth per row for each of the 2 w log2(e n) stages.
inline std::size_t param_count(const KMatrix& k) {
  std::size_t stored = 0;
  for (const auto& s : k.chain().stages()) stored += s.factor.stored_entries();
  return stored;
}

inline std::size_t param_count_formula(std::size_t n, std::size_t w, std::size_t e) {
  return 4 * w * (e * n) * log2_exact(e * n);
}

/// Appends an identity segment: same matrix, width w + 1.
inline KMatrix widen(const KMatrix& k) {
  auto segs = k.segments();
  segs.push_back(BBSegment::identity(k.dim()));
  return KMatrix(k.n(), segs);
}

inline KMatrix identity_kmatrix(std::size_t n, std::size_t e = 1, std::size_t w = 1) {
  std::vector<BBSegment> segs(w, BBSegment::identity(n * e));
  return KMatrix(n, segs);
}

/// Same logical n and chain, viewed with a different logical dimension (first m coordinates).
inline KMatrix with_logical_dim(const KMatrix& k, std::size_t m) { return KMatrix(m, k.chain()); }

/// Embeds the chain in a factor-times-larger inner space as diag(E, I, ..., I).
/// Keeps the logical matrix and width; multiplies the expansion by `factor`.
inline KMatrix lift_expansion(const KMatrix& k, std::size_t factor) {
  if (!is_pow2(factor)) throw std::invalid_argument("lift_expansion: factor must be a power of two");
  if (factor == 1) return k;
  const std::size_t dim = k.dim(), big = dim * factor;
  std::vector<BBSegment> out;
  for (const auto& seg : k.segments()) {
    BBSegment s = BBSegment::identity(big);
    auto embed = [&](const ButterflyMatrix& src, ButterflyMatrix& dst) {
      for (const auto& f : src.factors()) {
        auto& g = dst.factor_with_block(f.k());
        for (std::size_t p = 0; p < f.pairs(); ++p) g.set_block(p, f.block(p));
      }
    };
    embed(seg.left, s.left);
    embed(seg.right, s.right);
    out.push_back(std::move(s));
  }
  return KMatrix(k.n(), out);
}

}  // namespace kaleido
