#pragma once

// Sparse matrices, step matrices and the P1 H P2 V P3 decomposition.

#include <optional>
#include <tuple>

#include "kaleido/random.hpp"

namespace kaleido {

struct SparseEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  Scalar value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Square COO matrix with distinct coordinates.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n, std::vector<SparseEntry> entries) : n_(n), entries_(std::move(entries)) {
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    coords.reserve(entries_.size());
    for (const auto& e : entries_) {
      if (e.row >= n || e.col >= n)
        throw std::invalid_argument("SparseMatrix: entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                                    ") outside " + std::to_string(n) + "x" + std::to_string(n));
      if (!is_finite(e.value)) throw std::invalid_argument("SparseMatrix: non-finite entry");
      coords.emplace_back(e.row, e.col);
    }
    std::sort(coords.begin(), coords.end());
    if (std::adjacent_find(coords.begin(), coords.end()) != coords.end())
      throw std::invalid_argument("SparseMatrix: duplicate coordinate");
  }

  static SparseMatrix from_dense(const DenseMatrix& m) {
    if (!m.square()) throw std::invalid_argument("SparseMatrix::from_dense: matrix must be square");
    std::vector<SparseEntry> es;
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c)
        if (m(r, c) != Scalar{}) es.push_back({r, c, m(r, c)});
    return {m.rows(), std::move(es)};
  }

  std::size_t n() const { return n_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<SparseEntry>& entries() const { return entries_; }

  /// Entries sorted by (row, col).
  std::vector<SparseEntry> row_major() const {
    auto es = entries_;
    std::sort(es.begin(), es.end(), [](const SparseEntry& a, const SparseEntry& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    return es;
  }

  SparseMatrix adjoint() const {
    std::vector<SparseEntry> es;
    for (const auto& e : entries_) es.push_back({e.col, e.row, std::conj(e.value)});
    return {n_, std::move(es)};
  }

  DenseMatrix to_dense() const {
    DenseMatrix m(n_, n_);
    for (const auto& e : entries_) m(e.row, e.col) = e.value;
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::vector<SparseEntry> entries_;
};

enum class StepKind { Horizontal, Vertical };

class StepViolation : public std::invalid_argument {
 public:
  StepViolation(std::size_t c1, std::size_t c2, const std::string& what)
      : std::invalid_argument("step condition violated by columns " + std::to_string(c1) + " and " +
                              std::to_string(c2) + ": " + what),
        c1_(c1),
        c2_(c2) {}
  std::pair<std::size_t, std::size_t> columns() const { return {c1_, c2_}; }

 private:
  std::size_t c1_, c2_;
};

/// First offending column pair of the horizontal step condition, if any. Exhaustive over pairs.
inline std::optional<std::pair<std::size_t, std::size_t>> find_horizontal_step_violation(const SparseMatrix& s) {
  const std::size_t n = s.n();
  std::vector<std::optional<std::size_t>> row(n);
  for (const auto& e : s.entries()) {
    if (e.value == Scalar{}) continue;
    if (row[e.col]) return std::pair{e.col, e.col};
    row[e.col] = e.row;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!row[j]) continue;
    for (std::size_t j2 = j + 1; j2 < n; ++j2) {
      if (!row[j2]) continue;
      if (j2 - j < (*row[j2] + n - *row[j]) % n) return std::pair{j, j2};
    }
  }
  return std::nullopt;
}

/// Sparse matrix tagged as a horizontal or vertical step matrix; checked on construction.
class StepMatrix {
 public:
  StepMatrix(StepKind kind, SparseMatrix entries) : kind_(kind), entries_(std::move(entries)) {
    const auto v = find_horizontal_step_violation(kind_ == StepKind::Horizontal ? entries_ : entries_.adjoint());
    if (v) {
      const std::string what = v->first == v->second ? "more than one nonzero" : "row shift exceeds column gap";
      throw StepViolation(v->first, v->second, kind_ == StepKind::Horizontal ? what : what + " (in the adjoint)");
    }
  }

  StepKind kind() const { return kind_; }
  std::size_t n() const { return entries_.n(); }
  const SparseMatrix& entries() const { return entries_; }
  DenseMatrix to_dense() const { return entries_.to_dense(); }

 private:
  StepKind kind_;
  SparseMatrix entries_;
};

namespace detail {

struct StepColumns {
  std::vector<std::ptrdiff_t> row;  // -1 for an empty column
  std::vector<Scalar> val;
};

inline void hstep_recurse(const StepColumns& h, std::size_t offset, std::vector<ButterflyFactorMatrix>& factors,
                          std::size_t dim) {
  const std::size_t m = h.row.size();
  auto& f = factors[log2_exact(dim / m)];
  if (m == 2) {
    std::array<Scalar, 4> b{};
    for (std::size_t c = 0; c < 2; ++c)
      if (h.row[c] >= 0) b[static_cast<std::size_t>(h.row[c]) * 2 + c] = h.val[c];
    f.set_block(offset / 2, b);
    return;
  }
  const std::size_t half = m / 2;
  // For each residue i: a column holding a nonzero in rows i / i+half of the left and right halves.
  std::vector<std::ptrdiff_t> h11(half, -1), h21(half, -1), h12(half, -1), h22(half, -1);
  StepColumns left{std::vector<std::ptrdiff_t>(half, -1), Vector(half)};
  StepColumns right = left;
  for (std::size_t j = 0; j < m; ++j) {
    if (h.row[j] < 0) continue;
    const auto r = static_cast<std::size_t>(h.row[j]);
    const bool top = r < half;
    auto& slot = j < half ? (top ? h11 : h21) : (top ? h12 : h22);
    if (slot[r % half] < 0) slot[r % half] = static_cast<std::ptrdiff_t>(j);
    auto& sub = j < half ? left : right;
    sub.row[j % half] = static_cast<std::ptrdiff_t>(r % half);
    sub.val[j % half] = h.val[j];
  }
  const std::size_t base = (offset / m) * half;
  for (std::size_t i = 0; i < half; ++i) {
    if (h11[i] >= 0 && h21[i] >= 0)
      throw StepViolation(offset + h11[i], offset + h21[i], "left half collides on residue " + std::to_string(i));
    if (h12[i] >= 0 && h22[i] >= 0)
      throw StepViolation(offset + h12[i], offset + h22[i], "right half collides on residue " + std::to_string(i));
    // One nonzero per column: the bottom copy of H1 only when H21 is needed, the top copy of H2 only when H12 is.
    const bool down = h21[i] >= 0, up = h12[i] >= 0;
    f.set_block(base + i, down ? 0.0 : 1.0, up ? 1.0 : 0.0, down ? 1.0 : 0.0, up ? 0.0 : 1.0);
  }
  hstep_recurse(left, offset, factors, dim);
  hstep_recurse(right, offset + half, factors, dim);
}

inline ButterflyMatrix hstep_columns_to_butterfly(const SparseMatrix& s) {
  const std::size_t n = s.n();
  log2_exact(n);
  if (n < 2) throw std::invalid_argument("step matrix size must be >= 2");
  StepColumns cols{std::vector<std::ptrdiff_t>(n, -1), Vector(n)};
  for (const auto& e : s.entries()) {
    if (e.value == Scalar{}) continue;
    if (cols.row[e.col] >= 0) throw StepViolation(e.col, e.col, "more than one nonzero");
    cols.row[e.col] = static_cast<std::ptrdiff_t>(e.row);
    cols.val[e.col] = e.value;
  }
  ButterflyMatrix b(n);
  hstep_recurse(cols, 0, b.factors(), n);
  return b;
}

}  // namespace detail

/// Exact butterfly factorization of a horizontal step matrix.
inline ButterflyMatrix hstep_to_butterfly(const StepMatrix& h) {
  if (h.kind() != StepKind::Horizontal) throw std::invalid_argument("hstep_to_butterfly: expected a horizontal step matrix");
  return detail::hstep_columns_to_butterfly(h.entries());
}

/// Returns M with V = dense(M)^*; the stored factors of a transposed segment.
inline ButterflyMatrix vstep_to_butterfly_star(const StepMatrix& v) {
  if (v.kind() != StepKind::Vertical) throw std::invalid_argument("vstep_to_butterfly_star: expected a vertical step matrix");
  return detail::hstep_columns_to_butterfly(v.entries().adjoint());
}

/// Random horizontal step matrix: each column nonzero with probability `density`.
inline StepMatrix random_hstep(Rng& rng, std::size_t n, double density = 0.6, bool complex = true) {
  std::bernoulli_distribution keep(density);
  std::vector<SparseEntry> es;
  std::size_t row = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::optional<std::size_t> last;
  for (std::size_t j = 0; j < n; ++j) {
    if (!keep(rng)) continue;
    if (last) row = (row + std::uniform_int_distribution<std::size_t>(0, j - *last)(rng)) % n;
    es.push_back({row, j, random_scalar(rng, complex)});
    last = j;
  }
  return StepMatrix(StepKind::Horizontal, SparseMatrix(n, std::move(es)));
}

/// s nonzeros at distinct uniformly chosen positions.
inline SparseMatrix random_sparse(Rng& rng, std::size_t n, std::size_t s, bool complex = true) {
  if (s > n * n) throw std::invalid_argument("random_sparse: more nonzeros than cells");
  std::vector<std::size_t> cells(n * n);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<SparseEntry> es;
  for (std::size_t i = 0; i < s; ++i) es.push_back({cells[i] / n, cells[i] % n, random_scalar(rng, complex)});
  return {n, std::move(es)};
}

/// S = P1 H P2 V P3 for a matrix with at most n nonzeros.
struct StepDecomposition {
  Permutation p1;
  StepMatrix h;
  Permutation p2;
  StepMatrix v;
  Permutation p3;

  DenseMatrix to_dense() const {
    return p1.to_dense() * h.to_dense() * p2.to_dense() * v.to_dense() * p3.to_dense();
  }
};

inline StepDecomposition sparse_decompose_step(const SparseMatrix& s) {
  const std::size_t n = s.n();
  std::vector<SparseEntry> theta;
  for (const auto& e : s.row_major())
    if (e.value != Scalar{}) theta.push_back(e);
  const std::size_t nnz = theta.size();
  if (nnz > n)
    throw std::invalid_argument("sparse_decompose_step: " + std::to_string(nnz) + " nonzeros exceed n = " +
                                std::to_string(n));

  // Compaction: P1 sends compacted row t to its original row; P3 sends original column c_u to u.
  std::vector<char> row_used(n, 0), col_used(n, 0);
  for (const auto& e : theta) row_used[e.row] = col_used[e.col] = 1;
  std::vector<std::size_t> p1map, row_rank(n), col_rank(n), p3map(n);
  for (std::size_t r = 0; r < n; ++r)
    if (row_used[r]) {
      row_rank[r] = p1map.size();
      p1map.push_back(r);
    }
  for (std::size_t r = 0; r < n; ++r)
    if (!row_used[r]) p1map.push_back(r);
  std::size_t u = 0;
  for (std::size_t c = 0; c < n; ++c)
    if (col_used[c]) {
      col_rank[c] = u;
      p3map[c] = u++;
    }
  for (std::size_t c = 0; c < n; ++c)
    if (!col_used[c]) p3map[c] = u++;

  std::vector<SparseEntry> hs, vs;
  std::vector<std::size_t> order(nnz);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return col_rank[theta[a].col] < col_rank[theta[b].col]; });
  std::vector<std::size_t> p2map(n);
  std::iota(p2map.begin(), p2map.end(), std::size_t{0});
  for (std::size_t k = 0; k < nnz; ++k) {
    hs.push_back({row_rank[theta[k].row], k, theta[k].value});
    vs.push_back({k, col_rank[theta[order[k]].col], 1.0});
    p2map[k] = order[k];
  }
  return {Permutation(std::move(p1map)), StepMatrix(StepKind::Horizontal, SparseMatrix(n, std::move(hs))),
          Permutation(std::move(p2map)), StepMatrix(StepKind::Vertical, SparseMatrix(n, std::move(vs))),
          Permutation(std::move(p3map))};
}

}  // namespace kaleido
