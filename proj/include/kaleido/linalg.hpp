#pragma once

// Small dense factorizations: complex Householder QR and one-sided Jacobi SVD.

#include "kaleido/random.hpp"

namespace kaleido {

/// Unit vector u with (I - 2 u u^*) x = -e^{i arg x0} |x| e_0. Falls back to e_0 when x = 0.
inline Vector householder_vector(std::span<const Scalar> x) {
  Vector v(x.begin(), x.end());
  const double nx = norm2(x);
  const Scalar phase = std::abs(x[0]) > 0.0 ? x[0] / std::abs(x[0]) : Scalar(1.0);
  v[0] += phase * nx;
  const double nv = norm2(v);
  if (nv == 0.0) {
    std::fill(v.begin(), v.end(), Scalar{});
    v[0] = 1.0;
    return v;
  }
  for (auto& z : v) z /= nv;
  return v;
}

/// Applies (I - 2 u u^*) to rows [off, off + u.size()) of every column of m.
inline void apply_householder_left(DenseMatrix& m, std::span<const Scalar> u, std::size_t off) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    Scalar dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += std::conj(u[i]) * m(off + i, c);
    for (std::size_t i = 0; i < u.size(); ++i) m(off + i, c) -= 2.0 * u[i] * dot;
  }
}

struct QrResult {
  std::vector<Vector> reflectors;  // full-length unit vectors, reflector i acts on rows i..n-1
  DenseMatrix q;
  DenseMatrix r;
};

/// A = Q R with Q = H_0 H_1 ... H_{n-2}. Every step applies a reflection, so there are exactly n - 1.
inline QrResult householder_qr(const DenseMatrix& a) {
  if (!a.square()) throw std::invalid_argument("householder_qr: square input required");
  const std::size_t n = a.rows();
  DenseMatrix r = a;
  std::vector<Vector> refl;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    Vector x(n - j);
    for (std::size_t i = j; i < n; ++i) x[i - j] = r(i, j);
    const Vector u = householder_vector(x);
    apply_householder_left(r, u, j);
    Vector full(n);
    std::copy(u.begin(), u.end(), full.begin() + static_cast<std::ptrdiff_t>(j));
    refl.push_back(std::move(full));
  }
  DenseMatrix q = DenseMatrix::identity(n);
  for (auto it = refl.rbegin(); it != refl.rend(); ++it) apply_householder_left(q, *it, 0);
  return {std::move(refl), std::move(q), std::move(r)};
}

/// Haar-like random unitary (orthogonal when complex = false): Q of a Gaussian matrix with R's phases removed.
inline DenseMatrix random_unitary(Rng& rng, std::size_t n, bool complex = true) {
  const auto qr = householder_qr(random_dense(rng, n, n, complex));
  DenseMatrix q = qr.q;
  for (std::size_t c = 0; c < n; ++c) {
    const Scalar d = qr.r(c, c);
    const Scalar ph = std::abs(d) > 0.0 ? d / std::abs(d) : Scalar(1.0);
    for (std::size_t r = 0; r < n; ++r) q(r, c) *= ph;
  }
  return q;
}

inline double unitarity_error(const DenseMatrix& q) {
  return (q.adjoint() * q - DenseMatrix::identity(q.cols())).frobenius_norm();
}

class SvdNoConvergence : public std::runtime_error {
 public:
  explicit SvdNoConvergence(std::size_t sweeps)
      : std::runtime_error("Jacobi SVD did not converge in " + std::to_string(sweeps) + " sweeps") {}
};

struct SvdResult {
  DenseMatrix u;
  std::vector<double> sigma;  // descending
  DenseMatrix v;              // M = U diag(sigma) V^*
};

/// One-sided Jacobi SVD; cyclic (p, q) order, at most `max_sweeps` sweeps.
inline SvdResult jacobi_svd(const DenseMatrix& m, std::size_t max_sweeps = 60, double tol = 1e-12) {
  if (!m.square()) throw std::invalid_argument("jacobi_svd: square input required");
  const std::size_t n = m.rows();
  DenseMatrix a = m, v = DenseMatrix::identity(n);
  bool converged = false;
  for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0;
        Scalar gamma = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          alpha += std::norm(a(i, p));
          beta += std::norm(a(i, q));
          gamma += std::conj(a(i, p)) * a(i, q);
        }
        const double g = std::abs(gamma);
        if (g == 0.0 || g <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const Scalar ph = std::conj(gamma / g);
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        auto rotate = [&](DenseMatrix& x) {
          for (std::size_t i = 0; i < n; ++i) {
            const Scalar xp = x(i, p), xq = x(i, q) * ph;
            x(i, p) = c * xp - s * xq;
            x(i, q) = s * xp + c * xq;
          }
        };
        rotate(a);
        rotate(v);
      }
  }
  if (!converged) throw SvdNoConvergence(max_sweeps);

  std::vector<double> sig(n);
  for (std::size_t j = 0; j < n; ++j) sig[j] = norm2(a.column(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sig[x] > sig[y]; });

  SvdResult out{DenseMatrix(n, n), std::vector<double>(n), DenseMatrix(n, n)};
  const double smax = n ? sig[order[0]] : 0.0;
  std::vector<char> null(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = sig[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
    if (sig[j] <= 1e-14 * smax || sig[j] == 0.0) {
      null[k] = 1;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) out.u(i, k) = a(i, j) / sig[j];
  }
  // Complete U on the null space by Gram-Schmidt against the standard basis.
  std::size_t next_basis = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!null[k]) continue;
    for (; next_basis < n; ++next_basis) {
      Vector cand(n);
      cand[next_basis] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t c = 0; c < n; ++c) {
          if (c == k || (null[c] && c > k)) continue;
          Scalar dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += std::conj(out.u(i, c)) * cand[i];
          for (std::size_t i = 0; i < n; ++i) cand[i] -= dot * out.u(i, c);
        }
      const double nc = norm2(cand);
      if (nc > 0.5) {
        for (std::size_t i = 0; i < n; ++i) out.u(i, k) = cand[i] / nc;
        ++next_basis;
        break;
      }
    }
  }
  return out;
}

}  // namespace kaleido
