#pragma once

// Reverse-mode gradients through factor chains, SGD recovery, closed-form baselines,
// and doubly-stochastic butterfly primitives.

#include <limits>

#include "kaleido/linalg.hpp"
#include "kaleido/transforms.hpp"

namespace kaleido {

/// Flat real layout: stage-major, then pair, then diagonal d1..d4, then (re, im) when complex.
struct ParamIndex {
  std::size_t stage = 0, pair = 0, diag = 0, part = 0;
  friend bool operator==(const ParamIndex&, const ParamIndex&) = default;
};

class ParamLayout {
 public:
  ParamLayout(const KMatrix& k, bool complex) : stages_(k.chain().stages().size()), pairs_(k.dim() / 2), cplx_(complex) {}

  std::size_t size() const { return stages_ * pairs_ * 4 * parts(); }
  std::size_t parts() const { return cplx_ ? 2 : 1; }
  bool complex() const { return cplx_; }

  std::size_t flat(const ParamIndex& i) const {
    if (i.stage >= stages_ || i.pair >= pairs_ || i.diag >= 4 || i.part >= parts())
      throw std::out_of_range("ParamLayout::flat: index out of range");
    return ((i.stage * pairs_ + i.pair) * 4 + i.diag) * parts() + i.part;
  }
  ParamIndex index(std::size_t f) const {
    if (f >= size()) throw std::out_of_range("ParamLayout::index: flat index out of range");
    ParamIndex i;
    i.part = f % parts();
    f /= parts();
    i.diag = f % 4;
    f /= 4;
    i.pair = f % pairs_;
    i.stage = f / pairs_;
    return i;
  }

 private:
  std::size_t stages_, pairs_;
  bool cplx_;
};

inline std::vector<double> flatten_params(const KMatrix& k, bool complex = true) {
  std::vector<double> out;
  out.reserve(ParamLayout(k, complex).size());
  for (const auto& st : k.chain().stages())
    for (std::size_t p = 0; p < st.factor.pairs(); ++p)
      for (const Scalar z : st.factor.block(p)) {
        out.push_back(z.real());
        if (complex) out.push_back(z.imag());
      }
  return out;
}

/// Chain with the shape of `shape` and the given parameters. Real mode zeroes imaginary parts.
inline KMatrix unflatten_params(const KMatrix& shape, std::span<const double> theta, bool complex = true) {
  if (theta.size() != ParamLayout(shape, complex).size()) throw std::invalid_argument("unflatten_params: length mismatch");
  auto st = shape.chain().stages();
  std::size_t at = 0;
  for (auto& s : st)
    for (std::size_t p = 0; p < s.factor.pairs(); ++p) {
      std::array<Scalar, 4> b;
      for (auto& z : b) {
        z = complex ? Scalar(theta[at], theta[at + 1]) : Scalar(theta[at], 0.0);
        at += complex ? 2 : 1;
      }
      s.factor.set_block(p, b);
    }
  return KMatrix(shape.n(), FactorChain(shape.dim(), std::move(st)));
}

namespace detail {

inline void stage_forward(const Stage& s, std::span<Scalar> x) {
  if (s.tag == StageTag::Forward)
    s.factor.apply_inplace(x);
  else
    s.factor.apply_adjoint_inplace(x);
}

/// Adds d Re<g, stage x>/d theta into grad and replaces g by stage^* g.
inline void stage_backward(const Stage& s, std::span<const Scalar> x, std::span<Scalar> g, double* grad, bool complex) {
  const auto& f = s.factor;
  const std::size_t h = f.half(), parts = complex ? 2 : 1;
  for (std::size_t p = 0; p < f.pairs(); ++p) {
    const std::size_t t = f.pair_top(p), b = t + h;
    std::array<Scalar, 4> gz;
    if (s.tag == StageTag::Forward)
      gz = {g[t] * std::conj(x[t]), g[t] * std::conj(x[b]), g[b] * std::conj(x[t]), g[b] * std::conj(x[b])};
    else
      gz = {std::conj(g[t]) * x[t], std::conj(g[b]) * x[t], std::conj(g[t]) * x[b], std::conj(g[b]) * x[b]};
    double* out = grad + p * 4 * parts;
    for (std::size_t q = 0; q < 4; ++q) {
      out[q * parts] += gz[q].real();
      if (complex) out[q * parts + 1] += gz[q].imag();
    }
  }
  if (s.tag == StageTag::Forward)
    f.apply_adjoint_inplace(g);
  else
    f.apply_inplace(g);
}

/// Accumulates d Re<u, K x>/d theta into grad; returns K^* u (logical length).
/// Only segment-boundary vectors are kept; each segment's interior is recomputed during the backward pass.
inline Vector accumulate_backward(const KMatrix& k, std::span<const Scalar> x, std::span<const Scalar> u,
                                  std::span<double> grad, bool complex) {
  const std::size_t dim = k.dim(), n = k.n();
  if (x.size() != n || u.size() != n) throw std::invalid_argument("matvec_backward: dimension mismatch");
  const auto& st = k.chain().stages();
  const std::size_t seg = 2 * log2_exact(dim), w = st.size() / seg;
  const std::size_t per_stage = (dim / 2) * 4 * (complex ? 2 : 1);
  // in[s]: input to segment s, which is applied after segments s + 1 .. w - 1.
  std::vector<Vector> in(w);
  in[w - 1] = Vector(dim);
  std::copy(x.begin(), x.end(), in[w - 1].begin());
  for (std::size_t s = w - 1; s > 0; --s) {
    in[s - 1] = in[s];
    for (std::size_t i = (s + 1) * seg; i-- > s * seg;) stage_forward(st[i], in[s - 1]);
  }
  Vector g(dim);
  std::copy(u.begin(), u.end(), g.begin());
  std::vector<Vector> inner(seg);
  for (std::size_t s = 0; s < w; ++s) {
    // inner[j]: input of stage s * seg + j.
    Vector cur = in[s];
    for (std::size_t j = seg; j-- > 0;) {
      inner[j] = cur;
      stage_forward(st[s * seg + j], cur);
    }
    for (std::size_t j = 0; j < seg; ++j) {
      const std::size_t i = s * seg + j;
      stage_backward(st[i], inner[j], g, grad.data() + i * per_stage, complex);
    }
  }
  g.resize(n);
  return g;
}

}  // namespace detail

struct MatvecGrad {
  std::vector<double> params;
  Vector x;
};

/// Gradients of Re<upstream, K x> with respect to the flat parameters and to x.
inline MatvecGrad matvec_backward(const KMatrix& k, std::span<const Scalar> x, std::span<const Scalar> upstream,
                                  bool complex = true) {
  MatvecGrad out;
  out.params.assign(ParamLayout(k, complex).size(), 0.0);
  out.x = detail::accumulate_backward(k, x, upstream, out.params, complex);
  return out;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Gradient of 0.5 ||K - T||_F^2 over the given columns (all columns when empty).
inline LossGrad half_squared_loss_grad(const KMatrix& k, const DenseMatrix& t, bool complex,
                                       std::span<const std::size_t> cols = {}) {
  const std::size_t n = k.n();
  if (t.rows() != n || t.cols() != n) throw std::invalid_argument("loss: target size mismatch");
  LossGrad out;
  out.grad.assign(ParamLayout(k, complex).size(), 0.0);
  std::vector<std::size_t> all;
  if (cols.empty()) {
    all.resize(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    cols = all;
  }
  double sq = 0.0;
  for (std::size_t j : cols) {
    Vector e(n);
    e[j] = 1.0;
    Vector r = kmatrix_matvec(k, e);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] -= t(i, j);
      sq += std::norm(r[i]);
    }
    detail::accumulate_backward(k, e, r, out.grad, complex);
  }
  out.loss = 0.5 * sq;
  return out;
}

/// loss = ||dense(K) - T||_F and its gradient (zero at loss 0). Sampled columns when `batch` > 0.
inline LossGrad frobenius_loss_grad(const KMatrix& k, const DenseMatrix& t, bool complex = true, std::size_t batch = 0,
                                    Rng* rng = nullptr) {
  std::vector<std::size_t> cols;
  if (batch > 0) {
    if (!rng) throw std::invalid_argument("frobenius_loss_grad: sampled mode needs an rng");
    std::uniform_int_distribution<std::size_t> pick(0, k.n() - 1);
    for (std::size_t b = 0; b < batch; ++b) cols.push_back(pick(*rng));
  }
  LossGrad hs = half_squared_loss_grad(k, t, complex, cols);
  const double l = std::sqrt(2.0 * hs.loss);
  if (l > 0.0)
    for (auto& g : hs.grad) g /= l;
  else
    std::fill(hs.grad.begin(), hs.grad.end(), 0.0);
  return {l, std::move(hs.grad)};
}

// ---------------------------------------------------------------------------------------------
// Targets and baselines

enum class TargetClass { Kaleidoscope, LowRank, Sparse, Convolution, Fastfood, Random };

inline const char* target_name(TargetClass c) {
  switch (c) {
    case TargetClass::Kaleidoscope: return "kaleidoscope";
    case TargetClass::LowRank: return "lowrank";
    case TargetClass::Sparse: return "sparse";
    case TargetClass::Convolution: return "convolution";
    case TargetClass::Fastfood: return "fastfood";
    case TargetClass::Random: return "random";
  }
  return "?";
}

inline TargetClass parse_target(const std::string& s) {
  for (auto c : {TargetClass::Kaleidoscope, TargetClass::LowRank, TargetClass::Sparse, TargetClass::Convolution,
                 TargetClass::Fastfood, TargetClass::Random})
    if (s == target_name(c)) return c;
  throw std::invalid_argument("unknown target class '" + s + "'");
}

struct Target {
  DenseMatrix matrix;
  std::optional<KMatrix> source;  // set for kaleidoscope targets
};

/// Random target scaled so that E[T^* T] = I. Low-rank targets have rank 2, sparse targets 4n nonzeros.
inline Target make_target(TargetClass c, std::size_t n, Rng& rng, std::size_t width = 1) {
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  switch (c) {
    case TargetClass::Kaleidoscope: {
      KMatrix k = random_kmatrix(rng, n, width, 1, true);
      return {kmatrix_to_dense(k), std::move(k)};
    }
    case TargetClass::LowRank: {
      const std::size_t r = 2;
      const DenseMatrix a = random_dense(rng, n, r, false), b = random_dense(rng, r, n, false);
      return {Scalar(1.0 / std::sqrt(static_cast<double>(n * r))) * (a * b), std::nullopt};
    }
    case TargetClass::Sparse: {
      const std::size_t s = std::min(n * n, 4 * n);
      const double scale = std::sqrt(static_cast<double>(n) / static_cast<double>(s));
      return {Scalar(scale) * random_sparse(rng, n, s, false).to_dense(), std::nullopt};
    }
    case TargetClass::Convolution: {
      Vector col = random_vector(rng, n, false);
      for (auto& z : col) z *= inv_sqrt_n;
      DenseMatrix m(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = col[(i + n - j) % n];
      return {std::move(m), std::nullopt};
    }
    case TargetClass::Fastfood: {
      // S H D P H B with orthonormal H; B Rademacher, D Gaussian, S chi-distributed with E[S^2] = 1.
      Vector s(n), d = random_vector(rng, n, false), b(n);
      std::bernoulli_distribution coin(0.5);
      for (auto& z : b) z = coin(rng) ? 1.0 : -1.0;
      for (auto& z : s) z = norm2(random_vector(rng, n, false)) * inv_sqrt_n;
      const Permutation p = random_permutation(rng, n);
      DenseMatrix h(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) h(i, j) = (std::popcount(i & j) % 2 ? -inv_sqrt_n : inv_sqrt_n);
      const DenseMatrix m = DenseMatrix::diagonal(s) * h * DenseMatrix::diagonal(d) * p.to_dense() * h *
                            DenseMatrix::diagonal(b);
      return {m, std::nullopt};
    }
    case TargetClass::Random: {
      DenseMatrix m = random_dense(rng, n, n, false);
      return {Scalar(inv_sqrt_n) * m, std::nullopt};
    }
  }
  throw std::invalid_argument("make_target: bad class");
}

struct Approximation {
  DenseMatrix matrix;
  double error = 0.0;  // absolute Frobenius
};

/// Truncated SVD at rank floor(budget / 2n).
inline Approximation lowrank_best_approx(const DenseMatrix& t, std::size_t budget) {
  const std::size_t n = t.rows();
  const std::size_t r = std::min(n, budget / (2 * n));
  if (r == 0) return {DenseMatrix(n, t.cols()), t.frobenius_norm()};
  const auto svd = jacobi_svd(t);
  DenseMatrix a(n, n);
  double tail = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k >= r) {
      tail += svd.sigma[k] * svd.sigma[k];
      continue;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) += svd.u(i, k) * svd.sigma[k] * std::conj(svd.v(j, k));
  }
  return {std::move(a), std::sqrt(tail)};
}

/// Keeps the `budget` largest-magnitude entries; ties broken by (row, col).
inline Approximation sparse_best_approx(const DenseMatrix& t, std::size_t budget) {
  const std::size_t rows = t.rows(), cols = t.cols();
  std::vector<std::size_t> idx(rows * cols);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t x, std::size_t y) { return std::abs(t.data()[x]) > std::abs(t.data()[y]); });
  DenseMatrix a(rows, cols);
  double dropped = 0.0;
  for (std::size_t q = 0; q < idx.size(); ++q) {
    const std::size_t r = idx[q] / cols, c = idx[q] % cols;
    if (q < budget)
      a(r, c) = t(r, c);
    else
      dropped += std::norm(t(r, c));
  }
  return {std::move(a), std::sqrt(dropped)};
}

// ---------------------------------------------------------------------------------------------
// SGD recovery

/// Random: random complex factors. Transform: identity written as F^{-1} I F, extra segments identity.
/// Warm: caller-supplied parameters.
enum class InitMode { Random, Transform, Warm };

/// Identity of width w whose first segment carries the DFT-diagonalization twiddles.
inline KMatrix transform_init(std::size_t n, std::size_t w) {
  Vector e0(n);
  e0[0] = 1.0;
  const KMatrix c = circulant_kmatrix(e0);
  std::vector<Stage> st = c.chain().stages();
  const KMatrix id = identity_kmatrix(n, 1, w);
  for (std::size_t i = st.size(); i < id.chain().stages().size(); ++i) st.push_back(id.chain().stages()[i]);
  return KMatrix(n, FactorChain(n, std::move(st)));
}

struct RecoveryConfig {
  std::size_t n = 64;
  std::size_t width = 1;
  std::vector<double> lr_grid{0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 0.5};
  std::size_t steps = 3000;
  std::size_t batch = 0;  // 0: exact gradient over all columns
  std::uint64_t seed = 0;
  InitMode init = InitMode::Random;
  bool momentum = true;
  bool complex = true;
};

struct RecoveryResult {
  KMatrix k;
  std::vector<double> history;  // ||K - T||_F^2 per step, then the final value
  double best_lr = 0.0;
  double error = 0.0;           // absolute Frobenius
  double relative_error = 0.0;
  bool monotone_tail = true;    // final loss <= initial loss
};

/// SGD on ||K - T||_F^2 for every learning rate in the grid; keeps the lowest final loss.
/// Diverged grid points are skipped. `warm` seeds the parameters in warm mode.
inline RecoveryResult sgd_recover(const DenseMatrix& t, const RecoveryConfig& cfg, const KMatrix* warm = nullptr) {
  if (cfg.steps == 0) throw std::invalid_argument("sgd_recover: step budget must be positive");
  if (!is_pow2(cfg.n) || cfg.n < 2 || t.rows() != cfg.n || t.cols() != cfg.n)
    throw std::invalid_argument("sgd_recover: target must be n x n with n a power of two");
  if (cfg.lr_grid.empty()) throw std::invalid_argument("sgd_recover: empty learning-rate grid");
  if (cfg.init == InitMode::Warm && !warm) throw std::invalid_argument("sgd_recover: warm start needs initial parameters");
  Rng init_rng(cfg.seed);
  const KMatrix init = cfg.init == InitMode::Warm        ? *warm
                       : cfg.init == InitMode::Transform ? transform_init(cfg.n, cfg.width)
                                                         : random_kmatrix(init_rng, cfg.n, cfg.width, 1, cfg.complex);
  if (init.n() != cfg.n) throw std::invalid_argument("sgd_recover: warm start has the wrong dimension");
  const double tn = t.frobenius_norm();
  std::optional<RecoveryResult> best;
  for (std::size_t g = 0; g < cfg.lr_grid.size(); ++g) {
    const double lr = cfg.lr_grid[g];
    Rng batch_rng(cfg.seed * 1000003 + g);
    std::vector<double> theta = flatten_params(init, cfg.complex), vel(theta.size(), 0.0);
    KMatrix k = unflatten_params(init, theta, cfg.complex);
    std::vector<double> hist;
    bool diverged = false;
    std::vector<std::size_t> cols;
    for (std::size_t step = 0; step < cfg.steps && !diverged; ++step) {
      if (cfg.batch > 0) {
        cols.clear();
        std::uniform_int_distribution<std::size_t> pick(0, cfg.n - 1);
        for (std::size_t b = 0; b < cfg.batch; ++b) cols.push_back(pick(batch_rng));
      }
      LossGrad lg = half_squared_loss_grad(k, t, cfg.complex, cols);
      const double scale = cfg.batch > 0 ? static_cast<double>(cfg.n) / static_cast<double>(cfg.batch) : 1.0;
      hist.push_back(2.0 * lg.loss * scale);
      if (!std::isfinite(hist.back())) {
        diverged = true;
        break;
      }
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = 2.0 * scale * lg.grad[i];
        vel[i] = (cfg.momentum ? 0.9 * vel[i] : 0.0) + gi;
        theta[i] -= lr * vel[i];
      }
      if (!std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); })) {
        diverged = true;
        break;
      }
      k = unflatten_params(init, theta, cfg.complex);
    }
    if (diverged) continue;
    const double err = (kmatrix_to_dense(k) - t).frobenius_norm();
    if (!std::isfinite(err)) continue;
    hist.push_back(err * err);
    if (!best || err < best->error) {
      const bool mono = hist.back() <= hist.front();
      best = RecoveryResult{k, std::move(hist), lr, err, tn > 0.0 ? err / tn : err, mono};
    }
  }
  if (!best) throw std::runtime_error("sgd_recover: every learning rate diverged");
  return *best;
}

// ---------------------------------------------------------------------------------------------
// Doubly-stochastic butterflies

/// Per-block parameter a: block [[a, 1 - a], [1 - a, a]]. Factors in descending block size.
struct DoublyStochasticButterfly {
  std::size_t n = 0;
  std::vector<std::vector<double>> a;

  explicit DoublyStochasticButterfly(std::size_t n_, double init = 0.5) : n(n_) {
    log2_exact(n);
    if (n < 2) throw std::invalid_argument("DoublyStochasticButterfly: n must be >= 2");
    for (std::size_t k = n; k >= 2; k /= 2) a.emplace_back(n / 2, init);
  }

  ButterflyMatrix to_butterfly() const {
    ButterflyMatrix b(n);
    for (std::size_t l = 0; l < a.size(); ++l)
      for (std::size_t p = 0; p < n / 2; ++p) b.factors()[l].set_block(p, a[l][p], 1.0 - a[l][p], 1.0 - a[l][p], a[l][p]);
    return b;
  }
};

/// Clamps every parameter into [0, 1]; NaN becomes 0.5.
inline void ds_project(DoublyStochasticButterfly& d) {
  for (auto& lvl : d.a)
    for (auto& v : lvl) v = std::isnan(v) ? 0.5 : std::clamp(v, 0.0, 1.0);
}

struct DsSample {
  Permutation perm;
  std::vector<std::vector<char>> swapped;  // per factor, per block
};

/// Identity with probability a, swap otherwise, per block; the permutation is the product of the factors.
inline DsSample ds_sample(const DoublyStochasticButterfly& d, Rng& rng) {
  DoublyStochasticButterfly proj = d;
  ds_project(proj);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DsSample out{Permutation::identity(d.n), {}};
  std::vector<std::size_t> cur(d.n);
  std::iota(cur.begin(), cur.end(), std::size_t{0});  // cur[j]: row where column j currently sits
  std::vector<std::vector<char>> sw;
  for (std::size_t l = 0; l < proj.a.size(); ++l) {
    std::vector<char> s(d.n / 2);
    for (std::size_t p = 0; p < d.n / 2; ++p) s[p] = u(rng) >= proj.a[l][p];
    sw.push_back(std::move(s));
  }
  // Apply factors right to left: the block-size-2 factor acts first.
  for (std::size_t l = proj.a.size(); l-- > 0;) {
    const std::size_t k = d.n >> l, h = k / 2;
    for (auto& row : cur) {
      const std::size_t p = (row / k) * h + row % h;
      if (sw[l][p]) row = (row % k) < h ? row + h : row - h;
    }
  }
  out.perm = Permutation(std::move(cur));
  out.swapped = std::move(sw);
  return out;
}

inline Permutation ds_sample_permutation(const DoublyStochasticButterfly& d, Rng& rng) { return ds_sample(d, rng).perm; }

// ---------------------------------------------------------------------------------------------

/// sum over pixels of ||(right difference, down difference)||_2; differences leaving the grid are omitted.
inline double tv_smoothness_loss(const std::vector<std::vector<double>>& img) {
  double total = 0.0;
  const std::size_t h = img.size();
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t w = img[i].size();
    if (i > 0 && w != img[0].size()) throw std::invalid_argument("tv_smoothness_loss: ragged image");
    for (std::size_t j = 0; j < w; ++j) {
      const double dx = j + 1 < w ? img[i][j + 1] - img[i][j] : 0.0;
      const double dy = i + 1 < h ? img[i + 1][j] - img[i][j] : 0.0;
      total += std::hypot(dx, dy);
    }
  }
  return total;
}

}  // namespace kaleido
