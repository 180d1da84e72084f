// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

#include "kaleido/cli.hpp"

using namespace kaleido;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail += "first failure: " + what + "; ";
      pass = false;
    }
  }
  void note(const std::string& s) { detail += s + "; "; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

bool is_exact_permutation(const DenseMatrix& m, const Permutation& p) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double want = p[c] == r ? 1.0 : 0.0;
      if (std::abs(m(r, c) - want) > 1e-12) return false;
    }
  return true;
}

Outcome transforms() {
  Outcome o;
  double worst = 0.0;
  for (std::size_t n : {4u, 16u, 64u, 256u}) {
    for (const std::string name : {"dft", "hadamard", "circulant", "toeplitz", "fastfood", "afdf", "dft2d"}) {
      if (name == "dft2d" && log2_exact(n) % 2) continue;
      const auto in = cli::detail::transform_inputs(name, n, 1000 + n, "");
      const KMatrix k = cli::detail::build_transform(name, n, in);
      const double err = relative_frobenius_error(kmatrix_to_dense(k), cli::detail::build_oracle(name, n, in));
      worst = std::max(worst, err);
      o.require(err <= 1e-10, name + " n=" + std::to_string(n) + " error " + num(err));
      if (name == "dft") o.require(k.w() == 2, "dft width " + std::to_string(k.w()));
      if (name == "hadamard" || name == "circulant") o.require(k.w() == 1, name + " width " + std::to_string(k.w()));
      if (name == "toeplitz") o.require(k.e() == 2, "toeplitz expansion " + std::to_string(k.e()));
    }
  }
  o.note("worst relative error " + num(worst));
  return o;
}

Outcome permutations() {
  Outcome o;
  Rng rng(2);
  std::size_t count = 0;
  for (std::size_t n : {8u, 64u, 512u})
    for (int t = 0; t < 200; ++t) {
      const Permutation p = random_permutation(rng, n);
      const KMatrix k = perm_to_bb(p);
      o.require(k.w() == 1 && k.e() == 1, "shape at n=" + std::to_string(n));
      o.require(is_exact_permutation(kmatrix_to_dense(k), p), "reconstruction at n=" + std::to_string(n));
      ++count;
    }
  const Permutation br = bit_reversal_perm(8);
  const KMatrix k = perm_to_bb(br);
  o.require(k.w() == 1 && k.e() == 1 && is_exact_permutation(kmatrix_to_dense(k), br), "8x8 bit reversal");
  o.note(std::to_string(count) + " random permutations plus bit reversal");
  return o;
}

Outcome sparse() {
  Outcome o;
  Rng rng(3);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = t % 2 ? 64 : 16;
    const std::size_t s = std::uniform_int_distribution<std::size_t>(1, 4 * n)(rng);
    const SparseMatrix m = random_sparse(rng, n, s);
    const KMatrix k = sparse_to_kmatrix(m);
    const double err = max_abs_difference(kmatrix_to_dense(k), m.to_dense());
    worst = std::max(worst, err);
    o.require(err <= 1e-10, "reconstruction error " + num(err));
    o.require(k.w() <= 4 * ((s + n - 1) / n), "width " + std::to_string(k.w()) + " for s=" + std::to_string(s));
    o.require(k.e() <= 4, "expansion " + std::to_string(k.e()));
  }
  o.note("100 matrices, worst error " + num(worst));
  return o;
}

Outcome circuits() {
  Outcome o;
  const double fft = max_abs_difference(kmatrix_to_dense(circuit_to_kmatrix(fft4_circuit())), oracle::dft(4));
  o.require(fft <= 1e-10, "fft4 error " + num(fft));
  Rng rng(4);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 1 + t % 4;
    const LinearCircuit c = random_circuit(rng, 8, d, 2 + t % 5);
    const KMatrix k = circuit_to_kmatrix(c);
    for (std::size_t j = 0; j < 8; ++j) {
      Vector e(8);
      e[j] = 1.0;
      const Vector want = circuit_eval(c, e), got = kmatrix_matvec(k, e);
      for (std::size_t i = 0; i < 8; ++i) worst = std::max(worst, std::abs(want[i] - got[i]));
    }
    const auto cert = certify_circuit(circuit_frame(c), k.w(), k.dim());
    o.require(k.w() <= 8 * d + 2, "width " + std::to_string(k.w()) + " at depth " + std::to_string(d));
    o.require(k.dim() <= 8 * cert.s_prime, "inner dimension " + std::to_string(k.dim()));
  }
  o.require(worst <= 1e-9, "basis evaluation error " + num(worst));
  o.note("fft4 error " + num(fft) + ", 20 circuits worst " + num(worst));
  return o;
}

Outcome orthogonal() {
  Outcome o;
  Rng rng(5);
  double house = 0.0, recon = 0.0, unit = 0.0;
  for (std::size_t n : {2u, 4u, 8u, 16u, 32u, 64u}) {
    for (bool complex : {false, true}) {
      Vector u = random_vector(rng, n, complex);
      const double nu = norm2(u);
      for (auto& z : u) z /= nu;
      DenseMatrix h = DenseMatrix::identity(n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) h(r, c) -= 2.0 * u[r] * std::conj(u[c]);
      const ObbChain hc = householder_to_obb(u);
      house = std::max(house, max_abs_difference(hc.to_dense(), h));
      unit = std::max(unit, hc.max_unitarity_error());

      const DenseMatrix q = random_unitary(rng, n, complex);
      const ObbChain qc = unitary_to_obb(q);
      o.require(qc.w() == n - 1, "stage count " + std::to_string(qc.w()) + " at n=" + std::to_string(n));
      recon = std::max(recon, max_abs_difference(qc.to_dense(), q));
      unit = std::max(unit, qc.max_unitarity_error());
    }
  }
  o.require(house <= 1e-10, "householder error " + num(house));
  o.require(recon <= 1e-7, "orthogonal reconstruction " + num(recon));
  o.require(unit <= 1e-10, "factor unitarity " + num(unit));
  o.note("householder " + num(house) + ", orthogonal " + num(recon) + ", unitarity " + num(unit));
  return o;
}

Outcome accounting() {
  Outcome o;
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = std::size_t{2} << std::uniform_int_distribution<int>(0, 7)(rng);
    const std::size_t w = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    const std::size_t e = std::size_t{1} << std::uniform_int_distribution<int>(0, 2)(rng);
    const KMatrix k = random_kmatrix(rng, n, w, e);
    std::size_t lg = 0;
    while ((std::size_t{1} << lg) < n * e) ++lg;
    const std::size_t want = 4 * w * n * e * lg;
    std::uint64_t mults = 0;
    kmatrix_matvec(k, random_vector(rng, n), &mults);
    const std::string at = " at (n,w,e)=(" + std::to_string(n) + "," + std::to_string(w) + "," + std::to_string(e) + ")";
    o.require(param_count(k) == want, "param count" + at);
    o.require(mults == want, "multiply count" + at);
  }
  o.note("20 random shapes");
  return o;
}

double fd_objective(const KMatrix& k, const Vector& x, const Vector& u) {
  const Vector y = kmatrix_matvec(k, x);
  Scalar acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::conj(u[i]) * y[i];
  return acc.real();
}

Outcome gradients() {
  Outcome o;
  Rng rng(7);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = std::size_t{4} << (t % 3);
    const bool complex = t % 2 == 0;
    const KMatrix k = random_kmatrix(rng, n, 1 + t % 2, t % 4 == 3 ? 2 : 1, complex);
    const Vector x = random_vector(rng, n, complex), u = random_vector(rng, n, complex);
    const MatvecGrad g = matvec_backward(k, x, u, complex);
    std::vector<double> th = flatten_params(k, complex);
    const double h = 1e-6;
    double num2 = 0.0, den = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
      const double keep = th[i];
      th[i] = keep + h;
      const double fp = fd_objective(unflatten_params(k, th, complex), x, u);
      th[i] = keep - h;
      const double fm = fd_objective(unflatten_params(k, th, complex), x, u);
      th[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      num2 += (fd - g.params[i]) * (fd - g.params[i]);
      den += fd * fd;
    }
    worst = std::max(worst, std::sqrt(num2 / den));
  }
  o.require(worst <= 1e-5, "relative gradient error " + num(worst));
  o.note("20 instances, worst relative error " + num(worst));
  return o;
}

Outcome recovery() {
  Outcome o;
  constexpr std::size_t n = 64;
  const std::size_t budget = param_count_formula(n, 1, 1);
  RecoveryConfig cfg;
  cfg.n = n;
  cfg.seed = 1;

  double k_err[2] = {0, 0}, lr_err[2] = {0, 0}, sp_err[2] = {0, 0};
  const TargetClass classes[2] = {TargetClass::Convolution, TargetClass::Fastfood};
  for (int i = 0; i < 2; ++i) {
    Rng rng(11);
    const Target t = make_target(classes[i], n, rng);
    lr_err[i] = lowrank_best_approx(t.matrix, budget).error;
    sp_err[i] = sparse_best_approx(t.matrix, budget).error;
    cfg.init = InitMode::Transform;
    const RecoveryResult tr = sgd_recover(t.matrix, cfg);
    cfg.init = InitMode::Random;
    const RecoveryResult rr = sgd_recover(t.matrix, cfg);
    k_err[i] = std::min(tr.error, rr.error);
    const std::string name = target_name(classes[i]);
    o.note(name + ": K transform-init rel " + num(tr.relative_error) + ", random-init rel " +
           num(rr.relative_error) + ", abs K " + num(k_err[i]) + " lowrank " + num(lr_err[i]) + " sparse " +
           num(sp_err[i]));
    if (i == 0) {
      o.require(tr.relative_error <= 0.05, "convolution relative error " + num(tr.relative_error));
      o.require(lr_err[i] >= 0.5, "convolution lowrank error " + num(lr_err[i]));
      o.require(sp_err[i] >= 0.5, "convolution sparse error " + num(sp_err[i]));
    }
    o.require(k_err[i] < lr_err[i] && k_err[i] < sp_err[i], name + " ordering K < lowrank, K < sparse");
  }

  Rng rng(12);
  const Target kt = make_target(TargetClass::Kaleidoscope, n, rng);
  cfg.init = InitMode::Warm;
  const RecoveryResult warm = sgd_recover(kt.matrix, cfg, &*kt.source);
  o.require(warm.error <= 1e-9, "warm start error " + num(warm.error));
  o.note("warm start error " + num(warm.error));
  return o;
}

Outcome scaling() {
  Outcome o;
  const std::vector<std::size_t> sizes{512, 8192};
  const auto rs = run_bench(sizes, 1, kMinBenchReps, 9);
  double ratio[2] = {0, 0};
  for (const auto& r : rs) {
    std::uint64_t kt = 0, dt = 0;
    for (const auto& q : rs)
      if (q.n == r.n) (q.method == BenchMethod::Kaleido ? kt : dt) = q.median_ns;
    ratio[r.n == 8192] = static_cast<double>(dt) / static_cast<double>(std::max<std::uint64_t>(kt, 1));
  }
  o.require(ratio[1] > ratio[0], "ratio at 8192 not above ratio at 512");
  o.note("dense/kaleido ratio n=512 " + num(ratio[0]) + ", n=8192 " + num(ratio[1]));
  return o;
}

FactorChain grammar_chain(std::size_t dim, const std::vector<std::pair<StageTag, std::size_t>>& layout) {
  std::vector<Stage> st;
  for (auto [tag, k] : layout) st.push_back({tag, ButterflyFactorMatrix(dim, k)});
  return FactorChain(dim, st);
}

Outcome invariants() {
  Outcome o;
  Rng rng(10);
  constexpr int kTrials = 50;
  int passed[8] = {};
  for (int t = 0; t < kTrials; ++t) {
    // Chain grammar: valid chains count their segments, a single corrupted stage is located.
    {
      const std::size_t dim = std::size_t{2} << (t % 5), levels = log2_exact(dim), w = 1 + t % 3;
      std::vector<std::pair<StageTag, std::size_t>> layout;
      for (std::size_t s = 0; s < w; ++s) {
        for (std::size_t i = 0; i < levels; ++i) layout.push_back({StageTag::Forward, dim >> i});
        for (std::size_t i = 0; i < levels; ++i) layout.push_back({StageTag::Transposed, std::size_t{2} << i});
      }
      bool ok = validate_chain(grammar_chain(dim, layout)) == w;
      const std::size_t bad = static_cast<std::size_t>(rng() % layout.size());
      auto broken = layout;
      broken[bad].first = broken[bad].first == StageTag::Forward ? StageTag::Transposed : StageTag::Forward;
      try {
        validate_chain(grammar_chain(dim, broken));
        ok = false;
      } catch (const GrammarError& e) {
        ok = ok && e.stage() == bad;
      }
      passed[0] += ok;
    }
    // Step condition: sampled step matrices pass and are butterflies; an out-of-range shift is flagged.
    {
      const std::size_t n = std::size_t{4} << (t % 5);
      const StepMatrix h = random_hstep(rng, n, 0.2 + 0.1 * (t % 7));
      bool ok = !find_horizontal_step_violation(h.entries()) &&
                max_abs_difference(hstep_to_butterfly(h).to_dense(), h.to_dense()) <= 1e-14;
      const std::size_t j = rng() % (n - 1), gap = 1 + rng() % (n - 1 - j), r = rng() % n;
      const SparseMatrix bad(n, {{r, j, 1.0}, {(r + gap + 1) % n, j + gap, 1.0}});
      ok = ok && (gap + 1 == n || find_horizontal_step_violation(bad).has_value());
      passed[1] += ok;
    }
    // Balance: balanced parts meet every condition and are single butterflies.
    {
      const std::size_t n = std::size_t{4} << (t % 5);
      const Permutation p = random_permutation(rng, n);
      const auto split = balance_permutation(p);
      bool ok = is_modular_balanced(split.balanced);
      for (std::size_t k = n; k >= 2; k /= 2) ok = ok && satisfies_balance(split.balanced, k);
      ok = ok && is_exact_permutation(balanced_to_butterfly(split.balanced).to_dense(), split.balanced);
      passed[2] += ok;
    }
    // Closure under product, sum, block diagonal, Kronecker product, butterfly inverse.
    {
      const std::size_t n = std::size_t{4} << (t % 3), e = std::size_t{1} << (t % 2);
      const KMatrix a = random_kmatrix(rng, n, 1, e), b = random_kmatrix(rng, n, 1 + t % 2, e);
      const DenseMatrix da = kmatrix_to_dense(a), db = kmatrix_to_dense(b);
      passed[3] += relative_frobenius_error(kmatrix_to_dense(k_product(a, b)), da * db) <= 1e-10;
      const KMatrix c = random_kmatrix(rng, n, b.w(), e);
      const DenseMatrix dc = kmatrix_to_dense(c);
      passed[4] += relative_frobenius_error(kmatrix_to_dense(k_sum({b, c})), db + dc) <= 1e-10;
      DenseMatrix bd(2 * n, 2 * n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          bd(r, c) = db(r, c);
          bd(n + r, n + c) = dc(r, c);
        }
      passed[5] += relative_frobenius_error(kmatrix_to_dense(k_block_diag({b, c})), bd) <= 1e-10;
      const std::size_t m1 = std::size_t{2} << (t % 2), m2 = std::size_t{2} << ((t / 2) % 2);
      const KMatrix ka = random_kmatrix(rng, m1, 1, e), kb = random_kmatrix(rng, m2, 1, e);
      passed[6] += relative_frobenius_error(kmatrix_to_dense(k_kronecker(ka, kb)),
                                            kronecker(kmatrix_to_dense(ka), kmatrix_to_dense(kb))) <= 1e-9;
      const ButterflyMatrix m = random_invertible_butterfly(rng, n);
      const DenseMatrix prod = m.to_dense() * butterfly_inverse(m).to_dense().adjoint();
      passed[7] += (prod - DenseMatrix::identity(n)).frobenius_norm() <= 1e-8;
    }
  }
  const char* names[8] = {"grammar", "step", "balance", "product", "sum", "block-diag", "kronecker", "inverse"};
  for (int i = 0; i < 8; ++i) {
    o.require(passed[i] == kTrials, std::string(names[i]) + " " + std::to_string(passed[i]) + "/50");
    o.note(std::string(names[i]) + " " + std::to_string(passed[i]) + "/50");
  }
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double limit_s;  // 0: no limit
  std::function<Outcome()> run;
};

}  // namespace

// Optional arguments select criterion ids.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<Criterion> all{
      {1, "transform exactness", 10, transforms},
      {2, "permutation decomposition", 30, permutations},
      {3, "sparse decomposition", 60, sparse},
      {4, "circuit compiler", 60, circuits},
      {5, "orthogonal hierarchy", 60, orthogonal},
      {6, "parameter and operation accounting", 0, accounting},
      {7, "gradient correctness", 10, gradients},
      {8, "synthetic recovery", 900, recovery},
      {9, "matvec scaling", 0, scaling},
      {10, "invariant suites", 0, invariants},
  };
  bool all_pass = true;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0) o.require(secs < c.limit_s, "runtime " + num(secs) + " s over " + num(c.limit_s) + " s");
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail << "time "
              << num(secs) << " s" << std::endl;
  }
  return all_pass ? 0 : 1;
}
