#pragma once

// Matvec timing harness: naive dense O(n^2) kernel against the factored kernel.

#include <chrono>

#include "kaleido/io.hpp"

namespace kaleido {

enum class BenchMethod { Kaleido, Dense };

inline const char* bench_method_name(BenchMethod m) { return m == BenchMethod::Kaleido ? "kaleido" : "dense"; }

struct BenchRecord {
  std::size_t n = 0;
  BenchMethod method = BenchMethod::Kaleido;
  std::size_t width = 1;
  std::size_t reps = 0;
  std::uint64_t median_ns = 0;   // per matvec
  std::uint64_t multiplies = 0;  // complex multiplies per matvec
};

inline constexpr std::size_t kMinBenchReps = 11;
inline constexpr std::size_t kBenchWarmup = 3;

/// y = M x, row-major, no blocking.
inline void dense_matvec(const DenseMatrix& m, std::span<const Scalar> x, std::span<Scalar> y) {
  const std::size_t cols = m.cols();
  const Scalar* a = m.data().data();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Scalar acc = 0.0;
    const Scalar* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

namespace detail {

/// Median per-call time over `reps` timed runs after `kBenchWarmup` discarded runs.
/// Each run repeats `fn` enough times to last roughly a millisecond.
template <class F>
std::uint64_t median_ns(F&& fn, std::size_t reps) {
  using clock = std::chrono::steady_clock;
  std::size_t inner = 1;
  for (;;) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < inner; ++i) fn();
    const auto dt = clock::now() - t0;
    if (dt >= std::chrono::microseconds(1000) || inner >= (std::size_t{1} << 20)) break;
    inner *= 2;
  }
  std::vector<std::uint64_t> samples;
  for (std::size_t r = 0; r < reps + kBenchWarmup; ++r) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < inner; ++i) fn();
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count();
    if (r >= kBenchWarmup) samples.push_back(static_cast<std::uint64_t>(ns) / inner);
  }
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2), samples.end());
  return samples[samples.size() / 2];
}

}  // namespace detail

/// One kaleido and one dense record per n. The dense operand is random; timing does not depend on its values.
inline std::vector<BenchRecord> run_bench(std::span<const std::size_t> sizes, std::size_t width, std::size_t reps,
                                          std::uint64_t seed) {
  if (reps < kMinBenchReps) throw std::invalid_argument("bench: at least " + std::to_string(kMinBenchReps) + " repetitions required");
  if (width == 0) throw std::invalid_argument("bench: width must be positive");
  std::vector<BenchRecord> out;
  for (std::size_t n : sizes) {
    if (!is_pow2(n) || n < 2) throw std::invalid_argument("bench: sizes must be powers of two >= 2");
    Rng rng(seed + n);
    const KMatrix k = random_kmatrix(rng, n, width, 1, true);
    const Vector x = random_vector(rng, n);
    Vector buf(n);
    std::uint64_t mults = 0;
    std::copy(x.begin(), x.end(), buf.begin());
    k.chain().apply_inplace(buf, &mults);
    volatile double sink = 0.0;
    const std::uint64_t kt = detail::median_ns(
        [&] {
          std::copy(x.begin(), x.end(), buf.begin());
          k.chain().apply_inplace(buf);
          sink = sink + buf[0].real();
        },
        reps);
    out.push_back({n, BenchMethod::Kaleido, width, reps, kt, mults});
    DenseMatrix m(n, n);
    {
      std::normal_distribution<double> g;
      for (std::size_t r = 0; r < n; ++r)
        for (auto& z : m.row(r)) z = Scalar(g(rng), g(rng));
    }
    Vector y(n);
    const std::uint64_t dt = detail::median_ns(
        [&] {
          dense_matvec(m, x, y);
          sink = sink + y[0].real();
        },
        reps);
    out.push_back({n, BenchMethod::Dense, width, reps, dt, static_cast<std::uint64_t>(n) * n});
  }
  return out;
}

/// Header plus one row per record; the ratio column is dense / kaleido median time at that n.
inline std::string bench_csv(const std::vector<BenchRecord>& rs) {
  std::string out = csv_row({"n", "method", "width", "reps", "median_ns", "multiplies", "ratio_dense_over_kaleido"});
  for (const auto& r : rs) {
    std::uint64_t kt = 0, dt = 0;
    for (const auto& q : rs)
      if (q.n == r.n) (q.method == BenchMethod::Kaleido ? kt : dt) = q.median_ns;
    char ratio[32] = "";
    if (kt > 0 && dt > 0) std::snprintf(ratio, sizeof ratio, "%.4f", static_cast<double>(dt) / static_cast<double>(kt));
    out += csv_row({std::to_string(r.n), bench_method_name(r.method), std::to_string(r.width), std::to_string(r.reps),
                    std::to_string(r.median_ns), std::to_string(r.multiplies), ratio});
  }
  return out;
}

}  // namespace kaleido
