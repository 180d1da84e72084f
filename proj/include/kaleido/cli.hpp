#pragma once

// The `kaleido` command-line front end. run() is callable in-process for testing.

#include <iostream>

#include <CLI11.hpp>

#include "kaleido/bench.hpp"
#include "kaleido/learn.hpp"
#include "kaleido/oracle.hpp"

namespace kaleido::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kIoOrParse = 3 };

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Globals {
  double tol = 1e-8;
  std::uint64_t seed = 0;
  std::string out;
};

namespace detail {

inline void emit(const Globals& g, std::ostream& out, const std::string& text) {
  if (g.out.empty())
    out << text;
  else
    write_file(g.out, text);
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Seeded inputs shared by `transform` and `oracle` so that both describe the same matrix.
struct TransformInputs {
  Vector kernel;          // circulant: first column; toeplitz: packed 2n - 1
  Vector s, d, b, a;      // fastfood / afdf diagonals
  Permutation p;
};

inline TransformInputs transform_inputs(const std::string& name, std::size_t n, std::uint64_t seed,
                                        const std::string& kernel_file) {
  TransformInputs in;
  Rng rng(seed);
  if (name == "circulant" || name == "toeplitz") {
    const std::size_t len = name == "circulant" ? n : 2 * n - 1;
    in.kernel = kernel_file.empty() ? random_vector(rng, len, false) : parse_vector(read_file(kernel_file));
    if (in.kernel.size() != len)
      throw UsageError(name + " kernel must have " + std::to_string(len) + " entries, found " +
                       std::to_string(in.kernel.size()));
  } else if (!kernel_file.empty()) {
    throw UsageError("--kernel only applies to circulant and toeplitz");
  }
  if (name == "fastfood") {
    in.s = random_vector(rng, n, false);
    in.d = random_vector(rng, n, false);
    in.b.resize(n);
    std::bernoulli_distribution coin(0.5);
    for (auto& z : in.b) z = coin(rng) ? 1.0 : -1.0;
    in.p = random_permutation(rng, n);
  }
  if (name == "afdf") {
    in.a = random_vector(rng, n);
    in.d = random_vector(rng, n);
  }
  return in;
}

inline std::size_t image_side(std::size_t n) {
  const std::size_t side = std::size_t{1} << (log2_exact(n) / 2);
  if (side * side != n) throw UsageError("dft2d needs n = side^2 with side a power of two");
  return side;
}

inline void check_size(std::size_t n) {
  if (!is_pow2(n) || n < 2) throw UsageError("--n must be a power of two >= 2");
}

inline KMatrix build_transform(const std::string& name, std::size_t n, const TransformInputs& in) {
  if (name == "dft") return dft_kmatrix(n);
  if (name == "hadamard") return hadamard_kmatrix(n);
  if (name == "dct") return dct_kmatrix(n);
  if (name == "dst") return dst_kmatrix(n);
  if (name == "circulant") return circulant_kmatrix(in.kernel);
  if (name == "toeplitz") return toeplitz_kmatrix(in.kernel);
  if (name == "fastfood") return fastfood_kmatrix(in.s, in.d, in.p, in.b);
  if (name == "afdf") return afdf_kmatrix(in.a, in.d);
  if (name == "dft2d") return dft2d_kmatrix(image_side(n));
  throw UsageError("unknown transform '" + name + "'");
}

/// Dense references built from the O(n^2) oracles and plain dense products.
inline DenseMatrix build_oracle(const std::string& name, std::size_t n, const TransformInputs& in) {
  if (name == "circulant") return oracle::circulant(in.kernel);
  if (name == "toeplitz") return oracle::toeplitz(in.kernel);
  if (name == "dft2d") return oracle::dft2d(image_side(n));
  if (name == "fastfood") {
    const DenseMatrix h = oracle::hadamard(n);
    return DenseMatrix::diagonal(in.s) * h * DenseMatrix::diagonal(in.d) * in.p.to_dense() * h *
           DenseMatrix::diagonal(in.b);
  }
  if (name == "afdf") {
    const DenseMatrix f = oracle::dft(n);
    return DenseMatrix::diagonal(in.a) * (Scalar(1.0 / static_cast<double>(n)) * f.adjoint()) *
           DenseMatrix::diagonal(in.d) * f;
  }
  try {
    return oracle::by_name(name, n);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline DenseMatrix pad_dense(const DenseMatrix& m, std::size_t n) {
  DenseMatrix out(n, n);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

inline std::size_t padded_size(std::size_t n) { return std::max<std::size_t>(2, next_pow2(n)); }

inline std::string summary(const Factorization& f) {
  std::ostringstream ss;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        const bool kmat = std::is_same_v<T, KMatrix>;
        ss << "kind: " << (kmat ? "kmatrix" : "obb") << "\n";
        ss << "n: " << k.n() << "\ne: " << k.e() << "\nw: " << k.w() << "\n";
        if constexpr (std::is_same_v<T, KMatrix>) {
          ss << "stages: " << k.chain().stages().size() << "\n";
          ss << "params: " << param_count(k) << "\n";
          ss << "params_formula: " << param_count_formula(k.n(), k.w(), k.e()) << "\n";
        } else {
          std::size_t p = 0;
          for (const auto& s : k.stages()) {
            for (const auto& fm : s.o1.factors()) p += fm.stored_entries();
            for (const auto& fm : s.o2.factors()) p += fm.stored_entries();
            p += s.d.size();
          }
          ss << "stages: " << k.stages().size() << "\n";
          ss << "params: " << p << "\n";
          ss << "max_unitarity_error: " << fmt(k.max_unitarity_error()) << "\n";
        }
      },
      f);
  return ss.str();
}

inline std::string cert_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Sidecar next to --out, or stderr when writing to stdout.
inline void emit_certificate(const Globals& g, std::ostream& err, const nlohmann::json& j) {
  if (g.out.empty())
    err << cert_json(j);
  else
    write_file(g.out + ".cert.json", cert_json(j));
}

}  // namespace detail

/// Returns the process exit code. Output goes to --out when given, else to `out`; diagnostics to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kaleidoscope matrix toolkit", "kaleido"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--tol", g.tol, "Verification tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output file (default: stdout)");
  app.fallthrough();

  std::function<int()> action;

  // transform
  std::string t_name, t_kernel;
  std::size_t t_n = 0;
  auto* tr = app.add_subcommand("transform", "Build a classical transform as a K-matrix");
  tr->add_option("--name", t_name, "dft|hadamard|dct|dst|circulant|toeplitz|fastfood|afdf|dft2d")->required();
  tr->add_option("--n", t_n, "Dimension (dft2d: total size side^2)")->required();
  tr->add_option("--kernel", t_kernel, "Vector file: circulant first column or packed Toeplitz diagonals");
  tr->callback([&] {
    action = [&] {
      detail::check_size(t_n);
      const KMatrix k = detail::build_transform(t_name, t_n, detail::transform_inputs(t_name, t_n, g.seed, t_kernel));
      detail::emit(g, out, serialize(k));
      return kOk;
    };
  });

  // oracle
  std::string o_name, o_kernel;
  std::size_t o_n = 0;
  auto* orc = app.add_subcommand("oracle", "Write a brute-force dense reference matrix");
  orc->add_option("--name", o_name, "dft|hadamard|dct|dst|dft2d|identity|circulant|toeplitz|fastfood|afdf")->required();
  orc->add_option("--n", o_n, "Dimension")->required();
  orc->add_option("--kernel", o_kernel, "Vector file for circulant/toeplitz");
  orc->callback([&] {
    action = [&] {
      if (o_n == 0) throw UsageError("--n must be positive");
      const auto in = detail::transform_inputs(o_name, o_n, g.seed, o_kernel);
      detail::emit(g, out, format_dense(detail::build_oracle(o_name, o_n, in)));
      return kOk;
    };
  });

  // decompose
  std::string d_kind, d_in;
  bool d_certify = false, d_obb = false;
  auto* dec = app.add_subcommand("decompose", "Factor a permutation, sparse or dense matrix");
  dec->add_option("--kind", d_kind, "perm|sparse|dense")->required()->check(CLI::IsMember({"perm", "sparse", "dense"}));
  dec->add_option("--in", d_in, "Input file")->required();
  dec->add_flag("--certify", d_certify, "Write a certificate with widths, bounds and reconstruction error");
  dec->add_flag("--obb", d_obb, "Emit orthogonal-butterfly stages");
  dec->callback([&] {
    action = [&]() -> int {
      const std::string text = read_file(d_in);
      DenseMatrix want;
      std::size_t w_bound = 1, e_bound = 1, orig = 0;
      std::optional<Factorization> f;
      if (d_kind == "perm") {
        const Permutation p0 = parse_permutation(text);
        orig = p0.n();
        std::vector<std::size_t> map = p0.map();
        for (std::size_t j = orig; j < detail::padded_size(orig); ++j) map.push_back(j);
        const Permutation p(std::move(map));
        want = p.to_dense();
        const KMatrix k = perm_to_bb(p);
        if (d_obb) {
          const auto seg = k.segments().front();
          f = ObbChain(p.n(), {ObbStage{seg.left, Vector(p.n(), 1.0), seg.right}});
        } else {
          f = k;
        }
      } else if (d_kind == "sparse") {
        const SparseMatrix s0 = parse_coo(text);
        orig = s0.n();
        const std::size_t n = detail::padded_size(orig);
        std::size_t nnz = 0;
        for (const auto& e : s0.entries()) nnz += e.value != Scalar{};
        const SparseMatrix s(n, s0.entries());
        want = s.to_dense();
        w_bound = sparse_width_bound(nnz, n);
        e_bound = nnz <= n ? 1 : 4;
        if (d_obb)
          f = orth_sparse_to_obb(s);
        else
          f = sparse_to_kmatrix(s);
      } else {
        const DenseMatrix m0 = parse_dense(text);
        orig = std::max(m0.rows(), m0.cols());
        const std::size_t n = detail::padded_size(orig);
        want = detail::pad_dense(m0, n);
        if (d_obb) {
          f = dense_to_obb(want);
          w_bound = 2 * n - 1;
        } else {
          f = dense_to_kmatrix_full(want);
          w_bound = 2 * n - 2;
        }
      }
      const double err_abs = max_abs_difference(factorization_dense(*f), want);
      const std::size_t w = std::visit([](const auto& k) { return k.w(); }, *f);
      const std::size_t e = std::visit([](const auto& k) { return k.e(); }, *f);
      const std::size_t n = std::visit([](const auto& k) { return k.n(); }, *f);
      std::string body = std::visit([](const auto& k) { return serialize(k); }, *f);
      detail::emit(g, out, body);
      if (orig != n) err << "note: input of size " << orig << " zero-padded to " << n << "\n";
      const bool ok = w <= w_bound && e <= e_bound && err_abs <= g.tol;
      if (d_certify) {
        nlohmann::json j{{"kind", d_kind}, {"n", n},           {"original_n", orig},    {"w", w},
                         {"e", e},         {"bound_w", w_bound}, {"bound_e", e_bound}, {"max_abs_error", err_abs},
                         {"within_bounds", ok}};
        detail::emit_certificate(g, err, j);
        if (!ok) return kVerifyFailed;
      }
      return kOk;
    };
  });

  // compile-circuit
  std::string c_in;
  bool c_certify = false, c_pad = false, c_obb = false;
  auto* cc = app.add_subcommand("compile-circuit", "Compile a linear arithmetic circuit into a K-matrix");
  cc->add_option("--in", c_in, "Circuit JSON file")->required();
  cc->add_flag("--certify", c_certify, "Write a certificate with the width and dimension bounds");
  cc->add_flag("--pad", c_pad, "Zero-pad non-square or non-power-of-two maps");
  cc->add_flag("--obb", c_obb, "Emit orthogonal-butterfly stages");
  cc->callback([&] {
    action = [&]() -> int {
      const LinearCircuit c = parse_circuit(read_file(c_in));
      const CircuitFrame fr = circuit_frame(c, c_pad);
      Factorization f = c_obb ? Factorization(circuit_to_obb(c, c_pad)) : Factorization(circuit_to_kmatrix(c, c_pad));
      const std::size_t w = std::visit([](const auto& k) { return k.w(); }, f);
      const std::size_t dim = std::visit([](const auto& k) { return k.dim(); }, f);
      detail::emit(g, out, std::visit([](const auto& k) { return serialize(k); }, f));
      if (c_certify) {
        const auto cert = certify_circuit(fr, w, dim);
        const double err_abs =
            max_abs_difference(factorization_dense(f), detail::pad_dense(circuit_dense(c), fr.n));
        const bool ok = cert.within() && err_abs <= g.tol;
        nlohmann::json j{{"s", cert.s},          {"d", cert.d},
                         {"s_prime", cert.s_prime}, {"w", cert.w},
                         {"e", cert.e},          {"dim", cert.dim},
                         {"bound_w", cert.w_bound}, {"bound_dim", cert.dim_bound},
                         {"max_abs_error", err_abs}, {"within_bounds", ok}};
        detail::emit_certificate(g, err, j);
        if (!ok) return kVerifyFailed;
      }
      return kOk;
    };
  });

  // apply
  std::string a_in, a_vec;
  auto* ap = app.add_subcommand("apply", "Multiply a vector by a factorization");
  ap->add_option("--in", a_in, "Factorization file")->required();
  ap->add_option("--vector", a_vec, "Vector file")->required();
  ap->callback([&] {
    action = [&] {
      const Factorization f = deserialize(read_file(a_in));
      const Vector x = parse_vector(read_file(a_vec));
      const std::size_t n = std::visit([](const auto& k) { return k.n(); }, f);
      if (x.size() != n)
        throw UsageError("vector has " + std::to_string(x.size()) + " entries, factorization expects " + std::to_string(n));
      detail::emit(g, out, format_vector(factorization_apply(f, x)));
      return kOk;
    };
  });

  // verify
  std::string v_in, v_ref;
  bool v_real = false;
  auto* ver = app.add_subcommand("verify", "Compare a factorization with a dense reference");
  ver->add_option("--in", v_in, "Factorization file")->required();
  ver->add_option("--ref", v_ref, "Dense reference file")->required();
  ver->add_flag("--real-part", v_real, "Compare the real part of the factorization (dct, dst)");
  ver->callback([&] {
    action = [&]() -> int {
      const Factorization f = deserialize(read_file(v_in));
      const DenseMatrix ref = parse_dense(read_file(v_ref));
      DenseMatrix got = factorization_dense(f);
      if (v_real) got = got.real_part();
      std::ostringstream ss;
      ss << detail::summary(f);
      if (ref.rows() != got.rows() || ref.cols() != got.cols()) {
        ss << "result: FAIL (reference is " << ref.rows() << "x" << ref.cols() << ", factorization is " << got.rows()
           << "x" << got.cols() << ")\n";
        detail::emit(g, out, ss.str());
        return kVerifyFailed;
      }
      // Relative to the factorization's own norm.
      const double mx = max_abs_difference(got, ref), rel = relative_frobenius_error(ref, got);
      const bool ok = rel <= g.tol;
      ss << "max_abs_error: " << detail::fmt(mx) << "\nrelative_error: " << detail::fmt(rel) << "\n";
      ss << "tolerance: " << detail::fmt(g.tol) << "\nresult: " << (ok ? "PASS" : "FAIL") << "\n";
      detail::emit(g, out, ss.str());
      return ok ? kOk : kVerifyFailed;
    };
  });

  // info
  std::string i_in;
  auto* inf = app.add_subcommand("info", "Summarize a factorization file");
  inf->add_option("--in", i_in, "Factorization file")->required();
  inf->callback([&] {
    action = [&] {
      detail::emit(g, out, detail::summary(deserialize(read_file(i_in))));
      return kOk;
    };
  });

  // recover
  std::vector<std::string> r_targets{"all"};
  std::size_t r_n = 64, r_width = 1, r_steps = 3000, r_batch = 0;
  std::vector<double> r_grid = RecoveryConfig{}.lr_grid;
  std::string r_init = "random";
  bool r_no_momentum = false;
  auto* rec = app.add_subcommand("recover", "Fit K-matrices and baselines to synthetic targets; CSV report");
  rec->add_option("--target", r_targets, "kaleidoscope|lowrank|sparse|convolution|fastfood|random|all")
      ->delimiter(',')
      ->capture_default_str();
  rec->add_option("--n", r_n, "Dimension")->capture_default_str();
  rec->add_option("--width", r_width, "K-matrix width")->capture_default_str()->check(CLI::PositiveNumber);
  rec->add_option("--steps", r_steps, "SGD steps per learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  rec->add_option("--batch", r_batch, "Sampled columns per step (0: all)")->capture_default_str();
  rec->add_option("--lr", r_grid, "Learning-rate grid")->delimiter(',')->capture_default_str();
  rec->add_option("--init", r_init, "random|transform")->capture_default_str()->check(CLI::IsMember({"random", "transform"}));
  rec->add_flag("--no-momentum", r_no_momentum, "Plain SGD");
  rec->callback([&] {
    action = [&] {
      detail::check_size(r_n);
      std::vector<TargetClass> targets;
      for (const auto& t : r_targets) {
        if (t == "all") {
          targets = {TargetClass::Kaleidoscope, TargetClass::LowRank, TargetClass::Sparse,
                     TargetClass::Convolution,  TargetClass::Fastfood, TargetClass::Random};
          break;
        }
        try {
          targets.push_back(parse_target(t));
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
      const std::size_t budget = param_count_formula(r_n, r_width, 1);
      std::vector<std::string> header{"method"}, krow{"kaleidoscope"}, lrow{"lowrank"}, srow{"sparse"};
      for (std::size_t i = 0; i < targets.size(); ++i) {
        Rng rng(g.seed * 7919 + i);
        const Target t = make_target(targets[i], r_n, rng, r_width);
        RecoveryConfig cfg;
        cfg.n = r_n;
        cfg.width = r_width;
        cfg.lr_grid = r_grid;
        cfg.steps = r_steps;
        cfg.batch = r_batch;
        cfg.seed = g.seed;
        cfg.momentum = !r_no_momentum;
        cfg.init = r_init == "transform" ? InitMode::Transform : InitMode::Random;
        const RecoveryResult r = sgd_recover(t.matrix, cfg);
        if (!r.monotone_tail) err << "warning: " << target_name(targets[i]) << ": final loss above initial loss\n";
        header.push_back(target_name(targets[i]));
        krow.push_back(detail::fmt(r.error));
        lrow.push_back(detail::fmt(lowrank_best_approx(t.matrix, budget).error));
        srow.push_back(detail::fmt(sparse_best_approx(t.matrix, budget).error));
      }
      detail::emit(g, out, csv_row(header) + csv_row(krow) + csv_row(lrow) + csv_row(srow));
      return kOk;
    };
  });

  // bench
  std::vector<std::size_t> b_sizes{256, 4096};
  std::size_t b_width = 1, b_reps = kMinBenchReps;
  auto* ben = app.add_subcommand("bench", "Time dense and factored matvec; CSV");
  ben->add_option("--n-list", b_sizes, "Sizes")->delimiter(',')->capture_default_str();
  ben->add_option("--width", b_width, "K-matrix width")->capture_default_str();
  ben->add_option("--reps", b_reps, "Timed repetitions (>= 11)")->capture_default_str();
  ben->callback([&] {
    action = [&] {
      if (b_reps < kMinBenchReps) throw UsageError("--reps must be at least " + std::to_string(kMinBenchReps));
      for (std::size_t n : b_sizes) detail::check_size(n);
      if (b_width == 0) throw UsageError("--width must be positive");
      detail::emit(g, out, bench_csv(run_bench(b_sizes, b_width, b_reps, g.seed)));
      return kOk;
    };
  });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "kaleido: " << e.what() << "\n";
    if (e.get_exit_code() == 0) return kOk;
    err << "run 'kaleido --help' for usage\n";
    return kUsage;
  }
  try {
    return action();
  } catch (const IoError& e) {
    err << "kaleido: " << e.what() << "\n";
    return kIoOrParse;
  } catch (const ParseError& e) {
    err << "kaleido: parse error: " << e.what() << "\n";
    return kIoOrParse;
  } catch (const std::invalid_argument& e) {
    err << "kaleido: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "kaleido: " << e.what() << "\n";
    return kVerifyFailed;
  }
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace kaleido::cli
