#pragma once

// Linear arithmetic circuits and their compilation to K-matrices and OBB chains.

#include "kaleido/ortho.hpp"

namespace kaleido {

enum class GateOp { Input, Comb };

/// Input gates read v in order of appearance. Comb gates compute a g[s1] + b g[s2].
struct Gate {
  GateOp op = GateOp::Input;
  Scalar a{}, b{};
  std::size_t s1 = 0, s2 = 0;

  static Gate input() { return {}; }
  static Gate comb(Scalar a, std::size_t s1, Scalar b, std::size_t s2) { return {GateOp::Comb, a, b, s1, s2}; }
  friend bool operator==(const Gate&, const Gate&) = default;
};

class CircuitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LinearCircuit {
 public:
  LinearCircuit(std::size_t n_inputs, std::vector<Gate> gates, std::vector<std::size_t> outputs)
      : n_inputs_(n_inputs), gates_(std::move(gates)), outputs_(std::move(outputs)) {
    if (gates_.empty()) throw CircuitError("circuit has no gates");
    layer_.resize(gates_.size());
    std::size_t inputs = 0;
    for (std::size_t i = 0; i < gates_.size(); ++i) {
      const Gate& g = gates_[i];
      if (g.op == GateOp::Input) {
        input_slot_.push_back(i);
        ++inputs;
        layer_[i] = 0;
        continue;
      }
      if (g.s1 >= i || g.s2 >= i)
        throw CircuitError("gate " + std::to_string(i) + " reads a source that does not precede it");
      if (!is_finite(g.a) || !is_finite(g.b)) throw CircuitError("gate " + std::to_string(i) + " has a non-finite constant");
      layer_[i] = 1 + std::max(layer_[g.s1], layer_[g.s2]);
      depth_ = std::max(depth_, layer_[i]);
    }
    if (inputs != n_inputs_)
      throw CircuitError("circuit declares " + std::to_string(n_inputs_) + " inputs but has " + std::to_string(inputs) +
                         " input gates");
    for (std::size_t o : outputs_)
      if (o >= gates_.size()) throw CircuitError("output refers to gate " + std::to_string(o) + " out of range");
  }

  std::size_t n_inputs() const { return n_inputs_; }
  std::size_t n_outputs() const { return outputs_.size(); }
  const std::vector<Gate>& gates() const { return gates_; }
  const std::vector<std::size_t>& outputs() const { return outputs_; }
  std::size_t layer(std::size_t gate) const { return layer_.at(gate); }
  std::size_t depth() const { return depth_; }
  std::size_t size() const { return gates_.size(); }
  /// Gate index of the i-th input.
  std::size_t input_gate(std::size_t i) const { return input_slot_.at(i); }

  friend bool operator==(const LinearCircuit& x, const LinearCircuit& y) {
    return x.n_inputs_ == y.n_inputs_ && x.gates_ == y.gates_ && x.outputs_ == y.outputs_;
  }

 private:
  std::size_t n_inputs_;
  std::vector<Gate> gates_;
  std::vector<std::size_t> outputs_;
  std::vector<std::size_t> layer_, input_slot_;
  std::size_t depth_ = 0;
};

/// Values of every gate.
inline Vector circuit_gate_values(const LinearCircuit& c, std::span<const Scalar> v) {
  if (v.size() != c.n_inputs()) throw std::invalid_argument("circuit_eval: input length mismatch");
  Vector g(c.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Gate& x = c.gates()[i];
    g[i] = x.op == GateOp::Input ? v[next++] : x.a * g[x.s1] + x.b * g[x.s2];
  }
  return g;
}

inline Vector circuit_eval(const LinearCircuit& c, std::span<const Scalar> v) {
  const Vector g = circuit_gate_values(c, v);
  Vector out;
  for (std::size_t o : c.outputs()) out.push_back(g[o]);
  return out;
}

/// (s, d): gate count including inputs, number of non-input layers.
inline std::pair<std::size_t, std::size_t> circuit_depth_size(const LinearCircuit& c) { return {c.size(), c.depth()}; }

/// n_outputs x n_inputs matrix by evaluating basis vectors.
inline DenseMatrix circuit_dense(const LinearCircuit& c) {
  DenseMatrix m(c.n_outputs(), c.n_inputs());
  for (std::size_t j = 0; j < c.n_inputs(); ++j) {
    Vector e(c.n_inputs());
    e[j] = 1.0;
    m.set_column(j, circuit_eval(c, e));
  }
  return m;
}

/// Radix-2 FFT on 4 points: gates 4..7 form the first layer, 8..11 the second.
inline LinearCircuit fft4_circuit() {
  const Scalar i(0.0, 1.0);
  std::vector<Gate> g(4, Gate::input());
  g.push_back(Gate::comb(1.0, 0, 1.0, 2));
  g.push_back(Gate::comb(1.0, 0, -1.0, 2));
  g.push_back(Gate::comb(1.0, 1, 1.0, 3));
  g.push_back(Gate::comb(1.0, 1, -1.0, 3));
  g.push_back(Gate::comb(1.0, 4, 1.0, 6));
  g.push_back(Gate::comb(1.0, 4, -1.0, 6));
  g.push_back(Gate::comb(1.0, 5, -i, 7));
  g.push_back(Gate::comb(1.0, 5, i, 7));
  return LinearCircuit(4, std::move(g), {8, 10, 9, 11});
}

/// Row sums by balanced addition trees; depth ceil(log2 n), or 1 when n = 1.
inline LinearCircuit dense_to_circuit(const DenseMatrix& m) {
  const std::size_t rows = m.rows(), n = m.cols();
  if (n == 0) throw CircuitError("dense_to_circuit: matrix has no columns");
  std::vector<Gate> g(n, Gate::input());
  std::vector<std::size_t> outs;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::size_t> level;
    if (n == 1) {
      g.push_back(Gate::comb(m(r, 0), 0, 0.0, 0));
      level.push_back(g.size() - 1);
    }
    for (std::size_t j = 0; j + 1 < n; j += 2) {
      g.push_back(Gate::comb(m(r, j), j, m(r, j + 1), j + 1));
      level.push_back(g.size() - 1);
    }
    if (n > 1 && n % 2) {
      g.push_back(Gate::comb(m(r, n - 1), n - 1, 0.0, n - 1));
      level.push_back(g.size() - 1);
    }
    while (level.size() > 1) {
      std::vector<std::size_t> up;
      for (std::size_t t = 0; t + 1 < level.size(); t += 2) {
        g.push_back(Gate::comb(1.0, level[t], 1.0, level[t + 1]));
        up.push_back(g.size() - 1);
      }
      if (level.size() % 2) up.push_back(level.back());
      level = std::move(up);
    }
    outs.push_back(level.front());
  }
  return LinearCircuit(n, std::move(g), std::move(outs));
}

/// Random circuit with exactly `depth` layers of `per_layer` gates each; outputs are distinct gates.
inline LinearCircuit random_circuit(Rng& rng, std::size_t n, std::size_t depth, std::size_t per_layer,
                                    bool complex = true) {
  std::vector<Gate> g(n, Gate::input());
  std::size_t prev_begin = 0, prev_end = n;
  for (std::size_t k = 0; k < depth; ++k) {
    const std::size_t begin = g.size();
    for (std::size_t t = 0; t < per_layer; ++t) {
      const std::size_t s1 = std::uniform_int_distribution<std::size_t>(prev_begin, prev_end - 1)(rng);
      const std::size_t s2 = std::uniform_int_distribution<std::size_t>(0, begin - 1)(rng);
      g.push_back(Gate::comb(random_scalar(rng, complex), s1, random_scalar(rng, complex), s2));
    }
    prev_begin = begin;
    prev_end = g.size();
  }
  std::vector<std::size_t> all(g.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() < n) throw std::invalid_argument("random_circuit: fewer gates than outputs");
  all.resize(n);
  return LinearCircuit(n, std::move(g), std::move(all));
}

/// The product form P M_d ... M_1 on a frame of size 2 s'. Gates are relabeled so layers are contiguous.
struct CircuitFrame {
  std::size_t n = 0;        // logical dimension
  std::size_t s = 0, d = 0, s_prime = 0, frame = 0;
  std::vector<std::size_t> order;  // frame slot -> gate index
  std::vector<std::size_t> z;      // z[k]: gates available before layer k + 1 (z[0] = inputs)
  std::vector<SparseMatrix> layers;
  SparseMatrix select;             // rows i < n_outputs pick output slots
};

inline CircuitFrame circuit_frame(const LinearCircuit& c, bool pad = false) {
  const std::size_t nin = c.n_inputs(), nout = c.n_outputs();
  std::size_t n = nin;
  if (nin != nout || !is_pow2(nin)) {
    if (!pad) throw CircuitError("circuit map is " + std::to_string(nout) + "x" + std::to_string(nin) +
                                 "; a square power-of-two map is required without padding");
    n = next_pow2(std::max(nin, nout));
  }
  CircuitFrame f;
  f.n = n;
  f.s = c.size();
  f.d = c.depth();
  f.s_prime = next_pow2(f.s);
  f.frame = std::max({2 * f.s_prime, n, next_pow2(2 * nout)});
  // Inputs first in input order, then layer by layer in index order.
  for (std::size_t i = 0; i < nin; ++i) f.order.push_back(c.input_gate(i));
  for (std::size_t k = 1; k <= f.d; ++k) {
    f.z.push_back(f.order.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c.gates()[i].op == GateOp::Comb && c.layer(i) == k) f.order.push_back(i);
  }
  f.z.push_back(f.order.size());
  std::vector<std::size_t> slot(c.size());
  for (std::size_t t = 0; t < f.order.size(); ++t) slot[f.order[t]] = t;
  for (std::size_t k = 1; k <= f.d; ++k) {
    std::vector<SparseEntry> es;
    for (std::size_t t = 0; t < f.z[k - 1]; ++t) es.push_back({t, t, 1.0});
    for (std::size_t t = f.z[k - 1]; t < f.z[k]; ++t) {
      const Gate& g = c.gates()[f.order[t]];
      const std::size_t c1 = slot[g.s1], c2 = slot[g.s2];
      if (c1 == c2) {
        es.push_back({t, c1, g.a + g.b});
      } else {
        es.push_back({t, c1, g.a});
        es.push_back({t, c2, g.b});
      }
    }
    std::erase_if(es, [](const SparseEntry& e) { return e.value == Scalar{}; });
    f.layers.emplace_back(f.frame, std::move(es));
  }
  std::vector<SparseEntry> sel;
  for (std::size_t i = 0; i < nout; ++i) sel.push_back({i, slot[c.outputs()[i]], 1.0});
  f.select = SparseMatrix(f.frame, std::move(sel));
  return f;
}

/// Selection matrix times the last layer (or the selection alone when d = 0).
inline SparseMatrix frame_final_matrix(const CircuitFrame& f) {
  if (f.layers.empty()) return f.select;
  const auto last = f.layers.back().row_major();
  std::vector<SparseEntry> es;
  for (const auto& s : f.select.entries())
    for (const auto& e : last)
      if (e.row == s.col) es.push_back({s.row, e.col, e.value});
  return SparseMatrix(f.frame, std::move(es));
}

/// If every output slot is distinct, the selection completed to a full permutation of the frame.
inline std::optional<Permutation> frame_output_permutation(const CircuitFrame& f) {
  std::vector<std::size_t> row_of(f.frame, f.frame);
  for (const auto& e : f.select.entries()) {
    if (row_of[e.col] != f.frame) return std::nullopt;
    row_of[e.col] = e.row;
  }
  std::vector<char> used(f.frame, 0);
  for (std::size_t r : row_of)
    if (r != f.frame) used[r] = 1;
  std::size_t free_row = 0;
  for (auto& r : row_of) {
    if (r != f.frame) continue;
    while (used[free_row]) ++free_row;
    r = free_row;
    used[free_row] = 1;
  }
  return Permutation(std::move(row_of));
}

struct CircuitCertificate {
  std::size_t s = 0, d = 0, s_prime = 0;
  std::size_t w = 0, e = 0, dim = 0;
  std::size_t w_bound = 0, dim_bound = 0;
  bool within() const { return w <= w_bound && dim <= dim_bound; }
};

inline CircuitCertificate certify_circuit(const CircuitFrame& f, std::size_t w, std::size_t dim) {
  return {f.s, f.d, f.s_prime, w, dim / f.n, dim, 8 * f.d + 2, 8 * f.s_prime};
}

/// Width 4d (1 for a wire circuit with distinct outputs); inner dimension 2 s'.
inline KMatrix circuit_to_kmatrix(const LinearCircuit& c, bool pad = false) {
  const CircuitFrame f = circuit_frame(c, pad);
  std::optional<KMatrix> acc;
  const auto push = [&](const KMatrix& k) { acc = acc ? k_product(k, *acc) : k; };
  for (std::size_t k = 0; k + 1 < f.layers.size(); ++k) push(sparse_to_kmatrix(f.layers[k]));
  const auto perm = f.layers.empty() ? frame_output_permutation(f) : std::nullopt;
  push(perm ? perm_to_bb(*perm) : sparse_to_kmatrix(frame_final_matrix(f)));
  return with_logical_dim(*acc, f.n);
}

/// Same product with every factor orthogonal; scalings live in the diagonals.
inline ObbChain circuit_to_obb(const LinearCircuit& c, bool pad = false) {
  const CircuitFrame f = circuit_frame(c, pad);
  std::vector<ObbStage> st;
  const auto push = [&](const ObbChain& k) { st.insert(st.begin(), k.stages().begin(), k.stages().end()); };
  for (std::size_t k = 0; k + 1 < f.layers.size(); ++k) push(orth_sparse_to_obb(f.layers[k]));
  const auto perm = f.layers.empty() ? frame_output_permutation(f) : std::nullopt;
  if (perm) {
    const auto seg = perm_to_bb(*perm).segments().front();
    push(ObbChain(f.frame, {ObbStage{seg.left, Vector(f.frame, 1.0), seg.right}}));
  } else {
    push(orth_sparse_to_obb(frame_final_matrix(f)));
  }
  return ObbChain(f.n, std::move(st));
}

}  // namespace kaleido
