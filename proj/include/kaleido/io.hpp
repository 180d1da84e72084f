#pragma once

// File formats: factorization JSON (.kjson), dense/vector/COO/permutation text, circuit JSON, CSV.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "kaleido/circuits.hpp"
#include "kaleido/ortho.hpp"

namespace kaleido {

/// Malformed input. `location` is "line L, column C", "line L" or a JSON pointer such as "/stages/3/k".
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string location, const std::string& msg)
      : std::runtime_error(location.empty() ? msg : location + ": " + msg), location_(std::move(location)) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("error writing '" + path + "'");
}

// ---------------------------------------------------------------------------------------------
// Numbers

/// 17 significant digits; exact round trip for every finite double.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("format_double: non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// "re" when the imaginary part is zero, else "re+imj" / "re-imj".
inline std::string format_scalar(Scalar z) {
  std::string s = format_double(z.real());
  if (z.imag() == 0.0) return s;
  const std::string im = format_double(z.imag());
  return s + (im.front() == '-' ? "" : "+") + im + "j";
}

/// Accepts "re", "re+imj", "re-imj", "imj", "j" and "-j".
inline std::optional<Scalar> parse_scalar(std::string_view t) {
  auto num = [](std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size() && std::isfinite(out);
  };
  if (t.empty()) return std::nullopt;
  double re = 0.0, im = 0.0;
  if (t.back() != 'j') {
    if (!num(t, re)) return std::nullopt;
    return Scalar(re);
  }
  t.remove_suffix(1);
  // Split at the last sign that is not leading and not part of an exponent.
  std::size_t split = std::string_view::npos;
  for (std::size_t i = t.size(); i-- > 1;)
    if ((t[i] == '+' || t[i] == '-') && t[i - 1] != 'e' && t[i - 1] != 'E') {
      split = i;
      break;
    }
  std::string_view rs = split == std::string_view::npos ? std::string_view{} : t.substr(0, split);
  std::string_view is = split == std::string_view::npos ? t : t.substr(split);
  if (!rs.empty() && !num(rs, re)) return std::nullopt;
  if (is == "" || is == "+")
    im = 1.0;
  else if (is == "-")
    im = -1.0;
  else if (!num(is, im))
    return std::nullopt;
  return Scalar(re, im);
}

// ---------------------------------------------------------------------------------------------
// Text formats

namespace detail {

/// Non-blank lines with comments ('#') removed, paired with 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> tokenize_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::istringstream ss{std::string(line)};
    std::vector<std::string> toks;
    for (std::string tok; ss >> tok;) toks.push_back(tok);
    if (!toks.empty()) out.emplace_back(line_no, std::move(toks));
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

inline std::string at_line(std::size_t l) { return "line " + std::to_string(l); }

inline Scalar scalar_at(const std::string& tok, std::size_t line) {
  const auto z = parse_scalar(tok);
  if (!z) throw ParseError(at_line(line), "bad number '" + tok + "'");
  return *z;
}

inline std::size_t index_at(const std::string& tok, std::size_t line) {
  std::size_t v = 0;
  const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) throw ParseError(at_line(line), "bad index '" + tok + "'");
  return v;
}

}  // namespace detail

inline DenseMatrix parse_dense(std::string_view text) {
  const auto lines = detail::tokenize_lines(text);
  if (lines.empty()) throw ParseError("line 1", "empty matrix");
  const std::size_t cols = lines.front().second.size();
  DenseMatrix m(lines.size(), cols);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto& [ln, toks] = lines[r];
    if (toks.size() != cols)
      throw ParseError(detail::at_line(ln), "expected " + std::to_string(cols) + " entries, found " + std::to_string(toks.size()));
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = detail::scalar_at(toks[c], ln);
  }
  return m;
}

inline std::string format_dense(const DenseMatrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += format_scalar(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline Vector parse_vector(std::string_view text) {
  Vector v;
  for (const auto& [ln, toks] : detail::tokenize_lines(text)) {
    if (toks.size() != 1) throw ParseError(detail::at_line(ln), "expected one entry per line");
    v.push_back(detail::scalar_at(toks[0], ln));
  }
  if (v.empty()) throw ParseError("line 1", "empty vector");
  return v;
}

inline std::string format_vector(std::span<const Scalar> v) {
  std::string out;
  for (Scalar z : v) out += format_scalar(z) + '\n';
  return out;
}

/// First line "n s", then s lines "row col re [im]".
inline SparseMatrix parse_coo(std::string_view text) {
  const auto lines = detail::tokenize_lines(text);
  if (lines.empty()) throw ParseError("line 1", "empty sparse file");
  const auto& [hl, head] = lines.front();
  if (head.size() != 2) throw ParseError(detail::at_line(hl), "header must be 'n s'");
  const std::size_t n = detail::index_at(head[0], hl), s = detail::index_at(head[1], hl);
  if (lines.size() - 1 != s)
    throw ParseError(detail::at_line(hl), "header declares " + std::to_string(s) + " entries, found " +
                                              std::to_string(lines.size() - 1));
  std::vector<SparseEntry> es;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [ln, t] = lines[i];
    if (t.size() != 3 && t.size() != 4) throw ParseError(detail::at_line(ln), "expected 'row col re [im]'");
    const std::size_t r = detail::index_at(t[0], ln), c = detail::index_at(t[1], ln);
    if (r >= n || c >= n) throw ParseError(detail::at_line(ln), "coordinate outside " + std::to_string(n) + "x" + std::to_string(n));
    const double re = detail::scalar_at(t[2], ln).real();
    const double im = t.size() == 4 ? detail::scalar_at(t[3], ln).real() : 0.0;
    es.push_back({r, c, Scalar(re, im)});
  }
  try {
    return SparseMatrix(n, std::move(es));
  } catch (const std::invalid_argument& e) {
    throw ParseError("", e.what());
  }
}

inline std::string format_coo(const SparseMatrix& s) {
  std::string out = std::to_string(s.n()) + ' ' + std::to_string(s.entries().size()) + '\n';
  for (const auto& e : s.entries()) {
    out += std::to_string(e.row) + ' ' + std::to_string(e.col) + ' ' + format_double(e.value.real());
    if (e.value.imag() != 0.0) out += ' ' + format_double(e.value.imag());
    out += '\n';
  }
  return out;
}

/// Line j holds the row that column j is sent to.
inline Permutation parse_permutation(std::string_view text) {
  std::vector<std::size_t> map;
  for (const auto& [ln, toks] : detail::tokenize_lines(text)) {
    if (toks.size() != 1) throw ParseError(detail::at_line(ln), "expected one index per line");
    map.push_back(detail::index_at(toks[0], ln));
  }
  if (map.empty()) throw ParseError("line 1", "empty permutation");
  try {
    return Permutation(std::move(map));
  } catch (const std::invalid_argument& e) {
    throw ParseError("", e.what());
  }
}

inline std::string format_permutation(const Permutation& p) {
  std::string out;
  for (std::size_t j = 0; j < p.n(); ++j) out += std::to_string(p[j]) + '\n';
  return out;
}

// ---------------------------------------------------------------------------------------------
// JSON writing

namespace detail {

inline std::string json_pair(Scalar z) { return "[" + format_double(z.real()) + "," + format_double(z.imag()) + "]"; }

inline std::string json_pairs(std::span<const Scalar> v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + json_pair(v[i]);
  return out + "]";
}

inline std::string json_blocks(const ButterflyFactorMatrix& f) {
  const std::size_t h = f.half(), nb = f.n() / f.k();
  std::string out = "[";
  for (std::size_t b = 0; b < nb; ++b) {
    std::array<Vector, 4> d;
    for (std::size_t i = 0; i < h; ++i) {
      const auto blk = f.block(b * h + i);
      for (std::size_t q = 0; q < 4; ++q) d[q].push_back(blk[q]);
    }
    out += b ? "," : "";
    out += "{\"d1\":" + json_pairs(d[0]) + ",\"d2\":" + json_pairs(d[1]) + ",\"d3\":" + json_pairs(d[2]) +
           ",\"d4\":" + json_pairs(d[3]) + "}";
  }
  return out + "]";
}

inline std::string json_factor(const ButterflyFactorMatrix& f) {
  return "{\"n\":" + std::to_string(f.n()) + ",\"k\":" + std::to_string(f.k()) + ",\"blocks\":" + json_blocks(f) + "}";
}

inline std::string json_butterfly(const ButterflyMatrix& b) {
  std::string out = "[";
  for (std::size_t i = 0; i < b.factors().size(); ++i) out += (i ? "," : "") + json_factor(b.factors()[i]);
  return out + "]";
}

}  // namespace detail

inline std::string serialize(const KMatrix& k) {
  std::string out = "{\"version\":1,\"n\":" + std::to_string(k.n()) + ",\"e\":" + std::to_string(k.e()) +
                    ",\"w\":" + std::to_string(k.w()) + ",\"stages\":[\n";
  const auto& st = k.chain().stages();
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto& f = st[i].factor;
    out += std::string(i ? ",\n" : "") + "{\"tag\":\"" + (st[i].tag == StageTag::Forward ? "F" : "T") +
           "\",\"n\":" + std::to_string(f.n()) + ",\"k\":" + std::to_string(f.k()) +
           ",\"blocks\":" + detail::json_blocks(f) + "}";
  }
  return out + "\n]}\n";
}

/// Stage records tagged "obb" with o1/o2 as lists of factor matrices in descending block size.
inline std::string serialize(const ObbChain& c) {
  std::string out = "{\"version\":1,\"n\":" + std::to_string(c.n()) + ",\"e\":" + std::to_string(c.e()) +
                    ",\"w\":" + std::to_string(c.w()) + ",\"stages\":[\n";
  for (std::size_t i = 0; i < c.stages().size(); ++i) {
    const auto& s = c.stages()[i];
    out += std::string(i ? ",\n" : "") + "{\"tag\":\"obb\",\"n\":" + std::to_string(c.dim()) +
           ",\"o1\":" + detail::json_butterfly(s.o1) + ",\"d\":" + detail::json_pairs(s.d) +
           ",\"o2\":" + detail::json_butterfly(s.o2) + "}";
  }
  return out + "\n]}\n";
}

// ---------------------------------------------------------------------------------------------
// JSON reading

namespace detail {

using nlohmann::json;

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col), "invalid JSON");
  }
}

/// Typed access with JSON-pointer error locations.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(path_.empty() ? "/" : path_, msg); }

  Reader at(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    const auto it = j_.find(key);
    if (it == j_.end()) throw ParseError(path_ + "/" + key, "missing field");
    return {*it, path_ + "/" + key};
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  std::vector<Reader> items() const {
    if (!j_.is_array()) fail("expected an array");
    std::vector<Reader> out;
    for (std::size_t i = 0; i < j_.size(); ++i) out.emplace_back(j_[i], path_ + "/" + std::to_string(i));
    return out;
  }

  std::size_t index() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<long long>() >= 0)) fail("expected a non-negative integer");
    return j_.get<std::size_t>();
  }
  std::string str() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("non-finite number");
    return v;
  }
  Scalar scalar() const {
    if (j_.is_number()) return number();
    const auto v = items();
    if (v.size() != 2) fail("expected [re, im]");
    return {v[0].number(), v[1].number()};
  }
  Vector scalars() const {
    Vector out;
    for (const auto& r : items()) out.push_back(r.scalar());
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

inline ButterflyFactorMatrix read_factor(const Reader& r, std::size_t n, std::size_t k) {
  if (!is_pow2(n) || n < 2) r.at("n").fail("size must be a power of two >= 2");
  if (!is_pow2(k) || k < 2 || k > n) r.at("k").fail("block size must be a power of two in [2, n]");
  ButterflyFactorMatrix f(n, k);
  const auto blocks = r.at("blocks").items();
  if (blocks.size() != n / k) r.at("blocks").fail("expected " + std::to_string(n / k) + " blocks");
  const std::size_t h = k / 2;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::array<Vector, 4> d;
    for (std::size_t q = 0; q < 4; ++q) {
      const Reader dq = blocks[b].at("d" + std::to_string(q + 1));
      d[q] = dq.scalars();
      if (d[q].size() != h) dq.fail("expected " + std::to_string(h) + " entries");
    }
    for (std::size_t i = 0; i < h; ++i) f.set_block(b * h + i, d[0][i], d[1][i], d[2][i], d[3][i]);
  }
  return f;
}

inline ButterflyMatrix read_butterfly(const Reader& r, std::size_t dim) {
  const auto fs = r.items();
  if (fs.size() != log2_exact(dim)) r.fail("expected " + std::to_string(log2_exact(dim)) + " factor matrices");
  std::vector<ButterflyFactorMatrix> out;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const std::size_t k = dim >> i;
    if (fs[i].at("n").index() != dim) fs[i].at("n").fail("factor size must equal the stage size");
    if (fs[i].at("k").index() != k) fs[i].at("k").fail("expected block size " + std::to_string(k));
    out.push_back(read_factor(fs[i], dim, k));
  }
  return ButterflyMatrix(dim, std::move(out));
}

}  // namespace detail

using Factorization = std::variant<KMatrix, ObbChain>;

/// Parses either chain kind; all errors are ParseError with a location, and nothing partial is returned.
inline Factorization deserialize(std::string_view text) {
  const auto doc = detail::parse_json(text);
  const detail::Reader root(doc, "");
  if (root.at("version").index() != 1) root.at("version").fail("unsupported version");
  const std::size_t n = root.at("n").index(), e = root.at("e").index(), w = root.at("w").index();
  if (!is_pow2(n)) root.at("n").fail("n must be a power of two");
  if (!is_pow2(e)) root.at("e").fail("e must be a power of two");
  const std::size_t dim = n * e;
  if (dim < 2) root.at("n").fail("inner dimension must be >= 2");
  const auto stages = root.at("stages").items();
  if (stages.empty()) root.at("stages").fail("no stages");
  const bool obb = stages.front().at("tag").str() == "obb";
  if (obb) {
    std::vector<ObbStage> out;
    for (const auto& s : stages) {
      if (s.at("tag").str() != "obb") s.at("tag").fail("mixed stage kinds");
      if (s.at("n").index() != dim) s.at("n").fail("stage size must be n * e");
      ObbStage st{detail::read_butterfly(s.at("o1"), dim), s.at("d").scalars(), detail::read_butterfly(s.at("o2"), dim)};
      if (st.d.size() != dim) s.at("d").fail("expected " + std::to_string(dim) + " entries");
      out.push_back(std::move(st));
    }
    if (out.size() != w) root.at("w").fail("w disagrees with the number of stages");
    try {
      return ObbChain(n, std::move(out));
    } catch (const std::invalid_argument& ex) {
      throw ParseError("/stages", ex.what());
    }
  }
  std::vector<Stage> out;
  for (const auto& s : stages) {
    const std::string tag = s.at("tag").str();
    if (tag != "F" && tag != "T") s.at("tag").fail(tag == "obb" ? "mixed stage kinds" : "tag must be F, T or obb");
    const std::size_t sn = s.at("n").index();
    if (sn != dim) s.at("n").fail("stage size must be n * e");
    out.push_back({tag == "F" ? StageTag::Forward : StageTag::Transposed, detail::read_factor(s, sn, s.at("k").index())});
  }
  try {
    KMatrix k(n, FactorChain(dim, std::move(out)));
    if (k.w() != w) root.at("w").fail("w disagrees with the stages");
    return k;
  } catch (const GrammarError& g) {
    throw ParseError("/stages/" + std::to_string(g.stage()), g.what());
  }
}

inline KMatrix deserialize_kmatrix(std::string_view text) {
  auto f = deserialize(text);
  if (auto* k = std::get_if<KMatrix>(&f)) return std::move(*k);
  throw ParseError("/stages/0/tag", "expected a K-matrix chain, found obb stages");
}

inline DenseMatrix factorization_dense(const Factorization& f) {
  return std::visit([](const auto& x) -> DenseMatrix {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, KMatrix>)
      return kmatrix_to_dense(x);
    else
      return x.to_dense();
  }, f);
}

inline Vector factorization_apply(const Factorization& f, std::span<const Scalar> x) {
  return std::visit([&](const auto& k) -> Vector {
    if constexpr (std::is_same_v<std::decay_t<decltype(k)>, KMatrix>)
      return kmatrix_matvec(k, x);
    else
      return k.apply(x);
  }, f);
}

// ---------------------------------------------------------------------------------------------
// Circuits

inline std::string serialize(const LinearCircuit& c) {
  std::string out = "{\"n_inputs\":" + std::to_string(c.n_inputs()) + ",\"gates\":[\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Gate& g = c.gates()[i];
    out += i ? ",\n" : "";
    if (g.op == GateOp::Input)
      out += "{\"op\":\"in\"}";
    else
      out += "{\"op\":\"comb\",\"a\":" + detail::json_pair(g.a) + ",\"s1\":" + std::to_string(g.s1) +
             ",\"b\":" + detail::json_pair(g.b) + ",\"s2\":" + std::to_string(g.s2) + "}";
  }
  out += "\n],\"outputs\":[";
  for (std::size_t i = 0; i < c.outputs().size(); ++i) out += (i ? "," : "") + std::to_string(c.outputs()[i]);
  return out + "]}\n";
}

inline LinearCircuit parse_circuit(std::string_view text) {
  const auto doc = detail::parse_json(text);
  const detail::Reader root(doc, "");
  const std::size_t n = root.at("n_inputs").index();
  std::vector<Gate> gates;
  for (const auto& g : root.at("gates").items()) {
    const std::string op = g.at("op").str();
    if (op == "in") {
      gates.push_back(Gate::input());
    } else if (op == "comb") {
      gates.push_back(Gate::comb(g.at("a").scalar(), g.at("s1").index(), g.at("b").scalar(), g.at("s2").index()));
    } else {
      g.at("op").fail("op must be 'in' or 'comb'");
    }
  }
  std::vector<std::size_t> outs;
  for (const auto& o : root.at("outputs").items()) outs.push_back(o.index());
  try {
    return LinearCircuit(n, std::move(gates), std::move(outs));
  } catch (const CircuitError& e) {
    throw ParseError("/gates", e.what());
  }
}

// ---------------------------------------------------------------------------------------------
// CSV

/// RFC 4180: quote fields containing a comma, quote, CR or LF; double embedded quotes.
inline std::string csv_field(std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + csv_field(fields[i]);
  return out + "\r\n";
}

}  // namespace kaleido
