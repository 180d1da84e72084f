#include <gtest/gtest.h>

#include "kaleido/io.hpp"
#include "kaleido/random.hpp"

using namespace kaleido;

TEST(Scalars, FormatAndParse) {
  EXPECT_EQ(format_scalar(1.5), "1.5");
  EXPECT_EQ(format_scalar(Scalar(1.0, -2.0)), "1-2j");
  EXPECT_EQ(format_scalar(Scalar(0.0, 0.25)), "0+0.25j");
  EXPECT_EQ(*parse_scalar("3"), Scalar(3.0));
  EXPECT_EQ(*parse_scalar("-1.5e-3+2e+4j"), Scalar(-1.5e-3, 2e4));
  EXPECT_EQ(*parse_scalar("1e5-1j"), Scalar(1e5, -1.0));
  EXPECT_EQ(*parse_scalar("2j"), Scalar(0.0, 2.0));
  EXPECT_EQ(*parse_scalar("-j"), Scalar(0.0, -1.0));
  EXPECT_EQ(*parse_scalar("+4"), Scalar(4.0));
  for (const char* bad : {"", "abc", "1+", "1+2", "nan", "inf", "1..2", "1+2jj"}) EXPECT_FALSE(parse_scalar(bad)) << bad;
}

TEST(Scalars, ExactRoundTrip) {
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const Scalar z(g(rng), g(rng) * 1e-200);
    EXPECT_EQ(*parse_scalar(format_scalar(z)), z);
  }
}

TEST(KJson, IdentityRoundTripIsStructurallyEqual) {
  const KMatrix id = identity_kmatrix(8, 2, 2);
  EXPECT_EQ(deserialize_kmatrix(serialize(id)), id);
}

TEST(KJson, RandomRoundTripDensifiesIdentically) {
  Rng rng(2);
  const KMatrix k = random_kmatrix(rng, 32, 2, 1, true);
  const KMatrix back = deserialize_kmatrix(serialize(k));
  EXPECT_EQ(back, k);
  EXPECT_EQ(kmatrix_to_dense(back), kmatrix_to_dense(k));
}

TEST(KJson, ObbRoundTrip) {
  Rng rng(3);
  const ObbChain c = unitary_to_obb(random_unitary(rng, 8));
  const Factorization f = deserialize(serialize(c));
  ASSERT_TRUE(std::holds_alternative<ObbChain>(f));
  EXPECT_EQ(std::get<ObbChain>(f).stages(), c.stages());
  EXPECT_EQ(factorization_dense(f), c.to_dense());
  EXPECT_THROW(deserialize_kmatrix(serialize(c)), ParseError);
}

TEST(KJson, TruncatedInputIsParseError) {
  const std::string text = serialize(identity_kmatrix(4));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, text.size() / 2, text.size() - 3}) {
    try {
      deserialize(text.substr(0, cut));
      FAIL() << "accepted truncated input at " << cut;
    } catch (const ParseError& e) {
      EXPECT_NE(e.location().find("line"), std::string::npos);
    }
  }
}

TEST(KJson, StructuralErrorsCarryPointer) {
  auto loc = [](const std::string& s) {
    try {
      deserialize(s);
    } catch (const ParseError& e) {
      return e.location();
    }
    return std::string("accepted");
  };
  std::string ok = serialize(identity_kmatrix(4));
  EXPECT_EQ(loc("{\"n\":4}"), "/version");
  EXPECT_EQ(loc("{\"version\":2,\"n\":4,\"e\":1,\"w\":1,\"stages\":[]}"), "/version");
  EXPECT_EQ(loc("{\"version\":1,\"n\":4,\"e\":1,\"w\":1,\"stages\":[]}"), "/stages");
  std::string bad_tag = ok;
  bad_tag.replace(bad_tag.find("\"F\""), 3, "\"X\"");
  EXPECT_EQ(loc(bad_tag), "/stages/0/tag");
  std::string wrong_w = ok;
  wrong_w.replace(wrong_w.find("\"w\":1"), 5, "\"w\":2");
  EXPECT_EQ(loc(wrong_w), "/w");
  // Swap the two T stages' block sizes: grammar fails at stage 2.
  std::string bad_k = ok;
  const auto t1 = bad_k.find("\"tag\":\"T\",\"n\":4,\"k\":2");
  ASSERT_NE(t1, std::string::npos);
  bad_k.replace(t1, 21, "\"tag\":\"T\",\"n\":4,\"k\":4");
  EXPECT_TRUE(loc(bad_k).starts_with("/stages"));
}

TEST(KJson, SeventeenDigits) {
  const std::string s = serialize(identity_kmatrix(2));
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_NE(s.find("\"version\":1"), std::string::npos);
}

TEST(TextFormats, DenseAndVector) {
  const DenseMatrix m = parse_dense("1 2+1j\n# comment\n\n-3 4e-1-2j\n");
  ASSERT_EQ(m.rows(), 2u);
  EXPECT_EQ(m(0, 1), Scalar(2.0, 1.0));
  EXPECT_EQ(m(1, 1), Scalar(0.4, -2.0));
  EXPECT_EQ(parse_dense(format_dense(m)), m);
  try {
    parse_dense("1 2\n3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), "line 2");
  }
  EXPECT_THROW(parse_dense("1 x\n"), ParseError);
  EXPECT_THROW(parse_dense(""), ParseError);
  const Vector v = parse_vector("1\n2-1j\n");
  EXPECT_EQ(v, (Vector{1.0, Scalar(2.0, -1.0)}));
  EXPECT_EQ(parse_vector(format_vector(v)), v);
  EXPECT_THROW(parse_vector("1 2\n"), ParseError);
}

TEST(TextFormats, CooAndPermutation) {
  const SparseMatrix s = parse_coo("4 2\n0 1 2.5\n3 3 1 -1\n");
  EXPECT_EQ(s.n(), 4u);
  EXPECT_EQ(s.to_dense()(3, 3), Scalar(1.0, -1.0));
  EXPECT_EQ(parse_coo(format_coo(s)).to_dense(), s.to_dense());
  EXPECT_THROW(parse_coo("4 3\n0 1 2.5\n"), ParseError);
  EXPECT_THROW(parse_coo("4 1\n4 1 2.5\n"), ParseError);
  EXPECT_THROW(parse_coo("4 2\n0 1 1\n0 1 2\n"), ParseError);
  const Permutation p = parse_permutation("2\n0\n1\n");
  EXPECT_EQ(p.map(), (std::vector<std::size_t>{2, 0, 1}));
  EXPECT_EQ(parse_permutation(format_permutation(p)), p);
  EXPECT_THROW(parse_permutation("0\n0\n"), ParseError);
  EXPECT_THROW(parse_permutation("-1\n"), ParseError);
}

TEST(CircuitJson, RoundTripAndErrors) {
  const LinearCircuit c = fft4_circuit();
  EXPECT_EQ(parse_circuit(serialize(c)), c);
  EXPECT_THROW(parse_circuit("{\"n_inputs\":1,\"gates\":[{\"op\":\"add\"}],\"outputs\":[0]}"), ParseError);
  EXPECT_THROW(parse_circuit("{\"n_inputs\":1,\"gates\":[{\"op\":\"in\"},{\"op\":\"comb\",\"a\":1,\"s1\":0,\"b\":[1,0],\"s2\":2}],"
                             "\"outputs\":[1]}"),
               ParseError);
  const LinearCircuit one = parse_circuit(
      "{\"n_inputs\":1,\"gates\":[{\"op\":\"in\"},{\"op\":\"comb\",\"a\":[2,0],\"s1\":0,\"b\":1,\"s2\":0}],\"outputs\":[1]}");
  EXPECT_EQ(circuit_eval(one, Vector{1.0}), Vector{3.0});
}

TEST(Csv, Rfc4180Quoting) {
  EXPECT_EQ(csv_row({"a", "b,c", "say \"hi\"", "x\ny"}), "a,\"b,c\",\"say \"\"hi\"\"\",\"x\ny\"\r\n");
  EXPECT_EQ(csv_field("plain"), "plain");
}

TEST(Files, MissingFileIsIoError) { EXPECT_THROW(read_file("/nonexistent/dir/file"), IoError); }
