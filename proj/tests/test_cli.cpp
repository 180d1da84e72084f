#include <gtest/gtest.h>

#include <filesystem>

#include "kaleido/cli.hpp"

using namespace kaleido;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult kaleido_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("kaleido_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string put(const std::string& name, const std::string& text) const {
    write_file(path(name), text);
    return path(name);
  }

  fs::path dir_;
};

std::string field(const std::string& report, const std::string& key) {
  const auto at = report.find(key + ": ");
  if (at == std::string::npos) return "";
  const auto start = at + key.size() + 2;
  return report.substr(start, report.find('\n', start) - start);
}

}  // namespace

TEST_F(CliTest, DftAgainstOracleFile) {
  ASSERT_EQ(kaleido_run({"transform", "--name", "dft", "--n", "64", "--out", path("dft.kjson")}).code, 0);
  ASSERT_EQ(kaleido_run({"oracle", "--name", "dft", "--n", "64", "--out", path("dft.txt")}).code, 0);
  const CliResult r = kaleido_run({"verify", "--in", path("dft.kjson"), "--ref", path("dft.txt")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(field(r.out, "result"), "PASS");
}

TEST_F(CliTest, IdentityVerification) {
  put("id.kjson", serialize(identity_kmatrix(4)));
  put("i.txt", format_dense(DenseMatrix::identity(4)));
  put("2i.txt", format_dense(Scalar(2.0) * DenseMatrix::identity(4)));
  const CliResult ok = kaleido_run({"verify", "--in", path("id.kjson"), "--ref", path("i.txt")});
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(field(ok.out, "relative_error"), "0");
  const CliResult bad = kaleido_run({"verify", "--in", path("id.kjson"), "--ref", path("2i.txt")});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(field(bad.out, "relative_error"), "1");
  EXPECT_EQ(kaleido_run({"verify", "--in", path("id.kjson"), "--ref", path("2i.txt"), "--tol", "2"}).code, 0);
  put("i8.txt", format_dense(DenseMatrix::identity(8)));
  EXPECT_EQ(kaleido_run({"verify", "--in", path("id.kjson"), "--ref", path("i8.txt")}).code, 1);
}

TEST_F(CliTest, DctVerifiesThroughRealPart) {
  ASSERT_EQ(kaleido_run({"transform", "--name", "dct", "--n", "16", "--out", path("dct.kjson")}).code, 0);
  ASSERT_EQ(kaleido_run({"oracle", "--name", "dct", "--n", "16", "--out", path("dct.txt")}).code, 0);
  EXPECT_EQ(kaleido_run({"verify", "--real-part", "--in", path("dct.kjson"), "--ref", path("dct.txt")}).code, 0);
}

TEST_F(CliTest, SeededTransformsMatchSeededOracles) {
  for (const std::string name : {"circulant", "toeplitz", "fastfood", "afdf", "dft2d", "hadamard", "dst"}) {
    const std::vector<std::string> common{"--seed", "5", "--n", "16", "--name", name};
    std::vector<std::string> t{"transform", "--out", path(name + ".kjson")}, o{"oracle", "--out", path(name + ".txt")};
    t.insert(t.end(), common.begin(), common.end());
    o.insert(o.end(), common.begin(), common.end());
    ASSERT_EQ(kaleido_run(t).code, 0) << name;
    ASSERT_EQ(kaleido_run(o).code, 0) << name;
    std::vector<std::string> v{"verify", "--in", path(name + ".kjson"), "--ref", path(name + ".txt")};
    if (name == "dst") v.push_back("--real-part");
    const CliResult r = kaleido_run(v);
    EXPECT_EQ(r.code, 0) << name << "\n" << r.out;
  }
}

TEST_F(CliTest, KernelFile) {
  put("k.txt", "1\n2\n0\n0\n");
  const CliResult r = kaleido_run({"transform", "--name", "circulant", "--n", "4", "--kernel", path("k.txt")});
  ASSERT_EQ(r.code, 0);
  const DenseMatrix m = kmatrix_to_dense(deserialize_kmatrix(r.out));
  EXPECT_NEAR(std::abs(m(1, 0) - Scalar(2.0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(m(0, 3) - Scalar(2.0)), 0.0, 1e-12);
  put("short.txt", "1\n2\n");
  EXPECT_EQ(kaleido_run({"transform", "--name", "circulant", "--n", "4", "--kernel", path("short.txt")}).code, 2);
  EXPECT_EQ(kaleido_run({"transform", "--name", "dft", "--n", "4", "--kernel", path("k.txt")}).code, 2);
}

TEST_F(CliTest, OracleHadamardTwo) {
  const CliResult r = kaleido_run({"oracle", "--name", "hadamard", "--n", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1 1\n1 -1\n");
}

TEST_F(CliTest, ApplyIdentity) {
  put("id.kjson", serialize(identity_kmatrix(4, 2, 1)));
  put("v.txt", "1\n2-1j\n-3\n0.5j\n");
  const CliResult r = kaleido_run({"apply", "--in", path("id.kjson"), "--vector", path("v.txt")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(parse_vector(r.out), parse_vector(read_file(path("v.txt"))));
  put("v3.txt", "1\n2\n3\n");
  EXPECT_EQ(kaleido_run({"apply", "--in", path("id.kjson"), "--vector", path("v3.txt")}).code, 2);
}

TEST_F(CliTest, InfoOnDft16) {
  put("d.kjson", serialize(dft_kmatrix(16)));
  const CliResult r = kaleido_run({"info", "--in", path("d.kjson")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(field(r.out, "w"), "2");
  EXPECT_EQ(field(r.out, "e"), "1");
  EXPECT_EQ(field(r.out, "params"), std::to_string(4 * 2 * 16 * 4));
}

TEST_F(CliTest, DecomposeWithCertificates) {
  put("p.txt", format_permutation(bit_reversal_perm(8)));
  ASSERT_EQ(kaleido_run({"decompose", "--kind", "perm", "--in", path("p.txt"), "--out", path("p.kjson"), "--certify"}).code, 0);
  auto cert = nlohmann::json::parse(read_file(path("p.kjson.cert.json")));
  EXPECT_EQ(cert["w"], 1);
  EXPECT_EQ(cert["e"], 1);
  EXPECT_EQ(cert["max_abs_error"], 0.0);
  EXPECT_EQ(kmatrix_to_dense(deserialize_kmatrix(read_file(path("p.kjson")))), bit_reversal_perm(8).to_dense());

  Rng rng(1);
  const SparseMatrix s = random_sparse(rng, 16, 40);
  put("s.txt", format_coo(s));
  ASSERT_EQ(kaleido_run({"decompose", "--kind", "sparse", "--in", path("s.txt"), "--out", path("s.kjson"), "--certify"}).code, 0);
  cert = nlohmann::json::parse(read_file(path("s.kjson.cert.json")));
  EXPECT_EQ(cert["bound_w"], 12);
  EXPECT_LE(cert["w"].get<std::size_t>(), 12u);
  EXPECT_LE(cert["e"].get<std::size_t>(), 4u);
  EXPECT_LE(cert["max_abs_error"].get<double>(), 1e-10);

  put("d.txt", format_dense(random_dense(rng, 4, 4)));
  for (const char* obb : {"", "--obb"}) {
    std::vector<std::string> a{"decompose", "--kind", "dense", "--in", path("d.txt"), "--out", path("d.kjson"), "--certify"};
    if (*obb) a.push_back(obb);
    ASSERT_EQ(kaleido_run(a).code, 0) << obb;
    cert = nlohmann::json::parse(read_file(path("d.kjson.cert.json")));
    EXPECT_EQ(cert["within_bounds"], true);
  }
}

TEST_F(CliTest, DecomposePadsOddSizes) {
  put("p.txt", "2\n0\n1\n");
  const CliResult r = kaleido_run({"decompose", "--kind", "perm", "--in", path("p.txt")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("zero-padded to 4"), std::string::npos);
  const DenseMatrix m = kmatrix_to_dense(deserialize_kmatrix(r.out));
  EXPECT_EQ(m(2, 0), Scalar(1.0));
  EXPECT_EQ(m(3, 3), Scalar(1.0));
}

TEST_F(CliTest, CompileFft4Circuit) {
  put("c.json", serialize(fft4_circuit()));
  const CliResult r = kaleido_run({"compile-circuit", "--in", path("c.json"), "--certify", "--out", path("c.kjson")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cert = nlohmann::json::parse(read_file(path("c.kjson.cert.json")));
  EXPECT_EQ(cert["within_bounds"], true);
  EXPECT_EQ(cert["bound_w"], 18);
  EXPECT_LE(max_abs_difference(kmatrix_to_dense(deserialize_kmatrix(read_file(path("c.kjson")))), oracle::dft(4)), 1e-10);
  EXPECT_EQ(kaleido_run({"compile-circuit", "--obb", "--in", path("c.json")}).code, 0);
}

TEST_F(CliTest, RecoverReportLayout) {
  const CliResult r = kaleido_run({"recover", "--target", "convolution,random", "--n", "8", "--steps", "20", "--lr", "0.01",
                             "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream ss(r.out);
  std::vector<std::string> lines;
  for (std::string l; std::getline(ss, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "method,convolution,random\r");
  EXPECT_TRUE(lines[1].starts_with("kaleidoscope,"));
  EXPECT_TRUE(lines[2].starts_with("lowrank,"));
  EXPECT_TRUE(lines[3].starts_with("sparse,"));
  EXPECT_EQ(kaleido_run({"recover", "--target", "convolution,random", "--n", "8", "--steps", "20", "--lr", "0.01",
                         "--seed", "2"})
                .out,
            r.out);
  EXPECT_EQ(kaleido_run({"recover", "--target", "bogus", "--n", "8"}).code, 2);
  EXPECT_EQ(kaleido_run({"recover", "--n", "12"}).code, 2);
}

TEST_F(CliTest, BenchCsv) {
  EXPECT_EQ(kaleido_run({"bench", "--reps", "10"}).code, 2);
  const CliResult r = kaleido_run({"bench", "--n-list", "16,32", "--width", "2", "--reps", "11"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream ss(r.out);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "n,method,width,reps,median_ns,multiplies,ratio_dense_over_kaleido\r");
  int rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    std::vector<std::string> f;
    std::istringstream ls(line.substr(0, line.size() - 1));
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 7u);
    const std::size_t n = std::stoul(f[0]);
    if (f[1] == "kaleido") EXPECT_EQ(std::stoull(f[5]), 4 * 2 * n * log2_exact(n));
    if (f[1] == "dense") EXPECT_EQ(std::stoull(f[5]), n * n);
    EXPECT_FALSE(f[6].empty());
  }
  EXPECT_EQ(rows, 4);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(kaleido_run({}).code, 2);
  EXPECT_EQ(kaleido_run({"frobnicate"}).code, 2);
  EXPECT_EQ(kaleido_run({"--help"}).code, 0);
  EXPECT_EQ(kaleido_run({"transform", "--name", "dft"}).code, 2);
  EXPECT_EQ(kaleido_run({"transform", "--name", "fft", "--n", "4"}).code, 2);
  EXPECT_EQ(kaleido_run({"transform", "--name", "dft", "--n", "6"}).code, 2);
  EXPECT_EQ(kaleido_run({"transform", "--name", "dft2d", "--n", "8"}).code, 2);
  EXPECT_EQ(kaleido_run({"info", "--in", path("missing.kjson")}).code, 3);
  put("bad.kjson", "{\"version\":1,");
  const CliResult bad = kaleido_run({"info", "--in", path("bad.kjson")});
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos);
  put("bad.txt", "1 2\n3 q\n");
  put("id.kjson", serialize(identity_kmatrix(2)));
  EXPECT_EQ(kaleido_run({"verify", "--in", path("id.kjson"), "--ref", path("bad.txt")}).code, 3);
  EXPECT_EQ(kaleido_run({"info", "--in", path("id.kjson"), "--out", path("no/such/dir/x")}).code, 3);
  EXPECT_EQ(kaleido_run({"--tol", "-1", "info", "--in", path("id.kjson")}).code, 2);
}

TEST_F(CliTest, GlobalFlagsAfterSubcommand) {
  put("id.kjson", serialize(identity_kmatrix(2)));
  EXPECT_EQ(kaleido_run({"info", "--in", path("id.kjson"), "--out", path("info.txt")}).code, 0);
  EXPECT_EQ(field(read_file(path("info.txt")), "kind"), "kmatrix");
}
