#include <gtest/gtest.h>

#include "kaleido/oracle.hpp"
#include "kaleido/transforms.hpp"

using namespace kaleido;

namespace {

DenseMatrix dense_of(const KMatrix& k) { return kmatrix_to_dense(k); }

DenseMatrix cyclic_convolution_circulant(const Vector& a, const Vector& b) {
  const std::size_t n = a.size();
  Vector c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c[(i + j) % n] += a[i] * b[j];
  return oracle::circulant(c);
}

}  // namespace

TEST(DftKMatrix, TwoPoint) {
  const KMatrix f = dft_kmatrix(2);
  DenseMatrix expect(2, 2);
  expect(0, 0) = expect(0, 1) = expect(1, 0) = 1.0;
  expect(1, 1) = -1.0;
  EXPECT_LE(max_abs_difference(dense_of(f), expect), 1e-15);
}

TEST(DftKMatrix, FourPointColumnOne) {
  const Vector y = kmatrix_matvec(dft_kmatrix(4), Vector{0.0, 1.0, 0.0, 0.0});
  const Vector expect{1.0, Scalar(0, -1), -1.0, Scalar(0, 1)};
  for (int i = 0; i < 4; ++i) EXPECT_LE(std::abs(y[i] - expect[i]), 1e-15);
  const Vector delta = kmatrix_matvec(dft_kmatrix(4), Vector{1.0, 0.0, 0.0, 0.0});
  for (const auto& z : delta) EXPECT_LE(std::abs(z - 1.0), 1e-15);
}

TEST(DftKMatrix, MatchesOracleAndWidth) {
  for (std::size_t n : {2, 4, 8, 64, 256}) {
    const KMatrix f = dft_kmatrix(n);
    EXPECT_LE(f.w(), 2U);
    EXPECT_EQ(f.e(), 1U);
    EXPECT_LE(relative_frobenius_error(dense_of(f), oracle::dft(n)), 1e-12) << n;
  }
}

TEST(DftKMatrix, UnitaryUpToScale) {
  const DenseMatrix f = dense_of(dft_kmatrix(32));
  EXPECT_LE(max_abs_difference(f.adjoint() * f, 32.0 * DenseMatrix::identity(32)), 1e-9);
}

TEST(HadamardKMatrix, SmallCasesAndOrthogonality) {
  EXPECT_EQ(dense_of(hadamard_kmatrix(2)), oracle::hadamard(2));
  const DenseMatrix h4 = dense_of(hadamard_kmatrix(4));
  const double want[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}, {1, -1, -1, 1}};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(h4(r, c), want[r][c]);
  const DenseMatrix h16 = dense_of(hadamard_kmatrix(16));
  EXPECT_EQ(h16 * h16.transpose(), 16.0 * DenseMatrix::identity(16));
  const KMatrix k = hadamard_kmatrix(8);
  EXPECT_EQ(k.w(), 1U);
  EXPECT_EQ(k.segments().front().right, ButterflyMatrix(8));
  EXPECT_EQ(dense_of(k), oracle::hadamard(8));
}

TEST(DctKMatrix, TwoPointDcGain) {
  const Vector y = real_part_apply(dct_kmatrix(2), Vector{1.0, 1.0});
  EXPECT_NEAR(y[0].real(), 2.0, 1e-15);
  EXPECT_NEAR(std::abs(y[1]), 0.0, 1e-15);
}

TEST(DctKMatrix, RealPartMatchesOracle) {
  for (std::size_t n : {4, 8, 64}) {
    const KMatrix k = dct_kmatrix(n);
    EXPECT_LE(k.w(), 2U);
    EXPECT_LE(relative_frobenius_error(dense_of(k).real_part(), oracle::dct2(n)), 1e-10) << n;
  }
}

TEST(DstKMatrix, RealPartMatchesOracle) {
  for (std::size_t n : {2, 4, 8, 64}) {
    const KMatrix k = dst_kmatrix(n);
    EXPECT_LE(k.w(), 2U);
    EXPECT_LE(relative_frobenius_error(dense_of(k).real_part(), oracle::dst2(n)), 1e-10) << n;
  }
  Vector e0(8);
  e0[0] = 1.0;
  const Vector y = real_part_apply(dst_kmatrix(8), e0);
  const DenseMatrix ref = oracle::dst2(8);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_LE(std::abs(y[i] - ref(i, 0)), 1e-10);
}

TEST(RealPartApply, ComplexInputMatchesRealMatrix) {
  Rng rng(1);
  const KMatrix k = random_kmatrix(rng, 8, 1);
  const Vector x = random_vector(rng, 8);
  const Vector y = real_part_apply(k, x);
  const Vector ref = dense_of(k).real_part().apply(x);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_LE(std::abs(y[i] - ref[i]), 1e-12);
}

TEST(CirculantKMatrix, DeltaAndShift) {
  Vector c(8);
  c[0] = 1.0;
  EXPECT_LE(max_abs_difference(dense_of(circulant_kmatrix(c)), DenseMatrix::identity(8)), 1e-13);
  Vector s(4);
  s[1] = 1.0;
  const KMatrix k = circulant_kmatrix(s);
  EXPECT_EQ(k.w(), 1U);
  DenseMatrix shift(4, 4);
  for (int i = 0; i < 4; ++i) shift((i + 1) % 4, i) = 1.0;
  EXPECT_LE(max_abs_difference(dense_of(k), shift), 1e-14);
}

TEST(CirculantKMatrix, RandomKernelAndComposition) {
  Rng rng(2);
  const Vector c = random_vector(rng, 32);
  EXPECT_LE(relative_frobenius_error(dense_of(circulant_kmatrix(c)), oracle::circulant(c)), 1e-10);
  const Vector a = random_vector(rng, 16), b = random_vector(rng, 16);
  const DenseMatrix ab = dense_of(circulant_kmatrix(a)) * dense_of(circulant_kmatrix(b));
  EXPECT_LE(relative_frobenius_error(ab, cyclic_convolution_circulant(a, b)), 1e-9);
}

TEST(ToeplitzKMatrix, IdentityShiftRandom) {
  Vector t(7);
  t[3] = 1.0;
  const KMatrix id = toeplitz_kmatrix(t);
  EXPECT_EQ(id.e(), 2U);
  EXPECT_EQ(id.w(), 1U);
  EXPECT_LE(max_abs_difference(dense_of(id), DenseMatrix::identity(4)), 1e-14);
  Vector lower(7);
  lower[4] = 1.0;  // t_1: subdiagonal
  DenseMatrix shift(4, 4);
  for (int i = 1; i < 4; ++i) shift(i, i - 1) = 1.0;
  EXPECT_LE(max_abs_difference(dense_of(toeplitz_kmatrix(lower)), shift), 1e-14);
  Rng rng(3);
  const Vector r = random_vector(rng, 31);
  EXPECT_LE(relative_frobenius_error(dense_of(toeplitz_kmatrix(r)), oracle::toeplitz(r)), 1e-10);
  EXPECT_THROW(toeplitz_kmatrix(Vector(6)), std::invalid_argument);
}

TEST(FastfoodKMatrix, HadamardSquaredAndRandom) {
  const std::size_t n = 8;
  const Vector ones(n, 1.0);
  const KMatrix k = fastfood_kmatrix(ones, ones, Permutation::identity(n), ones);
  EXPECT_EQ(k.w(), 2U);
  EXPECT_LE(max_abs_difference(dense_of(k), 8.0 * DenseMatrix::identity(n)), 1e-12);
  Rng rng(4);
  for (std::size_t m : {8, 16}) {
    const Vector s = random_vector(rng, m), d = random_vector(rng, m), b = random_vector(rng, m);
    const Permutation p = m == 8 ? Permutation::identity(m) : random_permutation(rng, m);
    const DenseMatrix h = oracle::hadamard(m);
    const DenseMatrix expect = DenseMatrix::diagonal(s) * h * DenseMatrix::diagonal(d) * p.to_dense() * h *
                               DenseMatrix::diagonal(b);
    EXPECT_LE(relative_frobenius_error(dense_of(fastfood_kmatrix(s, d, p, b)), expect), 1e-10);
  }
  EXPECT_THROW(fastfood_kmatrix(ones, Vector(4, 1.0), Permutation::identity(n), ones), std::invalid_argument);
}

TEST(AfdfKMatrix, IdentityCirculantRandom) {
  const Vector ones(8, 1.0);
  EXPECT_LE(max_abs_difference(dense_of(afdf_kmatrix(ones, ones)), DenseMatrix::identity(8)), 1e-13);
  Rng rng(5);
  const Vector c = random_vector(rng, 16);
  const Vector d = oracle::dft(16).apply(c);
  EXPECT_LE(relative_frobenius_error(dense_of(afdf_kmatrix(Vector(16, 1.0), d)), oracle::circulant(c)), 1e-10);
  const Vector a = random_vector(rng, 16), d2 = random_vector(rng, 16);
  const DenseMatrix f = oracle::dft(16);
  DenseMatrix finv = f.adjoint();
  finv *= 1.0 / 16;
  const DenseMatrix expect = DenseMatrix::diagonal(a) * finv * DenseMatrix::diagonal(d2) * f;
  const KMatrix k = afdf_kmatrix(a, d2);
  EXPECT_EQ(k.w(), 1U);
  EXPECT_LE(relative_frobenius_error(dense_of(k), expect), 1e-10);
}

TEST(Dft2dKMatrix, MatchesKronecker) {
  for (std::size_t n : {2, 4, 8}) {
    const KMatrix k = dft2d_kmatrix(n);
    EXPECT_LE(k.w(), 2U);
    EXPECT_LE(relative_frobenius_error(dense_of(k), kronecker(oracle::dft(n), oracle::dft(n))), 1e-10) << n;
    EXPECT_LE(relative_frobenius_error(dense_of(k), oracle::dft2d(n)), 1e-10) << n;
  }
}

TEST(Dft2dKMatrix, ConstantImageConcentratesAtDc) {
  const Vector img(16, 1.0);
  const Vector y = kmatrix_matvec(dft2d_kmatrix(4), img);
  EXPECT_NEAR(y[0].real(), 16.0, 1e-12);
  for (std::size_t i = 1; i < 16; ++i) EXPECT_LE(std::abs(y[i]), 1e-12);
}

TEST(Dft2dKMatrix, AgreesWithKroneckerConstruction) {
  const DenseMatrix a = dense_of(dft2d_kmatrix(4));
  const DenseMatrix b = dense_of(k_kronecker(dft_kmatrix(4), dft_kmatrix(4)));
  EXPECT_LE(relative_frobenius_error(a, b), 1e-10);
}

TEST(Transforms, RejectInvalidSizes) {
  EXPECT_THROW(dft_kmatrix(6), std::invalid_argument);
  EXPECT_THROW(hadamard_kmatrix(12), std::invalid_argument);
  EXPECT_THROW(circulant_kmatrix(Vector(3)), std::invalid_argument);
}
