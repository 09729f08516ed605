#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gen.hpp"
#include "kpca_ood/tensor.hpp"
#include "oracles.hpp"

using namespace kpca_ood;

namespace {

Matrix from_list(std::size_t n, std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  auto it = v.begin();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(Eigen::Index(i), Eigen::Index(j)) = *it++;
  return m;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::usage;
}

}  // namespace

TEST(FeatureMatrix, RejectsNonFinite) {
  const std::vector<double> v{1.0, NAN, 3.0, 4.0};
  EXPECT_EQ(code_of([&] { FeatureMatrix(2, 2, v); }), Errc::non_finite);
  const std::vector<double> w{1.0, INFINITY};
  EXPECT_EQ(code_of([&] { FeatureMatrix(1, 2, w); }), Errc::non_finite);
}

TEST(FeatureMatrix, RejectsBadShape) {
  const std::vector<double> v{1.0, 2.0, 3.0};
  EXPECT_EQ(code_of([&] { FeatureMatrix(2, 2, v); }), Errc::dim_mismatch);
  EXPECT_EQ(code_of([&] { FeatureMatrix(0, 3, std::span<const double>()); }), Errc::dim_mismatch);
  EXPECT_EQ(code_of([] { FeatureMatrix::from_rows({{1.0, 2.0}, {3.0}}); }), Errc::dim_mismatch);
}

TEST(FeatureMatrix, RowsAndSlices) {
  const auto x = FeatureMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(x.rows(), 3u);
  EXPECT_EQ(x.cols(), 2u);
  EXPECT_EQ(x.row(1)[0], 3.0);
  const auto s = x.slice(1, 2);
  EXPECT_EQ(s, FeatureMatrix::from_rows({{3, 4}, {5, 6}}));
  EXPECT_THROW(x.slice(2, 2), Error);
}

TEST(SymEig, Diagonal) {
  const auto r = sym_eig(from_list(2, {2, 0, 0, 1}));
  EXPECT_DOUBLE_EQ(r.eigenvalues(0), 2.0);
  EXPECT_DOUBLE_EQ(r.eigenvalues(1), 1.0);
  EXPECT_NEAR(std::abs(r.eigenvectors(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(r.eigenvectors(1, 1)), 1.0, 1e-15);
}

TEST(SymEig, Zero) {
  const auto r = sym_eig(Matrix::Zero(2, 2));
  EXPECT_EQ(r.eigenvalues(0), 0.0);
  EXPECT_EQ(r.eigenvalues(1), 0.0);
}

TEST(SymEig, TwoByTwo) {
  const auto r = sym_eig(from_list(2, {2, 1, 1, 2}));
  EXPECT_NEAR(r.eigenvalues(0), 3.0, 1e-14);
  EXPECT_NEAR(r.eigenvalues(1), 1.0, 1e-14);
  // Sign convention: largest-magnitude component positive.
  EXPECT_NEAR(r.eigenvectors(0, 0), std::sqrt(0.5), 1e-14);
  EXPECT_NEAR(r.eigenvectors(1, 0), std::sqrt(0.5), 1e-14);
}

TEST(SymEig, RejectsAsymmetric) {
  EXPECT_EQ(code_of([] { sym_eig(from_list(2, {1, 2, 0, 1})); }), Errc::non_symmetric);
  EXPECT_EQ(code_of([] { sym_eig(from_list(2, {1, NAN, NAN, 1})); }), Errc::non_finite);
  EXPECT_EQ(code_of([] { sym_eig(Matrix::Zero(2, 3)); }), Errc::dim_mismatch);
}

TEST(SymEig, PropertiesAgainstJacobi) {
  gen::Source src(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = src.size(1, 40);
    const RowMatrix x = src.anisotropic(n + src.size(0, 20), n);
    Matrix s = x.transpose() * x;
    s = (0.5 * (s + s.transpose())).eval();
    const auto r = sym_eig(s);

    for (Eigen::Index i = 1; i < r.eigenvalues.size(); ++i) EXPECT_GE(r.eigenvalues(i - 1), r.eigenvalues(i));
    const Matrix vtv = r.eigenvectors.transpose() * r.eigenvectors;
    EXPECT_LE((vtv - Matrix::Identity(vtv.rows(), vtv.cols())).cwiseAbs().maxCoeff(), 1e-9);
    const Matrix recon = r.eigenvectors * r.eigenvalues.asDiagonal() * r.eigenvectors.transpose();
    EXPECT_LE((recon - s).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, s.cwiseAbs().maxCoeff()));

    oracle::SymMatrix o{n, std::vector<double>(n * n)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) o(i, j) = s(Eigen::Index(i), Eigen::Index(j));
    const auto ref = oracle::jacobi_eig(o);
    const double scale = std::max(1.0, std::abs(ref.values.front()));
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(r.eigenvalues(Eigen::Index(k)), ref.values[k], 1e-9 * scale);
  }
}

TEST(Prng, Deterministic) {
  Prng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(Prng(42).next_u64(), c.next_u64());
}

TEST(Prng, FixedStream) {
  // xoshiro256** seeded with splitmix64(0).
  Prng p(0);
  EXPECT_EQ(p.next_u64(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(p.next_u64(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(p.next_u64(), 0x1a5f849d4933e6e0ULL);
}

TEST(Prng, UnitRanges) {
  Prng p(5);
  for (int i = 0; i < 100000; ++i) {
    const double u = p.next_unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double o = p.next_open_unit();
    ASSERT_GT(o, 0.0);
    ASSERT_LT(o, 1.0);
  }
}

TEST(Prng, BelowIsUniform) {
  Prng p(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[p.next_below(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5.0 * std::sqrt(n / 7.0));
}

TEST(Samplers, GaussianMeanAndVariance) {
  Prng p(1);
  const double sigma = 2.5;
  const std::size_t n = 100000;
  const auto v = sample_gaussian(p, n, sigma);
  double mean = 0.0, var = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n - 1;
  EXPECT_LE(std::abs(mean), 4.0 * sigma / std::sqrt(double(n)));
  EXPECT_NEAR(var, sigma * sigma, 0.03 * sigma * sigma);
}

TEST(Samplers, UniformMean) {
  Prng p(2);
  const auto v = sample_uniform(p, 100000, 0.0, 2.0 * std::numbers::pi);
  double mean = 0.0;
  for (double x : v) {
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 2.0 * std::numbers::pi);
    mean += x;
  }
  EXPECT_NEAR(mean / v.size(), std::numbers::pi, 0.05);
}

TEST(Samplers, CauchyMedian) {
  Prng p(3);
  const double gamma = 1.7;
  auto v = sample_cauchy(p, 100000, gamma);
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  EXPECT_LE(std::abs(v[v.size() / 2]), 0.05 * gamma);
  // Quartiles of a Cauchy(0, gamma) are +-gamma.
  std::nth_element(v.begin(), v.begin() + 3 * v.size() / 4, v.end());
  EXPECT_NEAR(v[3 * v.size() / 4], gamma, 0.05 * gamma);
}

TEST(Samplers, SameSeedSameStream) {
  Prng a(77), b(77);
  EXPECT_EQ(sample_gaussian(a, 1000, 1.0), sample_gaussian(b, 1000, 1.0));
  EXPECT_EQ(sample_uniform(a, 1000, -1.0, 1.0), sample_uniform(b, 1000, -1.0, 1.0));
  EXPECT_EQ(sample_cauchy(a, 1000, 0.5), sample_cauchy(b, 1000, 0.5));
}

TEST(Samplers, Preconditions) {
  Prng p(0);
  EXPECT_EQ(code_of([&] { sample_gaussian(p, 0, 1.0); }), Errc::invalid_range);
  EXPECT_EQ(code_of([&] { sample_uniform(p, 10, 1.0, 1.0); }), Errc::invalid_range);
  EXPECT_EQ(code_of([&] { sample_cauchy(p, 10, 0.0); }), Errc::invalid_range);
}
