#pragma once

// Dense linear algebra and seeded sampling shared by every other module.
//
// All arithmetic is carried out in double precision. Matrices are Eigen
// types; FeatureMatrix adds the shape and finiteness invariants required of
// ingested features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kpca_ood/error.hpp"

namespace kpca_ood {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N x m row-major matrix of finite features, one sample per row.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  explicit FeatureMatrix(RowMatrix values) : values_(std::move(values)) { validate(); }

  FeatureMatrix(std::size_t rows, std::size_t cols, std::span<const double> data) {
    if (data.size() != rows * cols) {
      throw Error(Errc::dim_mismatch, "feature data length " + std::to_string(data.size()) +
                                          " != " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    values_.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(data.begin(), data.end(), values_.data());
    validate();
  }

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error(Errc::dim_mismatch, "feature matrix needs at least one row");
    RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) throw Error(Errc::dim_mismatch, "ragged rows");
      for (std::size_t j = 0; j < rows[i].size(); ++j) m(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    }
    return FeatureMatrix(std::move(m));
  }

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }

  const RowMatrix& values() const noexcept { return values_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols(), cols()};
  }

  std::span<const double> data() const noexcept {
    return {values_.data(), static_cast<std::size_t>(values_.size())};
  }

  /// Rows [first, first + count) as a new matrix.
  FeatureMatrix slice(std::size_t first, std::size_t count) const {
    if (first + count > rows() || count == 0) throw Error(Errc::dim_mismatch, "row slice out of range");
    return FeatureMatrix(RowMatrix(values_.middleRows(Eigen::Index(first), Eigen::Index(count))));
  }

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           std::equal(a.values_.data(), a.values_.data() + a.values_.size(), b.values_.data());
  }

 private:
  void validate() const {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw Error(Errc::dim_mismatch, "feature matrix must have rows >= 1 and cols >= 1");
    }
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_.data()[i])) {
        throw Error(Errc::non_finite, "non-finite feature value at row " +
                                          std::to_string(i / values_.cols()) + ", col " +
                                          std::to_string(i % values_.cols()));
      }
    }
  }

  RowMatrix values_;
};

inline Eigen::Map<const Vector> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition
// ---------------------------------------------------------------------------

/// Eigenvalues in non-increasing order; column k of `eigenvectors` pairs with
/// eigenvalue k.
struct SymEigResult {
  Vector eigenvalues;
  Matrix eigenvectors;
};

inline constexpr double kSymmetryTolerance = 1e-9;

/// Eigendecomposition of a real symmetric matrix.
///
/// Backed by Eigen's tridiagonal QR solver. Each eigenvector is sign-normalized
/// so that its largest-magnitude component is positive (first such component
/// on ties), which makes the output canonical for a fixed input.
inline SymEigResult sym_eig(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(Errc::dim_mismatch, "sym_eig needs a non-empty square matrix");
  }
  if (!a.allFinite()) throw Error(Errc::non_finite, "sym_eig input has NaN/Inf entries");
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > kSymmetryTolerance) {
        throw Error(Errc::non_symmetric, "asymmetry " + std::to_string(std::abs(a(i, j) - a(j, i))) +
                                             " at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }

  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::degenerate_spectrum, "eigensolver failed to converge");
  }

  // Eigen returns ascending order; reverse into descending.
  SymEigResult out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index k = 0; k < n; ++k) {
    auto col = out.eigenvectors.col(k);
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0) col = -col;
  }
  return out;
}

/// Copy of `eigenvalues` with negative numerical noise clamped to zero.
inline Vector clamp_nonnegative(const Vector& eigenvalues) {
  return eigenvalues.cwiseMax(0.0);
}

// ---------------------------------------------------------------------------
// Random sampling
// ---------------------------------------------------------------------------

/// xoshiro256** seeded through splitmix64.
///
/// Only integer operations are used to advance the state, so a given seed
/// produces the same 64-bit stream on every platform. Real-valued draws are
/// derived from that stream with fixed formulas (53-bit uniforms, Box-Muller
/// normals, inverse-CDF Cauchy) instead of std:: distributions, whose
/// algorithms are implementation-defined.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double next_unit() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1).
  double next_open_unit() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal draw.
  double next_normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_open_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = -n % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  friend bool operator==(const Prng&, const Prng&) = default;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline void require_count(std::size_t n, const char* what) {
  if (n == 0) throw Error(Errc::invalid_range, std::string(what) + ": n must be >= 1");
}

/// n i.i.d. normal draws with mean 0 and standard deviation `scale`.
inline std::vector<double> sample_gaussian(Prng& prng, std::size_t n, double scale) {
  require_count(n, "sample_gaussian");
  if (!(scale > 0.0)) throw Error(Errc::invalid_range, "sample_gaussian: scale must be > 0");
  std::vector<double> out(n);
  for (auto& v : out) v = scale * prng.next_normal();
  return out;
}

/// n i.i.d. draws in [lo, hi).
inline std::vector<double> sample_uniform(Prng& prng, std::size_t n, double lo, double hi) {
  require_count(n, "sample_uniform");
  if (!(lo < hi)) throw Error(Errc::invalid_range, "sample_uniform: need lo < hi");
  std::vector<double> out(n);
  for (auto& v : out) {
    v = lo + (hi - lo) * prng.next_unit();
    if (v >= hi) v = std::nextafter(hi, lo);
  }
  return out;
}

/// n i.i.d. Cauchy draws with location 0 and scale `gamma`.
inline std::vector<double> sample_cauchy(Prng& prng, std::size_t n, double gamma) {
  require_count(n, "sample_cauchy");
  if (!(gamma > 0.0)) throw Error(Errc::invalid_range, "sample_cauchy: gamma must be > 0");
  std::vector<double> out(n);
  for (auto& v : out) v = gamma * std::tan(std::numbers::pi * (prng.next_open_unit() - 0.5));
  return out;
}

}  // namespace kpca_ood
