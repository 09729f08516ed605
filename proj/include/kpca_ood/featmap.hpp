#pragma once

// Explicit feature maps: l2 normalization (cosine kernel), random Fourier
// features for the Gaussian and Laplacian kernels, and ordered compositions
// of those stages.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kpca_ood/tensor.hpp"

namespace kpca_ood {

enum class KernelKind : std::uint8_t { gaussian = 0, laplacian = 1 };

inline const char* kernel_name(KernelKind k) {
  return k == KernelKind::gaussian ? "gaussian" : "laplacian";
}

inline constexpr double kZeroNormThreshold = 1e-30;

/// z / ||z||_2. Throws ZeroVector when the norm is below 1e-30.
inline void cosine_apply_into(std::span<const double> z, std::span<double> out) {
  if (z.empty()) throw Error(Errc::dim_mismatch, "cosine map needs at least one component");
  double ss = 0.0;
  for (double v : z) ss += v * v;
  const double norm = std::sqrt(ss);
  if (!(norm >= kZeroNormThreshold)) throw Error(Errc::zero_vector, "feature vector has zero norm");
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / norm;
}

inline std::vector<double> cosine_apply(std::span<const double> z) {
  std::vector<double> out(z.size());
  cosine_apply_into(z, out);
  return out;
}

/// Random Fourier feature map sqrt(2/M) * cos(W z + b).
///
/// Frequencies are drawn per coordinate as N(0, 2*gamma) (standard deviation
/// sqrt(2*gamma)) for the Gaussian kernel exp(-gamma ||x-y||_2^2), and as
/// Cauchy(0, gamma) for the Laplacian kernel exp(-gamma ||x-y||_1). Phases are
/// U[0, 2pi). Stored omegas/biases are authoritative; the seed is kept so the
/// map can be re-materialized.
class RffMap {
 public:
  RffMap() = default;

  RffMap(KernelKind kind, double gamma, std::uint64_t seed, RowMatrix omegas, Vector biases)
      : kind_(kind), gamma_(gamma), seed_(seed), omegas_(std::move(omegas)), biases_(std::move(biases)) {
    if (!(gamma_ > 0.0)) throw Error(Errc::invalid_bandwidth, "gamma must be > 0");
    if (omegas_.rows() < 1 || omegas_.cols() < 1 || biases_.size() != omegas_.rows()) {
      throw Error(Errc::dim_mismatch, "omegas must be M x d_in with M biases");
    }
    if (!omegas_.allFinite() || !biases_.allFinite()) {
      throw Error(Errc::non_finite, "non-finite RFF parameters");
    }
    for (double b : biases_) {
      if (b < 0.0 || b >= 2.0 * std::numbers::pi) throw Error(Errc::format, "RFF bias outside [0, 2pi)");
    }
    scale_ = std::sqrt(2.0 / static_cast<double>(omegas_.rows()));
  }

  KernelKind kind() const noexcept { return kind_; }
  double gamma() const noexcept { return gamma_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t features() const noexcept { return static_cast<std::size_t>(omegas_.rows()); }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(omegas_.cols()); }
  const RowMatrix& omegas() const noexcept { return omegas_; }
  const Vector& biases() const noexcept { return biases_; }

  void apply_into(std::span<const double> z, std::span<double> out) const {
    if (z.size() != input_dim()) {
      throw Error(Errc::dim_mismatch, "RFF input has " + std::to_string(z.size()) + " components, expected " +
                                          std::to_string(input_dim()));
    }
    Eigen::Map<Vector> o(out.data(), omegas_.rows());
    o.noalias() = omegas_ * as_vector(z);
    for (Eigen::Index i = 0; i < o.size(); ++i) o(i) = scale_ * std::cos(o(i) + biases_(i));
  }

  std::vector<double> apply(std::span<const double> z) const {
    std::vector<double> out(features());
    apply_into(z, out);
    return out;
  }

  /// Row-wise map of a whole matrix.
  RowMatrix apply_rows(const RowMatrix& z) const {
    if (static_cast<std::size_t>(z.cols()) != input_dim()) {
      throw Error(Errc::dim_mismatch, "RFF input dimension mismatch");
    }
    RowMatrix out = z * omegas_.transpose();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index i = 0; i < out.cols(); ++i) out(r, i) = scale_ * std::cos(out(r, i) + biases_(i));
    }
    return out;
  }

  friend bool operator==(const RffMap& a, const RffMap& b) {
    return a.kind_ == b.kind_ && a.gamma_ == b.gamma_ && a.seed_ == b.seed_ &&
           a.omegas_.rows() == b.omegas_.rows() && a.omegas_.cols() == b.omegas_.cols() &&
           a.omegas_ == b.omegas_ && a.biases_ == b.biases_;
  }

 private:
  KernelKind kind_ = KernelKind::gaussian;
  double gamma_ = 1.0;
  std::uint64_t seed_ = 0;
  RowMatrix omegas_;
  Vector biases_;
  double scale_ = 0.0;
};

/// Samples a fresh RffMap. Frequencies are drawn row by row, then phases.
inline RffMap rff_build(KernelKind kind, double gamma, std::size_t features, std::size_t input_dim,
                        std::uint64_t seed) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(Errc::invalid_bandwidth, "gamma must be > 0");
  if (features == 0) throw Error(Errc::invalid_range, "RFF dimension M must be >= 1");
  if (input_dim == 0) throw Error(Errc::invalid_range, "RFF input dimension must be >= 1");

  Prng prng(seed);
  const std::size_t total = features * input_dim;
  const std::vector<double> w = kind == KernelKind::gaussian ? sample_gaussian(prng, total, std::sqrt(2.0 * gamma))
                                                             : sample_cauchy(prng, total, gamma);
  const std::vector<double> b = sample_uniform(prng, features, 0.0, 2.0 * std::numbers::pi);

  RowMatrix omegas(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(input_dim));
  std::copy(w.begin(), w.end(), omegas.data());
  Vector biases = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
  return RffMap(kind, gamma, seed, std::move(omegas), std::move(biases));
}

/// Exact kernel value the RFF map approximates.
inline double shift_invariant_kernel(KernelKind kind, double gamma, std::span<const double> a,
                                     std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += kind == KernelKind::gaussian ? d * d : std::abs(d);
  }
  return std::exp(-gamma * acc);
}

struct IdentityStage {
  std::size_t dim = 0;
  friend bool operator==(const IdentityStage&, const IdentityStage&) = default;
};

struct CosineStage {
  std::size_t dim = 0;
  friend bool operator==(const CosineStage&, const CosineStage&) = default;
};

using MapStage = std::variant<IdentityStage, CosineStage, RffMap>;

inline std::size_t stage_input_dim(const MapStage& s) {
  return std::visit(
      [](const auto& st) -> std::size_t {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, RffMap>) return st.input_dim();
        else return st.dim;
      },
      s);
}

inline std::size_t stage_output_dim(const MapStage& s) {
  return std::visit(
      [](const auto& st) -> std::size_t {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, RffMap>) return st.features();
        else return st.dim;
      },
      s);
}

/// Ordered composition of map stages with consistently chained dimensions.
class FeatureMapSpec {
 public:
  FeatureMapSpec() = default;

  explicit FeatureMapSpec(std::vector<MapStage> stages) : stages_(std::move(stages)) {
    if (stages_.empty()) throw Error(Errc::invalid_spec, "feature map needs at least one stage");
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      if (stage_input_dim(stages_[i]) == 0) throw Error(Errc::invalid_spec, "stage with zero dimension");
      if (i > 0 && stage_input_dim(stages_[i]) != stage_output_dim(stages_[i - 1])) {
        throw Error(Errc::dim_mismatch, "stage " + std::to_string(i) + " input dimension does not chain");
      }
    }
  }

  static FeatureMapSpec identity(std::size_t dim) { return FeatureMapSpec({IdentityStage{dim}}); }
  static FeatureMapSpec cosine(std::size_t dim) { return FeatureMapSpec({CosineStage{dim}}); }
  static FeatureMapSpec cosine_rff(RffMap rff) {
    const std::size_t d = rff.input_dim();
    return FeatureMapSpec({CosineStage{d}, std::move(rff)});
  }

  const std::vector<MapStage>& stages() const noexcept { return stages_; }
  std::size_t input_dim() const { return stage_input_dim(stages_.front()); }
  std::size_t output_dim() const { return stage_output_dim(stages_.back()); }

  /// The RFF stage, if any.
  const RffMap* rff() const {
    for (const auto& s : stages_) {
      if (const auto* r = std::get_if<RffMap>(&s)) return r;
    }
    return nullptr;
  }

  /// Maps a single vector through every stage.
  std::vector<double> apply(std::span<const double> z) const {
    if (z.size() != input_dim()) {
      throw Error(Errc::dim_mismatch, "map input has " + std::to_string(z.size()) + " components, expected " +
                                          std::to_string(input_dim()));
    }
    std::vector<double> cur(z.begin(), z.end());
    std::vector<double> next;
    for (const auto& s : stages_) {
      next.assign(stage_output_dim(s), 0.0);
      std::visit(
          [&](const auto& st) {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, IdentityStage>) next = cur;
            else if constexpr (std::is_same_v<T, CosineStage>) cosine_apply_into(cur, next);
            else st.apply_into(cur, next);
          },
          s);
      cur.swap(next);
    }
    return cur;
  }

  friend bool operator==(const FeatureMapSpec&, const FeatureMapSpec&) = default;

 private:
  std::vector<MapStage> stages_;
};

/// Applies `spec` to every row; stage errors are rethrown with the row index.
inline FeatureMatrix map_apply(const FeatureMapSpec& spec, const FeatureMatrix& x) {
  if (x.cols() != spec.input_dim()) {
    throw Error(Errc::dim_mismatch, "matrix has " + std::to_string(x.cols()) + " columns, map expects " +
                                        std::to_string(spec.input_dim()));
  }
  RowMatrix cur = x.values();
  for (const auto& s : spec.stages()) {
    if (const auto* rff = std::get_if<RffMap>(&s)) {
      cur = rff->apply_rows(cur);
    } else if (std::holds_alternative<CosineStage>(s)) {
      const auto width = static_cast<std::size_t>(cur.cols());
      for (Eigen::Index r = 0; r < cur.rows(); ++r) {
        std::span<double> row(cur.data() + r * cur.cols(), width);
        try {
          cosine_apply_into(row, row);
        } catch (const Error& e) {
          throw e.with_context("row " + std::to_string(r));
        }
      }
    }
  }
  return FeatureMatrix(std::move(cur));
}

/// Median heuristic bandwidth gamma = 1 / (2 median^2) over pairwise Euclidean
/// distances of at most `max_rows` rows (a seeded subsample when larger).
inline double median_heuristic_gamma(const FeatureMatrix& x, std::uint64_t seed, std::size_t max_rows = 2000) {
  std::vector<std::size_t> idx(x.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (idx.size() > max_rows) {
    Prng prng(seed ^ 0x6d656469616e5eedULL);
    for (std::size_t i = 0; i < max_rows; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(prng.next_below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(max_rows);
    std::sort(idx.begin(), idx.end());
  }
  if (idx.size() < 2) throw Error(Errc::invalid_spec, "median heuristic needs at least two rows");

  std::vector<double> d2;
  d2.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      d2.push_back((x.values().row(Eigen::Index(idx[a])) - x.values().row(Eigen::Index(idx[b]))).squaredNorm());
    }
  }
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  const double med2 = *mid;
  if (!(med2 > 0.0)) throw Error(Errc::degenerate_spectrum, "median pairwise distance is zero");
  return 1.0 / (2.0 * med2);
}

}  // namespace kpca_ood
