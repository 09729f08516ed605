#pragma once

// Comparison scorers: k-th nearest neighbour on l2-normalized features,
// maximum softmax probability, energy (log-sum-exp), regularized PCA error,
// and the (1 - e) * S fusion combinator.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kpca_ood/detector.hpp"
#include "kpca_ood/featmap.hpp"
#include "kpca_ood/kernelspace.hpp"
#include "kpca_ood/tensor.hpp"

namespace kpca_ood {

class KnnScorer {
 public:
  KnnScorer(const FeatureMatrix& train, std::size_t k) : train_(normalize_rows(train)), k_(k) {
    if (k_ < 1) throw Error(Errc::invalid_range, "k must be >= 1");
    if (k_ > train_.rows()) throw Error(Errc::k_too_large, "k exceeds the number of training rows");
  }

  const FeatureMatrix& train_normalized() const noexcept { return train_; }
  std::size_t k() const noexcept { return k_; }

  /// Negated k-th smallest distance from the normalized query to the stored
  /// rows. Exhaustive search, linear in the number of stored rows.
  double score_one(std::span<const double> z) const {
    if (z.size() != train_.cols()) throw Error(Errc::dim_mismatch, "query dimension mismatch");
    std::vector<double> q(z.size());
    cosine_apply_into(z, q);
    const std::size_t n = train_.rows(), m = train_.cols();
    const double* t = train_.data().data();
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = t + i * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double d = r[j] - q[j];
        acc += d * d;
      }
      d2[i] = acc;
    }
    const auto kth = d2.begin() + static_cast<std::ptrdiff_t>(k_ - 1);
    std::nth_element(d2.begin(), kth, d2.end());
    return -std::sqrt(*kth);
  }

  ScoreVector score(const FeatureMatrix& x) const {
    ScoreVector out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      try {
        out[i] = score_one(x.row(i));
      } catch (const Error& e) {
        throw e.with_context("row " + std::to_string(i));
      }
    }
    return out;
  }

 private:
  FeatureMatrix train_;
  std::size_t k_;
};

inline ScoreVector knn_score(const KnnScorer& scorer, const FeatureMatrix& x) { return scorer.score(x); }

/// Class logits, one row per sample; at least two classes.
class LogitsMatrix {
 public:
  explicit LogitsMatrix(FeatureMatrix values) : values_(std::move(values)) {
    if (values_.cols() < 2) throw Error(Errc::dim_mismatch, "logits need at least two classes");
  }

  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t classes() const noexcept { return values_.cols(); }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }

 private:
  FeatureMatrix values_;
};

namespace detail {

// log(sum(exp(v))) with max shift. Works for a single entry too.
inline double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace detail

inline ScoreVector msp_score(const LogitsMatrix& logits) {
  ScoreVector out(logits.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double x : row) s += std::exp(x - m);
    out[i] = 1.0 / s;  // max entry contributes exp(0) = 1
  }
  return out;
}

inline ScoreVector energy_score(const LogitsMatrix& logits) {
  ScoreVector out(logits.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::log_sum_exp(logits.row(i));
  return out;
}

/// Reconstruction error in the original feature space divided by the query
/// norm. The model must use the identity map.
inline std::vector<double> reg_pca_error(const DetectorModel& model, const FeatureMatrix& x) {
  const auto& stages = model.map.stages();
  if (stages.size() != 1 || !std::holds_alternative<IdentityStage>(stages.front())) {
    throw Error(Errc::invalid_spec, "regularized PCA error needs an identity-map model");
  }
  std::vector<double> e = reconstruction_errors(model, x);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double norm = x.values().row(Eigen::Index(i)).norm();
    if (!(norm >= kZeroNormThreshold)) throw Error(Errc::zero_vector, "row " + std::to_string(i) + " has zero norm");
    e[i] /= norm;
  }
  return e;
}

/// (1 - e_i) * base_i.
inline ScoreVector fuse(std::span<const double> errors, std::span<const double> base) {
  if (errors.size() != base.size()) {
    throw Error(Errc::length_mismatch, "fuse: " + std::to_string(errors.size()) + " errors vs " +
                                           std::to_string(base.size()) + " base scores");
  }
  ScoreVector out(errors.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - errors[i]) * base[i];
  return out;
}

/// Min-max scaling of every error vector into [0, 1] using the joint range.
inline void minmax_normalize(std::vector<std::vector<double>*> sets) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* s : sets) {
    for (double v : *s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi - lo;
  for (auto* s : sets) {
    for (double& v : *s) v = span > 0.0 ? (v - lo) / span : 0.0;
  }
}

}  // namespace kpca_ood
