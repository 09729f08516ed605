#pragma once

// Covariance-path kernel PCA detector.
//
// fit() maps the training rows through a FeatureMapSpec, builds the
// unnormalized scatter matrix sum_i (phi_i - mu)(phi_i - mu)^T, and keeps the
// leading q eigenvectors. Scores are negated reconstruction errors, so larger
// means more in-distribution.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpca_ood/featmap.hpp"
#include "kpca_ood/tensor.hpp"

namespace kpca_ood {

using ScoreVector = std::vector<double>;

// Slack on the cumulative explained-variance comparison so that a target of
// 1.0 stops at the numerical rank rather than chasing rounding residue.
inline constexpr double kEvrSlack = 1e-12;

/// Smallest q whose cumulative eigenvalue share reaches `evr_target`.
/// `eigenvalues` must be non-increasing; negatives are treated as zero.
inline std::size_t choose_q(const Vector& eigenvalues, double evr_target) {
  if (eigenvalues.size() == 0) throw Error(Errc::all_zero_spectrum, "empty spectrum");
  if (!(evr_target > 0.0 && evr_target <= 1.0)) {
    throw Error(Errc::invalid_range, "explained-variance target must be in (0, 1]");
  }
  const Vector lam = clamp_nonnegative(eigenvalues);
  const double total = lam.sum();
  if (!(total > 0.0)) throw Error(Errc::all_zero_spectrum, "all eigenvalues are zero");

  double cum = 0.0;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    cum += lam(k);
    if (cum / total >= evr_target - kEvrSlack) return static_cast<std::size_t>(k + 1);
  }
  return static_cast<std::size_t>(lam.size());
}

struct DetectorModel {
  FeatureMapSpec map;
  Vector mean;                          // mu in mapped space, length D
  Matrix basis;                         // D x q, leading eigenvectors
  std::optional<Matrix> residual_basis; // D x (D - q), trailing eigenvectors
  Vector eigenvalues;                   // full descending spectrum, length D
  std::size_t q = 0;
  double evr_target = 0.9;

  std::size_t mapped_dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

struct FitOptions {
  bool keep_residual_basis = false;
};

inline constexpr double kDegenerateVariance = 1e-20;

/// Mean of mapped rows and the unnormalized scatter matrix around it.
inline std::pair<Vector, Matrix> mapped_scatter(const FeatureMatrix& mapped) {
  const RowMatrix& phi = mapped.values();
  Vector mean = phi.colwise().mean().transpose();
  const RowMatrix centered = phi.rowwise() - mean.transpose();
  Matrix scatter = Matrix::Zero(phi.cols(), phi.cols());
  scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  scatter.triangularView<Eigen::StrictlyUpper>() = scatter.transpose();
  return {std::move(mean), std::move(scatter)};
}

inline DetectorModel fit(const FeatureMatrix& train, const FeatureMapSpec& map, double evr_target,
                         FitOptions options = {}) {
  if (train.rows() < 2) throw Error(Errc::invalid_range, "fit needs at least two training rows");
  if (!(evr_target > 0.0 && evr_target <= 1.0)) {
    throw Error(Errc::invalid_range, "explained-variance target must be in (0, 1]");
  }
  const FeatureMatrix mapped = map_apply(map, train);
  auto [mean, scatter] = mapped_scatter(mapped);
  if (!(scatter.trace() >= kDegenerateVariance)) {
    throw Error(Errc::degenerate_spectrum, "total variance of mapped training data is below 1e-20");
  }

  SymEigResult eig = sym_eig(scatter);
  DetectorModel model;
  model.map = map;
  model.mean = std::move(mean);
  model.eigenvalues = clamp_nonnegative(eig.eigenvalues);
  model.q = choose_q(model.eigenvalues, evr_target);
  model.evr_target = evr_target;
  const auto q = static_cast<Eigen::Index>(model.q);
  model.basis = eig.eigenvectors.leftCols(q);
  if (options.keep_residual_basis) model.residual_basis = eig.eigenvectors.rightCols(eig.eigenvectors.cols() - q);
  return model;
}

/// Mapped, mean-centred rows.
inline RowMatrix centered_mapped(const DetectorModel& model, const FeatureMatrix& x) {
  if (x.cols() != model.map.input_dim()) {
    throw Error(Errc::dim_mismatch, "query has " + std::to_string(x.cols()) + " columns, model expects " +
                                        std::to_string(model.map.input_dim()));
  }
  RowMatrix centered = map_apply(model.map, x).values();
  centered.rowwise() -= model.mean.transpose();
  return centered;
}

/// Reconstruction errors ||U_q U_q^T d - d||_2 with d = phi(z) - mu.
inline std::vector<double> reconstruction_errors(const DetectorModel& model, const FeatureMatrix& x) {
  const RowMatrix centered = centered_mapped(model, x);
  const RowMatrix reconstructed = (centered * model.basis) * model.basis.transpose();
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (reconstructed.row(Eigen::Index(i)) - centered.row(Eigen::Index(i))).norm();
  }
  return out;
}

inline ScoreVector score_reconstruction(const DetectorModel& model, const FeatureMatrix& x) {
  ScoreVector s = reconstruction_errors(model, x);
  for (double& v : s) v = -v;
  return s;
}

/// Norms of projections onto the residual subspace, negated. Requires a model
/// fitted with keep_residual_basis.
inline ScoreVector score_residual(const DetectorModel& model, const FeatureMatrix& x) {
  if (!model.residual_basis) throw Error(Errc::missing_residual_basis, "model has no residual basis");
  const RowMatrix centered = centered_mapped(model, x);
  ScoreVector out(x.rows(), 0.0);
  if (model.residual_basis->cols() == 0) return out;
  const RowMatrix proj = centered * *model.residual_basis;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -proj.row(Eigen::Index(i)).norm();
  return out;
}

/// Single-query reconstruction error; used by latency benchmarks.
inline double reconstruction_error_one(const DetectorModel& model, std::span<const double> z) {
  const std::vector<double> phi = model.map.apply(z);
  const Vector d = as_vector(phi) - model.mean;
  const Vector coeff = model.basis.transpose() * d;
  return (model.basis * coeff - d).norm();
}

}  // namespace kpca_ood
