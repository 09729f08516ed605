#pragma once

// Kernel-function KPCA: reconstruction error as the norm of the kernel
// vector projected onto the Gram eigenvectors with the smallest eigenvalues.
// The Gram matrix is used uncentered and eigenvectors are unit-norm.

#include <cmath>
#include <string>
#include <vector>

#include "kpca_ood/detector.hpp"
#include "kpca_ood/featmap.hpp"
#include "kpca_ood/tensor.hpp"

namespace kpca_ood {

enum class GramKernel : std::uint8_t { cosine = 0, gaussian_normalized = 1 };

inline const char* gram_kernel_name(GramKernel k) {
  return k == GramKernel::cosine ? "cosine" : "gaussian-on-normalized";
}

/// Rows l2-normalized; both supported kernels act on normalized inputs.
inline FeatureMatrix normalize_rows(const FeatureMatrix& x) {
  return map_apply(FeatureMapSpec::cosine(x.cols()), x);
}

namespace detail {

inline void require_gamma(GramKernel kind, double gamma) {
  if (kind == GramKernel::gaussian_normalized && !(gamma > 0.0)) {
    throw Error(Errc::invalid_bandwidth, "gaussian kernel needs gamma > 0");
  }
}

// Kernel matrix between already-normalized row sets: out(i, j) = k(a_i, b_j).
inline Matrix cross_kernel(GramKernel kind, double gamma, const RowMatrix& a, const RowMatrix& b) {
  Matrix k = a * b.transpose();
  if (kind == GramKernel::gaussian_normalized) {
    // ||a - b||^2 = 2 - 2 a.b for unit rows; clamp rounding below zero.
    k = (-gamma * (2.0 - 2.0 * k.array()).max(0.0)).exp().matrix();
  }
  return k;
}

}  // namespace detail

/// N x N kernel matrix of the normalized rows of `x`.
inline Matrix gram(GramKernel kind, double gamma, const FeatureMatrix& x) {
  detail::require_gamma(kind, gamma);
  const RowMatrix n = normalize_rows(x).values();
  Matrix k = detail::cross_kernel(kind, gamma, n, n);
  // Exact symmetry and unit diagonal regardless of GEMM rounding.
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  k.diagonal().setOnes();
  return k;
}

struct KernelSpaceModel {
  GramKernel kind = GramKernel::cosine;
  double gamma = 0.0;       // gaussian only
  FeatureMatrix train;      // l2-normalized training rows
  Matrix residual_vectors;  // N x l Gram eigenvectors for the l smallest eigenvalues
  std::size_t l = 0;
  double evr_target = 0.9;
  Vector gram_eigenvalues;  // descending
  std::vector<std::string> warnings;
};

/// Builds a model from an existing Gram eigendecomposition with `l` trailing
/// eigenvectors kept.
inline KernelSpaceModel kernelspace_from_eig(GramKernel kind, double gamma, FeatureMatrix normalized_train,
                                             const SymEigResult& eig, std::size_t l, double evr_target) {
  const auto n = static_cast<std::size_t>(eig.eigenvectors.cols());
  if (l < 1 || l > n) throw Error(Errc::invalid_range, "residual dimension must be in [1, N]");
  KernelSpaceModel m;
  m.kind = kind;
  m.gamma = kind == GramKernel::gaussian_normalized ? gamma : 0.0;
  m.train = std::move(normalized_train);
  m.residual_vectors = eig.eigenvectors.rightCols(static_cast<Eigen::Index>(l));
  m.l = l;
  m.evr_target = evr_target;
  m.gram_eigenvalues = eig.eigenvalues;
  return m;
}

/// Residual dimension l = N - q for the q chosen on the Gram spectrum,
/// clamped to at least 1.
inline std::size_t kernelspace_residual_dim(const Vector& gram_eigenvalues, double evr_target, bool* clamped) {
  const auto n = static_cast<std::size_t>(gram_eigenvalues.size());
  const std::size_t q = choose_q(gram_eigenvalues, evr_target);
  if (clamped) *clamped = (q >= n);
  return q >= n ? 1 : n - q;
}

struct GramDecomposition {
  FeatureMatrix normalized;
  SymEigResult eig;
};

/// Normalizes the training rows and eigendecomposes their (uncentered) Gram matrix.
inline GramDecomposition decompose_gram(const FeatureMatrix& x, GramKernel kind, double gamma) {
  detail::require_gamma(kind, gamma);
  GramDecomposition g{normalize_rows(x), {}};
  const RowMatrix& n = g.normalized.values();
  Matrix k = detail::cross_kernel(kind, gamma, n, n);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  k.diagonal().setOnes();
  g.eig = sym_eig(k);
  if (!(clamp_nonnegative(g.eig.eigenvalues).sum() >= kDegenerateVariance)) {
    throw Error(Errc::degenerate_spectrum, "Gram matrix has no variance");
  }
  return g;
}

inline KernelSpaceModel kernelspace_from_decomposition(const GramDecomposition& g, GramKernel kind, double gamma,
                                                       double evr_target) {
  if (!(evr_target > 0.0 && evr_target < 1.0)) {
    throw Error(Errc::invalid_range, "kernel-space explained-variance target must be in (0, 1)");
  }
  bool clamped = false;
  const std::size_t l = kernelspace_residual_dim(g.eig.eigenvalues, evr_target, &clamped);
  KernelSpaceModel m = kernelspace_from_eig(kind, gamma, g.normalized, g.eig, l, evr_target);
  if (clamped) {
    m.warnings.push_back("explained-variance target keeps every Gram component; residual dimension clamped to 1");
  }
  return m;
}

inline KernelSpaceModel fit_kernelspace(const FeatureMatrix& x, GramKernel kind, double gamma, double evr_target) {
  if (!(evr_target > 0.0 && evr_target < 1.0)) {
    throw Error(Errc::invalid_range, "kernel-space explained-variance target must be in (0, 1)");
  }
  return kernelspace_from_decomposition(decompose_gram(x, kind, gamma), kind, gamma, evr_target);
}

/// Kernel vectors k_z for each query row: out(j, i) = k(train_i, z_j).
inline Matrix kernel_vectors(const KernelSpaceModel& model, const FeatureMatrix& x) {
  if (x.cols() != model.train.cols()) {
    throw Error(Errc::dim_mismatch, "query has " + std::to_string(x.cols()) + " columns, model expects " +
                                        std::to_string(model.train.cols()));
  }
  const RowMatrix n = normalize_rows(x).values();
  return detail::cross_kernel(model.kind, model.gamma, n, model.train.values());
}

inline ScoreVector score_kernelspace(const KernelSpaceModel& model, const FeatureMatrix& x) {
  const Matrix kv = kernel_vectors(model, x);
  const Matrix proj = kv * model.residual_vectors;
  ScoreVector out(x.rows());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = -proj.row(Eigen::Index(j)).norm();
  return out;
}

}  // namespace kpca_ood
