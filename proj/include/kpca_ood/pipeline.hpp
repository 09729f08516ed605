#pragma once

// Method-level dispatch: builds the feature map for a named detector, fits
// it, and scores queries with either model family.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kpca_ood/detector.hpp"
#include "kpca_ood/featmap.hpp"
#include "kpca_ood/io.hpp"
#include "kpca_ood/kernelspace.hpp"

namespace kpca_ood {

struct FitConfig {
  Method method = Method::cop;
  double evr_target = 0.9;
  std::optional<double> gamma;          // median heuristic when unset
  std::optional<std::size_t> rff_dim;   // 4 * input dim when unset
  std::uint64_t seed = 0;
  bool keep_residual_basis = false;
};

struct FittedModel {
  Method method = Method::cop;
  AnyModel model;
  double gamma = 0.0;        // 0 when the method has no bandwidth
  std::size_t rff_dim = 0;   // 0 when the method has no RFF stage
  std::vector<std::string> warnings;
};

inline bool uses_gamma(Method m) { return m == Method::corp || m == Method::colp || m == Method::kgau; }
inline bool uses_rff(Method m) { return m == Method::corp || m == Method::colp; }

inline std::size_t default_rff_dim(std::size_t input_dim) { return 4 * input_dim; }

/// Bandwidth for `cfg`: the explicit value, or the median heuristic on the
/// l2-normalized training rows.
inline double resolve_gamma(const FeatureMatrix& train, const FitConfig& cfg) {
  if (cfg.gamma) {
    if (!(*cfg.gamma > 0.0)) throw Error(Errc::invalid_bandwidth, "gamma must be > 0");
    return *cfg.gamma;
  }
  return median_heuristic_gamma(normalize_rows(train), cfg.seed);
}

inline FeatureMapSpec build_map(Method method, std::size_t input_dim, double gamma, std::size_t rff_dim,
                                std::uint64_t seed) {
  switch (method) {
    case Method::pca: return FeatureMapSpec::identity(input_dim);
    case Method::cop: return FeatureMapSpec::cosine(input_dim);
    case Method::corp: return FeatureMapSpec::cosine_rff(rff_build(KernelKind::gaussian, gamma, rff_dim, input_dim, seed));
    case Method::colp: return FeatureMapSpec::cosine_rff(rff_build(KernelKind::laplacian, gamma, rff_dim, input_dim, seed));
    default: throw Error(Errc::invalid_spec, std::string(method_name(method)) + " has no explicit feature map");
  }
}

inline FittedModel fit_method(const FeatureMatrix& train, const FitConfig& cfg) {
  FittedModel out;
  out.method = cfg.method;
  if (uses_gamma(cfg.method)) out.gamma = resolve_gamma(train, cfg);
  if (is_kernel_method(cfg.method)) {
    const GramKernel kind = cfg.method == Method::kcos ? GramKernel::cosine : GramKernel::gaussian_normalized;
    KernelSpaceModel m = fit_kernelspace(train, kind, out.gamma, cfg.evr_target);
    out.warnings = m.warnings;
    out.model = std::move(m);
    return out;
  }
  if (uses_rff(cfg.method)) {
    out.rff_dim = cfg.rff_dim.value_or(default_rff_dim(train.cols()));
  }
  const FeatureMapSpec map = build_map(cfg.method, train.cols(), out.gamma, out.rff_dim, cfg.seed);
  out.model = fit(train, map, cfg.evr_target, FitOptions{cfg.keep_residual_basis});
  return out;
}

inline std::size_t model_input_dim(const AnyModel& m) {
  if (const auto* d = std::get_if<DetectorModel>(&m)) return d->map.input_dim();
  return std::get<KernelSpaceModel>(m).train.cols();
}

/// Non-negative reconstruction errors (e^Phi for covariance models, e^k for
/// kernel models).
inline std::vector<double> errors_of(const AnyModel& m, const FeatureMatrix& x) {
  if (const auto* d = std::get_if<DetectorModel>(&m)) return reconstruction_errors(*d, x);
  ScoreVector s = score_kernelspace(std::get<KernelSpaceModel>(m), x);
  for (double& v : s) v = -v;
  return s;
}

/// Detection scores (negated errors, higher = more in-distribution).
inline ScoreVector scores_of(const AnyModel& m, const FeatureMatrix& x) {
  if (const auto* d = std::get_if<DetectorModel>(&m)) return score_reconstruction(*d, x);
  return score_kernelspace(std::get<KernelSpaceModel>(m), x);
}

/// True when the model's pipeline normalizes inputs, so zero rows are invalid.
inline bool normalizes_inputs(const AnyModel& m) {
  if (const auto* d = std::get_if<DetectorModel>(&m)) {
    for (const auto& s : d->map.stages()) {
      if (std::holds_alternative<CosineStage>(s)) return true;
    }
    return false;
  }
  return true;
}

}  // namespace kpca_ood
