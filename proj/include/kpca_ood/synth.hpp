#pragma once

// Deterministic synthetic InD/OoD feature sets.
//
//   norm-shift      same uniform directions, norms N(norm_ind, sigma) vs
//                   N(norm_ood, sigma): separable by norm only.
//   sphere-cluster  InD tight clusters on the unit sphere, OoD uniform on the
//                   sphere: separable by direction only.
//   low-rank-gauss  InD in a random rank-r subspace plus isotropic noise, OoD
//                   isotropic Gaussian.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "kpca_ood/tensor.hpp"

namespace kpca_ood {

enum class SynthKind { norm_shift, sphere_cluster, low_rank_gauss };

inline std::optional<SynthKind> parse_synth_kind(const std::string& s) {
  if (s == "norm-shift") return SynthKind::norm_shift;
  if (s == "sphere-cluster") return SynthKind::sphere_cluster;
  if (s == "low-rank-gauss") return SynthKind::low_rank_gauss;
  return std::nullopt;
}

struct SynthSpec {
  SynthKind kind = SynthKind::norm_shift;
  std::size_t n = 1000;  // rows in each of the InD and OoD sets
  std::size_t n_test = 0;  // extra held-out InD rows, drawn after InD and OoD
  std::size_t dim = 16;
  std::uint64_t seed = 0;

  // norm-shift
  double norm_ind = 10.0;
  double norm_ood = 5.0;
  double norm_sigma = 1.0;

  // sphere-cluster
  std::size_t clusters = 8;
  double spread = 0.1;  // per-coordinate noise is spread / sqrt(dim) before normalization

  // low-rank-gauss
  std::size_t rank = 2;
  double noise = 0.01;
  double ood_scale = 0.0;  // 0 selects sqrt(rank / dim), matching InD total variance
};

struct SynthData {
  FeatureMatrix ind;
  FeatureMatrix ood;
  std::optional<FeatureMatrix> ind_test;
};

namespace detail {

inline void unit_direction(Prng& prng, double* out, std::size_t dim) {
  for (;;) {
    double ss = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      out[j] = prng.next_normal();
      ss += out[j] * out[j];
    }
    if (ss > 1e-12) {
      const double inv = 1.0 / std::sqrt(ss);
      for (std::size_t j = 0; j < dim; ++j) out[j] *= inv;
      return;
    }
  }
}

inline double positive_norm(Prng& prng, double mu, double sigma) {
  for (;;) {
    const double r = std::abs(mu + sigma * prng.next_normal());
    if (r > 1e-6) return r;
  }
}

inline RowMatrix norm_shifted(Prng& prng, const SynthSpec& s, std::size_t rows, double mu) {
  RowMatrix x(Eigen::Index(rows), Eigen::Index(s.dim));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    unit_direction(prng, x.row(i).data(), s.dim);
    x.row(i) *= positive_norm(prng, mu, s.norm_sigma);
  }
  return x;
}

}  // namespace detail

inline void validate(const SynthSpec& s) {
  if (s.n < 2) throw Error(Errc::invalid_spec, "synth needs n >= 2");
  if (s.dim < 2) throw Error(Errc::invalid_spec, "synth needs dim >= 2");
  switch (s.kind) {
    case SynthKind::norm_shift:
      if (!(s.norm_sigma >= 0.0) || !std::isfinite(s.norm_ind) || !std::isfinite(s.norm_ood)) {
        throw Error(Errc::invalid_spec, "norm-shift needs finite norms and sigma >= 0");
      }
      break;
    case SynthKind::sphere_cluster:
      if (s.clusters < 1 || !(s.spread >= 0.0)) throw Error(Errc::invalid_spec, "sphere-cluster needs clusters >= 1, spread >= 0");
      break;
    case SynthKind::low_rank_gauss:
      if (s.rank < 1 || s.rank > s.dim || !(s.noise >= 0.0) || !(s.ood_scale >= 0.0)) {
        throw Error(Errc::invalid_spec, "low-rank-gauss needs 1 <= rank <= dim, noise >= 0");
      }
      break;
  }
}

inline SynthData generate(const SynthSpec& s) {
  validate(s);
  Prng prng(s.seed);
  const auto n = Eigen::Index(s.n), d = Eigen::Index(s.dim);

  switch (s.kind) {
    case SynthKind::norm_shift: {
      SynthData out{FeatureMatrix(detail::norm_shifted(prng, s, s.n, s.norm_ind)),
                    FeatureMatrix(detail::norm_shifted(prng, s, s.n, s.norm_ood)), std::nullopt};
      if (s.n_test > 0) out.ind_test = FeatureMatrix(detail::norm_shifted(prng, s, s.n_test, s.norm_ind));
      return out;
    }
    case SynthKind::sphere_cluster: {
      RowMatrix centers(Eigen::Index(s.clusters), d);
      for (Eigen::Index c = 0; c < centers.rows(); ++c) detail::unit_direction(prng, centers.row(c).data(), s.dim);
      const double noise = s.spread / std::sqrt(static_cast<double>(s.dim));
      auto clustered = [&](std::size_t rows) {
        RowMatrix x(Eigen::Index(rows), d);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          const auto c = Eigen::Index(prng.next_below(s.clusters));
          for (Eigen::Index j = 0; j < d; ++j) x(i, j) = centers(c, j) + noise * prng.next_normal();
          const double norm = x.row(i).norm();
          if (norm < 1e-12) {
            x.row(i) = centers.row(c);
          } else {
            x.row(i) /= norm;
          }
        }
        return FeatureMatrix(std::move(x));
      };
      SynthData out{clustered(s.n), FeatureMatrix(), std::nullopt};
      RowMatrix ood(n, d);
      for (Eigen::Index i = 0; i < n; ++i) detail::unit_direction(prng, ood.row(i).data(), s.dim);
      out.ood = FeatureMatrix(std::move(ood));
      if (s.n_test > 0) out.ind_test = clustered(s.n_test);
      return out;
    }
    case SynthKind::low_rank_gauss: {
      Matrix g(d, Eigen::Index(s.rank));
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        for (Eigen::Index i = 0; i < d; ++i) g(i, j) = prng.next_normal();
      }
      const Matrix basis = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(d, g.cols());
      auto planted = [&](std::size_t rows) {
        RowMatrix x(Eigen::Index(rows), d);
        Vector coeff(g.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff(k) = prng.next_normal();
          x.row(i) = (basis * coeff).transpose();
          for (Eigen::Index j = 0; j < d; ++j) x(i, j) += s.noise * prng.next_normal();
        }
        return FeatureMatrix(std::move(x));
      };
      SynthData out{planted(s.n), FeatureMatrix(), std::nullopt};
      const double scale = s.ood_scale > 0.0 ? s.ood_scale
                                             : std::sqrt(static_cast<double>(s.rank) / static_cast<double>(s.dim));
      RowMatrix ood(n, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) ood(i, j) = scale * prng.next_normal();
      }
      out.ood = FeatureMatrix(std::move(ood));
      if (s.n_test > 0) out.ind_test = planted(s.n_test);
      return out;
    }
  }
  throw Error(Errc::invalid_spec, "unknown synth kind");
}

}  // namespace kpca_ood
