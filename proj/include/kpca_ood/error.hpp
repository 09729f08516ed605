#pragma once

#include <stdexcept>
#include <string>

namespace kpca_ood {

enum class Errc {
  usage,
  io,
  format,
  dim_mismatch,
  length_mismatch,
  index_mismatch,
  zero_vector,
  empty_scores,
  invalid_range,
  invalid_bandwidth,
  invalid_spec,
  k_too_large,
  missing_residual_basis,
  non_finite,
  non_symmetric,
  degenerate_spectrum,
  all_zero_spectrum,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::usage: return "Usage";
    case Errc::io: return "Io";
    case Errc::format: return "Format";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::index_mismatch: return "IndexMismatch";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::empty_scores: return "EmptyScores";
    case Errc::invalid_range: return "InvalidRange";
    case Errc::invalid_bandwidth: return "InvalidBandwidth";
    case Errc::invalid_spec: return "InvalidSpec";
    case Errc::k_too_large: return "KTooLarge";
    case Errc::missing_residual_basis: return "MissingResidualBasis";
    case Errc::non_finite: return "NonFinite";
    case Errc::non_symmetric: return "NonSymmetric";
    case Errc::degenerate_spectrum: return "DegenerateSpectrum";
    case Errc::all_zero_spectrum: return "AllZeroSpectrum";
  }
  return "Unknown";
}

// Process exit code for a failure class: 1 usage, 2 data/format, 3 numerical.
inline int exit_code(Errc c) {
  switch (c) {
    case Errc::usage:
    case Errc::invalid_range:
    case Errc::invalid_bandwidth:
    case Errc::invalid_spec:
    case Errc::k_too_large:
      return 1;
    case Errc::non_symmetric:
    case Errc::degenerate_spectrum:
    case Errc::all_zero_spectrum:
      return 3;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error with `context` prepended to the detail.
  Error with_context(const std::string& context) const { return Error(code_, context + ": " + detail_); }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace kpca_ood
