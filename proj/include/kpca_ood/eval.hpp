#pragma once

// Detection metrics and per-query latency benchmarking.
//
// Convention: higher score = more in-distribution. A sample is accepted as
// InD when score >= threshold.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kpca_ood/error.hpp"
#include "kpca_ood/tensor.hpp"

namespace kpca_ood {

struct ThresholdResult {
  double fpr = 0.0;
  double threshold = 0.0;
};

/// Largest threshold s with at least `tpr_target` of InD scores >= s (lower
/// interpolation), and the fraction of OoD scores >= s.
inline ThresholdResult fpr_at_tpr(std::span<const double> ind, std::span<const double> ood,
                                  double tpr_target = 0.95) {
  if (ind.empty() || ood.empty()) throw Error(Errc::empty_scores, "fpr_at_tpr needs non-empty score sets");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw Error(Errc::invalid_range, "tpr target must be in (0, 1]");

  std::vector<double> desc(ind.begin(), ind.end());
  std::sort(desc.begin(), desc.end(), std::greater<>());
  const double n = static_cast<double>(desc.size());
  // Number of InD samples that must be accepted; a tiny slack absorbs
  // products like 0.95 * 100 landing at 95.00000000000001.
  auto need = static_cast<std::size_t>(std::ceil(tpr_target * n - 1e-9));
  need = std::clamp<std::size_t>(need, 1, desc.size());

  ThresholdResult r;
  r.threshold = desc[need - 1];
  const auto accepted = std::count_if(ood.begin(), ood.end(), [&](double s) { return s >= r.threshold; });
  r.fpr = static_cast<double>(accepted) / static_cast<double>(ood.size());
  return r;
}

/// Mann-Whitney AUROC: P(ind > ood) + P(ind == ood) / 2, via average ranks.
inline double auroc(std::span<const double> ind, std::span<const double> ood) {
  if (ind.empty() || ood.empty()) throw Error(Errc::empty_scores, "auroc needs non-empty score sets");
  struct Item {
    double score;
    bool is_ind;
  };
  std::vector<Item> all;
  all.reserve(ind.size() + ood.size());
  for (double s : ind) all.push_back({s, true});
  for (double s : ood) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Twice the rank sum keeps every quantity an exact integer.
  double twice_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double twice_avg_rank = static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].is_ind) twice_rank_sum += twice_avg_rank;
    }
    i = j;
  }
  const double n1 = static_cast<double>(ind.size());
  const double n2 = static_cast<double>(ood.size());
  const double twice_u = twice_rank_sum - n1 * (n1 + 1.0);
  return twice_u / (2.0 * n1 * n2);
}

struct EvalReport {
  double fpr95 = 0.0;
  double auroc = 0.0;
  std::size_t n_ind = 0;
  std::size_t n_ood = 0;
  double threshold_at_95tpr = 0.0;
  double tpr_target = 0.95;
};

inline EvalReport evaluate(std::span<const double> ind, std::span<const double> ood, double tpr_target = 0.95) {
  const ThresholdResult t = fpr_at_tpr(ind, ood, tpr_target);
  EvalReport r;
  r.fpr95 = t.fpr;
  r.threshold_at_95tpr = t.threshold;
  r.auroc = auroc(ind, ood);
  r.n_ind = ind.size();
  r.n_ood = ood.size();
  r.tpr_target = tpr_target;
  return r;
}

// ---------------------------------------------------------------------------
// Latency benchmark
// ---------------------------------------------------------------------------

inline std::vector<std::span<const double>> row_views(const FeatureMatrix& x, std::size_t limit = SIZE_MAX) {
  std::vector<std::span<const double>> out;
  for (std::size_t i = 0; i < std::min(limit, x.rows()); ++i) out.push_back(x.row(i));
  return out;
}

using QueryScorer = std::function<double(std::span<const double>)>;

struct NamedScorer {
  std::string name;
  QueryScorer score;
};

struct LatencyStats {
  double mean_micros = 0.0;
  double p99_micros = 0.0;
};

struct BenchReport {
  std::map<std::string, LatencyStats> per_query_micros;
  std::size_t train_size = 0;
  std::size_t rff_dim = 0;
  std::size_t queries = 0;
};

/// Times each scorer one query at a time on the calling thread. `warmup`
/// untimed passes precede `reps` timed passes over all queries.
inline BenchReport bench_scorers(const std::vector<NamedScorer>& scorers,
                                 const std::vector<std::span<const double>>& queries, std::size_t warmup,
                                 std::size_t reps) {
  if (reps < 1) throw Error(Errc::invalid_range, "bench needs reps >= 1");
  BenchReport report;
  if (queries.empty()) return report;
  report.queries = queries.size();

  using clock = std::chrono::steady_clock;
  volatile double sink = 0.0;
  for (const auto& s : scorers) {
    for (std::size_t w = 0; w < warmup; ++w) {
      for (const auto& q : queries) sink = sink + s.score(q);
    }
    std::vector<double> micros;
    micros.reserve(reps * queries.size());
    for (std::size_t r = 0; r < reps; ++r) {
      for (const auto& q : queries) {
        const auto t0 = clock::now();
        sink = sink + s.score(q);
        const auto t1 = clock::now();
        const double us = std::chrono::duration<double, std::micro>(t1 - t0).count();
        micros.push_back(std::max(us, 1e-3));  // below clock resolution
      }
    }
    LatencyStats st;
    double total = 0.0;
    for (double v : micros) total += v;
    st.mean_micros = total / static_cast<double>(micros.size());
    std::sort(micros.begin(), micros.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(micros.size()))) - 1;
    st.p99_micros = micros[std::min(idx, micros.size() - 1)];
    report.per_query_micros[s.name] = st;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline std::string render_text(const std::string& label, const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s  FPR@%2.0f%%TPR %8.4f  AUROC %8.4f  threshold %.10g  n_ind %zu  n_ood %zu\n",
                label.c_str(), r.tpr_target * 100.0, r.fpr95, r.auroc, r.threshold_at_95tpr, r.n_ind, r.n_ood);
  return buf;
}

/// One JSON record per metric.
inline std::string render_json_lines(const std::string& label, const EvalReport& r) {
  std::string out;
  auto rec = [&](const char* metric, double v) {
    nlohmann::json j{{"dataset", label}, {"metric", metric}, {"value", v}};
    out += j.dump() + "\n";
  };
  rec("fpr_at_tpr", r.fpr95);
  rec("auroc", r.auroc);
  rec("threshold", r.threshold_at_95tpr);
  rec("n_ind", static_cast<double>(r.n_ind));
  rec("n_ood", static_cast<double>(r.n_ood));
  return out;
}

inline std::string render_text(const BenchReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "train_size %zu  rff_dim %zu  queries %zu\n", r.train_size, r.rff_dim, r.queries);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-12s %14s %14s\n", "method", "mean_us", "p99_us");
  out += buf;
  for (const auto& [name, st] : r.per_query_micros) {
    std::snprintf(buf, sizeof buf, "%-12s %14.3f %14.3f\n", name.c_str(), st.mean_micros, st.p99_micros);
    out += buf;
  }
  return out;
}

inline std::string render_json_lines(const BenchReport& r) {
  std::string out;
  for (const auto& [name, st] : r.per_query_micros) {
    out += nlohmann::json{{"method", name}, {"metric", "mean_us"}, {"value", st.mean_micros},
                          {"train_size", r.train_size}, {"rff_dim", r.rff_dim}}
               .dump() +
           "\n";
    out += nlohmann::json{{"method", name}, {"metric", "p99_us"}, {"value", st.p99_micros},
                          {"train_size", r.train_size}, {"rff_dim", r.rff_dim}}
               .dump() +
           "\n";
  }
  return out;
}

}  // namespace kpca_ood
