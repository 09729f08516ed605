#pragma once

// kpca-ood command line: synth, fit, score, eval, fuse, sweep, bench,
// baseline. Exit codes: 0 ok, 1 usage, 2 data/format, 3 numerical.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "kpca_ood/baselines.hpp"
#include "kpca_ood/error.hpp"
#include "kpca_ood/eval.hpp"
#include "kpca_ood/io.hpp"
#include "kpca_ood/pipeline.hpp"
#include "kpca_ood/synth.hpp"

namespace kpca_ood::cli {

namespace detail {

using clock = std::chrono::steady_clock;

inline double millis_since(clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline Method require_method(const std::string& s) {
  const auto m = parse_method(s);
  if (!m) throw Error(Errc::usage, "unknown method '" + s + "'");
  return *m;
}

// ----- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string kind;
  std::string out;
  SynthSpec spec;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec = a.spec;
  const auto kind = parse_synth_kind(a.kind);
  if (!kind) throw Error(Errc::usage, "unknown synth kind '" + a.kind + "'");
  spec.kind = *kind;
  const SynthData data = generate(spec);
  auto write = [&](const std::string& suffix, const FeatureMatrix& x) {
    const std::string path = a.out + suffix;
    save_features(path, x);
    out << "wrote " << path << " (" << x.rows() << " x " << x.cols() << ")\n";
  };
  write(".ind.oodf", data.ind);
  write(".ood.oodf", data.ood);
  if (data.ind_test) write(".test.oodf", *data.ind_test);
  return 0;
}

// ----- fit -------------------------------------------------------------------

struct FitArgs {
  std::string train, method, out;
  double evr = 0.9;
  double gamma = 0.0;
  bool gamma_set = false;
  std::size_t rff_dim = 0;
  bool rff_dim_set = false;
  std::uint64_t seed = 0;
  bool keep_residual = false;
};

inline FitConfig fit_config(const FitArgs& a) {
  FitConfig cfg;
  cfg.method = require_method(a.method);
  cfg.evr_target = a.evr;
  if (a.gamma_set) cfg.gamma = a.gamma;
  if (a.rff_dim_set) {
    if (a.rff_dim < 1) throw Error(Errc::usage, "--rff-dim must be >= 1");
    cfg.rff_dim = a.rff_dim;
  }
  cfg.seed = a.seed;
  cfg.keep_residual_basis = a.keep_residual;
  return cfg;
}

inline void print_fit_summary(const FittedModel& f, double load_ms, double fit_ms, std::ostream& out) {
  out << "method " << method_name(f.method) << "\n";
  const Vector* eigs = nullptr;
  if (const auto* d = std::get_if<DetectorModel>(&f.model)) {
    out << "input_dim " << d->map.input_dim() << "\nmapped_dim " << d->mapped_dim() << "\nq " << d->q << "\n";
    eigs = &d->eigenvalues;
  } else {
    const auto& k = std::get<KernelSpaceModel>(f.model);
    out << "input_dim " << k.train.cols() << "\ntrain_size " << k.train.rows() << "\nresidual_dim " << k.l << "\n";
    eigs = &k.gram_eigenvalues;
  }
  if (uses_gamma(f.method)) out << "gamma " << format_double(f.gamma) << "\n";
  if (uses_rff(f.method)) out << "rff_dim " << f.rff_dim << "\n";
  out << "spectrum_head";
  const double total = clamp_nonnegative(*eigs).sum();
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(eigs->size(), 8); ++i) {
    out << " " << fmt("%.6g", (*eigs)(i));
  }
  out << "\nspectrum_total " << fmt("%.6g", total) << "\n";
  out << "load_ms " << fmt("%.3f", load_ms) << "\nfit_ms " << fmt("%.3f", fit_ms) << "\n";
}

inline int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const FitConfig cfg = fit_config(a);
  auto t0 = clock::now();
  const FeatureMatrix train = load_features(a.train);
  const double load_ms = millis_since(t0);
  t0 = clock::now();
  const FittedModel f = fit_method(train, cfg);
  const double fit_ms = millis_since(t0);
  for (const auto& w : f.warnings) err << "warning: " << w << "\n";
  save_model(a.out, f.model);
  print_fit_summary(f, load_ms, fit_ms, out);
  out << "wrote " << a.out << "\n";
  return 0;
}

// ----- score -----------------------------------------------------------------

struct ScoreArgs {
  std::string model, features, out;
  std::string output = "score";
  bool skip_bad_rows = false;
};

inline double row_norm(const FeatureMatrix& x, std::size_t i) {
  double ss = 0.0;
  for (double v : x.row(i)) ss += v * v;
  return std::sqrt(ss);
}

inline int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const SavedModel saved = load_model(a.model);
  const FeatureMatrix x = load_features(a.features);
  const std::size_t expect = model_input_dim(saved.model);
  if (x.cols() != expect) {
    throw Error(Errc::dim_mismatch, a.features + " has " + std::to_string(x.cols()) + " columns, model expects " +
                                        std::to_string(expect));
  }
  const bool reg = a.output == "reg-error";
  const bool needs_norm = reg || normalizes_inputs(saved.model);

  std::vector<std::size_t> keep;
  keep.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (needs_norm && !(row_norm(x, i) >= kZeroNormThreshold)) {
      if (!a.skip_bad_rows) throw Error(Errc::zero_vector, "row " + std::to_string(i) + " has zero norm");
      err << "warning: skipping row " << i << " (zero norm)\n";
      continue;
    }
    keep.push_back(i);
  }

  ScoreTable table;
  table.index = keep;
  if (!keep.empty()) {
    const FeatureMatrix* rows = &x;
    std::optional<FeatureMatrix> kept;
    if (keep.size() != x.rows()) {
      RowMatrix sub(static_cast<Eigen::Index>(keep.size()), x.values().cols());
      for (std::size_t r = 0; r < keep.size(); ++r) sub.row(Eigen::Index(r)) = x.values().row(Eigen::Index(keep[r]));
      kept.emplace(std::move(sub));
      rows = &*kept;
    }
    if (a.output == "score") {
      table.score = scores_of(saved.model, *rows);
    } else if (a.output == "error") {
      table.score = errors_of(saved.model, *rows);
    } else {
      const auto* d = std::get_if<DetectorModel>(&saved.model);
      if (!d || saved.method != Method::pca) throw Error(Errc::invalid_spec, "reg-error output needs a pca model");
      table.score = reg_pca_error(*d, *rows);
    }
  }
  save_scores(a.out, table);
  out << "wrote " << a.out << " (" << table.index.size() << " rows)\n";
  return 0;
}

// ----- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string ind;
  std::vector<std::string> ood;
  double tpr = 0.95;
  bool json_lines = false;
};

inline void print_mean(double fpr, double auc, double tpr, bool json, std::ostream& out) {
  if (json) {
    out << nlohmann::json{{"dataset", "mean"}, {"metric", "fpr_at_tpr"}, {"value", fpr}}.dump() << "\n";
    out << nlohmann::json{{"dataset", "mean"}, {"metric", "auroc"}, {"value", auc}}.dump() << "\n";
  } else {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s  FPR@%2.0f%%TPR %8.4f  AUROC %8.4f\n", "mean", tpr * 100.0, fpr, auc);
    out << buf;
  }
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const ScoreTable ind = load_scores(a.ind);
  double fpr_sum = 0.0, auc_sum = 0.0;
  for (const auto& path : a.ood) {
    const ScoreTable ood = load_scores(path);
    EvalReport r;
    try {
      r = evaluate(ind.score, ood.score, a.tpr);
    } catch (const Error& e) {
      throw e.with_context(path);
    }
    out << (a.json_lines ? render_json_lines(path, r) : render_text(path, r));
    fpr_sum += r.fpr95;
    auc_sum += r.auroc;
  }
  if (a.ood.size() > 1) {
    const double n = static_cast<double>(a.ood.size());
    print_mean(fpr_sum / n, auc_sum / n, a.tpr, a.json_lines, out);
  }
  return 0;
}

// ----- fuse ------------------------------------------------------------------

struct FuseArgs {
  std::vector<std::string> errors, base, out;
  bool normalize_errors = false;
};

inline int cmd_fuse(const FuseArgs& a, std::ostream& out) {
  if (a.errors.size() != a.base.size() || a.errors.size() != a.out.size()) {
    throw Error(Errc::usage, "--errors, --base and --out must be given the same number of times");
  }
  std::vector<ScoreTable> errs, bases;
  for (std::size_t i = 0; i < a.errors.size(); ++i) {
    errs.push_back(load_scores(a.errors[i]));
    bases.push_back(load_scores(a.base[i]));
    if (errs[i].index.size() != bases[i].index.size()) {
      throw Error(Errc::index_mismatch, a.errors[i] + " has " + std::to_string(errs[i].index.size()) + " rows, " +
                                            a.base[i] + " has " + std::to_string(bases[i].index.size()));
    }
    for (std::size_t r = 0; r < errs[i].index.size(); ++r) {
      if (errs[i].index[r] != bases[i].index[r]) {
        throw Error(Errc::index_mismatch, a.errors[i] + " and " + a.base[i] + " disagree at line " +
                                              std::to_string(r + 2) + " (index " + std::to_string(errs[i].index[r]) +
                                              " vs " + std::to_string(bases[i].index[r]) + ")");
      }
    }
  }
  if (a.normalize_errors) {
    std::vector<std::vector<double>*> sets;
    for (auto& e : errs) sets.push_back(&e.score);
    minmax_normalize(sets);
  }
  for (std::size_t i = 0; i < errs.size(); ++i) {
    ScoreTable fused{errs[i].index, fuse(errs[i].score, bases[i].score)};
    save_scores(a.out[i], fused);
    out << "wrote " << a.out[i] << " (" << fused.index.size() << " rows)\n";
  }
  return 0;
}

// ----- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string param;
  std::vector<double> values;
  FitArgs fit;
  std::string ind_test;
  std::vector<std::string> ood_test;
  double tpr = 0.95;
  bool json_lines = false;
};

inline int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  if (a.values.empty()) throw Error(Errc::usage, "--values needs at least one value");
  const Method method = require_method(a.fit.method);
  if (a.param == "gamma" && !uses_gamma(method)) {
    throw Error(Errc::usage, std::string("method ") + method_name(method) + " has no gamma");
  }
  if (a.param == "rff-dim") {
    if (!uses_rff(method)) throw Error(Errc::usage, std::string("method ") + method_name(method) + " has no RFF stage");
    for (double v : a.values) {
      if (!(v >= 1.0) || v != std::floor(v)) throw Error(Errc::usage, "rff-dim values must be positive integers");
    }
  }
  const FeatureMatrix train = load_features(a.fit.train);
  const FeatureMatrix ind = load_features(a.ind_test);
  std::vector<FeatureMatrix> oods;
  for (const auto& p : a.ood_test) oods.push_back(load_features(p));

  if (!a.json_lines) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s %10s %10s %12s %12s\n", a.param.c_str(), "fpr95", "auroc", "fit_ms",
                  "score_ms");
    out << buf;
  }
  int status = 0;
  for (double v : a.values) {
    try {
      FitArgs fa = a.fit;
      if (a.param == "evr") {
        fa.evr = v;
      } else if (a.param == "gamma") {
        fa.gamma = v;
        fa.gamma_set = true;
      } else {
        fa.rff_dim = static_cast<std::size_t>(v);
        fa.rff_dim_set = true;
      }
      auto t0 = clock::now();
      const FittedModel f = fit_method(train, fit_config(fa));
      const double fit_ms = millis_since(t0);
      for (const auto& w : f.warnings) err << "warning: " << w << "\n";
      t0 = clock::now();
      const ScoreVector s_ind = scores_of(f.model, ind);
      double fpr = 0.0, auc = 0.0;
      for (const auto& o : oods) {
        const EvalReport r = evaluate(s_ind, scores_of(f.model, o), a.tpr);
        fpr += r.fpr95;
        auc += r.auroc;
      }
      const double score_ms = millis_since(t0);
      fpr /= static_cast<double>(oods.size());
      auc /= static_cast<double>(oods.size());
      if (a.json_lines) {
        out << nlohmann::json{{"param", a.param}, {"value", v}, {"fpr_at_tpr", fpr}, {"auroc", auc},
                              {"fit_ms", fit_ms}, {"score_ms", score_ms}}
                   .dump()
            << "\n";
      } else {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-14.6g %10.4f %10.4f %12.3f %12.3f\n", v, fpr, auc, fit_ms, score_ms);
        out << buf;
      }
    } catch (const Error& e) {
      err << "error: " << a.param << "=" << format_double(v) << ": " << e.what() << "\n";
      if (status == 0) status = exit_code(e.code());
    }
  }
  return status;
}

// ----- bench -----------------------------------------------------------------

struct BenchArgs {
  FitArgs fit;
  std::size_t queries = 1000;
  std::vector<std::string> methods{"cop", "corp", "knn"};
  std::string query_file;
  std::string store_dir;
  std::size_t k = 1;
  std::size_t warmup = 1;
  std::size_t reps = 3;
  bool json_lines = false;
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  for (const auto& m : a.methods) {
    if (m != "knn" && !parse_method(m)) throw Error(Errc::usage, "unknown bench method '" + m + "'");
  }
  const FeatureMatrix train = load_features(a.fit.train);
  const FeatureMatrix qsrc = a.query_file.empty() ? train : load_features(a.query_file);
  if (qsrc.cols() != train.cols()) throw Error(Errc::dim_mismatch, "query file dimension differs from training");
  if (a.queries < 1) throw Error(Errc::usage, "--queries must be >= 1");
  // Cycle through the source rows when fewer than requested.
  std::vector<std::span<const double>> queries;
  for (std::size_t i = 0; i < a.queries; ++i) queries.push_back(qsrc.row(i % qsrc.rows()));

  std::vector<NamedScorer> scorers;
  std::vector<std::pair<std::string, std::size_t>> sizes;
  // Owners for the models referenced by the scorer closures.
  std::vector<std::unique_ptr<AnyModel>> models;
  std::unique_ptr<KnnScorer> knn;
  std::size_t rff_dim = 0;

  const auto store = [&](const std::string& name, const std::string& bytes) {
    if (!a.store_dir.empty()) {
      const std::string path = (std::filesystem::path(a.store_dir) / (name + ".store")).string();
      write_file(path, bytes);
      sizes.emplace_back(name, static_cast<std::size_t>(std::filesystem::file_size(path)));
    } else {
      sizes.emplace_back(name, bytes.size());
    }
  };

  for (const auto& name : a.methods) {
    if (name == "knn") {
      knn = std::make_unique<KnnScorer>(train, a.k);
      store(name, encode_features(knn->train_normalized()));
      const KnnScorer* s = knn.get();
      scorers.push_back({name, [s](std::span<const double> z) { return s->score_one(z); }});
      continue;
    }
    FitArgs fa = a.fit;
    fa.method = name;
    const FittedModel f = fit_method(train, fit_config(fa));
    for (const auto& w : f.warnings) err << "warning: " << w << "\n";
    if (f.rff_dim) rff_dim = f.rff_dim;
    models.push_back(std::make_unique<AnyModel>(f.model));
    store(name, encode_model(*models.back()));
    const AnyModel* m = models.back().get();
    if (const auto* d = std::get_if<DetectorModel>(m)) {
      scorers.push_back({name, [d](std::span<const double> z) { return -reconstruction_error_one(*d, z); }});
    } else {
      const auto* k = &std::get<KernelSpaceModel>(*m);
      scorers.push_back({name, [k](std::span<const double> z) {
                           return score_kernelspace(*k, FeatureMatrix(1, z.size(), z)).front();
                         }});
    }
  }

  BenchReport r = bench_scorers(scorers, queries, a.warmup, a.reps);
  r.train_size = train.rows();
  r.rff_dim = rff_dim;
  if (a.json_lines) {
    out << render_json_lines(r);
    for (const auto& [name, bytes] : sizes) {
      out << nlohmann::json{{"method", name}, {"metric", "store_bytes"}, {"value", bytes},
                            {"train_size", r.train_size}, {"rff_dim", r.rff_dim}}
                 .dump()
          << "\n";
    }
  } else {
    out << render_text(r);
    for (const auto& [name, bytes] : sizes) out << "store_bytes " << name << " " << bytes << "\n";
  }
  return 0;
}

// ----- baseline --------------------------------------------------------------

struct BaselineArgs {
  std::string kind, logits, train, features, out;
  std::size_t k = 1;
};

inline int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  ScoreVector s;
  if (a.kind == "msp" || a.kind == "energy") {
    if (a.logits.empty()) throw Error(Errc::usage, a.kind + " needs --logits");
    const LogitsMatrix logits(load_features(a.logits));
    s = a.kind == "msp" ? msp_score(logits) : energy_score(logits);
  } else if (a.kind == "knn") {
    if (a.train.empty() || a.features.empty()) throw Error(Errc::usage, "knn needs --train and --features");
    const KnnScorer scorer(load_features(a.train), a.k);
    s = scorer.score(load_features(a.features));
  } else {
    throw Error(Errc::usage, "unknown baseline '" + a.kind + "'");
  }
  save_scores(a.out, sequential_scores(std::move(s)));
  out << "wrote " << a.out << "\n";
  return 0;
}

inline void add_fit_options(CLI::App* sub, FitArgs& f, CLI::Option*& gamma, CLI::Option*& rff) {
  sub->add_option("--evr", f.evr, "explained-variance ratio target")->capture_default_str();
  gamma = sub->add_option("--gamma", f.gamma, "kernel bandwidth (default: median heuristic)");
  rff = sub->add_option("--rff-dim", f.rff_dim, "random Fourier feature count (default: 4 * input dim)");
  sub->add_option("--seed", f.seed, "RNG seed")->capture_default_str();
}

}  // namespace detail

/// Runs the CLI on `args` (program name excluded). Never throws.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace detail;
  CLI::App app{"Kernel-PCA out-of-distribution detection", "kpca-ood"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "kpca-ood 0.1.0");

  // synth
  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate synthetic InD/OoD feature files");
  s->add_option("--kind", synth.kind, "norm-shift | sphere-cluster | low-rank-gauss")->required();
  s->add_option("--n", synth.spec.n, "rows per set")->capture_default_str();
  s->add_option("--n-test", synth.spec.n_test, "extra held-out InD rows")->capture_default_str();
  s->add_option("--dim", synth.spec.dim, "feature dimension")->capture_default_str();
  s->add_option("--seed", synth.spec.seed, "RNG seed")->capture_default_str();
  s->add_option("--out", synth.out, "output prefix")->required();
  s->add_option("--norm-ind", synth.spec.norm_ind)->capture_default_str();
  s->add_option("--norm-ood", synth.spec.norm_ood)->capture_default_str();
  s->add_option("--norm-sigma", synth.spec.norm_sigma)->capture_default_str();
  s->add_option("--clusters", synth.spec.clusters)->capture_default_str();
  s->add_option("--spread", synth.spec.spread)->capture_default_str();
  s->add_option("--rank", synth.spec.rank)->capture_default_str();
  s->add_option("--noise", synth.spec.noise)->capture_default_str();
  s->add_option("--ood-scale", synth.spec.ood_scale, "0 selects sqrt(rank / dim)")->capture_default_str();

  // fit
  FitArgs fit;
  CLI::Option *fit_gamma = nullptr, *fit_rff = nullptr;
  auto* f = app.add_subcommand("fit", "fit a detector and save it");
  f->add_option("--train", fit.train, "training feature file")->required();
  f->add_option("--method", fit.method, "pca | cop | corp | colp | kcos | kgau")->required();
  f->add_option("--out", fit.out, "model output path")->required();
  f->add_flag("--keep-residual", fit.keep_residual, "also store the residual basis");
  add_fit_options(f, fit, fit_gamma, fit_rff);

  // score
  ScoreArgs score;
  auto* sc = app.add_subcommand("score", "score a feature file with a saved model");
  sc->add_option("--model", score.model)->required();
  sc->add_option("--features", score.features)->required();
  sc->add_option("--out", score.out, "scores CSV")->required();
  sc->add_option("--output", score.output, "score | error | reg-error")
      ->check(CLI::IsMember({"score", "error", "reg-error"}))
      ->capture_default_str();
  sc->add_flag("--skip-bad-rows", score.skip_bad_rows, "skip zero-norm rows instead of aborting");

  // eval
  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "FPR at TPR and AUROC from score files");
  e->add_option("--ind", ev.ind, "InD scores CSV")->required();
  e->add_option("--ood", ev.ood, "OoD scores CSV (repeatable)")->required();
  e->add_option("--tpr", ev.tpr, "TPR target")->capture_default_str();
  e->add_flag("--json-lines", ev.json_lines, "one JSON record per metric");

  // fuse
  FuseArgs fu;
  auto* fz = app.add_subcommand("fuse", "combine errors with a base score: (1 - e) * S");
  fz->add_option("--errors", fu.errors, "error CSV (repeatable)")->required();
  fz->add_option("--base", fu.base, "base score CSV (repeatable)")->required();
  fz->add_option("--out", fu.out, "fused CSV (repeatable)")->required();
  fz->add_flag("--normalize-errors", fu.normalize_errors, "min-max scale errors over all error files first");

  // sweep
  SweepArgs sw;
  CLI::Option *sw_gamma = nullptr, *sw_rff = nullptr;
  auto* swp = app.add_subcommand("sweep", "fit/score/eval over a parameter grid");
  swp->add_option("--param", sw.param, "evr | gamma | rff-dim")
      ->check(CLI::IsMember({"evr", "gamma", "rff-dim"}))
      ->required();
  swp->add_option("--values", sw.values, "comma-separated values")->delimiter(',')->required();
  swp->add_option("--method", sw.fit.method)->required();
  swp->add_option("--train", sw.fit.train)->required();
  swp->add_option("--ind-test", sw.ind_test, "held-out InD features")->required();
  swp->add_option("--ood-test", sw.ood_test, "OoD features (repeatable)")->required();
  swp->add_option("--tpr", sw.tpr)->capture_default_str();
  swp->add_flag("--json-lines", sw.json_lines);
  add_fit_options(swp, sw.fit, sw_gamma, sw_rff);

  // bench
  BenchArgs be;
  CLI::Option *be_gamma = nullptr, *be_rff = nullptr;
  auto* b = app.add_subcommand("bench", "per-query latency and store size");
  b->add_option("--train", be.fit.train)->required();
  b->add_option("--queries", be.queries, "number of timed queries")->capture_default_str();
  b->add_option("--methods", be.methods, "comma-separated: pca,cop,corp,colp,kcos,kgau,knn")
      ->delimiter(',')
      ->capture_default_str();
  b->add_option("--query-file", be.query_file, "query features (default: training rows)");
  b->add_option("--store-dir", be.store_dir, "write model/store files here and report their sizes");
  b->add_option("--k", be.k, "KNN neighbour rank")->capture_default_str();
  b->add_option("--warmup", be.warmup)->capture_default_str();
  b->add_option("--reps", be.reps)->capture_default_str();
  b->add_flag("--json-lines", be.json_lines);
  add_fit_options(b, be.fit, be_gamma, be_rff);

  // baseline
  BaselineArgs bl;
  auto* bs = app.add_subcommand("baseline", "msp / energy / knn baseline scores");
  bs->add_option("--kind", bl.kind, "msp | energy | knn")->check(CLI::IsMember({"msp", "energy", "knn"}))->required();
  bs->add_option("--logits", bl.logits, "logits file (msp, energy)");
  bs->add_option("--train", bl.train, "training features (knn)");
  bs->add_option("--features", bl.features, "query features (knn)");
  bs->add_option("--k", bl.k)->capture_default_str();
  bs->add_option("--out", bl.out, "scores CSV")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return exit_code(Errc::usage);
  }

  const auto mark = [](FitArgs& fa, CLI::Option* g, CLI::Option* r) {
    fa.gamma_set = g->count() > 0;
    fa.rff_dim_set = r->count() > 0;
  };
  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (f->parsed()) {
      mark(fit, fit_gamma, fit_rff);
      return cmd_fit(fit, out, err);
    }
    if (sc->parsed()) return cmd_score(score, out, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (fz->parsed()) return cmd_fuse(fu, out);
    if (swp->parsed()) {
      mark(sw.fit, sw_gamma, sw_rff);
      return cmd_sweep(sw, out, err);
    }
    if (b->parsed()) {
      mark(be.fit, be_gamma, be_rff);
      return cmd_bench(be, out, err);
    }
    if (bs->parsed()) return cmd_baseline(bl, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code(Errc::io);
  }
  return exit_code(Errc::usage);
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace kpca_ood::cli
