#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "kpca_ood/cli.hpp"

using namespace kpca_ood;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kpca_ood_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  void write_scores(const std::string& name, const std::vector<double>& v) {
    save_scores(path(name), sequential_scores(v));
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoSubcommandIsUsage) { EXPECT_EQ(run({}).code, 1); }

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run({"--help"}).code, 0); }

TEST_F(Cli, SynthShapesAndDeterminism) {
  ASSERT_EQ(run({"synth", "--kind", "norm-shift", "--n", "5000", "--dim", "64", "--seed", "1", "--out", path("d1")}).code, 0);
  const std::string a = read_file(path("d1.ind.oodf"));
  const FeatureMatrix ind = decode_features(a), ood = load_features(path("d1.ood.oodf"));
  EXPECT_EQ(ind.rows(), 5000u);
  EXPECT_EQ(ind.cols(), 64u);
  EXPECT_EQ(ood.rows(), 5000u);
  EXPECT_FALSE(fs::exists(path("d1.test.oodf")));
  ASSERT_EQ(run({"synth", "--kind", "norm-shift", "--n", "5000", "--dim", "64", "--seed", "1", "--out", path("d2")}).code, 0);
  EXPECT_EQ(read_file(path("d2.ind.oodf")), a);
  EXPECT_EQ(read_file(path("d2.ood.oodf")), read_file(path("d1.ood.oodf")));
}

TEST_F(Cli, SynthRejectsBadFlags) {
  EXPECT_EQ(run({"synth", "--kind", "norm-shift", "--dim", "1", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"synth", "--kind", "bogus", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"synth", "--kind", "norm-shift", "--n", "abc", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"synth", "--kind", "norm-shift"}).code, 1);
}

TEST_F(Cli, FitRecoversPlantedRank) {
  ASSERT_EQ(run({"synth", "--kind", "low-rank-gauss", "--n", "1000", "--dim", "16", "--rank", "3", "--out", path("lr")}).code, 0);
  const Result r = run({"fit", "--train", path("lr.ind.oodf"), "--method", "pca", "--evr", "0.99", "--out", path("m")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\nq 3\n"), std::string::npos) << r.out;
  EXPECT_EQ(std::get<DetectorModel>(load_model(path("m")).model).q, 3u);
}

TEST_F(Cli, FitDefaultRffDim) {
  ASSERT_EQ(run({"synth", "--kind", "sphere-cluster", "--n", "300", "--dim", "12", "--out", path("s")}).code, 0);
  const Result r = run({"fit", "--train", path("s.ind.oodf"), "--method", "corp", "--out", path("m")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rff_dim 48"), std::string::npos);
  const auto saved = load_model(path("m"));
  EXPECT_EQ(saved.method, Method::corp);
  EXPECT_EQ(std::get<DetectorModel>(saved.model).map.rff()->features(), 48u);
}

TEST_F(Cli, FitErrors) {
  EXPECT_EQ(run({"fit", "--method", "pca", "--out", path("m")}).code, 1);
  EXPECT_EQ(run({"fit", "--train", path("missing.oodf"), "--method", "pca", "--out", path("m")}).code, 2);
  ASSERT_EQ(run({"synth", "--kind", "sphere-cluster", "--n", "50", "--dim", "4", "--out", path("s")}).code, 0);
  EXPECT_EQ(run({"fit", "--train", path("s.ind.oodf"), "--method", "nope", "--out", path("m")}).code, 1);
  EXPECT_EQ(run({"fit", "--train", path("s.ind.oodf"), "--method", "pca", "--evr", "1.5", "--out", path("m")}).code, 1);
  EXPECT_EQ(run({"fit", "--train", path("s.ind.oodf"), "--method", "corp", "--gamma", "-1", "--out", path("m")}).code, 1);
  EXPECT_EQ(run({"fit", "--train", path("s.ind.oodf"), "--method", "kcos", "--evr", "1.0", "--out", path("m")}).code, 1);
  save_features(path("same.oodf"), FeatureMatrix::from_rows({{1, 2}, {1, 2}, {1, 2}}));
  const Result r = run({"fit", "--train", path("same.oodf"), "--method", "pca", "--out", path("m")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("DegenerateSpectrum"), std::string::npos);
}

TEST_F(Cli, ScoreFullRankTrainingIsZero) {
  ASSERT_EQ(run({"synth", "--kind", "norm-shift", "--n", "400", "--dim", "8", "--out", path("d")}).code, 0);
  ASSERT_EQ(run({"fit", "--train", path("d.ind.oodf"), "--method", "pca", "--evr", "1.0", "--out", path("m")}).code, 0);
  ASSERT_EQ(run({"score", "--model", path("m"), "--features", path("d.ind.oodf"), "--out", path("s.csv")}).code, 0);
  const ScoreTable t = load_scores(path("s.csv"));
  ASSERT_EQ(t.score.size(), 400u);
  for (double v : t.score) EXPECT_LE(std::abs(v), 1e-6);
}

TEST_F(Cli, ScoreDeterministicAndMatchesInMemory) {
  ASSERT_EQ(run({"synth", "--kind", "sphere-cluster", "--n", "500", "--dim", "8", "--seed", "3", "--out", path("d")}).code, 0);
  ASSERT_EQ(run({"fit", "--train", path("d.ind.oodf"), "--method", "corp", "--seed", "4", "--out", path("m")}).code, 0);
  ASSERT_EQ(run({"score", "--model", path("m"), "--features", path("d.ood.oodf"), "--out", path("a.csv")}).code, 0);
  ASSERT_EQ(run({"score", "--model", path("m"), "--features", path("d.ood.oodf"), "--out", path("b.csv")}).code, 0);
  EXPECT_EQ(read_file(path("a.csv")), read_file(path("b.csv")));

  FitConfig cfg;
  cfg.method = Method::corp;
  cfg.seed = 4;
  const FittedModel direct = fit_method(load_features(path("d.ind.oodf")), cfg);
  EXPECT_EQ(load_scores(path("a.csv")).score, scores_of(direct.model, load_features(path("d.ood.oodf"))));
}

TEST_F(Cli, ScoreZeroRows) {
  save_features(path("train.oodf"), FeatureMatrix::from_rows({{1, 0}, {0, 1}, {1, 1}, {-1, 0.5}}));
  save_features(path("q.oodf"), FeatureMatrix::from_rows({{1, 2}, {0, 0}, {3, 1}}));
  ASSERT_EQ(run({"fit", "--train", path("train.oodf"), "--method", "cop", "--out", path("m")}).code, 0);
  const Result bad = run({"score", "--model", path("m"), "--features", path("q.oodf"), "--out", path("s.csv")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("ZeroVector"), std::string::npos);
  EXPECT_NE(bad.err.find("row 1"), std::string::npos);
  const Result ok =
      run({"score", "--model", path("m"), "--features", path("q.oodf"), "--out", path("s.csv"), "--skip-bad-rows"});
  ASSERT_EQ(ok.code, 0);
  EXPECT_NE(ok.err.find("row 1"), std::string::npos);
  EXPECT_EQ(load_scores(path("s.csv")).index, (std::vector<std::size_t>{0, 2}));
}

TEST_F(Cli, ScoreOutputsAndDimMismatch) {
  save_features(path("train.oodf"), FeatureMatrix::from_rows({{1, 0}, {-1, 0}, {0, 0.1}, {0, -0.1}}));
  save_features(path("q.oodf"), FeatureMatrix::from_rows({{3, 4}}));
  save_features(path("q3.oodf"), FeatureMatrix::from_rows({{3, 4, 5}}));
  ASSERT_EQ(run({"fit", "--train", path("train.oodf"), "--method", "pca", "--out", path("m")}).code, 0);
  ASSERT_EQ(run({"score", "--model", path("m"), "--features", path("q.oodf"), "--out", path("e.csv"), "--output", "error"}).code, 0);
  EXPECT_NEAR(load_scores(path("e.csv")).score[0], 4.0, 1e-6);
  ASSERT_EQ(run({"score", "--model", path("m"), "--features", path("q.oodf"), "--out", path("r.csv"), "--output", "reg-error"}).code, 0);
  EXPECT_NEAR(load_scores(path("r.csv")).score[0], 0.8, 1e-6);
  EXPECT_EQ(run({"score", "--model", path("m"), "--features", path("q3.oodf"), "--out", path("x.csv")}).code, 2);
  EXPECT_EQ(run({"score", "--model", path("m"), "--features", path("q.oodf"), "--out", path("x.csv"), "--output", "foo"}).code, 1);
}

TEST_F(Cli, EvalExamples) {
  write_scores("hi.csv", {2, 3, 4, 5});
  write_scores("lo.csv", {-1, 0, 1});
  Result r = run({"eval", "--ind", path("hi.csv"), "--ood", path("lo.csv"), "--json-lines"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["metric"] == "auroc") {
      EXPECT_EQ(j["value"].get<double>(), 1.0);
    }
    if (j["metric"] == "fpr_at_tpr") {
      EXPECT_EQ(j["value"].get<double>(), 0.0);
    }
  }
  r = run({"eval", "--ind", path("lo.csv"), "--ood", path("hi.csv"), "--json-lines"});
  EXPECT_NE(r.out.find("\"metric\":\"auroc\",\"value\":0.0"), std::string::npos) << r.out;

  std::vector<double> ind;
  for (int i = 1; i <= 100; ++i) ind.push_back(i);
  write_scores("ind.csv", ind);
  write_scores("ood.csv", {0.5, 5.5, 200});
  r = run({"eval", "--ind", path("ind.csv"), "--ood", path("ood.csv"), "--ood", path("lo.csv"), "--json-lines"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("{\"dataset\":\"" + path("ood.csv") + "\",\"metric\":\"fpr_at_tpr\",\"value\":0.3333333333333333}"),
            std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("\"dataset\":\"mean\""), std::string::npos);
}

TEST_F(Cli, EvalEmptyScores) {
  write_scores("a.csv", {1.0});
  write_file(path("empty.csv"), "index,score\n");
  const Result r = run({"eval", "--ind", path("a.csv"), "--ood", path("empty.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("EmptyScores"), std::string::npos);
}

TEST_F(Cli, FuseExamples) {
  write_scores("e.csv", {0.8, 0.0});
  write_scores("b.csv", {std::numbers::ln2, 3.25});
  ASSERT_EQ(run({"fuse", "--errors", path("e.csv"), "--base", path("b.csv"), "--out", path("f.csv")}).code, 0);
  const ScoreTable f = load_scores(path("f.csv"));
  EXPECT_NEAR(f.score[0], 0.13863, 1e-5);
  EXPECT_EQ(f.score[1], 3.25);

  write_scores("short.csv", {0.1});
  Result r = run({"fuse", "--errors", path("short.csv"), "--base", path("b.csv"), "--out", path("f.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("IndexMismatch"), std::string::npos);
  write_file(path("shifted.csv"), "index,score\n1,0.1\n2,0.2\n");
  r = run({"fuse", "--errors", path("shifted.csv"), "--base", path("b.csv"), "--out", path("f.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run({"fuse", "--errors", path("e.csv"), "--base", path("b.csv")}).code, 1);
}

TEST_F(Cli, FuseNormalizesJointly) {
  write_scores("e1.csv", {2.0, 4.0});
  write_scores("e2.csv", {6.0});
  write_scores("b1.csv", {1.0, 1.0});
  write_scores("b2.csv", {1.0});
  ASSERT_EQ(run({"fuse", "--normalize-errors", "--errors", path("e1.csv"), "--base", path("b1.csv"), "--out",
                 path("f1.csv"), "--errors", path("e2.csv"), "--base", path("b2.csv"), "--out", path("f2.csv")})
                .code,
            0);
  EXPECT_EQ(load_scores(path("f1.csv")).score, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(load_scores(path("f2.csv")).score, (std::vector<double>{0.0}));
}

TEST_F(Cli, SweepRowsAndFailures) {
  ASSERT_EQ(run({"synth", "--kind", "sphere-cluster", "--n", "300", "--n-test", "300", "--dim", "8", "--out", path("d")}).code, 0);
  const std::vector<std::string> base{"sweep", "--method", "cop", "--train", path("d.ind.oodf"), "--ind-test",
                                      path("d.test.oodf"), "--ood-test", path("d.ood.oodf")};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  Result r = with({"--param", "evr", "--values", "0.5,0.9,0.99", "--json-lines"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  r = with({"--param", "evr", "--values", "0.5,1.5,0.9", "--json-lines"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
  EXPECT_EQ(with({"--param", "evr", "--values", ""}).code, 1);
  EXPECT_EQ(with({"--param", "gamma", "--values", "1"}).code, 1);
  EXPECT_EQ(with({"--param", "bogus", "--values", "1"}).code, 1);
}

TEST_F(Cli, BenchReportsSizes) {
  ASSERT_EQ(run({"synth", "--kind", "sphere-cluster", "--n", "200", "--dim", "8", "--out", path("d")}).code, 0);
  const Result r = run({"bench", "--train", path("d.ind.oodf"), "--queries", "20", "--methods", "cop,corp,knn",
                        "--json-lines", "--store-dir", dir_.string(), "--reps", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::map<std::string, double> store;
  int latency = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["metric"] == "store_bytes") store[j["method"]] = j["value"].get<double>();
    if (j["metric"] == "mean_us") ++latency;
  }
  EXPECT_EQ(latency, 3);
  EXPECT_EQ(store.at("knn"), double(fs::file_size(path("knn.store"))));
  EXPECT_EQ(store.at("knn"), 13.0 + 200 * 8 * 4);
  EXPECT_EQ(store.at("corp"), double(fs::file_size(path("corp.store"))));
  EXPECT_EQ(run({"bench", "--train", path("d.ind.oodf"), "--methods", "cop,mahalanobis"}).code, 1);
}

TEST_F(Cli, Baselines) {
  save_features(path("logits.oodf"), FeatureMatrix::from_rows({{0, 0}, {1, 2}}));
  ASSERT_EQ(run({"baseline", "--kind", "energy", "--logits", path("logits.oodf"), "--out", path("e.csv")}).code, 0);
  EXPECT_NEAR(load_scores(path("e.csv")).score[0], std::numbers::ln2, 1e-15);
  ASSERT_EQ(run({"baseline", "--kind", "msp", "--logits", path("logits.oodf"), "--out", path("m.csv")}).code, 0);
  EXPECT_EQ(load_scores(path("m.csv")).score[0], 0.5);
  save_features(path("t.oodf"), FeatureMatrix::from_rows({{1, 0}, {0, 1}}));
  save_features(path("q.oodf"), FeatureMatrix::from_rows({{0.6, 0.8}}));
  ASSERT_EQ(run({"baseline", "--kind", "knn", "--train", path("t.oodf"), "--features", path("q.oodf"), "--out", path("k.csv")}).code, 0);
  EXPECT_NEAR(load_scores(path("k.csv")).score[0], -std::sqrt(0.4), 1e-7);
  EXPECT_EQ(run({"baseline", "--kind", "knn", "--train", path("t.oodf"), "--features", path("q.oodf"), "--k", "3",
                 "--out", path("k.csv")})
                .code,
            1);
  EXPECT_EQ(run({"baseline", "--kind", "msp", "--out", path("x.csv")}).code, 1);
}
