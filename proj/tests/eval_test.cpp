#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "msse/corpus.hpp"
#include "msse/embed.hpp"
#include "msse/eval.hpp"
#include "msse/synth.hpp"

using namespace msse;

namespace {

std::vector<int> iota_ids(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 1000);
  return v;
}

}  // namespace

TEST(MakeFolds, HundredIdsSplit80_10_10) {
  const auto ids = iota_ids(100);
  const auto folds = make_folds<int>(ids, 7);
  ASSERT_EQ(folds.size(), 10u);
  for (const auto& f : folds) {
    EXPECT_EQ(f.train.size(), 80u);
    EXPECT_EQ(f.val.size(), 10u);
    EXPECT_EQ(f.test.size(), 10u);
  }
}

TEST(MakeFolds, PartitionProperties) {
  for (int n : {10, 11, 19, 57, 100, 243}) {
    const auto ids = iota_ids(n);
    const auto folds = make_folds<int>(ids, 3);
    std::multiset<int> tests;
    const std::size_t lo = n / 10, hi = (n + 9) / 10;
    for (const auto& f : folds) {
      std::set<int> all;
      all.insert(f.train.begin(), f.train.end());
      all.insert(f.val.begin(), f.val.end());
      all.insert(f.test.begin(), f.test.end());
      EXPECT_EQ(all.size(), std::size_t(n)) << "roles overlap or miss ids, n=" << n;
      EXPECT_EQ(f.train.size() + f.val.size() + f.test.size(), std::size_t(n));
      EXPECT_GE(f.test.size(), lo);
      EXPECT_LE(f.test.size(), hi);
      EXPECT_GE(f.val.size(), lo);
      EXPECT_LE(f.val.size(), hi);
      tests.insert(f.test.begin(), f.test.end());
    }
    EXPECT_EQ(tests, std::multiset<int>(ids.begin(), ids.end())) << "n=" << n;
  }
}

TEST(MakeFolds, DeterministicPerSeed) {
  const auto ids = iota_ids(50);
  const auto a = make_folds<int>(ids, 1), b = make_folds<int>(ids, 1), c = make_folds<int>(ids, 2);
  for (std::size_t f = 0; f < 10; ++f) {
    EXPECT_EQ(a[f].test, b[f].test);
    EXPECT_EQ(a[f].train, b[f].train);
  }
  bool differs = false;
  for (std::size_t f = 0; f < 10; ++f) differs |= a[f].test != c[f].test;
  EXPECT_TRUE(differs);
}

TEST(MakeFolds, ValidationIsNextBlock) {
  const auto folds = make_folds<int>(iota_ids(30), 4);
  for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(folds[f].val, folds[(f + 1) % 10].test);
}

TEST(MakeFolds, Errors) {
  EXPECT_THROW(make_folds<int>(iota_ids(9), 1), Error);
  EXPECT_THROW(make_folds<int>(iota_ids(9), 1, 2), Error);
  EXPECT_EQ(make_folds<int>(iota_ids(9), 1, 3).size(), 3u);
}

TEST(Summaries, MeanIsArithmeticMean) {
  CvResult r;
  const std::vector<double> f1{0.5, 0.6, 0.7, 0.62};
  for (std::size_t i = 0; i < f1.size(); ++i) {
    FoldResult f;
    f.index = i;
    f.scores.micro.f1 = f1[i];
    r.folds.push_back(f);
  }
  const auto s = summarize(r, micro_f1);
  EXPECT_DOUBLE_EQ(s.mean, (0.5 + 0.6 + 0.7 + 0.62) / 4);
  EXPECT_NEAR(s.sd, stats::sample_sd(f1), 1e-15);
}

TEST(CompareRuns, IdenticalSamplesReported) {
  const std::vector<double> a{0.61, 0.64, 0.60, 0.66, 0.63, 0.65, 0.62, 0.60, 0.67, 0.64};
  const auto c = compare_runs(a, a);
  EXPECT_FALSE(c.t_test.has_value());
  EXPECT_EQ(c.note, "identical samples");
  EXPECT_FALSE(c.significant());
  ASSERT_TRUE(c.normality_a.result.has_value());
  const auto j = comparison_json(c);
  EXPECT_EQ(j["t_test"]["note"], "identical samples");
}

TEST(CompareRuns, ReportsNormalityThenTTest) {
  const std::vector<double> a{0.61, 0.64, 0.60, 0.66, 0.63, 0.65, 0.62, 0.60, 0.67, 0.64};
  const std::vector<double> b{0.55, 0.60, 0.58, 0.59, 0.57, 0.61, 0.56, 0.55, 0.62, 0.60};
  const auto c = compare_runs(a, b);
  ASSERT_TRUE(c.t_test.has_value());
  EXPECT_EQ(c.t_test->df, 9.0);
  EXPECT_TRUE(c.significant());
  const auto j = comparison_json(c);
  EXPECT_TRUE(j.contains("shapiro_wilk_a"));
  EXPECT_TRUE(j["shapiro_wilk_b"].contains("p_value"));
  EXPECT_TRUE(j["t_test"]["significant"].get<bool>());
}

class SmallCv : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthConfig sc;
    sc.label_noise = 0.1;
    sc.seed = 8;
    graph_ = new WordNetGraph(generate_synth(sc).graph);
    EmbedConfig ec;
    ec.dim = 24;
    ec.epochs = 3;
    emb_ = new EmbeddingTable(train_embeddings(generate_corpus(*graph_, {.walks = 3000, .length = 20, .seed = 1}), ec));
  }
  static void TearDownTestSuite() {
    delete graph_;
    delete emb_;
  }
  static CvConfig config() {
    CvConfig cv;
    cv.mlp = MLPConfig::base(24);
    cv.mlp.learning_rate = 0.01;
    cv.mlp.max_epochs = 200;
    cv.mlp.patience = 10;
    cv.seed = 5;
    return cv;
  }
  static WordNetGraph* graph_;
  static EmbeddingTable* emb_;
};

WordNetGraph* SmallCv::graph_ = nullptr;
EmbeddingTable* SmallCv::emb_ = nullptr;

TEST_F(SmallCv, RunsTenFoldsAndReports) {
  const auto r = run_cv(*graph_, *emb_, config());
  ASSERT_EQ(r.folds.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& f = r.folds[i];
    EXPECT_EQ(f.index, i);
    EXPECT_GE(f.scores.micro.f1, 0.0);
    EXPECT_LE(f.scores.micro.f1, 1.0);
    EXPECT_LE(f.regression.r2, 1.0);
    EXPECT_GE(f.regression.r, -1.0);
    EXPECT_GT(f.train.epochs_run, 0u);
  }
  const auto doc = metrics_json(r);
  for (auto name : kEmotionNames) {
    ASSERT_TRUE(doc.contains(std::string(name))) << name;
    EXPECT_TRUE(doc[std::string(name)]["f1"].contains("mean"));
    EXPECT_TRUE(doc[std::string(name)]["f1"].contains("sd"));
  }
  for (const char* key : {"micro", "macro", "weighted"}) EXPECT_TRUE(doc[key]["f1"].contains("sd"));
  EXPECT_EQ(fold_series(doc, "micro_f1"), fold_values(r, micro_f1));
  EXPECT_DOUBLE_EQ(doc["micro"]["f1"]["mean"].get<double>(), stats::mean(fold_values(r, micro_f1)));

  std::ostringstream table;
  write_metrics_table(r, table);
  EXPECT_NE(table.str().find("val_knowledge"), std::string::npos);
  EXPECT_NE(table.str().find("micro"), std::string::npos);
}

TEST_F(SmallCv, DeterministicAndThreadIndependent) {
  auto cfg = config();
  cfg.mlp.max_epochs = 30;
  const auto a = metrics_json(run_cv(*graph_, *emb_, cfg));
  cfg.threads = 3;
  const auto b = metrics_json(run_cv(*graph_, *emb_, cfg));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST_F(SmallCv, IdenticalRunsCompareAsIdentical) {
  auto cfg = config();
  cfg.mlp.max_epochs = 30;
  const auto a = run_cv(*graph_, *emb_, cfg);
  const auto b = run_cv(*graph_, *emb_, cfg);
  EXPECT_EQ(compare_runs(a, b).note, "identical samples");
}

TEST_F(SmallCv, LanguageRestrictedPool) {
  auto cfg = config();
  cfg.mlp.max_epochs = 10;
  cfg.languages = {"en"};
  const auto r = run_cv(*graph_, *emb_, cfg);
  EXPECT_EQ(r.folds.size(), 10u);
  const auto pool = annotated_pool(*graph_, cfg.languages);
  EXPECT_EQ(pool.size(), 120u);
  for (auto lu : pool) EXPECT_EQ(graph_->node(lu).lang, "en");
}
