#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "msse/embed.hpp"
#include "msse/emotion.hpp"
#include "msse/error.hpp"
#include "msse/graph.hpp"
#include "msse/metrics.hpp"
#include "msse/mlp.hpp"
#include "msse/propagate.hpp"
#include "msse/rng.hpp"
#include "msse/stats.hpp"

namespace msse {

// ---------------------------------------------------------------------------
// Folds

template <typename Id>
struct FoldSpec {
  std::size_t index = 0;
  std::vector<Id> train, val, test;
};

/// Shuffles ids with the seed and cuts them into k contiguous blocks whose
/// sizes differ by at most one. Fold i tests on block i, validates on block
/// (i + 1) mod k and trains on the rest.
template <typename Id>
std::vector<FoldSpec<Id>> make_folds(std::span<const Id> ids, std::uint64_t seed, std::size_t k = 10) {
  if (k < 3) throw Error("make_folds: need at least 3 folds");
  if (ids.size() < k) {
    throw Error("make_folds: need at least " + std::to_string(k) + " ids, got " + std::to_string(ids.size()));
  }
  std::vector<Id> shuffled(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, "folds"));
  rng.shuffle(std::span<Id>(shuffled));

  std::vector<std::span<const Id>> blocks;
  const std::size_t base = shuffled.size() / k, extra = shuffled.size() % k;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    blocks.emplace_back(shuffled.data() + pos, len);
    pos += len;
  }
  std::vector<FoldSpec<Id>> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    auto& spec = folds[f];
    spec.index = f;
    const std::size_t v = (f + 1) % k;
    spec.test.assign(blocks[f].begin(), blocks[f].end());
    spec.val.assign(blocks[v].begin(), blocks[v].end());
    for (std::size_t b = 0; b < k; ++b) {
      if (b != f && b != v) spec.train.insert(spec.train.end(), blocks[b].begin(), blocks[b].end());
    }
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvConfig {
  MLPConfig mlp;
  PropagateOptions propagate;
  std::uint64_t seed = 1;
  std::size_t folds = 10;
  RegressionPooling pooling = RegressionPooling::Pooled;
  std::vector<std::string> languages;  // restrict the annotated pool; empty = all
  unsigned threads = 1;
};

struct FoldResult {
  std::size_t index = 0;
  ClassificationScores scores;
  RegressionScores regression;
  ClassificationScores baseline;  // per-dimension majority class of the train block
  TrainReport train;
  std::size_t unreachable = 0;
};

struct CvResult {
  std::vector<FoldResult> folds;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd summarize(std::span<const double> values) {
  return {stats::mean(values), stats::sample_sd(values)};
}

inline MeanSd summarize(const CvResult& r, const std::function<double(const FoldResult&)>& metric) {
  std::vector<double> v;
  for (const auto& f : r.folds) v.push_back(metric(f));
  return summarize(v);
}

inline std::vector<double> fold_values(const CvResult& r, const std::function<double(const FoldResult&)>& metric) {
  std::vector<double> v;
  for (const auto& f : r.folds) v.push_back(metric(f));
  return v;
}

/// Annotated LUs eligible for cross-validation, in index order.
inline std::vector<NodeIndex> annotated_pool(const WordNetGraph& g, std::span<const std::string> languages) {
  std::vector<NodeIndex> out;
  for (const auto& [lu, _] : g.annotations()) {
    if (languages.empty() || std::find(languages.begin(), languages.end(), g.node(lu).lang) != languages.end()) {
      out.push_back(lu);
    }
  }
  return out;
}

inline FoldResult evaluate_fold(const WordNetGraph& g, const EmbeddingTable& emb, const CvConfig& cfg,
                                const FoldSpec<NodeIndex>& fold) {
  auto pick = [&](const std::vector<NodeIndex>& ids) {
    Annotations a;
    for (auto lu : ids) a.emplace(lu, *g.annotation(lu));
    return a;
  };
  MLPConfig mlp = cfg.mlp;
  mlp.seed = derive_seed(cfg.mlp.seed, fold.index);
  const auto result = propagate(g, emb, mlp, pick(fold.train), pick(fold.val), fold.test, cfg.propagate);

  const double tau = cfg.propagate.threshold;
  std::vector<LabelSet> pred, gold, majority;
  std::vector<RawScores> raw;
  std::vector<EmotionVector> gold_raw;
  for (auto lu : fold.test) {
    const auto& p = result.predictions.at(lu);
    pred.push_back(p.labels);
    raw.push_back(p.raw);
    gold.push_back(binarize(*g.annotation(lu), tau));
    gold_raw.push_back(*g.annotation(lu));
  }
  LabelSet majority_labels;
  for (std::size_t j = 0; j < kEmotionDims; ++j) {
    std::size_t positive = 0;
    for (auto lu : fold.train) positive += (*g.annotation(lu))[j] >= tau;
    majority_labels[j] = 2 * positive > fold.train.size();
  }
  majority.assign(fold.test.size(), majority_labels);

  FoldResult fr;
  fr.index = fold.index;
  fr.scores = prf_scores(pred, gold);
  fr.baseline = prf_scores(majority, gold);
  fr.regression = pooled_r_r2(raw, gold_raw, cfg.pooling);
  fr.train = result.report;
  fr.unreachable = result.plan.unreachable.size();
  return fr;
}

/// k-fold propagation: train block as seed, val block for early stopping,
/// test block as targets. Folds are independent and may run on several
/// threads; results are ordered by fold index.
inline CvResult run_cv(const WordNetGraph& g, const EmbeddingTable& emb, const CvConfig& cfg) {
  const auto pool = annotated_pool(g, cfg.languages);
  const auto folds = make_folds<NodeIndex>(pool, cfg.seed, cfg.folds);
  CvResult out;
  out.folds.resize(folds.size());
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(folds.size())));
  if (threads == 1) {
    for (const auto& f : folds) out.folds[f.index] = evaluate_fold(g, emb, cfg, f);
    return out;
  }
  std::vector<std::exception_ptr> errors(folds.size());
  {
    std::vector<std::jthread> pool_threads;
    for (unsigned t = 0; t < threads; ++t) {
      pool_threads.emplace_back([&, t] {
        for (std::size_t f = t; f < folds.size(); f += threads) {
          try {
            out.folds[f] = evaluate_fold(g, emb, cfg, folds[f]);
          } catch (...) {
            errors[f] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Significance of the difference between two CV runs

struct NormalityCheck {
  std::optional<stats::ShapiroWilkResult> result;
  std::string error;  // set when the test could not run

  bool normal(double alpha) const { return result && result->p_value > alpha; }
};

struct Comparison {
  std::string metric = "micro_f1";
  double alpha = 0.05;
  std::vector<double> a, b;
  NormalityCheck normality_a, normality_b;
  std::optional<stats::TTestResult> t_test;
  std::string note;

  bool significant() const { return t_test && t_test->p_value < alpha; }
};

inline NormalityCheck check_normality(std::span<const double> sample) {
  NormalityCheck c;
  try {
    c.result = stats::shapiro_wilk(sample);
  } catch (const Error& e) {
    c.error = e.what();
  }
  return c;
}

/// Shapiro-Wilk on each per-fold sample, then the paired t-test. Identical
/// samples (zero-variance differences) are reported, not raised.
inline Comparison compare_runs(std::span<const double> a, std::span<const double> b, std::string metric = "micro_f1",
                               double alpha = 0.05) {
  Comparison c;
  c.metric = std::move(metric);
  c.alpha = alpha;
  c.a.assign(a.begin(), a.end());
  c.b.assign(b.begin(), b.end());
  c.normality_a = check_normality(a);
  c.normality_b = check_normality(b);
  try {
    c.t_test = stats::paired_t_test(a, b);
  } catch (const Error& e) {
    c.note = std::string(e.what()).find("zero variance") != std::string::npos ? "identical samples" : e.what();
  }
  return c;
}

inline double micro_f1(const FoldResult& f) { return f.scores.micro.f1; }
inline double macro_f1(const FoldResult& f) { return f.scores.macro.f1; }

inline Comparison compare_runs(const CvResult& a, const CvResult& b, double alpha = 0.05) {
  return compare_runs(fold_values(a, micro_f1), fold_values(b, micro_f1), "micro_f1", alpha);
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline nlohmann::json mean_sd_json(MeanSd m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

inline nlohmann::json prf_json(const CvResult& r, const std::function<const PRF&(const FoldResult&)>& get) {
  return {{"precision", mean_sd_json(summarize(r, [&](const FoldResult& f) { return get(f).precision; }))},
          {"recall", mean_sd_json(summarize(r, [&](const FoldResult& f) { return get(f).recall; }))},
          {"f1", mean_sd_json(summarize(r, [&](const FoldResult& f) { return get(f).f1; }))}};
}

}  // namespace detail

/// Metrics document: one key per annotation dimension plus micro / macro /
/// weighted averages, regression scores, the majority baseline and per-fold
/// rows. Every aggregate carries the mean and sample sd across folds.
inline nlohmann::json metrics_json(const CvResult& r) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t j = 0; j < kEmotionDims; ++j) {
    auto entry = detail::prf_json(r, [j](const FoldResult& f) -> const PRF& { return f.scores.per_dim[j]; });
    entry["support"] = detail::mean_sd_json(summarize(r, [j](const FoldResult& f) { return double(f.scores.support[j]); }));
    doc[std::string(kEmotionNames[j])] = std::move(entry);
  }
  doc["micro"] = detail::prf_json(r, [](const FoldResult& f) -> const PRF& { return f.scores.micro; });
  doc["macro"] = detail::prf_json(r, [](const FoldResult& f) -> const PRF& { return f.scores.macro; });
  doc["weighted"] = detail::prf_json(r, [](const FoldResult& f) -> const PRF& { return f.scores.weighted; });
  doc["r"] = detail::mean_sd_json(summarize(r, [](const FoldResult& f) { return f.regression.r; }));
  doc["r2"] = detail::mean_sd_json(summarize(r, [](const FoldResult& f) { return f.regression.r2; }));
  doc["baseline_micro"] = detail::prf_json(r, [](const FoldResult& f) -> const PRF& { return f.baseline.micro; });
  doc["baseline_macro"] = detail::prf_json(r, [](const FoldResult& f) -> const PRF& { return f.baseline.macro; });
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.index},
                     {"micro_f1", f.scores.micro.f1},
                     {"macro_f1", f.scores.macro.f1},
                     {"weighted_f1", f.scores.weighted.f1},
                     {"r", f.regression.r},
                     {"r2", f.regression.r2},
                     {"baseline_macro_f1", f.baseline.macro.f1},
                     {"epochs", f.train.epochs_run},
                     {"best_epoch", f.train.best_epoch},
                     {"best_val_loss", f.train.best_val_loss},
                     {"unreachable", f.unreachable}});
  }
  doc["folds"] = std::move(folds);
  return doc;
}

inline std::vector<double> fold_series(const nlohmann::json& metrics, const std::string& key) {
  std::vector<double> v;
  if (!metrics.contains("folds")) throw Error("metrics document has no per-fold rows");
  for (const auto& f : metrics["folds"]) {
    if (!f.contains(key)) throw Error("per-fold rows have no '" + key + "'");
    v.push_back(f[key].get<double>());
  }
  return v;
}

inline void write_metrics_table(const CvResult& r, std::ostream& out) {
  char line[160];
  auto row = [&](const std::string& name, const std::function<const PRF&(const FoldResult&)>& get,
                 std::optional<MeanSd> support) {
    const auto p = summarize(r, [&](const FoldResult& f) { return get(f).precision; });
    const auto rc = summarize(r, [&](const FoldResult& f) { return get(f).recall; });
    const auto f1 = summarize(r, [&](const FoldResult& f) { return get(f).f1; });
    std::snprintf(line, sizeof line, "%-20s %6.3f ± %5.3f  %6.3f ± %5.3f  %6.3f ± %5.3f", name.c_str(), p.mean, p.sd,
                  rc.mean, rc.sd, f1.mean, f1.sd);
    out << line;
    if (support) {
      std::snprintf(line, sizeof line, "  %7.1f", support->mean);
      out << line;
    }
    out << '\n';
  };
  std::snprintf(line, sizeof line, "%-20s %14s  %14s  %14s  %7s\n", "dimension", "P", "R", "F1", "support");
  out << line;
  for (std::size_t j = 0; j < kEmotionDims; ++j) {
    row(std::string(kEmotionNames[j]), [j](const FoldResult& f) -> const PRF& { return f.scores.per_dim[j]; },
        summarize(r, [j](const FoldResult& f) { return double(f.scores.support[j]); }));
  }
  row("micro", [](const FoldResult& f) -> const PRF& { return f.scores.micro; }, std::nullopt);
  row("macro", [](const FoldResult& f) -> const PRF& { return f.scores.macro; }, std::nullopt);
  row("weighted", [](const FoldResult& f) -> const PRF& { return f.scores.weighted; }, std::nullopt);
  row("baseline macro", [](const FoldResult& f) -> const PRF& { return f.baseline.macro; }, std::nullopt);
  const auto rr = summarize(r, [](const FoldResult& f) { return f.regression.r; });
  const auto r2 = summarize(r, [](const FoldResult& f) { return f.regression.r2; });
  std::snprintf(line, sizeof line, "R  = %.3f ± %.3f\nR² = %.3f ± %.3f\n", rr.mean, rr.sd, r2.mean, r2.sd);
  out << line;
}

inline nlohmann::json comparison_json(const Comparison& c) {
  auto normality = [&](const NormalityCheck& n) {
    nlohmann::json j = nlohmann::json::object();
    if (n.result) {
      j["w"] = n.result->w;
      j["p_value"] = n.result->p_value;
      j["normal"] = n.normal(c.alpha);
    } else {
      j["error"] = n.error;
    }
    return j;
  };
  nlohmann::json j = {{"metric", c.metric},
                      {"alpha", c.alpha},
                      {"a", c.a},
                      {"b", c.b},
                      {"mean_a", stats::mean(c.a)},
                      {"mean_b", stats::mean(c.b)},
                      {"shapiro_wilk_a", normality(c.normality_a)},
                      {"shapiro_wilk_b", normality(c.normality_b)}};
  if (c.t_test) {
    j["t_test"] = {{"t", c.t_test->t}, {"df", c.t_test->df}, {"p_value", c.t_test->p_value},
                   {"significant", c.significant()}};
  } else {
    j["t_test"] = {{"note", c.note}};
  }
  return j;
}

}  // namespace msse
