#include <gtest/gtest.h>

#include <deque>
#include <limits>
#include <sstream>

#include "msse/embed.hpp"
#include "msse/metrics.hpp"
#include "msse/propagate.hpp"
#include "msse/rng.hpp"
#include "msse/synth.hpp"
#include "test_support.hpp"

using namespace msse;
using namespace msse::test;

namespace {

/// Random d-dimensional vectors for every node token of the graph.
EmbeddingTable random_embeddings(const WordNetGraph& g, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream text;
  text << g.node_count() << ' ' << dim << '\n';
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    text << token_of(g.node(i));
    for (std::size_t k = 0; k < dim; ++k) text << ' ' << rng.uniform() * 2.0 - 1.0;
    text << '\n';
  }
  std::istringstream in(text.str());
  return read_embeddings(in);
}

EmotionVector label(double level) {
  EmotionVector v;
  for (std::size_t j = 0; j < kEmotionDims; ++j) v[j] = (j % 3 == 0) ? level : 1.0 - level;
  return v;
}

MLPConfig small_base() {
  auto c = MLPConfig::base(8);
  c.max_epochs = 20;
  c.patience = 5;
  c.learning_rate = 0.01;
  return c;
}

/// LU1 - S1 - S2 - LU2, LU3 hanging off S1 too; LU4 isolated; LU5 linked to LU1.
struct Chain {
  WordNetGraph g;
  NodeIndex lu1, lu2, lu3, lu4, lu5;
  Chain() {
    GraphBuilder b;
    const auto s1 = b.add_node(synset(1, "pl")), s2 = b.add_node(synset(2, "pl"));
    const auto a = b.add_node(lexical_unit(1, "pl")), c = b.add_node(lexical_unit(2, "pl"));
    const auto d = b.add_node(lexical_unit(3, "pl")), e = b.add_node(lexical_unit(4, "pl"));
    const auto f = b.add_node(lexical_unit(5, "pl"));
    b.add_edge(s1, a, kMembership);
    b.add_edge(s1, s2, kHyponymy);
    b.add_edge(s2, c, kMembership);
    b.add_edge(s1, d, kMembership);
    b.add_edge(a, f, {"antonymy", RelationCategory::LL, false});
    g = std::move(b).build();
    lu1 = a, lu2 = c, lu3 = d, lu4 = e, lu5 = f;
  }
};

}  // namespace

TEST(BuildPlan, ChainDistances) {
  const Chain c;
  const std::vector<NodeIndex> seed{c.lu1};
  const std::vector<NodeIndex> targets{c.lu2, c.lu3, c.lu4, c.lu5};
  const auto plan = build_plan(c.g, seed, targets);
  ASSERT_EQ(plan.waves.size(), 3u);
  EXPECT_EQ(plan.waves[0].distance, 1u);
  EXPECT_EQ(plan.waves[0].members, std::vector<NodeIndex>{c.lu5});
  EXPECT_EQ(plan.waves[1].distance, 2u);
  EXPECT_EQ(plan.waves[1].members, std::vector<NodeIndex>{c.lu3});
  EXPECT_EQ(plan.waves[2].distance, 3u);
  EXPECT_EQ(plan.waves[2].members, std::vector<NodeIndex>{c.lu2});
  EXPECT_EQ(plan.unreachable, std::vector<NodeIndex>{c.lu4});
}

TEST(BuildPlan, SeedSynsetTargetIsWaveTwo) {
  const Chain c;
  const std::vector<NodeIndex> seed{c.lu1}, targets{c.lu3};
  const auto plan = build_plan(c.g, seed, targets);
  ASSERT_EQ(plan.waves.size(), 1u);
  EXPECT_EQ(plan.waves[0].distance, 2u);
}

TEST(BuildPlan, Errors) {
  const Chain c;
  const std::vector<NodeIndex> seed{c.lu1};
  EXPECT_THROW(build_plan(c.g, seed, seed), Error);
  const std::vector<NodeIndex> synset_target{0};
  EXPECT_THROW(build_plan(c.g, seed, synset_target), Error);
  EXPECT_THROW(build_plan(c.g, synset_target, seed), Error);
}

TEST(BuildPlan, MatchesSingleSourceBfsOracle) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 20 + rng.below(181);
    GraphBuilder b;
    std::vector<NodeIndex> lus;
    std::vector<bool> is_lu(n);
    for (std::size_t i = 0; i < n; ++i) {
      is_lu[i] = rng.bernoulli(0.6);
      if (is_lu[i]) {
        lus.push_back(b.add_node(lexical_unit(i + 1, "pl")));
      } else {
        b.add_node(synset(i + 1, "pl"));
      }
    }
    const RelationCategory cats[2][2] = {{RelationCategory::SS, RelationCategory::SL},
                                         {RelationCategory::LS, RelationCategory::LL}};
    const std::size_t m = rng.below(2 * n);
    for (std::size_t e = 0; e < m; ++e) {
      const auto u = static_cast<NodeIndex>(rng.below(n)), v = static_cast<NodeIndex>(rng.below(n));
      if (u != v) b.add_edge(u, v, {"r" + std::to_string(e), cats[is_lu[u]][is_lu[v]], false});
    }
    const auto g = std::move(b).build();
    if (lus.size() < 4) continue;

    std::vector<NodeIndex> seed, targets;
    for (auto lu : lus) (rng.bernoulli(0.2) ? seed : targets).push_back(lu);
    if (seed.empty()) continue;

    std::vector<std::vector<NodeIndex>> adj(n);
    for (const auto& e : g.edges()) {
      adj[e.src].push_back(e.dst);
      adj[e.dst].push_back(e.src);
    }
    constexpr auto kInf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> best(n, kInf);
    for (auto s : seed) {
      std::vector<std::size_t> d(n, kInf);
      std::deque<NodeIndex> q{s};
      d[s] = 0;
      while (!q.empty()) {
        const auto u = q.front();
        q.pop_front();
        for (auto v : adj[u]) {
          if (d[v] == kInf) {
            d[v] = d[u] + 1;
            q.push_back(v);
          }
        }
      }
      for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], d[i]);
    }

    const auto plan = build_plan(g, seed, targets);
    std::size_t seen = 0;
    for (const auto& w : plan.waves) {
      for (auto t : w.members) {
        EXPECT_EQ(w.distance, best[t]) << "trial " << trial;
        ++seen;
      }
    }
    for (auto t : plan.unreachable) EXPECT_EQ(best[t], kInf) << "trial " << trial;
    EXPECT_EQ(seen + plan.unreachable.size(), targets.size());
  }
}

TEST(Propagate, EmptyTargetsStillTrains) {
  const Chain c;
  const auto emb = random_embeddings(c.g, 8, 1);
  const Annotations seed{{c.lu1, label(0.9)}, {c.lu2, label(0.1)}};
  const Annotations val{{c.lu3, label(0.8)}, {c.lu4, label(0.2)}};
  const auto r = propagate(c.g, emb, small_base(), seed, val, {});
  EXPECT_TRUE(r.predictions.empty());
  EXPECT_GT(r.report.epochs_run, 0u);
}

TEST(Propagate, FrozenModeEqualsBatchPrediction) {
  const Chain c;
  const auto emb = random_embeddings(c.g, 8, 2);
  const Annotations seed{{c.lu1, label(0.9)}, {c.lu2, label(0.1)}};
  const Annotations val{{c.lu3, label(0.8)}, {c.lu4, label(0.2)}};
  auto cfg = small_base();
  cfg.input_dim = 8;
  const auto trained = train_mlp<float>(cfg, msse::detail::make_dataset(c.g, emb, seed),
                                        msse::detail::make_dataset(c.g, emb, val));
  const std::vector<NodeIndex> targets{c.lu3, c.lu4, c.lu5};
  const auto r = propagate(c.g, emb, small_base(), seed, val, targets);
  ASSERT_EQ(r.predictions.size(), 3u);
  for (auto t : targets) {
    const auto v = emb.vector_of(token_of(c.g.node(t)));
    const auto expected = predict<float>(trained.model, v);
    for (std::size_t j = 0; j < kEmotionDims; ++j) {
      EXPECT_NEAR(r.predictions.at(t).raw[j], expected[j], 1e-6);
    }
    EXPECT_EQ(r.predictions.at(t).labels, binarize(expected, 0.5));
  }
  EXPECT_EQ(r.predictions.at(c.lu4).wave, -1);
  EXPECT_EQ(r.predictions.at(c.lu5).wave, 1);

  const auto again = propagate(c.g, emb, small_base(), seed, val, targets, {}, &trained.model);
  for (auto t : targets) EXPECT_EQ(again.predictions.at(t).raw, r.predictions.at(t).raw);
}

TEST(Propagate, RetrainModeCoversEveryTarget) {
  const Chain c;
  const auto emb = random_embeddings(c.g, 8, 3);
  const Annotations seed{{c.lu1, label(0.9)}, {c.lu5, label(0.7)}};
  const Annotations val{{c.lu3, label(0.8)}, {c.lu4, label(0.2)}};
  PropagateOptions opt;
  opt.retrain_per_wave = true;
  const std::vector<NodeIndex> targets{c.lu2, c.lu3, c.lu4};
  const auto r = propagate(c.g, emb, small_base(), seed, val, targets, opt);
  EXPECT_EQ(r.predictions.size(), 3u);
  EXPECT_EQ(r.predictions.at(c.lu3).wave, 2);
  EXPECT_EQ(r.predictions.at(c.lu2).wave, 3);
  EXPECT_EQ(r.predictions.at(c.lu4).wave, -1);
}

TEST(Propagate, MissingEmbeddingsAreListed) {
  const Chain c;
  const auto full = random_embeddings(c.g, 4, 4);
  std::ostringstream text;
  write_embeddings(full, text);
  std::string s = text.str();
  // drop the row of LU 2
  const auto at = s.find("L#pl#2 ");
  s.erase(at, s.find('\n', at) - at + 1);
  s.replace(0, s.find(' '), std::to_string(full.size() - 1));
  std::istringstream in(s);
  const auto emb = read_embeddings(in);
  const Annotations seed{{c.lu1, label(0.9)}, {c.lu2, label(0.1)}};
  const Annotations val{{c.lu3, label(0.8)}, {c.lu4, label(0.2)}};
  try {
    propagate(c.g, emb, small_base(), seed, val, {});
    FAIL() << "expected missing-embedding error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("L#pl#2"), std::string::npos) << e.what();
  }
}

TEST(Propagate, EmptySeedIsError) {
  const Chain c;
  const auto emb = random_embeddings(c.g, 8, 5);
  const Annotations val{{c.lu3, label(0.8)}, {c.lu4, label(0.2)}};
  EXPECT_THROW(propagate(c.g, emb, small_base(), {}, val, {}), Error);
}

TEST(Propagate, WritesOneLinePerTargetInWaveOrder) {
  const Chain c;
  const auto emb = random_embeddings(c.g, 8, 6);
  const Annotations seed{{c.lu1, label(0.9)}, {c.lu2, label(0.1)}};
  const Annotations val{{c.lu3, label(0.8)}, {c.lu5, label(0.2)}};
  const std::vector<NodeIndex> targets{c.lu4};
  const auto r = propagate(c.g, emb, small_base(), seed, val, targets);
  std::ostringstream out;
  write_propagation(c.g, r, out);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["lu"][0], 4);
  EXPECT_EQ(j["wave"], -1);
  EXPECT_EQ(j["raw"].size(), kEmotionDims);
}

TEST(Propagate, CrossLingualTransferBeatsMajority) {
  SynthConfig sc;
  sc.label_noise = 0.1;
  sc.seed = 11;
  const auto s = generate_synth(sc);
  const auto corpus = generate_corpus(s.graph, {.walks = 6000, .length = 20, .seed = 3});
  EmbedConfig ec;
  ec.dim = 32;
  const auto emb = train_embeddings(corpus, ec);

  std::vector<NodeIndex> pl, en;
  for (auto lu : s.graph.lexical_units()) (s.graph.node(lu).lang == "pl" ? pl : en).push_back(lu);
  Rng rng(12);
  rng.shuffle(std::span<NodeIndex>(pl));
  const std::size_t cut = pl.size() * 8 / 10;
  Annotations seed, val;
  for (std::size_t i = 0; i < pl.size(); ++i) (i < cut ? seed : val).emplace(pl[i], s.gold.at(pl[i]));

  auto cfg = MLPConfig::base(32);
  cfg.learning_rate = 0.01;
  cfg.batch_size = 32;
  cfg.max_epochs = 300;
  const auto r = propagate(s.graph, emb, cfg, seed, val, en);

  std::vector<LabelSet> pred, gold, majority;
  LabelSet maj;
  for (std::size_t j = 0; j < kEmotionDims; ++j) {
    std::size_t on = 0;
    for (const auto& [_, v] : seed) on += v[j] >= 0.5;
    maj[j] = 2 * on > seed.size();
  }
  for (auto lu : en) {
    pred.push_back(r.predictions.at(lu).labels);
    gold.push_back(binarize(s.gold.at(lu).values, 0.5));
    majority.push_back(maj);
  }
  const double model_f1 = prf_scores(pred, gold).macro.f1;
  const double base_f1 = prf_scores(majority, gold).macro.f1;
  EXPECT_GE(model_f1, base_f1 + 0.15) << "model " << model_f1 << " baseline " << base_f1;
}
