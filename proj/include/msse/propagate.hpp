#pragma once

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msse/corpus.hpp"
#include "msse/embed.hpp"
#include "msse/emotion.hpp"
#include "msse/error.hpp"
#include "msse/graph.hpp"
#include "msse/mlp.hpp"

namespace msse {

struct Wave {
  std::size_t distance = 0;        // hops to the nearest seed LU
  std::vector<NodeIndex> members;  // sorted by NodeId
};

struct PropagationPlan {
  std::vector<NodeIndex> seed;
  std::vector<NodeIndex> targets;
  std::vector<Wave> waves;  // increasing distance, non-empty only
  std::vector<NodeIndex> unreachable;
};

namespace detail {

inline void sort_by_node_id(const WordNetGraph& g, std::vector<NodeIndex>& v) {
  std::sort(v.begin(), v.end(), [&](NodeIndex a, NodeIndex b) { return g.node(a) < g.node(b); });
}

inline void require_lexical_units(const WordNetGraph& g, std::span<const NodeIndex> ids, const char* what) {
  for (auto i : ids) {
    if (i >= g.node_count() || g.node(i).kind != NodeKind::LexicalUnit) {
      throw Error(std::string(what) + " contains a node that is not a lexical unit");
    }
  }
}

}  // namespace detail

/// Multi-source BFS from the seed LUs over the whole graph (synsets act as
/// transit nodes, every edge in both directions). Targets are grouped into
/// waves by hop distance.
inline PropagationPlan build_plan(const WordNetGraph& g, std::span<const NodeIndex> seed,
                                  std::span<const NodeIndex> targets) {
  detail::require_lexical_units(g, seed, "seed");
  detail::require_lexical_units(g, targets, "targets");
  const std::set<NodeIndex> seed_set(seed.begin(), seed.end());
  for (auto t : targets) {
    if (seed_set.count(t)) throw Error("seed and targets overlap at " + describe(g.node(t)));
  }

  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(g.node_count(), kUnseen);
  std::deque<NodeIndex> queue;
  for (auto s : seed_set) {
    dist[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const NodeIndex u = queue.front();
    queue.pop_front();
    for (const auto& inc : g.neighbors(u)) {
      if (dist[inc.neighbor] == kUnseen) {
        dist[inc.neighbor] = dist[u] + 1;
        queue.push_back(inc.neighbor);
      }
    }
  }

  PropagationPlan plan;
  plan.seed.assign(seed_set.begin(), seed_set.end());
  const std::set<NodeIndex> target_set(targets.begin(), targets.end());
  plan.targets.assign(target_set.begin(), target_set.end());
  std::map<std::size_t, std::vector<NodeIndex>> by_distance;
  for (auto t : plan.targets) {
    if (dist[t] == kUnseen) {
      plan.unreachable.push_back(t);
    } else {
      by_distance[dist[t]].push_back(t);
    }
  }
  for (auto& [d, members] : by_distance) {
    detail::sort_by_node_id(g, members);
    plan.waves.push_back({d, std::move(members)});
  }
  detail::sort_by_node_id(g, plan.unreachable);
  detail::sort_by_node_id(g, plan.seed);
  detail::sort_by_node_id(g, plan.targets);
  return plan;
}

struct PropagateOptions {
  bool retrain_per_wave = false;
  double threshold = 0.5;
};

struct Prediction {
  RawScores raw{};
  LabelSet labels;
  long wave = -1;  // hop distance, -1 when unreachable from the seed
};

struct PropagationResult {
  std::map<NodeIndex, Prediction> predictions;
  TrainReport report;  // training of the final model
  PropagationPlan plan;
};

using Annotations = std::map<NodeIndex, EmotionVector>;

namespace detail {

inline Matrix<float> embedding_matrix(const WordNetGraph& g, const EmbeddingTable& emb,
                                      std::span<const NodeIndex> lus) {
  Matrix<float> x(static_cast<Eigen::Index>(emb.dim()), static_cast<Eigen::Index>(lus.size()));
  for (std::size_t k = 0; k < lus.size(); ++k) {
    const auto v = emb.vector_of(token_of(g.node(lus[k])));
    x.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const ColVector<float>>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return x;
}

inline Dataset<float> make_dataset(const WordNetGraph& g, const EmbeddingTable& emb, const Annotations& a) {
  std::vector<NodeIndex> ids;
  for (const auto& [lu, _] : a) ids.push_back(lu);
  Dataset<float> d;
  d.x = embedding_matrix(g, emb, ids);
  d.y.resize(static_cast<Eigen::Index>(kEmotionDims), static_cast<Eigen::Index>(ids.size()));
  Eigen::Index k = 0;
  for (const auto& [lu, v] : a) {
    for (std::size_t j = 0; j < kEmotionDims; ++j) d.y(static_cast<Eigen::Index>(j), k) = static_cast<float>(v[j]);
    ++k;
  }
  return d;
}

inline void require_embeddings(const WordNetGraph& g, const EmbeddingTable& emb,
                               std::initializer_list<std::span<const NodeIndex>> groups) {
  std::vector<std::string> missing;
  std::size_t total = 0;
  for (auto group : groups) {
    for (auto lu : group) {
      const auto tok = token_of(g.node(lu));
      try {
        (void)emb.vector_of(tok);
      } catch (const Error&) {
        ++total;
        if (missing.size() < 10) missing.push_back(tok);
      }
    }
  }
  if (total == 0) return;
  std::string msg = "missing embeddings for " + std::to_string(total) + " lexical unit(s):";
  for (const auto& t : missing) msg += " " + t;
  if (total > missing.size()) msg += " ...";
  throw Error(msg);
}

inline std::vector<NodeIndex> keys_of(const Annotations& a) {
  std::vector<NodeIndex> out;
  for (const auto& [k, _] : a) out.push_back(k);
  return out;
}

}  // namespace detail

/// Trains the regressor on the seed (val drives early stopping) and predicts
/// every target wave by wave. Frozen mode predicts all targets with the one
/// model; retrain mode adds each wave's raw predictions to the training set
/// and retrains before the next wave. Unreachable targets are predicted with
/// the final model and keep wave = -1.
inline PropagationResult propagate(const WordNetGraph& g, const EmbeddingTable& emb, MLPConfig cfg,
                                   const Annotations& seed, const Annotations& val,
                                   std::span<const NodeIndex> targets, const PropagateOptions& opt = {},
                                   const MLPModel* pretrained = nullptr) {
  if (seed.empty()) throw Error("propagate: empty seed");
  if (!(opt.threshold > 0.0 && opt.threshold < 1.0)) throw Error("propagate: threshold must be in (0,1)");
  const auto seed_ids = detail::keys_of(seed);
  const auto val_ids = detail::keys_of(val);
  detail::require_embeddings(g, emb, {seed_ids, val_ids, targets});

  PropagationResult result;
  result.plan = build_plan(g, seed_ids, targets);
  cfg.input_dim = emb.dim();

  const Dataset<float> val_data = detail::make_dataset(g, emb, val);
  auto fit = [&](const Annotations& train, std::uint64_t salt) {
    MLPConfig c = cfg;
    c.seed = salt == 0 ? cfg.seed : derive_seed(cfg.seed, salt);
    return train_mlp<float>(c, detail::make_dataset(g, emb, train), val_data);
  };

  auto record = [&](const MLPModel& model, std::span<const NodeIndex> lus, long wave) {
    if (lus.empty()) return;
    const Matrix<float> out = model.forward(detail::embedding_matrix(g, emb, lus));
    for (std::size_t k = 0; k < lus.size(); ++k) {
      Prediction p;
      for (std::size_t j = 0; j < kEmotionDims; ++j) {
        p.raw[j] = out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      }
      p.labels = binarize(p.raw, opt.threshold);
      p.wave = wave;
      result.predictions[lus[k]] = p;
    }
  };

  if (!opt.retrain_per_wave) {
    MLPModel model;
    if (pretrained) {
      if (pretrained->config().input_dim != emb.dim()) throw Error("propagate: model input dim != embedding dim");
      model = *pretrained;
    } else {
      auto trained = fit(seed, 0);
      model = std::move(trained.model);
      result.report = std::move(trained.report);
    }
    for (const auto& w : result.plan.waves) record(model, w.members, static_cast<long>(w.distance));
    record(model, result.plan.unreachable, -1);
    return result;
  }

  Annotations train = seed;
  auto trained = fit(train, 0);
  for (std::size_t wi = 0; wi < result.plan.waves.size(); ++wi) {
    const auto& w = result.plan.waves[wi];
    record(trained.model, w.members, static_cast<long>(w.distance));
    if (wi + 1 == result.plan.waves.size()) break;
    for (auto lu : w.members) {
      EmotionVector v;
      v.values = result.predictions.at(lu).raw;
      train.emplace(lu, v);
    }
    trained = fit(train, wi + 1);
  }
  record(trained.model, result.plan.unreachable, -1);
  result.report = std::move(trained.report);
  return result;
}

/// One JSON object per LU: {"lu":[id,lang],"wave":k,"raw":[...],"labels":[...]}
/// in wave order, unreachable LUs last with wave -1.
inline void write_propagation(const WordNetGraph& g, const PropagationResult& r, std::ostream& out) {
  auto emit = [&](NodeIndex lu) {
    const auto& p = r.predictions.at(lu);
    const auto& n = g.node(lu);
    std::vector<bool> labels(kEmotionDims);
    for (std::size_t j = 0; j < kEmotionDims; ++j) labels[j] = p.labels[j];
    nlohmann::json j = {{"lu", nlohmann::json::array({n.id, n.lang})},
                        {"wave", p.wave},
                        {"raw", p.raw},
                        {"labels", labels}};
    out << j.dump() << '\n';
  };
  for (const auto& w : r.plan.waves) {
    for (auto lu : w.members) emit(lu);
  }
  for (auto lu : r.plan.unreachable) emit(lu);
}

inline void write_propagation_file(const WordNetGraph& g, const PropagationResult& r,
                                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write propagation file " + path.string());
  write_propagation(g, r, out);
  if (!out) throw Error("write failure on " + path.string());
}

}  // namespace msse
