#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "msse/emotion.hpp"
#include "msse/error.hpp"
#include "msse/graph.hpp"
#include "msse/rng.hpp"

namespace msse {

struct SynthConfig {
  std::size_t communities = 4;
  std::size_t synsets_per_community = 10;  // per language
  std::size_t lus_per_synset = 3;
  std::vector<std::string> languages{"pl", "en"};
  double intra_probability = 0.3;
  double inter_probability = 0.02;
  double interlingual_fraction = 0.5;
  double label_noise = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (communities < 1 || synsets_per_community < 1 || lus_per_synset < 1) {
      throw Error("synth: community, synset and LU counts must be >= 1");
    }
    if (languages.empty()) throw Error("synth: at least one language required");
    for (const auto& l : languages) {
      if (!valid_lang(l)) throw Error("synth: invalid language code '" + l + "'");
    }
    if (std::set<std::string>(languages.begin(), languages.end()).size() != languages.size()) {
      throw Error("synth: duplicate language");
    }
    auto frac = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!frac(intra_probability) || !frac(inter_probability) || !frac(interlingual_fraction)) {
      throw Error("synth: probabilities and fractions must be in [0,1]");
    }
    if (!(intra_probability > inter_probability)) {
      throw Error("synth: intra-community probability must exceed inter-community probability");
    }
    if (!(label_noise >= 0.0 && label_noise < 1.0)) throw Error("synth: label noise must be in [0,1)");
  }
};

struct SynthGraph {
  WordNetGraph graph;                       // carries annotations for every LU
  std::map<NodeIndex, EmotionVector> gold;  // same values, keyed by LU index
  std::map<NodeIndex, std::size_t> community;
};

namespace detail {

inline LabelSet dims_of(std::initializer_list<std::string_view> names) {
  LabelSet s;
  for (auto n : names) s.set(*emotion_index(n));
  return s;
}

}  // namespace detail

/// Distinct label prototypes; community 0 is the neutral one.
inline std::vector<LabelSet> community_prototypes(std::size_t count) {
  using detail::dims_of;
  const std::vector<LabelSet> themes = {
      dims_of({"pol_neutral"}),
      dims_of({"pol_strong_positive", "emo_joy", "emo_trust", "emo_anticipation", "val_goodness", "val_beauty",
               "val_happiness", "val_usefulness", "val_truth", "val_knowledge"}),
      dims_of({"pol_strong_negative", "emo_fear", "emo_sadness", "emo_anger", "emo_disgust", "val_harm",
               "val_unhappiness", "val_ugliness"}),
      dims_of({"pol_weak_negative", "pol_ambivalent", "emo_surprise", "val_mistake", "val_ignorance",
               "val_nonusefulness"}),
      dims_of({"pol_weak_positive", "emo_surprise", "emo_anticipation", "val_usefulness", "val_knowledge"}),
  };
  std::vector<LabelSet> out;
  for (std::size_t c = 0; c < count; ++c) {
    LabelSet p = c < themes.size() ? themes[c] : themes[1 + (c - 1) % (themes.size() - 1)];
    std::size_t toggle = (c * 7) % kEmotionDims;
    while (std::find(out.begin(), out.end(), p) != out.end() || p.none()) {
      p.flip(toggle);
      toggle = (toggle + 1) % kEmotionDims;
    }
    out.push_back(p);
  }
  return out;
}

/// Bilingual (or multilingual) community-structured lexical graph with
/// planted labels: every LU carries its community prototype with
/// independent per-dimension flips at the noise rate.
inline SynthGraph generate_synth(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "synth"));
  GraphBuilder b;
  const std::size_t L = cfg.languages.size(), C = cfg.communities, S = cfg.synsets_per_community;

  // synsets[lang][community][k]
  std::vector<std::vector<std::vector<NodeIndex>>> synsets(L, std::vector<std::vector<NodeIndex>>(C));
  std::vector<std::pair<NodeIndex, std::size_t>> lus;  // (index, community)
  std::uint64_t next_synset = 1, next_lu = 1;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 0; k < S; ++k) {
        synsets[l][c].push_back(b.add_node(synset(next_synset++, cfg.languages[l])));
      }
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t c = 0; c < C; ++c) {
      for (NodeIndex s : synsets[l][c]) {
        for (std::size_t u = 0; u < cfg.lus_per_synset; ++u) {
          const NodeIndex lu = b.add_node(lexical_unit(next_lu++, cfg.languages[l]));
          b.add_edge(s, lu, {"membership", RelationCategory::SL, false});
          lus.emplace_back(lu, c);
        }
      }
    }
  }

  for (std::size_t l = 0; l < L; ++l) {
    std::vector<std::pair<NodeIndex, std::size_t>> all;
    for (std::size_t c = 0; c < C; ++c) {
      for (NodeIndex s : synsets[l][c]) all.emplace_back(s, c);
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i + 1; j < all.size(); ++j) {
        const bool same = all[i].second == all[j].second;
        if (rng.bernoulli(same ? cfg.intra_probability : cfg.inter_probability)) {
          b.add_edge(all[i].first, all[j].first, {same ? "hyponymy" : "related", RelationCategory::SS, false});
        }
      }
    }
  }

  const auto linked = static_cast<std::size_t>(std::llround(cfg.interlingual_fraction * double(S)));
  for (std::size_t l = 1; l < L; ++l) {
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<std::size_t> pick(S);
      std::iota(pick.begin(), pick.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(pick));
      pick.resize(linked);
      std::sort(pick.begin(), pick.end());
      for (auto k : pick) {
        b.add_edge(synsets[0][c][k], synsets[l][c][k], {"synonymy-il", RelationCategory::SS, true});
      }
    }
  }

  SynthGraph out;
  const auto prototypes = community_prototypes(C);
  for (auto [lu, c] : lus) {
    EmotionVector v;
    for (std::size_t j = 0; j < kEmotionDims; ++j) {
      bool on = prototypes[c][j];
      if (cfg.label_noise > 0.0 && rng.bernoulli(cfg.label_noise)) on = !on;
      v[j] = on ? 1.0 : 0.0;
    }
    out.gold.emplace(lu, v);
    out.community.emplace(lu, c);
  }
  for (const auto& [lu, v] : out.gold) b.annotate(lu, v);
  out.graph = std::move(b).build();
  return out;
}

}  // namespace msse
