#pragma once

#include <array>
#include <bitset>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "msse/error.hpp"

namespace msse {

inline constexpr std::size_t kEmotionDims = 26;

/// Annotation dimensions in storage order: 6 polarity grades, 8 Plutchik
/// emotions, 12 fundamental values.
inline constexpr std::array<std::string_view, kEmotionDims> kEmotionNames = {
    "pol_strong_positive", "pol_weak_positive", "pol_strong_negative", "pol_weak_negative",
    "pol_ambivalent",      "pol_neutral",

    "emo_joy",             "emo_fear",          "emo_surprise",        "emo_sadness",
    "emo_disgust",         "emo_anger",         "emo_trust",           "emo_anticipation",

    "val_nonusefulness",   "val_mistake",       "val_ugliness",        "val_goodness",
    "val_harm",            "val_ignorance",     "val_unhappiness",     "val_beauty",
    "val_truth",           "val_happiness",     "val_usefulness",      "val_knowledge",
};

inline std::optional<std::size_t> emotion_index(std::string_view name) {
  for (std::size_t j = 0; j < kEmotionDims; ++j) {
    if (kEmotionNames[j] == name) return j;
  }
  return std::nullopt;
}

/// Per-dimension annotation strengths. Values are fractions in [0,1]; the
/// type does not enforce the range so that out-of-range input can be
/// reported by validation instead of rejected at parse time.
struct EmotionVector {
  std::array<double, kEmotionDims> values{};

  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }

  static EmotionVector from(std::span<const double> v) {
    if (v.size() != kEmotionDims) {
      throw Error("emotion vector needs " + std::to_string(kEmotionDims) + " values, got " +
                  std::to_string(v.size()));
    }
    EmotionVector e;
    for (std::size_t j = 0; j < kEmotionDims; ++j) e.values[j] = v[j];
    return e;
  }

  bool in_range() const {
    for (double x : values) {
      if (!std::isfinite(x) || x < 0.0 || x > 1.0) return false;
    }
    return true;
  }

  friend bool operator==(const EmotionVector&, const EmotionVector&) = default;
};

using LabelSet = std::bitset<kEmotionDims>;

/// Unbounded regressor output, one value per annotation dimension.
using RawScores = std::array<double, kEmotionDims>;

/// Label j is active iff value_j >= threshold.
template <typename Vec>
LabelSet binarize(const Vec& values, double threshold = 0.5) {
  LabelSet out;
  for (std::size_t j = 0; j < kEmotionDims; ++j) out[j] = values[j] >= threshold;
  return out;
}

}  // namespace msse
