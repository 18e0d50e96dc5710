#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "msse/emotion.hpp"
#include "msse/error.hpp"

namespace msse {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// 0/0 is taken as 0 for every ratio.
inline PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF s;
  s.precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
  s.recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

struct ClassificationScores {
  std::array<PRF, kEmotionDims> per_dim{};
  std::array<std::size_t, kEmotionDims> support{};  // gold positives
  std::array<std::size_t, kEmotionDims> tp{}, fp{}, fn{};
  PRF micro, macro, weighted;
};

inline ClassificationScores prf_scores(std::span<const LabelSet> pred, std::span<const LabelSet> gold) {
  if (pred.size() != gold.size()) throw Error("prf_scores: prediction and gold sets differ in size");
  ClassificationScores s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < kEmotionDims; ++j) {
      const bool p = pred[i][j], g = gold[i][j];
      s.tp[j] += p && g;
      s.fp[j] += p && !g;
      s.fn[j] += !p && g;
      s.support[j] += g;
    }
  }
  std::size_t tp = 0, fp = 0, fn = 0, total_support = 0;
  for (std::size_t j = 0; j < kEmotionDims; ++j) {
    s.per_dim[j] = prf_from_counts(s.tp[j], s.fp[j], s.fn[j]);
    tp += s.tp[j];
    fp += s.fp[j];
    fn += s.fn[j];
    total_support += s.support[j];
    s.macro.precision += s.per_dim[j].precision / double(kEmotionDims);
    s.macro.recall += s.per_dim[j].recall / double(kEmotionDims);
    s.macro.f1 += s.per_dim[j].f1 / double(kEmotionDims);
  }
  s.micro = prf_from_counts(tp, fp, fn);
  if (total_support > 0) {
    for (std::size_t j = 0; j < kEmotionDims; ++j) {
      const double w = double(s.support[j]) / double(total_support);
      s.weighted.precision += w * s.per_dim[j].precision;
      s.weighted.recall += w * s.per_dim[j].recall;
      s.weighted.f1 += w * s.per_dim[j].f1;
    }
  }
  return s;
}

struct RegressionScores {
  double r = 0.0;
  double r2 = 0.0;
};

/// Pearson R and R^2 = 1 - SS_res/SS_tot over two flat series. A constant
/// prediction series yields R = 0 by convention; a constant gold series is
/// an error.
inline RegressionScores r_r2(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) throw Error("r_r2: series differ in length");
  const std::size_t n = gold.size();
  if (n < 2) throw Error("r_r2: need at least 2 values");
  double mp = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += pred[i];
    mg += gold[i];
  }
  mp /= double(n);
  mg /= double(n);
  double spp = 0.0, sgg = 0.0, spg = 0.0, res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = pred[i] - mp, dg = gold[i] - mg;
    spp += dp * dp;
    sgg += dg * dg;
    spg += dp * dg;
    res += (pred[i] - gold[i]) * (pred[i] - gold[i]);
  }
  if (!(sgg > 0.0)) throw Error("r_r2: gold series is constant");
  RegressionScores s;
  s.r = spp > 0.0 ? spg / std::sqrt(spp * sgg) : 0.0;
  s.r2 = 1.0 - res / sgg;
  return s;
}

enum class RegressionPooling { Pooled, PerDimension };

/// R and R^2 over (LU, dimension) pairs. Pooled flattens all pairs into one
/// series; PerDimension averages the per-dimension scores over dimensions
/// whose gold values are not constant.
inline RegressionScores pooled_r_r2(std::span<const RawScores> pred, std::span<const EmotionVector> gold,
                                    RegressionPooling pooling = RegressionPooling::Pooled) {
  if (pred.size() != gold.size()) throw Error("pooled_r_r2: prediction and gold sets differ in size");
  if (pooling == RegressionPooling::Pooled) {
    std::vector<double> p, g;
    p.reserve(pred.size() * kEmotionDims);
    g.reserve(pred.size() * kEmotionDims);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      for (std::size_t j = 0; j < kEmotionDims; ++j) {
        p.push_back(pred[i][j]);
        g.push_back(gold[i][j]);
      }
    }
    return r_r2(p, g);
  }
  RegressionScores acc;
  std::size_t used = 0;
  std::vector<double> p(pred.size()), g(pred.size());
  for (std::size_t j = 0; j < kEmotionDims; ++j) {
    bool constant = true;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p[i] = pred[i][j];
      g[i] = gold[i][j];
      constant = constant && g[i] == g[0];
    }
    if (constant) continue;
    const auto s = r_r2(p, g);
    acc.r += s.r;
    acc.r2 += s.r2;
    ++used;
  }
  if (used == 0) throw Error("pooled_r_r2: every gold dimension is constant");
  acc.r /= double(used);
  acc.r2 /= double(used);
  return acc;
}

}  // namespace msse
