#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msse/corpus.hpp"
#include "msse/error.hpp"
#include "msse/rng.hpp"

namespace msse {

// ---------------------------------------------------------------------------
// Vocabulary

struct Vocabulary {
  std::vector<Token> tokens;
  std::vector<std::uint64_t> counts;
  std::unordered_map<Token, std::size_t> index;
  std::uint64_t min_count = 1;

  std::size_t size() const { return tokens.size(); }

  std::optional<std::size_t> find(std::string_view t) const {
    auto it = index.find(Token(t));
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  void add(Token t, std::uint64_t count) {
    index.emplace(t, tokens.size());
    tokens.push_back(std::move(t));
    counts.push_back(count);
  }
};

/// Tokens below min_count are dropped. Indices are assigned by descending
/// count, ties broken by lexicographic token order.
inline Vocabulary build_vocab(const WalkCorpus& c, std::uint64_t min_count) {
  if (c.sequences.empty()) throw Error("empty corpus");
  std::unordered_map<Token, std::uint64_t> counts;
  for (const auto& seq : c.sequences) {
    for (const auto& t : seq) ++counts[t];
  }
  std::vector<std::pair<Token, std::uint64_t>> kept;
  for (auto& [t, n] : counts) {
    if (n >= min_count) kept.emplace_back(t, n);
  }
  if (kept.empty()) throw Error("vocabulary is empty after applying min_count " + std::to_string(min_count));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  v.min_count = min_count;
  for (auto& [t, n] : kept) v.add(std::move(t), n);
  return v;
}

// ---------------------------------------------------------------------------
// Configuration

struct SubwordRange {
  int min_n = 0;
  int max_n = 0;

  bool enabled() const { return min_n > 0 && max_n >= min_n; }
};

struct EmbedConfig {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::size_t negatives = 5;
  double noise_exponent = 0.75;
  std::uint64_t min_count = 1;
  SubwordRange subword;
  std::size_t buckets = 1u << 16;  // hashed n-gram rows, used only with subwords
  std::uint64_t seed = 1;

  void validate() const {
    if (dim < 1) throw Error("embedding dim must be >= 1");
    if (window < 1) throw Error("window must be >= 1");
    if (negatives < 1) throw Error("negatives must be >= 1");
    if (!(noise_exponent >= 0.0 && noise_exponent <= 1.0)) throw Error("noise exponent must be in [0,1]");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (subword.min_n != 0 || subword.max_n != 0) {
      if (!subword.enabled()) throw Error("subword range must satisfy 1 <= min_n <= max_n");
      if (buckets == 0) throw Error("subword buckets must be >= 1");
    }
  }
};

// ---------------------------------------------------------------------------
// SGNS objective for one (center, context, negatives) group

template <typename Real>
Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// -log sigmoid(x), stable for large |x|.
template <typename Real>
Real neg_log_sigmoid(Real x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

template <typename Real>
Real sigmoid(Real x) {
  return x >= 0 ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
}

/// Negative SGNS objective: -log s(u_ctx . v) - sum_j log s(-u_neg_j . v).
/// targets[0] is the context row, the rest are negatives.
template <typename Real>
Real sgns_loss(std::span<const Real> center, std::span<const std::span<const Real>> targets) {
  Real loss = 0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const Real s = dot(targets[j], center);
    loss += neg_log_sigmoid(j == 0 ? s : -s);
  }
  return loss;
}

template <typename Real>
struct SgnsGradient {
  Real loss = 0;
  std::vector<Real> center;                // d loss / d v_center
  std::vector<std::vector<Real>> targets;  // d loss / d u_j, same order as input
};

/// Analytic gradient of sgns_loss. With g_j = sigmoid(u_j . v) - label_j:
/// dL/dv = sum_j g_j u_j and dL/du_j = g_j v.
template <typename Real>
SgnsGradient<Real> sgns_gradient(std::span<const Real> center,
                                 std::span<const std::span<const Real>> targets) {
  SgnsGradient<Real> out;
  out.center.assign(center.size(), Real(0));
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const Real s = dot(targets[j], center);
    const Real label = j == 0 ? Real(1) : Real(0);
    out.loss += neg_log_sigmoid(j == 0 ? s : -s);
    const Real g = sigmoid(s) - label;
    for (std::size_t i = 0; i < center.size(); ++i) out.center[i] += g * targets[j][i];
    std::vector<Real> gu(center.size());
    for (std::size_t i = 0; i < center.size(); ++i) gu[i] = g * center[i];
    out.targets.push_back(std::move(gu));
  }
  return out;
}

/// In-place SGD step on one group: output rows move immediately, the center
/// gradient is accumulated into center_grad for the caller to apply.
/// Returns the loss before the update.
template <typename Real>
Real sgns_step(std::span<const Real> center, std::span<Real* const> targets, Real lr,
               std::span<Real> center_grad) {
  const std::size_t d = center.size();
  Real loss = 0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    std::span<Real> u(targets[j], d);
    const Real s = dot<Real>(u, center);
    loss += neg_log_sigmoid(j == 0 ? s : -s);
    const Real g = sigmoid(s) - (j == 0 ? Real(1) : Real(0));
    for (std::size_t i = 0; i < d; ++i) center_grad[i] += g * u[i];
    for (std::size_t i = 0; i < d; ++i) u[i] -= lr * g * center[i];
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Character n-grams

inline std::uint32_t fnv1a32(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

/// Bucket ids of the character n-grams of "<token>" with lengths in range.
inline std::vector<std::size_t> subword_buckets(std::string_view token, SubwordRange range,
                                                std::size_t buckets) {
  std::vector<std::size_t> out;
  if (!range.enabled()) return out;
  const std::string wrapped = "<" + std::string(token) + ">";
  for (std::size_t i = 0; i < wrapped.size(); ++i) {
    for (int n = range.min_n; n <= range.max_n; ++n) {
      if (i + static_cast<std::size_t>(n) > wrapped.size()) break;
      out.push_back(fnv1a32(std::string_view(wrapped).substr(i, n)) % buckets);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding table

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(Vocabulary vocab, std::size_t dim)
      : vocab_(std::move(vocab)), dim_(dim), input_(vocab_.size() * dim, 0.0f) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vocab_.size(); }
  const Vocabulary& vocab() const { return vocab_; }

  std::span<const float> row(std::size_t i) const { return {input_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {input_.data() + i * dim_, dim_}; }

  bool contains(std::string_view token) const { return vocab_.find(token).has_value(); }
  bool has_subwords() const { return subword_.enabled() && !ngrams_.empty(); }

  /// Published input vector of an in-vocabulary token; out-of-vocabulary
  /// tokens fall back to the mean of their n-gram vectors when subwords are on.
  std::vector<float> vector_of(std::string_view token) const {
    if (auto i = vocab_.find(token)) {
      auto r = row(*i);
      return {r.begin(), r.end()};
    }
    if (!has_subwords()) throw Error("unknown token '" + std::string(token) + "'");
    const auto ids = subword_buckets(token, subword_, buckets_);
    if (ids.empty()) throw Error("token '" + std::string(token) + "' has no n-grams");
    std::vector<float> v(dim_, 0.0f);
    for (auto b : ids) {
      for (std::size_t k = 0; k < dim_; ++k) v[k] += ngrams_[b * dim_ + k];
    }
    for (auto& x : v) x /= static_cast<float>(ids.size());
    return v;
  }

  const std::vector<float>& output_matrix() const { return output_; }
  const std::vector<double>& loss_history() const { return loss_history_; }

 private:
  friend EmbeddingTable train_embeddings(const WalkCorpus&, const EmbedConfig&);

  Vocabulary vocab_;
  std::size_t dim_ = 0;
  std::vector<float> input_;   // |V| x d, published vectors
  std::vector<float> output_;  // |V| x d, context vectors
  SubwordRange subword_;
  std::size_t buckets_ = 0;
  std::vector<float> ngrams_;  // buckets x d
  std::vector<double> loss_history_;
};

namespace detail {

/// Unigram^exponent noise distribution sampled by inverse CDF.
class NoiseSampler {
 public:
  NoiseSampler(const std::vector<std::uint64_t>& counts, double exponent) {
    cdf_.reserve(counts.size());
    double acc = 0.0;
    for (auto c : counts) {
      acc += std::pow(static_cast<double>(c), exponent);
      cdf_.push_back(acc);
    }
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace detail

/// Skip-gram with negative sampling over the walk corpus, single-threaded and
/// deterministic for a given config seed. Learning rate decays linearly over
/// the planned number of center positions.
inline EmbeddingTable train_embeddings(const WalkCorpus& corpus, const EmbedConfig& cfg) {
  cfg.validate();
  Vocabulary vocab = build_vocab(corpus, cfg.min_count);
  const std::size_t d = cfg.dim;
  const std::size_t V = vocab.size();

  std::vector<std::vector<std::int64_t>> ids;
  ids.reserve(corpus.sequences.size());
  std::size_t centers = 0;
  for (const auto& seq : corpus.sequences) {
    std::vector<std::int64_t> row;
    row.reserve(seq.size());
    for (const auto& t : seq) {
      auto i = vocab.find(t);
      row.push_back(i ? static_cast<std::int64_t>(*i) : -1);
      if (i) ++centers;
    }
    ids.push_back(std::move(row));
  }

  const detail::NoiseSampler noise(vocab.counts, cfg.noise_exponent);

  EmbeddingTable table(std::move(vocab), d);
  Rng rng(derive_seed(cfg.seed, "embed"));
  const float init = 0.5f / static_cast<float>(d);
  std::vector<float> words(V * d);
  for (auto& x : words) x = static_cast<float>(rng.uniform(-init, init));
  table.output_.assign(V * d, 0.0f);

  const bool subword = cfg.subword.enabled();
  std::vector<std::vector<std::size_t>> pieces;
  if (subword) {
    table.subword_ = cfg.subword;
    table.buckets_ = cfg.buckets;
    table.ngrams_.resize(cfg.buckets * d);
    for (auto& x : table.ngrams_) x = static_cast<float>(rng.uniform(-init, init));
    pieces.reserve(V);
    for (const auto& t : table.vocab_.tokens) pieces.push_back(subword_buckets(t, cfg.subword, cfg.buckets));
  }

  std::vector<float> hidden(d), grad(d);
  std::vector<float*> targets(cfg.negatives + 1);
  const double total = static_cast<double>(cfg.epochs) * static_cast<double>(centers);
  double done = 0;

  // center representation: word row alone, or mean of word row and its n-grams
  auto load_hidden = [&](std::size_t c) {
    std::copy_n(words.data() + c * d, d, hidden.data());
    if (!subword) return;
    for (auto b : pieces[c]) {
      for (std::size_t k = 0; k < d; ++k) hidden[k] += table.ngrams_[b * d + k];
    }
    const float inv = 1.0f / static_cast<float>(pieces[c].size() + 1);
    for (auto& x : hidden) x *= inv;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t groups = 0;
    for (const auto& row : ids) {
      const std::size_t n = row.size();
      for (std::size_t pos = 0; pos < n; ++pos) {
        if (row[pos] < 0) continue;
        const auto center = static_cast<std::size_t>(row[pos]);
        const float lr = static_cast<float>(cfg.learning_rate * std::max(1.0 - done / total, 1e-4));
        done += 1.0;
        const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
        const std::size_t hi = std::min(n - 1, pos + cfg.window);
        for (std::size_t q = lo; q <= hi; ++q) {
          if (q == pos || row[q] < 0) continue;
          const auto ctx = static_cast<std::size_t>(row[q]);
          std::size_t m = 0;
          targets[m++] = table.output_.data() + ctx * d;
          for (std::size_t k = 0; k < cfg.negatives; ++k) {
            const std::size_t neg = noise(rng);
            if (neg == ctx) continue;
            targets[m++] = table.output_.data() + neg * d;
          }
          load_hidden(center);
          std::fill(grad.begin(), grad.end(), 0.0f);
          const float loss = sgns_step<float>(hidden, std::span<float* const>(targets.data(), m), lr, grad);
          if (!std::isfinite(loss)) {
            throw Error("non-finite SGNS loss at epoch " + std::to_string(epoch + 1) + ", center '" +
                        table.vocab_.tokens[center] + "'");
          }
          epoch_loss += loss;
          ++groups;
          for (std::size_t k = 0; k < d; ++k) words[center * d + k] -= lr * grad[k];
          if (subword) {
            for (auto b : pieces[center]) {
              for (std::size_t k = 0; k < d; ++k) table.ngrams_[b * d + k] -= lr * grad[k];
            }
          }
        }
      }
    }
    table.loss_history_.push_back(groups ? epoch_loss / static_cast<double>(groups) : 0.0);
  }

  for (std::size_t c = 0; c < V; ++c) {
    load_hidden(c);
    std::copy(hidden.begin(), hidden.end(), table.input_.begin() + static_cast<std::ptrdiff_t>(c * d));
  }
  return table;
}

// ---------------------------------------------------------------------------

template <typename Real>
double cosine(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) throw Error("cosine: dimension mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  if (aa <= 0.0 || bb <= 0.0) throw Error("cosine: zero-norm vector");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  return cosine<float>(std::span<const float>(a), std::span<const float>(b));
}

/// Text format: "<vocab_size> <d>" header, then one token per line followed
/// by d values printed with 6 decimals.
inline void write_embeddings(const EmbeddingTable& t, std::ostream& out) {
  out << t.size() << ' ' << t.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << t.vocab().tokens[i];
    for (float x : t.row(i)) {
      std::snprintf(buf, sizeof buf, " %.6f", static_cast<double>(x));
      out << buf;
    }
    out << '\n';
  }
}

inline void write_embeddings_file(const EmbeddingTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file " + path.string());
  write_embeddings(t, out);
  if (!out) throw Error("write failure on " + path.string());
}

inline EmbeddingTable read_embeddings(std::istream& in) {
  std::size_t n = 0, d = 0;
  std::string header;
  if (!std::getline(in, header)) throw Error("embedding file: missing header");
  {
    std::istringstream hs(header);
    if (!(hs >> n >> d) || d == 0) throw Error("embedding file: bad header '" + header + "'");
  }
  Vocabulary vocab;
  std::vector<std::vector<float>> rows;
  rows.reserve(n);
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw Error("embedding file: expected " + std::to_string(n) + " rows");
    std::istringstream ls(line);
    Token tok;
    ls >> tok;
    std::vector<float> v(d);
    for (auto& x : v) {
      if (!(ls >> x)) throw Error("embedding file: short row for '" + tok + "'");
    }
    if (vocab.find(tok)) throw Error("embedding file: duplicate token '" + tok + "'");
    vocab.add(std::move(tok), 0);
    rows.push_back(std::move(v));
  }
  EmbeddingTable t(std::move(vocab), d);
  for (std::size_t i = 0; i < n; ++i) std::copy(rows[i].begin(), rows[i].end(), t.row(i).begin());
  return t;
}

inline EmbeddingTable read_embeddings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file " + path.string());
  return read_embeddings(in);
}

}  // namespace msse
