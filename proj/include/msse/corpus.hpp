#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "msse/error.hpp"
#include "msse/graph.hpp"
#include "msse/rng.hpp"

namespace msse {

using Token = std::string;
using TokenSequence = std::vector<Token>;

/// "S#<lang>#<id>" for synsets, "L#<lang>#<id>" for lexical units.
inline Token token_of(const NodeId& n) {
  Token t = n.kind == NodeKind::Synset ? "S#" : "L#";
  t += n.lang;
  t += '#';
  t += std::to_string(n.id);
  return t;
}

/// "r" + "i" when interlingual + category + "#" + name, e.g. "riSS#synonymy-il".
inline Token token_of(const RelationType& rel) {
  Token t = rel.interlingual ? "ri" : "r";
  t += to_string(rel.category);
  t += '#';
  t += rel.name;
  return t;
}

inline bool is_node_token(std::string_view t) {
  return t.size() > 2 && (t[0] == 'S' || t[0] == 'L') && t[1] == '#';
}

/// Language embedded in a node token, empty for edge tokens.
inline std::string_view token_lang(std::string_view t) {
  if (!is_node_token(t)) return {};
  const auto end = t.find('#', 2);
  return t.substr(2, end == std::string_view::npos ? std::string_view::npos : end - 2);
}

enum class StartKind { Any, Synset, LexicalUnit };

struct WalkParams {
  std::size_t walks = 1;
  std::size_t length = 1;  // node visits per walk
  std::uint64_t seed = 0;
  bool cross_lingual = true;
  StartKind start_kind = StartKind::Any;
};

struct WalkCorpus {
  std::vector<TokenSequence> sequences;
  WalkParams params;
};

/// Self-avoiding walk of at most `length` node visits from `start`. Each step
/// picks uniformly among incident edges whose neighbor is unvisited (and, in
/// monolingual mode, shares the current node's language); the walk ends early
/// when no such edge exists.
inline TokenSequence random_walk(const WordNetGraph& g, NodeIndex start, std::size_t length, Rng& rng,
                          bool cross_lingual) {
  if (length == 0) throw Error("walk length must be >= 1");
  TokenSequence seq;
  seq.reserve(2 * length - 1);
  std::vector<NodeIndex> visited{start};
  std::vector<const Incidence*> admissible;
  NodeIndex current = start;
  seq.push_back(token_of(g.node(start)));
  while (visited.size() < length) {
    admissible.clear();
    const auto& lang = g.node(current).lang;
    for (const Incidence& inc : g.neighbors(current)) {
      if (!cross_lingual && g.node(inc.neighbor).lang != lang) continue;
      if (std::find(visited.begin(), visited.end(), inc.neighbor) != visited.end()) continue;
      admissible.push_back(&inc);
    }
    if (admissible.empty()) break;
    const Incidence& step = *admissible[rng.below(admissible.size())];
    seq.push_back(token_of(g.relation_of(step.edge)));
    seq.push_back(token_of(g.node(step.neighbor)));
    visited.push_back(step.neighbor);
    current = step.neighbor;
  }
  return seq;
}

namespace detail {

inline std::vector<NodeIndex> start_candidates(const WordNetGraph& g, StartKind kind) {
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    const auto k = g.node(i).kind;
    if (kind == StartKind::Any || (kind == StartKind::Synset && k == NodeKind::Synset) ||
        (kind == StartKind::LexicalUnit && k == NodeKind::LexicalUnit)) {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace detail

/// Walk i draws its start node and all steps from its own stream
/// derive_seed(seed, i), so any thread count yields the same corpus.
inline WalkCorpus generate_corpus(const WordNetGraph& g, const WalkParams& p, unsigned threads = 1) {
  if (g.empty()) throw Error("cannot generate a corpus from an empty graph");
  if (p.walks == 0) throw Error("walk count must be >= 1");
  if (p.length == 0) throw Error("walk length must be >= 1");
  const auto starts = detail::start_candidates(g, p.start_kind);
  if (starts.empty()) throw Error("no start nodes of the requested kind");

  WalkCorpus c;
  c.params = p;
  c.sequences.resize(p.walks);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(derive_seed(p.seed, i));
      const NodeIndex start = starts[rng.below(starts.size())];
      c.sequences[i] = random_walk(g, start, p.length, rng, p.cross_lingual);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(p.walks)));
  if (threads == 1) {
    work(0, p.walks);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (p.walks + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(p.walks, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  return c;
}

/// One sequence per line, tokens separated by a single space.
inline void write_corpus(const WalkCorpus& c, std::ostream& out) {
  for (const auto& seq : c.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
}

inline void write_corpus_file(const WalkCorpus& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file " + path.string());
  write_corpus(c, out);
  if (!out) throw Error("write failure on " + path.string());
}

inline WalkCorpus read_corpus(std::istream& in) {
  WalkCorpus c;
  std::string line;
  while (std::getline(in, line)) {
    TokenSequence seq;
    std::size_t pos = 0;
    while (pos < line.size()) {
      auto next = line.find(' ', pos);
      if (next == std::string::npos) next = line.size();
      if (next > pos) seq.emplace_back(line.substr(pos, next - pos));
      pos = next + 1;
    }
    if (!seq.empty()) c.sequences.push_back(std::move(seq));
  }
  c.params.walks = c.sequences.size();
  return c;
}

inline WalkCorpus read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return read_corpus(in);
}

}  // namespace msse
