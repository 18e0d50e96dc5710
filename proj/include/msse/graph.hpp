#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msse/emotion.hpp"
#include "msse/error.hpp"

namespace msse {

enum class NodeKind : std::uint8_t { Synset = 0, LexicalUnit = 1 };

inline std::string_view to_string(NodeKind k) { return k == NodeKind::Synset ? "synset" : "lu"; }

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
  if (s == "synset") return NodeKind::Synset;
  if (s == "lu") return NodeKind::LexicalUnit;
  return std::nullopt;
}

struct NodeId {
  NodeKind kind = NodeKind::Synset;
  std::uint64_t id = 0;
  std::string lang;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

inline NodeId synset(std::uint64_t id, std::string lang) {
  return {NodeKind::Synset, id, std::move(lang)};
}
inline NodeId lexical_unit(std::uint64_t id, std::string lang) {
  return {NodeKind::LexicalUnit, id, std::move(lang)};
}

inline bool valid_lang(std::string_view lang) {
  return !lang.empty() &&
         std::all_of(lang.begin(), lang.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

/// Endpoint kinds of a relation: first letter source, second destination.
enum class RelationCategory : std::uint8_t { SS = 0, SL = 1, LS = 2, LL = 3 };

inline std::string_view to_string(RelationCategory c) {
  static constexpr std::string_view names[] = {"SS", "SL", "LS", "LL"};
  return names[static_cast<int>(c)];
}

inline std::optional<RelationCategory> parse_category(std::string_view s) {
  if (s == "SS") return RelationCategory::SS;
  if (s == "SL") return RelationCategory::SL;
  if (s == "LS") return RelationCategory::LS;
  if (s == "LL") return RelationCategory::LL;
  return std::nullopt;
}

inline RelationCategory category_of(NodeKind src, NodeKind dst) {
  const int s = src == NodeKind::LexicalUnit ? 2 : 0;
  const int d = dst == NodeKind::LexicalUnit ? 1 : 0;
  return static_cast<RelationCategory>(s + d);
}

struct RelationType {
  std::string name;
  RelationCategory category = RelationCategory::SS;
  bool interlingual = false;

  friend auto operator<=>(const RelationType&, const RelationType&) = default;
  friend bool operator==(const RelationType&, const RelationType&) = default;
};

using NodeIndex = std::size_t;
using EdgeIndex = std::size_t;
using RelationIndex = std::size_t;

struct Edge {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  RelationIndex rel = 0;
};

/// One traversable direction of an edge, as seen from a node.
struct Incidence {
  EdgeIndex edge = 0;
  NodeIndex neighbor = 0;
};

struct NodeRecord {
  NodeId id;
  std::string lemma;  // optional metadata, LUs only
};

class GraphBuilder;

/// Immutable typed multigraph of synsets and lexical units. Edges are stored
/// as given and traversed in both directions; the reverse direction carries
/// the forward relation.
class WordNetGraph {
 public:
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }

  const NodeId& node(NodeIndex i) const { return nodes_.at(i).id; }
  const NodeRecord& record(NodeIndex i) const { return nodes_.at(i); }
  const Edge& edge(EdgeIndex e) const { return edges_.at(e); }
  std::span<const Edge> edges() const { return edges_; }
  const RelationType& relation(RelationIndex r) const { return relations_.at(r); }
  const RelationType& relation_of(EdgeIndex e) const { return relations_.at(edges_.at(e).rel); }
  std::span<const RelationType> relations() const { return relations_; }

  /// Index of the node with this (kind, id); lang must match as well.
  std::optional<NodeIndex> find(const NodeId& n) const {
    auto it = index_.find(key(n.kind, n.id));
    if (it == index_.end() || nodes_[it->second].id.lang != n.lang) return std::nullopt;
    return it->second;
  }

  NodeIndex index_of(const NodeId& n) const {
    if (auto i = find(n)) return *i;
    throw Error("unknown node " + std::string(to_string(n.kind)) + " " + std::to_string(n.id) +
                " (" + n.lang + ")");
  }

  /// Both directions of every incident edge, sorted by neighbor (kind, id,
  /// lang) and then relation name.
  std::span<const Incidence> neighbors(NodeIndex i) const {
    const auto begin = adjacency_offsets_.at(i);
    const auto end = adjacency_offsets_.at(i + 1);
    return std::span<const Incidence>(adjacency_).subspan(begin, end - begin);
  }

  std::span<const Incidence> neighbors(const NodeId& n) const { return neighbors(index_of(n)); }

  const std::map<NodeIndex, EmotionVector>& annotations() const { return annotations_; }

  const EmotionVector* annotation(NodeIndex lu) const {
    auto it = annotations_.find(lu);
    return it == annotations_.end() ? nullptr : &it->second;
  }

  /// Node indices of all lexical units, in index order.
  std::vector<NodeIndex> lexical_units() const {
    std::vector<NodeIndex> out;
    for (NodeIndex i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].id.kind == NodeKind::LexicalUnit) out.push_back(i);
    }
    return out;
  }

 private:
  friend class GraphBuilder;

  static std::uint64_t key(NodeKind k, std::uint64_t id) {
    return (id << 1) | (k == NodeKind::LexicalUnit ? 1u : 0u);
  }

  void build_adjacency() {
    std::vector<std::vector<Incidence>> per_node(nodes_.size());
    for (EdgeIndex e = 0; e < edges_.size(); ++e) {
      per_node[edges_[e].src].push_back({e, edges_[e].dst});
      per_node[edges_[e].dst].push_back({e, edges_[e].src});
    }
    adjacency_.clear();
    adjacency_offsets_.assign(1, 0);
    for (auto& list : per_node) {
      std::stable_sort(list.begin(), list.end(), [this](const Incidence& a, const Incidence& b) {
        const NodeId& na = nodes_[a.neighbor].id;
        const NodeId& nb = nodes_[b.neighbor].id;
        if (na != nb) return na < nb;
        return relations_[edges_[a.edge].rel].name < relations_[edges_[b.edge].rel].name;
      });
      adjacency_.insert(adjacency_.end(), list.begin(), list.end());
      adjacency_offsets_.push_back(adjacency_.size());
    }
  }

  std::vector<NodeRecord> nodes_;
  std::unordered_map<std::uint64_t, NodeIndex> index_;
  std::vector<RelationType> relations_;
  std::vector<Edge> edges_;
  std::vector<Incidence> adjacency_;
  std::vector<std::size_t> adjacency_offsets_{0};
  std::map<NodeIndex, EmotionVector> annotations_;
};

/// Single-threaded construction of a WordNetGraph. Structural errors (duplicate
/// nodes, unknown endpoints, kind/category mismatch) throw; semantic issues
/// such as interlingual-flag mismatches or out-of-range annotation values
/// are accepted here and surfaced by validate_graph.
class GraphBuilder {
 public:
  NodeIndex add_node(NodeId id, std::string lemma = {}) {
    if (!valid_lang(id.lang)) throw Error("invalid language code '" + id.lang + "'");
    const auto k = WordNetGraph::key(id.kind, id.id);
    if (g_.index_.count(k)) {
      throw Error("duplicate node " + std::string(to_string(id.kind)) + " " + std::to_string(id.id));
    }
    const NodeIndex i = g_.nodes_.size();
    g_.index_.emplace(k, i);
    g_.nodes_.push_back({std::move(id), std::move(lemma)});
    return i;
  }

  EdgeIndex add_edge(const NodeId& src, const NodeId& dst, RelationType rel) {
    auto s = g_.find(src);
    auto d = g_.find(dst);
    if (!s || !d) throw Error("unknown endpoint");
    return add_edge(*s, *d, std::move(rel));
  }

  EdgeIndex add_edge(NodeIndex src, NodeIndex dst, RelationType rel) {
    if (src >= g_.nodes_.size() || dst >= g_.nodes_.size()) throw Error("unknown endpoint");
    if (rel.name.empty()) throw Error("empty relation name");
    if (category_of(g_.nodes_[src].id.kind, g_.nodes_[dst].id.kind) != rel.category) {
      throw Error("relation '" + rel.name + "' has category " + std::string(to_string(rel.category)) +
                  " but endpoints are " + std::string(to_string(g_.nodes_[src].id.kind)) + " -> " +
                  std::string(to_string(g_.nodes_[dst].id.kind)));
    }
    const RelationIndex r = intern(std::move(rel));
    g_.edges_.push_back({src, dst, r});
    return g_.edges_.size() - 1;
  }

  void annotate(const NodeId& lu, const EmotionVector& values) {
    if (lu.kind != NodeKind::LexicalUnit) throw Error("annotations are only allowed on lexical units");
    auto i = g_.find(lu);
    if (!i) throw Error("unknown endpoint");
    annotate(*i, values);
  }

  void annotate(NodeIndex lu, const EmotionVector& values) {
    if (lu >= g_.nodes_.size()) throw Error("unknown endpoint");
    if (g_.nodes_[lu].id.kind != NodeKind::LexicalUnit) {
      throw Error("annotations are only allowed on lexical units");
    }
    if (!g_.annotations_.emplace(lu, values).second) {
      throw Error("duplicate annotation for lu " + std::to_string(g_.nodes_[lu].id.id));
    }
  }

  std::optional<NodeIndex> find(const NodeId& n) const { return g_.find(n); }
  std::size_t node_count() const { return g_.nodes_.size(); }

  WordNetGraph build() && {
    g_.build_adjacency();
    return std::move(g_);
  }

 private:
  RelationIndex intern(RelationType rel) {
    auto it = std::find(g_.relations_.begin(), g_.relations_.end(), rel);
    if (it != g_.relations_.end()) return static_cast<RelationIndex>(it - g_.relations_.begin());
    g_.relations_.push_back(std::move(rel));
    return g_.relations_.size() - 1;
  }

  WordNetGraph g_;
};

struct Violation {
  enum class Kind { DanglingEndpoint, InterlingualMismatch, AnnotationRange, AnnotationKind };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::map<std::string, std::size_t> synsets_per_lang;
  std::map<std::string, std::size_t> lus_per_lang;
  std::map<std::string, std::size_t> edges_per_category;
  std::size_t interlingual_edges = 0;
  std::size_t annotations = 0;

  bool ok() const { return violations.empty(); }

  std::size_t count(Violation::Kind k) const {
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                  [k](const Violation& v) { return v.kind == k; }));
  }
};

inline std::string describe(const NodeId& n) {
  return std::string(to_string(n.kind)) + ":" + std::to_string(n.id) + ":" + n.lang;
}

inline ValidationReport validate_graph(const WordNetGraph& g) {
  ValidationReport r;
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    const auto& n = g.node(i);
    if (n.kind == NodeKind::Synset) {
      ++r.synsets_per_lang[n.lang];
    } else {
      ++r.lus_per_lang[n.lang];
    }
  }
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edge(e);
    if (edge.src >= g.node_count() || edge.dst >= g.node_count()) {
      r.violations.push_back({Violation::Kind::DanglingEndpoint, "edge " + std::to_string(e)});
      continue;
    }
    const auto& rel = g.relation(edge.rel);
    ++r.edges_per_category[std::string(to_string(rel.category))];
    const bool cross = g.node(edge.src).lang != g.node(edge.dst).lang;
    if (rel.interlingual) ++r.interlingual_edges;
    if (cross != rel.interlingual) {
      r.violations.push_back({Violation::Kind::InterlingualMismatch,
                              "edge " + describe(g.node(edge.src)) + " -> " + describe(g.node(edge.dst)) +
                                  " '" + rel.name + "' flagged interlingual=" +
                                  (rel.interlingual ? "true" : "false")});
    }
  }
  for (const auto& [lu, values] : g.annotations()) {
    ++r.annotations;
    if (g.node(lu).kind != NodeKind::LexicalUnit) {
      r.violations.push_back({Violation::Kind::AnnotationKind, "annotation on " + describe(g.node(lu))});
    }
    for (std::size_t j = 0; j < kEmotionDims; ++j) {
      const double x = values[j];
      if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
        r.violations.push_back({Violation::Kind::AnnotationRange,
                                "annotation " + describe(g.node(lu)) + " " + std::string(kEmotionNames[j]) +
                                    " = " + std::to_string(x)});
      }
    }
  }
  return r;
}

}  // namespace msse
