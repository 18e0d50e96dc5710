#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "msse/graph.hpp"

namespace msse {

namespace detail {

inline NodeId node_ref_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_string() || !j[1].is_number_unsigned() ||
      !j[2].is_string()) {
    throw Error("node reference must be [kind, id, lang]");
  }
  auto kind = parse_node_kind(j[0].get<std::string>());
  if (!kind) throw Error("unknown node kind '" + j[0].get<std::string>() + "'");
  return {*kind, j[1].get<std::uint64_t>(), j[2].get<std::string>()};
}

inline nlohmann::json node_ref_to_json(const NodeId& n) {
  return nlohmann::json::array({std::string(to_string(n.kind)), n.id, n.lang});
}

template <typename T>
T required(const nlohmann::json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw Error(std::string("missing field '") + field + "'");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(std::string("field '") + field + "' has the wrong type");
  }
}

inline void parse_line(GraphBuilder& b, const nlohmann::json& obj) {
  if (!obj.is_object()) throw Error("line is not a JSON object");
  const auto kind = required<std::string>(obj, "kind");
  if (kind == "synset" || kind == "lu") {
    const auto id = required<std::uint64_t>(obj, "id");
    auto lang = required<std::string>(obj, "lang");
    std::string lemma;
    if (kind == "lu" && obj.contains("lemma")) lemma = required<std::string>(obj, "lemma");
    b.add_node({*parse_node_kind(kind), id, std::move(lang)}, std::move(lemma));
  } else if (kind == "edge") {
    if (!obj.contains("src") || !obj.contains("dst")) throw Error("edge needs src and dst");
    const NodeId src = node_ref_from_json(obj["src"]);
    const NodeId dst = node_ref_from_json(obj["dst"]);
    RelationType rel;
    rel.name = required<std::string>(obj, "rel");
    const auto cat = required<std::string>(obj, "category");
    auto parsed = parse_category(cat);
    if (!parsed) throw Error("bad category '" + cat + "'");
    rel.category = *parsed;
    rel.interlingual = obj.contains("interlingual") ? required<bool>(obj, "interlingual") : false;
    if (!b.find(src) || !b.find(dst)) throw Error("unknown endpoint");
    b.add_edge(src, dst, std::move(rel));
  } else if (kind == "annotation") {
    const auto& ref = obj.contains("lu") ? obj["lu"] : nlohmann::json();
    if (!ref.is_array() || ref.size() != 2 || !ref[0].is_number_unsigned() || !ref[1].is_string()) {
      throw Error("annotation needs \"lu\": [id, lang]");
    }
    const auto values = required<std::vector<double>>(obj, "values");
    b.annotate(lexical_unit(ref[0].get<std::uint64_t>(), ref[1].get<std::string>()),
               EmotionVector::from(values));
  } else {
    throw Error("unknown kind '" + kind + "'");
  }
}

}  // namespace detail

/// Reads the JSON-lines graph format. Blank lines are ignored.
inline WordNetGraph parse_wordnet(std::istream& in) {
  GraphBuilder b;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      detail::parse_line(b, nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (in.bad()) throw Error("read failure");
  return std::move(b).build();
}

inline WordNetGraph parse_wordnet_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file " + path.string());
  return parse_wordnet(in);
}

inline void write_wordnet(const WordNetGraph& g, std::ostream& out) {
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    const auto& rec = g.record(i);
    nlohmann::json j = {{"kind", to_string(rec.id.kind)}, {"id", rec.id.id}, {"lang", rec.id.lang}};
    if (!rec.lemma.empty()) j["lemma"] = rec.lemma;
    out << j.dump() << '\n';
  }
  for (const Edge& e : g.edges()) {
    const auto& rel = g.relation(e.rel);
    nlohmann::json j = {{"kind", "edge"},
                        {"src", detail::node_ref_to_json(g.node(e.src))},
                        {"dst", detail::node_ref_to_json(g.node(e.dst))},
                        {"rel", rel.name},
                        {"category", to_string(rel.category)},
                        {"interlingual", rel.interlingual}};
    out << j.dump() << '\n';
  }
  for (const auto& [lu, values] : g.annotations()) {
    const auto& n = g.node(lu);
    nlohmann::json j = {{"kind", "annotation"},
                        {"lu", nlohmann::json::array({n.id, n.lang})},
                        {"values", values.values}};
    out << j.dump() << '\n';
  }
}

inline void write_wordnet_file(const WordNetGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write graph file " + path.string());
  write_wordnet(g, out);
  if (!out) throw Error("write failure on " + path.string());
}

}  // namespace msse
