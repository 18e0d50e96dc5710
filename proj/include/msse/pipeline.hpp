#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "msse/corpus.hpp"
#include "msse/embed.hpp"
#include "msse/error.hpp"
#include "msse/eval.hpp"
#include "msse/graph.hpp"
#include "msse/graph_io.hpp"
#include "msse/mlp.hpp"
#include "msse/propagate.hpp"
#include "msse/synth.hpp"

namespace msse::pipeline {

namespace fs = std::filesystem;

struct EvalSettings {
  std::size_t folds = 10;
  std::optional<std::uint64_t> seed;
  RegressionPooling pooling = RegressionPooling::Pooled;
  std::vector<std::string> languages;
};

struct PropagateSettings {
  PropagateOptions options;
  std::vector<std::string> seed_languages;  // empty = every annotated LU is seed material
  double val_fraction = 0.1;
};

struct PipelineConfig {
  fs::path graph;  // input graph; unused when synth is configured
  std::optional<SynthConfig> synth;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  WalkParams walk;
  EmbedConfig embed;
  MLPConfig mlp = MLPConfig::deep();
  PropagateSettings propagate;
  EvalSettings eval;
  nlohmann::json source;  // parsed document, used for cache keys
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: '" + name() + "' must be an object");
  }

  /// Rejects keys outside the allowed set.
  void only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, _] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        throw Error("config: unknown key '" + qualified(k) + "'");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const nlohmann::json& raw(const char* key) const { return j_.at(key); }
  Section sub(const char* key) const { return Section(j_.at(key), qualified(key)); }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error("config: '" + qualified(key) + "' has the wrong type");
    }
  }

  void count(const char* key, std::size_t& out, std::size_t min = 1) const {
    const auto& v = j_.contains(key) ? j_.at(key) : nlohmann::json();
    if (v.is_null()) return;
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
      throw Error("config: '" + qualified(key) + "' must be an integer >= " + std::to_string(min));
    }
    out = v.get<std::size_t>();
  }

  void real(const char* key, double& out, double lo, double hi, bool hi_open = false, bool lo_open = false) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw Error("config: '" + qualified(key) + "' must be a number");
    const double x = v.get<double>();
    const bool ok = (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (!ok) {
      throw Error("config: '" + qualified(key) + "' = " + v.dump() + " is out of range " + (lo_open ? "(" : "[") +
                  nlohmann::json(lo).dump() + ", " + nlohmann::json(hi).dump() + (hi_open ? ")" : "]"));
    }
    out = x;
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string name() const { return path_.empty() ? "<root>" : path_; }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

inline std::vector<std::string> languages(const Section& s, const char* key) {
  std::vector<std::string> out;
  s.read(key, out);
  for (const auto& l : out) {
    if (!valid_lang(l)) throw Error("config: '" + s.qualified(key) + "' has invalid language '" + l + "'");
  }
  return out;
}

}  // namespace detail

/// Defaults, as shown in the CLI help.
inline std::string config_help() {
  return R"(Config file (JSON). Unknown keys are rejected.
  graph        path to the JSON-lines graph (required unless "synth" is given)
  seed         global seed (required); stage seeds derive from it by stage name
  threads      worker threads for walks and folds (1)
  synth        communities (4), synsets_per_community (10), lus_per_synset (3),
               languages (["pl","en"]), intra_probability (0.3),
               inter_probability (0.02), interlingual_fraction (0.5),
               label_noise (0.0), seed (derived)
  walk         walks (10000), length (20 node visits), cross_lingual (true),
               start_kind ("any" | "synset" | "lu")
  embed        dim (300), window (5), epochs (5), learning_rate (0.025),
               negatives (5), noise_exponent (0.75), min_count (1),
               subword (off, or [min_n, max_n]), buckets (65536)
  mlp          variant ("deep" | "base"), dropout (0.2), patience (30),
               max_epochs (1000), batch_size (256), learning_rate (0.001)
  propagate    retrain_per_wave (false), threshold (0.5),
               seed_languages (all), val_fraction (0.1)
  eval         folds (10), seed (derived), pooling ("pooled" | "per_dimension"),
               languages (all annotated)
)";
}

inline PipelineConfig parse_config(const nlohmann::json& doc, const fs::path& base_dir = {}) {
  using detail::Section;
  PipelineConfig c;
  c.source = doc;
  const Section root(doc, "");
  root.only({"graph", "seed", "threads", "synth", "walk", "embed", "mlp", "propagate", "eval"});

  if (!root.has("seed")) throw Error("config: 'seed' is required");
  if (!doc["seed"].is_number_unsigned()) throw Error("config: 'seed' must be a non-negative integer");
  c.seed = doc["seed"].get<std::uint64_t>();
  std::size_t threads = 1;
  root.count("threads", threads);
  c.threads = static_cast<unsigned>(threads);

  if (root.has("synth")) {
    const auto s = root.sub("synth");
    s.only({"communities", "synsets_per_community", "lus_per_synset", "languages", "intra_probability",
            "inter_probability", "interlingual_fraction", "label_noise", "seed"});
    SynthConfig sc;
    sc.seed = derive_seed(c.seed, "synth");
    s.count("communities", sc.communities);
    s.count("synsets_per_community", sc.synsets_per_community);
    s.count("lus_per_synset", sc.lus_per_synset);
    if (s.has("languages")) sc.languages = detail::languages(s, "languages");
    s.real("intra_probability", sc.intra_probability, 0.0, 1.0);
    s.real("inter_probability", sc.inter_probability, 0.0, 1.0);
    s.real("interlingual_fraction", sc.interlingual_fraction, 0.0, 1.0);
    s.real("label_noise", sc.label_noise, 0.0, 1.0, true);
    s.read("seed", sc.seed);
    sc.validate();
    c.synth = sc;
    if (root.has("graph")) throw Error("config: give either 'graph' or 'synth', not both");
  } else {
    if (!root.has("graph") || !doc["graph"].is_string()) throw Error("config: 'graph' (path) is required");
    c.graph = doc["graph"].get<std::string>();
    if (c.graph.is_relative() && !base_dir.empty()) c.graph = base_dir / c.graph;
  }

  c.walk.seed = derive_seed(c.seed, "walk");
  c.walk.walks = 10000;
  c.walk.length = 20;
  if (root.has("walk")) {
    const auto s = root.sub("walk");
    s.only({"walks", "length", "cross_lingual", "start_kind"});
    s.count("walks", c.walk.walks);
    s.count("length", c.walk.length);
    s.read("cross_lingual", c.walk.cross_lingual);
    std::string kind = "any";
    s.read("start_kind", kind);
    if (kind == "any") {
      c.walk.start_kind = StartKind::Any;
    } else if (kind == "synset") {
      c.walk.start_kind = StartKind::Synset;
    } else if (kind == "lu") {
      c.walk.start_kind = StartKind::LexicalUnit;
    } else {
      throw Error("config: 'walk.start_kind' must be \"any\", \"synset\" or \"lu\"");
    }
  }

  c.embed.seed = derive_seed(c.seed, "embed");
  if (root.has("embed")) {
    const auto s = root.sub("embed");
    s.only({"dim", "window", "epochs", "learning_rate", "negatives", "noise_exponent", "min_count", "subword",
            "buckets"});
    s.count("dim", c.embed.dim);
    s.count("window", c.embed.window);
    s.count("epochs", c.embed.epochs);
    s.real("learning_rate", c.embed.learning_rate, 0.0, 10.0, false, true);
    s.count("negatives", c.embed.negatives);
    s.real("noise_exponent", c.embed.noise_exponent, 0.0, 1.0);
    std::size_t min_count = c.embed.min_count;
    s.count("min_count", min_count);
    c.embed.min_count = min_count;
    s.count("buckets", c.embed.buckets);
    if (s.has("subword")) {
      const auto& v = s.raw("subword");
      if (v.is_boolean() && !v.get<bool>()) {
        c.embed.subword = {};
      } else if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
        c.embed.subword = {v[0].get<int>(), v[1].get<int>()};
        if (!c.embed.subword.enabled()) throw Error("config: 'embed.subword' must satisfy 1 <= min_n <= max_n");
      } else {
        throw Error("config: 'embed.subword' must be false or [min_n, max_n]");
      }
    }
  }
  c.embed.validate();

  c.mlp.seed = derive_seed(c.seed, "train");
  if (root.has("mlp")) {
    const auto s = root.sub("mlp");
    s.only({"variant", "dropout", "patience", "max_epochs", "batch_size", "learning_rate"});
    std::string variant = "deep";
    s.read("variant", variant);
    if (variant == "deep") {
      c.mlp.set_variant(MlpVariant::Deep);
    } else if (variant == "base") {
      c.mlp.set_variant(MlpVariant::Base);
    } else {
      throw Error("config: 'mlp.variant' must be \"deep\" or \"base\"");
    }
    if (s.has("dropout")) {
      double p = kDeepDropout;
      s.real("dropout", p, 0.0, 1.0, true);
      for (auto& d : c.mlp.dropout) {
        if (d > 0.0) d = p;
      }
    }
    s.count("patience", c.mlp.patience, 0);
    s.count("max_epochs", c.mlp.max_epochs);
    s.count("batch_size", c.mlp.batch_size);
    s.real("learning_rate", c.mlp.learning_rate, 0.0, 10.0, false, true);
  }
  c.mlp.input_dim = c.embed.dim;
  c.mlp.validate();

  if (root.has("propagate")) {
    const auto s = root.sub("propagate");
    s.only({"retrain_per_wave", "threshold", "seed_languages", "val_fraction"});
    s.read("retrain_per_wave", c.propagate.options.retrain_per_wave);
    s.real("threshold", c.propagate.options.threshold, 0.0, 1.0, true, true);
    c.propagate.seed_languages = detail::languages(s, "seed_languages");
    s.real("val_fraction", c.propagate.val_fraction, 0.0, 1.0, true, true);
  }

  if (root.has("eval")) {
    const auto s = root.sub("eval");
    s.only({"folds", "seed", "pooling", "languages"});
    s.count("folds", c.eval.folds, 3);
    if (s.has("seed")) {
      std::uint64_t seed = 0;
      s.read("seed", seed);
      c.eval.seed = seed;
    }
    std::string pooling = "pooled";
    s.read("pooling", pooling);
    if (pooling == "pooled") {
      c.eval.pooling = RegressionPooling::Pooled;
    } else if (pooling == "per_dimension") {
      c.eval.pooling = RegressionPooling::PerDimension;
    } else {
      throw Error("config: 'eval.pooling' must be \"pooled\" or \"per_dimension\"");
    }
    c.eval.languages = detail::languages(s, "languages");
  }
  return c;
}

inline PipelineConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path.string() + ": malformed JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

// ---------------------------------------------------------------------------
// Hashing for the artifact cache

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view data) {
    EVP_DigestUpdate(ctx_, data.data(), data.size());
    return *this;
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      out += buf;
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in.read(buf.data(), buf.size()) || in.gcount() > 0) h.update(std::string_view(buf.data(), in.gcount()));
  return h.hex();
}

// ---------------------------------------------------------------------------
// Stages

enum class Stage { Synth, Walk, Embed, Train, Propagate, Evaluate, All };

inline std::optional<Stage> parse_stage(std::string_view s) {
  static const std::map<std::string_view, Stage> names = {
      {"synth", Stage::Synth}, {"walk", Stage::Walk},           {"embed", Stage::Embed}, {"train", Stage::Train},
      {"propagate", Stage::Propagate}, {"evaluate", Stage::Evaluate}, {"all", Stage::All}};
  auto it = names.find(s);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

inline std::string_view stage_name(Stage s) {
  static constexpr std::string_view names[] = {"synth", "walk", "embed", "train", "propagate", "evaluate", "all"};
  return names[static_cast<int>(s)];
}

struct Artifacts {
  fs::path dir;

  fs::path graph(const PipelineConfig& c) const { return c.synth ? dir / "graph.jsonl" : c.graph; }
  fs::path corpus() const { return dir / "corpus.txt"; }
  fs::path embeddings() const { return dir / "embeddings.txt"; }
  fs::path model() const { return dir / "model.bin"; }
  fs::path train_report() const { return dir / "train_report.json"; }
  fs::path propagation() const { return dir / "propagation.jsonl"; }
  fs::path metrics() const { return dir / "metrics.json"; }
  fs::path metrics_table() const { return dir / "metrics.txt"; }
  fs::path manifest() const { return dir / "cache.json"; }
};

class Runner {
 public:
  Runner(PipelineConfig cfg, fs::path out_dir, std::ostream& out = std::cout)
      : cfg_(std::move(cfg)), art_{std::move(out_dir)}, out_(out) {}

  /// Runs one stage (or all, in dependency order with caching).
  void run(Stage stage) {
    fs::create_directories(art_.dir);
    load_manifest();
    if (stage == Stage::All) {
      if (cfg_.synth) step(Stage::Synth, true);
      for (Stage s : {Stage::Walk, Stage::Embed, Stage::Train, Stage::Propagate, Stage::Evaluate}) step(s, true);
    } else {
      step(stage, false);
    }
  }

  const Artifacts& artifacts() const { return art_; }

 private:
  std::vector<fs::path> inputs(Stage s) const {
    const auto g = art_.graph(cfg_);
    switch (s) {
      case Stage::Synth: return {};
      case Stage::Walk: return {g};
      case Stage::Embed: return {art_.corpus()};
      case Stage::Train: return {g, art_.embeddings()};
      case Stage::Propagate: return {g, art_.embeddings(), art_.model()};
      case Stage::Evaluate: return {g, art_.embeddings()};
      case Stage::All: break;
    }
    return {};
  }

  std::vector<fs::path> outputs(Stage s) const {
    switch (s) {
      case Stage::Synth: return {art_.graph(cfg_)};
      case Stage::Walk: return {art_.corpus()};
      case Stage::Embed: return {art_.embeddings()};
      case Stage::Train: return {art_.model(), art_.train_report()};
      case Stage::Propagate: return {art_.propagation()};
      case Stage::Evaluate: return {art_.metrics(), art_.metrics_table()};
      case Stage::All: break;
    }
    return {};
  }

  /// Config subset that determines a stage's output.
  nlohmann::json stage_config(Stage s) const {
    const auto& src = cfg_.source;
    auto part = [&](const char* k) { return src.contains(k) ? src[k] : nlohmann::json(); };
    nlohmann::json j = {{"seed", cfg_.seed}};
    switch (s) {
      case Stage::Synth: j["synth"] = part("synth"); break;
      case Stage::Walk: j["walk"] = part("walk"); break;
      case Stage::Embed: j["embed"] = part("embed"); break;
      case Stage::Train:
        j["mlp"] = part("mlp");
        j["propagate"] = part("propagate");
        break;
      case Stage::Propagate: j["propagate"] = part("propagate"); break;
      case Stage::Evaluate:
        j["mlp"] = part("mlp");
        j["propagate"] = part("propagate");
        j["eval"] = part("eval");
        break;
      case Stage::All: break;
    }
    return j;
  }

  std::string cache_key(Stage s) const {
    Sha256 h;
    h.update(stage_name(s)).update("\n").update(stage_config(s).dump()).update("\n");
    for (const auto& p : inputs(s)) h.update(file_digest(p)).update("\n");
    return h.hex();
  }

  void require_inputs(Stage s) const {
    static const std::map<std::string, std::string> producer = {
        {"corpus.txt", "walk"}, {"embeddings.txt", "embed"}, {"model.bin", "train"}, {"graph.jsonl", "synth"}};
    for (const auto& p : inputs(s)) {
      if (fs::exists(p)) continue;
      std::string msg = std::string(stage_name(s)) + ": missing input " + p.string();
      auto it = producer.find(p.filename().string());
      if (it != producer.end() && (p.parent_path() == art_.dir)) {
        msg += " (" + std::string(it->first == "embeddings.txt" ? "embedding file" : it->first) + "; run the '" +
               it->second + "' stage first)";
      }
      throw Error(msg);
    }
  }

  void step(Stage s, bool use_cache) {
    require_inputs(s);
    const std::string key = cache_key(s);
    const auto name = std::string(stage_name(s));
    const auto outs = outputs(s);
    if (use_cache && manifest_.value(name, "") == key &&
        std::all_of(outs.begin(), outs.end(), [](const fs::path& p) { return fs::exists(p); })) {
      out_ << name << ": cached\n";
      return;
    }
    spdlog::info("running stage {}", name);
    switch (s) {
      case Stage::Synth: run_synth(); break;
      case Stage::Walk: run_walk(); break;
      case Stage::Embed: run_embed(); break;
      case Stage::Train: run_train(); break;
      case Stage::Propagate: run_propagate(); break;
      case Stage::Evaluate: run_evaluate(); break;
      case Stage::All: break;
    }
    manifest_[name] = key;
    save_manifest();
  }

  void load_manifest() {
    manifest_ = nlohmann::json::object();
    std::ifstream in(art_.manifest());
    if (!in) return;
    try {
      manifest_ = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      spdlog::warn("ignoring unreadable cache manifest {}", art_.manifest().string());
      manifest_ = nlohmann::json::object();
    }
  }

  void save_manifest() const {
    std::ofstream out(art_.manifest(), std::ios::binary);
    out << manifest_.dump(2) << '\n';
  }

  const WordNetGraph& graph() {
    if (!graph_) graph_ = parse_wordnet_file(art_.graph(cfg_));
    return *graph_;
  }

  const EmbeddingTable& embeddings() {
    if (!embeddings_) embeddings_ = read_embeddings_file(art_.embeddings());
    return *embeddings_;
  }

  MLPConfig mlp_config() { return cfg_.mlp; }

  /// Deterministic seed/validation split of the annotated LUs used by the
  /// train and propagate stages.
  std::pair<Annotations, Annotations> seed_split() {
    const auto& g = graph();
    auto pool = annotated_pool(g, cfg_.propagate.seed_languages);
    if (pool.size() < 4) throw Error("need at least 4 annotated lexical units to train");
    Rng rng(derive_seed(cfg_.seed, "seed-split"));
    rng.shuffle(std::span<NodeIndex>(pool));
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg_.propagate.val_fraction * double(pool.size()))), 2,
        pool.size() - 2);
    Annotations train, val;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (i < n_val ? val : train).emplace(pool[i], *g.annotation(pool[i]));
    }
    return {std::move(train), std::move(val)};
  }

  void run_synth() {
    const auto s = generate_synth(*cfg_.synth);
    write_wordnet_file(s.graph, art_.graph(cfg_));
    graph_.reset();
    out_ << "synth: " << s.graph.node_count() << " nodes, " << s.graph.edge_count() << " edges, "
         << s.graph.annotations().size() << " annotations -> " << art_.graph(cfg_).string() << '\n';
  }

  void run_walk() {
    const auto& g = graph();
    const auto report = validate_graph(g);
    if (!report.ok()) {
      spdlog::warn("graph has {} validation issue(s); first: {}", report.violations.size(),
                   report.violations.front().message);
    }
    const auto corpus = generate_corpus(g, cfg_.walk, cfg_.threads);
    write_corpus_file(corpus, art_.corpus());
    std::size_t tokens = 0;
    for (const auto& s : corpus.sequences) tokens += s.size();
    out_ << "walk: " << corpus.sequences.size() << " sequences, " << tokens << " tokens ("
         << (cfg_.walk.cross_lingual ? "cross-lingual" : "monolingual") << ") -> " << art_.corpus().string() << '\n';
  }

  void run_embed() {
    const auto corpus = read_corpus_file(art_.corpus());
    const auto table = train_embeddings(corpus, cfg_.embed);
    write_embeddings_file(table, art_.embeddings());
    embeddings_.reset();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", table.loss_history().empty() ? 0.0 : table.loss_history().back());
    out_ << "embed: " << table.size() << " tokens x " << table.dim() << " dims, final loss " << buf << " -> "
         << art_.embeddings().string() << '\n';
  }

  void run_train() {
    const auto& g = graph();
    const auto& emb = embeddings();
    auto [train, val] = seed_split();
    std::vector<NodeIndex> all;
    for (const auto& [k, _] : train) all.push_back(k);
    for (const auto& [k, _] : val) all.push_back(k);
    msse::detail::require_embeddings(g, emb, {all});
    MLPConfig c = mlp_config();
    c.input_dim = emb.dim();
    const auto trained =
        train_mlp<float>(c, msse::detail::make_dataset(g, emb, train), msse::detail::make_dataset(g, emb, val));
    save_model_file(trained.model, art_.model());
    nlohmann::json rep = {{"epochs_run", trained.report.epochs_run},
                          {"best_epoch", trained.report.best_epoch},
                          {"best_val_loss", trained.report.best_val_loss},
                          {"train_loss", trained.report.train_loss},
                          {"val_loss", trained.report.val_loss},
                          {"train_size", train.size()},
                          {"val_size", val.size()}};
    std::ofstream(art_.train_report(), std::ios::binary) << rep.dump(2) << '\n';
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu epochs, best val FVU %.4f at epoch %zu", trained.report.epochs_run,
                  trained.report.best_val_loss, trained.report.best_epoch);
    out_ << "train: " << to_string(c.variant) << " model, " << buf << " -> " << art_.model().string() << '\n';
  }

  void run_propagate() {
    const auto& g = graph();
    const auto& emb = embeddings();
    auto [train, val] = seed_split();
    std::vector<NodeIndex> targets;
    for (auto lu : g.lexical_units()) {
      if (!train.count(lu) && !val.count(lu) && emb.contains(token_of(g.node(lu)))) targets.push_back(lu);
    }
    const auto model = load_model_file<float>(art_.model());
    const auto result = propagate(g, emb, mlp_config(), train, val, targets, cfg_.propagate.options,
                                  cfg_.propagate.options.retrain_per_wave ? nullptr : &model);
    write_propagation_file(g, result, art_.propagation());
    out_ << "propagate: " << result.predictions.size() << " predictions in " << result.plan.waves.size()
         << " waves, " << result.plan.unreachable.size() << " unreachable -> " << art_.propagation().string()
         << '\n';
  }

  void run_evaluate() {
    const auto& g = graph();
    const auto& emb = embeddings();
    CvConfig cv;
    cv.mlp = mlp_config();
    cv.mlp.input_dim = emb.dim();
    cv.propagate = cfg_.propagate.options;
    cv.seed = cfg_.eval.seed.value_or(derive_seed(cfg_.seed, "evaluate"));
    cv.folds = cfg_.eval.folds;
    cv.pooling = cfg_.eval.pooling;
    cv.languages = cfg_.eval.languages;
    cv.threads = cfg_.threads;
    const auto result = run_cv(g, emb, cv);
    std::ofstream(art_.metrics(), std::ios::binary) << metrics_json(result).dump(2) << '\n';
    {
      std::ofstream table(art_.metrics_table(), std::ios::binary);
      write_metrics_table(result, table);
    }
    const auto mi = summarize(result, micro_f1);
    const auto ma = summarize(result, macro_f1);
    const auto r2 = summarize(result, [](const FoldResult& f) { return f.regression.r2; });
    char buf[160];
    std::snprintf(buf, sizeof buf, "micro-F1 %.3f ± %.3f, macro-F1 %.3f ± %.3f, R² %.3f ± %.3f", mi.mean, mi.sd,
                  ma.mean, ma.sd, r2.mean, r2.sd);
    out_ << "evaluate: " << result.folds.size() << " folds, " << buf << " -> " << art_.metrics().string() << '\n';
  }

  PipelineConfig cfg_;
  Artifacts art_;
  std::ostream& out_;
  nlohmann::json manifest_;
  std::optional<WordNetGraph> graph_;
  std::optional<EmbeddingTable> embeddings_;
};

/// Sets up stderr logging; the level comes from MSSE_LOG_LEVEL (default warn).
inline void init_logging() {
  auto logger = spdlog::stderr_color_mt("msse");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("MSSE_LOG_LEVEL");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

/// CLI entry point for one stage; returns the process exit status.
inline int run(Stage stage, const fs::path& config_path, const fs::path& out_dir, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  try {
    Runner runner(parse_config_file(config_path), out_dir, out);
    runner.run(stage);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace msse::pipeline
