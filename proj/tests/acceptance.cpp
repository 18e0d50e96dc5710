// Acceptance checks: one PASS/FAIL line per criterion. Arguments select a
// subset by number, e.g. `msse_acceptance 5 7`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>

#include <spdlog/spdlog.h>

#include "msse/msse.hpp"
#include "test_support.hpp"

using namespace msse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-7, std::abs(a), std::abs(b)}); }

std::string format_num(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// --- 1 ----------------------------------------------------------------------

Outcome walk_invariants() {
  Rng rng(20240101);
  std::size_t corpora = 0, sequences = 0, mono = 0;
  while (corpora < 1000) {
    SynthConfig sc;
    sc.communities = 1 + rng.below(5);
    sc.synsets_per_community = 1 + rng.below(12);
    sc.lus_per_synset = 1 + rng.below(4);
    sc.languages = {"pl", "en", "de"};
    sc.languages.resize(1 + rng.below(3));
    sc.intra_probability = rng.uniform(0.05, 0.6);
    sc.inter_probability = sc.intra_probability * rng.uniform(0.0, 0.5);
    sc.interlingual_fraction = rng.uniform();
    sc.seed = rng();
    const std::size_t nodes = sc.languages.size() * sc.communities * sc.synsets_per_community * (1 + sc.lus_per_synset);
    if (nodes > 500) continue;
    const auto g = generate_synth(sc).graph;

    WalkParams p;
    p.walks = 10 + rng.below(60);
    p.length = 1 + rng.below(25);
    p.seed = rng();
    p.cross_lingual = rng.bernoulli(0.5);
    p.start_kind = static_cast<StartKind>(rng.below(3));
    const auto corpus = generate_corpus(g, p);
    for (const auto& seq : corpus.sequences) {
      const auto v = test::walk_violation(seq, p.length, p.cross_lingual);
      if (!v.empty()) return {false, "corpus " + std::to_string(corpora) + ": " + v};
    }
    sequences += corpus.sequences.size();
    mono += !p.cross_lingual;
    ++corpora;
  }
  return {true, std::to_string(corpora) + " corpora, " + std::to_string(sequences) + " sequences, " +
                    std::to_string(mono) + " monolingual corpora"};
}

// --- 2 ----------------------------------------------------------------------

Outcome sgns_oracle() {
  using Wide = long double;
  Rng rng(777);
  const Wide h = 1e-5L;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 50, negatives = 5;
    std::vector<double> center(d);
    std::vector<std::vector<double>> rows(negatives + 1, std::vector<double>(d));
    for (auto& x : center) x = rng.uniform(-0.5, 0.5);
    for (auto& r : rows) {
      for (auto& x : r) x = rng.uniform(-0.5, 0.5);
    }
    std::vector<std::span<const double>> t(rows.begin(), rows.end());
    const auto g = sgns_gradient<double>(center, t);

    std::vector<Wide> wc(center.begin(), center.end());
    std::vector<std::vector<Wide>> wr;
    for (const auto& r : rows) wr.emplace_back(r.begin(), r.end());
    auto loss = [&] {
      std::vector<std::span<const Wide>> wt(wr.begin(), wr.end());
      return sgns_loss<Wide>(wc, wt);
    };
    auto probe = [&](Wide& x) {
      const Wide keep = x;
      x = keep + h;
      const Wide up = loss();
      x = keep - h;
      const Wide down = loss();
      x = keep;
      return double((up - down) / (2 * h));
    };
    for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, rel_err(g.center[i], probe(wc[i])));
    for (std::size_t j = 0; j <= negatives; ++j) {
      for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, rel_err(g.targets[j][i], probe(wr[j][i])));
    }
  }
  return {worst < 1e-4, "100 triples, d = 50, worst relative error " + format_num("%.2e", worst)};
}

// --- 3 ----------------------------------------------------------------------

double mlp_worst_error(const MLPConfig& cfg, std::uint64_t seed) {
  using Wide = long double;
  const Wide h = 1e-5L;
  Rng rng(seed);
  const Mlp<double> m(cfg);
  Matrix<double> x(300, 5), y(26, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform();

  Rng mask(seed + 1);
  ForwardCache<double> cache;
  Matrix<double> grad;
  fvu_loss<double>(m.forward_train(x, mask, &cache), y, &grad);
  const auto grads = m.backward(cache, grad);

  Mlp<Wide> wide(cfg);
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    wide.layers()[l].weight = m.layers()[l].weight.cast<Wide>();
    wide.layers()[l].bias = m.layers()[l].bias.cast<Wide>();
  }
  const Matrix<Wide> xw = x.cast<Wide>(), yw = y.cast<Wide>();
  auto loss = [&] {
    Rng same(seed + 1);
    return fvu_loss<Wide>(wide.forward_train(xw, same), yw);
  };
  double worst = 0.0;
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    auto check = [&](auto& param, const auto& analytic) {
      for (Eigen::Index i = 0; i < param.size(); ++i) {
        const Wide keep = param.data()[i];
        param.data()[i] = keep + h;
        const Wide up = loss();
        param.data()[i] = keep - h;
        const Wide down = loss();
        param.data()[i] = keep;
        worst = std::max(worst, rel_err(analytic.data()[i], double((up - down) / (2 * h))));
      }
    };
    check(wide.layers()[l].weight, grads[l].weight);
    check(wide.layers()[l].bias, grads[l].bias);
  }
  return worst;
}

Outcome mlp_oracle() {
  auto base = MLPConfig::base();
  base.seed = 31;
  auto deep = MLPConfig::custom(300, {64, 32, 16}, {kDeepDropout, kDeepDropout, 0.0});
  deep.seed = 32;
  const double eb = mlp_worst_error(base, 41), ed = mlp_worst_error(deep, 42);
  return {eb < 1e-4 && ed < 1e-4,
          "Base worst " + format_num("%.2e", eb) + ", 300-64-32-16-26 with dropout worst " + format_num("%.2e", ed)};
}

// --- 4 ----------------------------------------------------------------------

Outcome loss_semantics() {
  Rng rng(4);
  for (Eigen::Index n : {2, 5, 17, 64}) {
    Matrix<double> t(26, n);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform();
    const Matrix<double> mean = t.rowwise().mean().replicate(1, n);
    const double perfect = fvu_loss<double>(t, t), mean_loss = fvu_loss<double>(mean, t);
    if (perfect != 0.0) return {false, "fvu(target, target) = " + format_num("%.3e", perfect)};
    if (std::abs(mean_loss - 1.0) > 1e-12) return {false, "fvu(batch mean) = " + format_num("%.17g", mean_loss)};
  }
  return {true, "fvu(t, t) = 0 and fvu(batch mean, t) = 1 for batches of 2, 5, 17, 64"};
}

// --- shared synth benchmark for 5, 6, 7 --------------------------------------

struct Benchmark {
  SynthGraph synth;
  EmbeddingTable cross, mono;
};

SynthConfig benchmark_graph() {
  SynthConfig sc;  // 4 communities x 2 languages
  sc.interlingual_fraction = 0.5;
  sc.label_noise = 0.1;
  sc.seed = 2023;
  return sc;
}

EmbeddingTable benchmark_embeddings(const WordNetGraph& g, bool cross_lingual) {
  WalkParams p;
  p.walks = 10000;
  p.length = 20;
  p.seed = 5;
  p.cross_lingual = cross_lingual;
  EmbedConfig ec;
  ec.dim = 50;
  ec.seed = 6;
  return train_embeddings(generate_corpus(g, p), ec);
}

Benchmark& benchmark() {
  static Benchmark b = [] {
    Benchmark out{generate_synth(benchmark_graph()), {}, {}};
    out.cross = benchmark_embeddings(out.synth.graph, true);
    out.mono = benchmark_embeddings(out.synth.graph, false);
    return out;
  }();
  return b;
}

Outcome alignment() {
  const auto& b = benchmark();
  const auto& g = b.synth.graph;
  const auto& emb = b.cross;
  auto vec = [&](NodeIndex i) { return emb.vector_of(token_of(g.node(i))); };
  double linked = 0.0;
  std::size_t pairs = 0;
  std::vector<NodeIndex> pl, en;
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    if (g.node(i).kind != NodeKind::Synset) continue;
    (g.node(i).lang == "pl" ? pl : en).push_back(i);
  }
  for (EdgeIndex k = 0; k < g.edges().size(); ++k) {
    if (!g.relation_of(k).interlingual) continue;
    const auto& e = g.edges()[k];
    linked += cosine(vec(e.src), vec(e.dst));
    ++pairs;
  }
  linked /= double(pairs);
  Rng rng(55);
  double random = 0.0;
  const std::size_t samples = 5000;
  for (std::size_t s = 0; s < samples; ++s) random += cosine(vec(pl[rng.below(pl.size())]), vec(en[rng.below(en.size())]));
  random /= double(samples);
  const double gap = linked - random;
  return {gap >= 0.15, std::to_string(pairs) + " interlingual pairs, mean cosine " + format_num("%.3f", linked) +
                           " vs random cross-language " + format_num("%.3f", random) + ", gap " + format_num("%.3f", gap)};
}

CvConfig md_config() {
  CvConfig cv;
  cv.mlp = MLPConfig::deep(50);
  cv.mlp.batch_size = 32;
  cv.seed = 9;
  return cv;
}

CvConfig hb_config() {
  CvConfig cv;
  cv.mlp = MLPConfig::base(50);
  cv.mlp.batch_size = 32;
  cv.seed = 9;
  return cv;
}

const CvResult& md_result() {
  static const CvResult r = run_cv(benchmark().synth.graph, benchmark().cross, md_config());
  return r;
}

Outcome beats_baseline() {
  const auto& r = md_result();
  const double model = summarize(r, macro_f1).mean;
  const double base = summarize(r, [](const FoldResult& f) { return f.baseline.macro.f1; }).mean;
  return {model >= base + 0.15, "MD macro-F1 " + format_num("%.3f", model) + " vs majority baseline " + format_num("%.3f", base) +
                                    " (needs >= " + format_num("%.3f", base + 0.15) + ")"};
}

Outcome ordering() {
  const auto& md = md_result();
  const auto hb = run_cv(benchmark().synth.graph, benchmark().mono, hb_config());
  const auto c = compare_runs(md, hb);
  const double a = stats::mean(c.a), b = stats::mean(c.b);
  std::cout << "  paired comparison, MD (a) vs HB (b):\n";
  std::cout << comparison_json(c).dump(2) << '\n';
  std::string verdict = c.t_test ? (c.significant() ? "significant" : "not significant") : c.note;
  return {a >= b, "mean micro-F1 MD " + format_num("%.4f", a) + " vs HB " + format_num("%.4f", b) + ", t-test " + verdict};
}

// --- 8 ----------------------------------------------------------------------

Outcome stats_oracles() {
  std::ifstream in(std::string(MSSE_FIXTURE_DIR) + "/stats_fixtures.json");
  const auto doc = nlohmann::json::parse(in);
  double worst = 0.0;
  std::size_t n = 0;
  for (const auto& f : doc["shapiro"]) {
    const auto r = stats::shapiro_wilk(f["x"].get<std::vector<double>>());
    worst = std::max({worst, std::abs(r.w - f["w"].get<double>()), std::abs(r.p_value - f["p"].get<double>())});
    ++n;
  }
  bool sqrt3 = false;
  for (const auto& f : doc["ttest_rel"]) {
    const auto r = stats::paired_t_test(f["a"].get<std::vector<double>>(), f["b"].get<std::vector<double>>());
    worst = std::max({worst, std::abs(r.t - f["t"].get<double>()), std::abs(r.p_value - f["p"].get<double>()),
                      std::abs(r.df - f["df"].get<double>())});
    sqrt3 |= f["name"] == "hand_sqrt3" && std::abs(r.t - std::sqrt(3.0)) < 1e-12 && r.df == 2.0;
    ++n;
  }
  return {worst < 1e-4 && sqrt3 && n == 40,
          std::to_string(n) + " fixtures, worst absolute deviation " + format_num("%.2e", worst) +
              (sqrt3 ? ", t = sqrt(3), df = 2 reproduced" : ", t = sqrt(3) case missing")};
}

// --- 9 ----------------------------------------------------------------------

Outcome fold_protocol() {
  std::size_t checked = 0;
  std::vector<std::size_t> sizes;
  for (std::size_t n = 10; n <= 400; ++n) sizes.push_back(n);
  for (std::size_t n : {997u, 1000u, 4321u, 10000u}) sizes.push_back(n);
  for (std::size_t n : sizes) {
    std::vector<std::uint64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = 3 * i + 1;
    const auto folds = make_folds<std::uint64_t>(ids, n * 31 + 7);
    if (folds.size() != 10) return {false, "N = " + std::to_string(n) + ": fold count"};
    const std::size_t lo = n / 10, hi = (n + 9) / 10;
    std::multiset<std::uint64_t> tests;
    for (const auto& f : folds) {
      std::set<std::uint64_t> all(f.train.begin(), f.train.end());
      all.insert(f.val.begin(), f.val.end());
      all.insert(f.test.begin(), f.test.end());
      const bool cover = all.size() == n && f.train.size() + f.val.size() + f.test.size() == n;
      const bool balanced = f.test.size() >= lo && f.test.size() <= hi && f.val.size() >= lo && f.val.size() <= hi;
      const bool exact = n % 10 != 0 || (f.test.size() == n / 10 && f.val.size() == n / 10 && f.train.size() == 8 * n / 10);
      if (!cover || !balanced || !exact) return {false, "N = " + std::to_string(n) + ", fold " + std::to_string(f.index)};
      tests.insert(f.test.begin(), f.test.end());
    }
    if (tests != std::multiset<std::uint64_t>(ids.begin(), ids.end())) {
      return {false, "N = " + std::to_string(n) + ": test blocks are not a partition"};
    }
    ++checked;
  }
  return {true, std::to_string(checked) + " pool sizes from 10 to 10000"};
}

// --- 10 ---------------------------------------------------------------------

Outcome determinism() {
  test::TempDir dir;
  test::spit(dir / "config.json", R"({
    "seed": 42,
    "synth": {"communities": 4, "synsets_per_community": 10, "lus_per_synset": 3, "label_noise": 0.1},
    "walk": {"walks": 5000, "length": 20},
    "embed": {"dim": 50},
    "mlp": {"variant": "base"},
    "propagate": {"seed_languages": ["pl"]},
    "eval": {"folds": 10}
  })");
  for (const char* out : {"a", "b"}) {
    const std::string cmd = std::string("\"") + MSSE_CLI_PATH + "\" all --config \"" + (dir / "config.json").string() +
                            "\" --out-dir \"" + (dir / out).string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
  }
  std::string detail;
  bool same = true;
  for (const char* f : {"corpus.txt", "embeddings.txt", "metrics.json", "metrics.txt"}) {
    const auto a = test::slurp(dir / "a" / f), b = test::slurp(dir / "b" / f);
    const bool eq = !a.empty() && a == b;
    same &= eq;
    detail += std::string(detail.empty() ? "" : ", ") + f + (eq ? " identical" : " DIFFERS");
  }
  return {same, detail};
}

struct Criterion {
  int number;
  const char* name;
  double budget_s;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria = {
      {1, "walk invariants", 60, walk_invariants},
      {2, "SGNS gradient oracle", 10, sgns_oracle},
      {3, "MLP gradient oracle", 30, mlp_oracle},
      {4, "loss semantics", 0, loss_semantics},
      {5, "cross-lingual alignment", 300, alignment},
      {6, "propagation beats baseline", 600, beats_baseline},
      {7, "MD >= HB ordering", 0, ordering},
      {8, "statistics oracles", 0, stats_oracles},
      {9, "fold protocol", 0, fold_protocol},
      {10, "end-to-end determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = format_num("%.1f s", secs);
    if (c.budget_s > 0) {
      timing += " of " + format_num("%.0f s", c.budget_s) + " budget";
      if (secs > c.budget_s) {
        o.pass = false;
        o.detail += "; over the runtime budget";
      }
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name << "): " << o.detail << " ["
              << timing << "]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
