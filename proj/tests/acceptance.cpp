// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "hyfair/pipeline.hpp"
#include "support.hpp"

using namespace hyfair;
using namespace hyfair::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HYFAIR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("hyfair_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

/// Default planted-preference corpus: 200 sessions, 100 items, 2 clusters.
const fs::path& synthetic_dir() {
  static const fs::path dir = [] {
    fs::path d = workdir() / "synthetic";
    write_synthetic(d, make_synthetic(SyntheticSpec{}), 7);
    return d;
  }();
  return dir;
}

RunConfig learning_config() {
  RunConfig c = load_config((synthetic_dir() / "config.txt").string());
  c.dim = 32;
  c.heads = 4;
  c.lr = 0.01;
  c.epochs = 40;
  c.batch_size = 32;
  c.max_len = 8;
  c.seed = 7;
  c.ks = {10};
  c.turns = 10;
  return c;
}

// ---- 1 -----------------------------------------------------------------------------------------

Outcome line_graph_oracle() {
  std::mt19937_64 rng(2024);
  std::size_t graphs = 0, mismatches = 0, max_nodes = 0, max_edges = 0;
  for (; graphs < 120; ++graphs) {
    const std::size_t nodes = 1 + uniform_index(rng, 200);
    const std::size_t edges = 1 + uniform_index(rng, 500);
    const auto g = random_hypergraph(rng, nodes, edges, 2 + uniform_index(rng, 12));
    max_nodes = std::max(max_nodes, g.node_count());
    max_edges = std::max(max_edges, g.edge_count());
    const LineGraph oracle = induce_line_graph_naive(g);
    for (unsigned threads : {1u, 4u, 8u})
      if (!(induce_line_graph_fast(g, threads) == oracle)) ++mismatches;
  }
  const bool ok = mismatches == 0 && max_nodes <= 200 && max_edges <= 500;
  return {ok, std::to_string(graphs) + " graphs (<= " + std::to_string(max_nodes) + " nodes, <= " + std::to_string(max_edges) +
                  " hyperedges) x threads {1,4,8}, " + std::to_string(mismatches) + " mismatches"};
}

// ---- 2 -----------------------------------------------------------------------------------------

Outcome convolution_oracle() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  std::size_t instances = 0;
  for (int trial = 0; trial < 30; ++trial, instances += 2) {
    const auto g = random_hypergraph(rng, 5 + uniform_index(rng, 46), 3 + uniform_index(rng, 40), 6);
    const std::size_t d = 2 + uniform_index(rng, 6);
    const std::size_t layers = 1 + uniform_index(rng, 3);
    std::vector<DenseMatrix> ws;
    for (std::size_t l = 0; l < layers; ++l) ws.push_back(random_matrix(rng, d, d));

    const DenseMatrix x = random_matrix(rng, g.node_count(), d);
    const DenseMatrix p = dense_propagation(g);
    DenseMatrix hg = x;
    for (const auto& w : ws) hg = naive_product(naive_product(p, hg), w);
    worst = std::max(worst, max_abs_diff(hgconv_forward(g, x, ws), hg));

    const DenseMatrix e = random_matrix(rng, g.edge_count(), d);
    const DenseMatrix a = dense_line_adjacency(g);
    DenseMatrix lg = e;
    for (const auto& w : ws) {
      lg = naive_product(naive_product(a, lg), w);
      for (double& v : lg.data()) v = v > 0.0 ? v : 0.0;
    }
    worst = std::max(worst, max_abs_diff(gconv_forward(induce_line_graph_naive(g), e, ws, Activation::Relu), lg));
  }
  return {worst <= 1e-10, std::to_string(instances) + " instances (<= 50 nodes), max |diff| " + std::to_string(worst)};
}

// ---- 3 -----------------------------------------------------------------------------------------

Outcome gradient_suite() {
  SyntheticSpec spec;
  spec.sessions = 6;
  spec.items = 10;
  spec.genres_per_cluster = 1;
  spec.keywords_per_cluster = 3;
  spec.words_per_cluster = 2;
  spec.seed = 5;
  const SyntheticData data = make_synthetic(spec);
  RunConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.seed = 3;
  cfg.tau = 0.5;
  cfg.eval_every = 0;
  ViewBundle bundle = make_builder(data.dataset, cfg).build();
  std::size_t max_nodes = 0;
  for (const auto& [v, vd] : bundle.views) max_nodes = std::max(max_nodes, vd.nodes.size());
  Vocabulary vocab = Vocabulary::build(data.dataset.sessions, bundle.catalog);
  const Model model(cfg, std::move(bundle), data.dataset.sessions, std::move(vocab));
  ParameterStore store(*cfg.seed);
  model.init_parameters(store);
  std::vector<std::size_t> batch(spec.sessions);
  std::iota(batch.begin(), batch.end(), 0);

  using Objective = std::function<ad::Var(ad::Tape&)>;
  const std::vector<std::pair<std::string, Objective>> objectives{
      {"J_CL", [&](ad::Tape& t) { return *model.contrastive_objective(t, store, batch); }},
      {"J_CL_R", [&](ad::Tape& t) { return model.recommendation_objective(t, store, batch).total; }},
      {"J_CL_C", [&](ad::Tape& t) { return model.conversation_objective(t, store, batch).total; }},
  };
  // Central differences resolve a gradient only to about eps |L| / h, so entries smaller than
  // eps |L| / (h 1e-4) cannot show a 1e-4 relative agreement; that bound floors the denominator.
  constexpr double step = 1e-5;
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, objective] : objectives) {
    auto loss = [&](bool bp) {
      ad::Tape t;
      ad::Var l = objective(t);
      if (bp) t.backward(l);
      return t.scalar(l);
    };
    const double magnitude = std::abs(loss(false));
    const double floor = std::max(1e-6, std::numeric_limits<double>::epsilon() * magnitude / (step * 1e-4));
    const auto r = check_gradients(store, loss, step, floor);
    worst = std::max(worst, r.max_relative_error);
    detail += name + " " + fmt(r.max_relative_error, 7) + " over " + std::to_string(r.entries) + " entries (|L| " + fmt(magnitude, 2) +
              ", floor " + fmt(floor * 1e6, 2) + "e-6); ";
  }
  const bool ok = worst < 1e-4 && max_nodes <= 20 && model.vocabulary().size() <= 50;
  return {ok, detail + "nodes <= " + std::to_string(max_nodes) + ", vocab " + std::to_string(model.vocabulary().size())};
}

// ---- 4 -----------------------------------------------------------------------------------------

Outcome closed_forms() {
  std::mt19937_64 rng(4);
  double infonce_err = 0.0, softmax_err = 0.0, token_err = 0.0, copy_err = 0.0;
  for (std::size_t b : {2u, 5u, 16u, 64u}) {
    const DenseMatrix row = random_matrix(rng, 1, 6);
    DenseMatrix same(b, 6);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t c = 0; c < 6; ++c) same(r, c) = row(0, c);
    infonce_err = std::max(infonce_err, std::abs(infonce(same, same, 0.07) - std::log(static_cast<double>(b))));
  }
  for (int trial = 0; trial < 20; ++trial) {
    CandidateItemTable items{random_matrix(rng, 10 + trial, 5, 3.0), {}};
    const DenseMatrix q = random_matrix(rng, 1, 5, 3.0);
    double s = 0.0;
    for (double v : score_items(q.row(0), items)) s += v;
    softmax_err = std::max(softmax_err, std::abs(s - 1.0));
  }
  DecoderConfig dc;
  dc.dim = 8;
  dc.heads = 2;
  Vocabulary vocab;
  for (const char* tok : {"i", "@1", "like", "@2", "it", "@3"}) vocab.add(tok);
  ParameterStore store(9);
  init_decoder(store, dc, vocab.size());
  const DenseMatrix fair = random_matrix(rng, 8, 8), curr = random_matrix(rng, 2, 8), hist = random_matrix(rng, 3, 8);
  const std::vector<std::size_t> copy{vocab.id_of("@1"), vocab.id_of("@3")};
  auto distribution = [&](const std::vector<std::size_t>& ids) {
    ad::Tape t;
    ad::Var prev = ad::gather_rows(t, t.param(store, "dec.tokens"), {vocab.bos(), vocab.id_of("like")});
    auto tr = decoder_block(t, store, dc, prev, t.constant(fair), t.constant(curr), t.constant(hist));
    return t.value(token_distribution(t, store, tr.out, t.constant(fair), ids, vocab.size()));
  };
  const DenseMatrix with = distribution(copy), without = distribution({});
  for (std::size_t r = 0; r < with.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < with.cols(); ++c) {
      s += with(r, c);
      // With the copy head the mixture is (P1 + P2 + P3) / 3; without it (P1 + P2) / 2.
      const bool copyable = std::find(copy.begin(), copy.end(), c) != copy.end();
      if (!copyable) copy_err = std::max(copy_err, std::abs(3.0 * with(r, c) - 2.0 * without(r, c)));
    }
    token_err = std::max(token_err, std::abs(s - 1.0));
  }
  const bool ok = infonce_err <= 1e-9 && softmax_err <= 1e-12 && token_err <= 1e-12 && copy_err <= 1e-12;
  return {ok, "InfoNCE |L - ln B| " + std::to_string(infonce_err) + ", softmax |sum - 1| " + std::to_string(softmax_err) + ", token |sum - 1| " +
                  std::to_string(token_err) + ", P3 off-item " + std::to_string(copy_err)};
}

// ---- 5 -----------------------------------------------------------------------------------------

Outcome fairness_oracles() {
  double closed = 0.0;
  closed = std::max(closed, std::abs(gini_from_counts({1, 1, 1, 1}, 4) - 0.0));
  closed = std::max(closed, std::abs(gini_from_counts({0, 0, 0, 4}, 4) - 0.75));
  closed = std::max(closed, std::abs(kl_from_counts({3, 3, 3, 3}, 4) - 0.0));
  for (std::size_t m : {2u, 7u, 100u}) closed = std::max(closed, std::abs(kl_from_counts({5}, m) - std::log(static_cast<double>(m))));

  std::mt19937_64 rng(55);
  const std::size_t catalog = 60;
  PopularityTable pop;
  for (ItemId i = 0; i < static_cast<ItemId>(catalog); ++i) pop.popularity[i] = unit_uniform(rng);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<RecommendationList> lists;
    for (int s = 0; s <= trial; ++s) {
      RecommendationList l;
      std::set<ItemId> used;
      while (l.items.size() < 12) {
        const auto i = static_cast<ItemId>(uniform_index(rng, catalog));
        if (used.insert(i).second) l.items.push_back(i);
      }
      lists.push_back(std::move(l));
    }
    for (std::size_t k : {1u, 5u, 12u}) {
      double sum = 0.0;
      std::set<ItemId> distinct;
      for (const auto& l : lists)
        for (std::size_t i = 0; i < k; ++i) {
          sum += pop.popularity.at(l.items[i]);
          distinct.insert(l.items[i]);
        }
      worst = std::max(worst, std::abs(avg_popularity_at_k(lists, pop, k) - sum / static_cast<double>(lists.size() * k)));
      worst = std::max(worst, std::abs(difference_at_k(lists, catalog, k) - static_cast<double>(distinct.size()) / static_cast<double>(catalog)));
    }
  }
  return {closed <= 1e-12 && worst <= 1e-12, "closed forms max err " + std::to_string(closed) + ", A@K/D@K oracle max err " + std::to_string(worst)};
}

// ---- 6, 7 --------------------------------------------------------------------------------------

std::optional<TrainedModel> trained;

Outcome learning_sanity() {
  const RunConfig c = learning_config();
  trained.emplace(train_pipeline(c));
  const auto lists = recommend_pipeline(*trained, 10, "eval");
  const auto& sessions = trained->model.sessions();
  const double recall = recall_at_k(lists, truth_from_sessions(sessions), 10);
  // One target per session, so a random top-10 over the unseen candidates hits with
  // probability 10 / candidates. The bar uses the larger of that rate and 0.096.
  double random_rate = 0.0;
  for (const auto i : split_indices(sessions.size(), c.eval_every, true)) {
    const double candidates = static_cast<double>(trained->model.catalog_size() - trained->model.features().at(i).seen_items.size());
    random_rate += 10.0 / candidates;
  }
  random_rate /= static_cast<double>(lists.size());
  const double baseline = std::max(0.096, random_rate);
  return {recall >= 3.0 * baseline, "R@10 " + fmt(recall) + " on " + std::to_string(lists.size()) + " held-out sessions after " +
                                        std::to_string(c.epochs) + " epochs, random-ranker rate " + fmt(random_rate) + ", threshold 3 x " +
                                        fmt(baseline) + " = " + fmt(3.0 * baseline)};
}

Outcome fairness_direction() {
  if (!trained) return {false, "no trained model"};
  RunConfig c = learning_config();
  c.ranker = "popularity";
  const LoopTrace pop = simulate_pipeline(c, nullptr);
  c.ranker = "model";
  const LoopTrace model = simulate_pipeline(c, &*trained);
  bool monotone = pop.turns.size() == 10;
  std::string gini;
  for (std::size_t t = 0; t < pop.turns.size(); ++t) {
    const double g = pop.turns[t].fairness.by_k.at(10).gini;
    gini += (t ? "," : "") + fmt(g, 3);
    if (t && g < pop.turns[t - 1].fairness.by_k.at(10).gini) monotone = false;
  }
  const auto& pf = pop.turns.back().fairness.by_k.at(10);
  const auto& mf = model.turns.back().fairness.by_k.at(10);
  const bool ok = monotone && mf.avg_popularity < pf.avg_popularity && mf.gini < pf.gini;
  return {ok, "popularity G@10 per turn [" + gini + "]; final A@10 model " + fmt(mf.avg_popularity) + " vs popularity " + fmt(pf.avg_popularity) +
                  ", G@10 model " + fmt(mf.gini) + " vs popularity " + fmt(pf.gini)};
}

// ---- 8 -----------------------------------------------------------------------------------------

/// Full CLI pipeline; returns every artifact's bytes keyed by file name.
std::map<std::string, std::string> cli_pipeline(unsigned threads) {
  const fs::path out = workdir() / ("threads" + std::to_string(threads));
  fs::create_directories(out);
  const std::string cfg = (synthetic_dir() / "config.txt").string();
  const std::string t = std::to_string(threads);
  const std::string common = " --set dim=16 --set heads=2 --set lr=0.01 --set max_len=8 --set ks=5,10 --set threads=" + t;
  auto p = [&](const char* name) { return (out / name).string(); };
  const std::vector<std::string> steps{
      "build-graphs --config " + cfg + common + " --out " + p("graphs"),
      "train --config " + cfg + common + " --seed 21 --epochs 3 --out " + p("model.ckpt") + " --log " + p("train.log"),
      "recommend --checkpoint " + p("model.ckpt") + " --k 10 --split eval --threads " + t + " --out " + p("lists.jsonl"),
      "evaluate --lists " + p("lists.jsonl") + " --truth " + (synthetic_dir() / "sessions.jsonl").string() + " --k 5,10 --out " + p("metrics.json"),
      "fairness --lists " + p("lists.jsonl") + " --pop " + p("graphs") + "/popularity.tsv --catalog-size 100 --k 5,10 --out " + p("fairness.json"),
      "simulate-loop --config " + cfg + common + " --seed 21 --checkpoint " + p("model.ckpt") + " --turns 4 --out " + p("trace.json"),
      "report --in " + p("metrics.json") + " --out " + p("metrics.txt"),
      "report --in " + p("fairness.json") + " --out " + p("fairness.txt"),
      "report --in " + p("trace.json") + " --out " + p("trace.txt"),
  };
  std::map<std::string, std::string> artifacts;
  for (const auto& s : steps)
    if (int rc = run_cli(s); rc != 0) {
      artifacts["failed: " + s.substr(0, s.find(' ')) + " exit " + std::to_string(rc)] = "";
      return artifacts;
    }
  for (const auto& entry : fs::recursive_directory_iterator(out))
    if (entry.is_regular_file()) artifacts[fs::relative(entry.path(), out).string()] = slurp(entry.path());
  return artifacts;
}

Outcome determinism() {
  const auto a = cli_pipeline(1);
  const auto b = cli_pipeline(4);
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : a)
    if (!b.count(name) || b.at(name) != bytes) differing.push_back(name);
  for (const auto& [name, _] : b)
    if (!a.count(name)) differing.push_back(name);
  bool failed_step = false;
  for (const auto& [name, _] : a) failed_step |= name.rfind("failed", 0) == 0;
  std::string detail = std::to_string(a.size()) + " artifacts compared (threads 1 vs 4)";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {!failed_step && differing.empty() && a.size() >= 10, detail};
}

// ---- 9 -----------------------------------------------------------------------------------------

/// Pair terms counted directly: unordered pairs of active interests sharing a level.
std::size_t brute_pair_count(const std::set<InterestKey>& active) {
  std::size_t n = 0;
  for (auto a = active.begin(); a != active.end(); ++a)
    for (auto b = std::next(a); b != active.end(); ++b) n += a->level == b->level;
  return n;
}

Outcome ablation_structure() {
  const std::string cfg = (synthetic_dir() / "config.txt").string();
  const fs::path out = workdir() / "ablation";
  fs::create_directories(out);
  RunConfig base = learning_config();
  base.dim = 8;
  base.heads = 2;
  base.epochs = 1;
  const std::size_t full = contrastive_pair_count(base.active_interests());
  bool ok = full == 12 && brute_pair_count(base.active_interests()) == 12;
  std::string detail = "all interests: " + std::to_string(full) + " pairs;";
  for (const auto& k : all_interests()) {
    const std::string name = interest_name(k);
    RunConfig c = base;
    c.disabled_interests = {k};
    TrainedModel tm = train_pipeline(c);
    const auto active = tm.model.active_interests();
    const std::size_t pairs = contrastive_pair_count(active);
    const bool lib_ok = active.size() == 7 && !active.count(k) && pairs == 9 && brute_pair_count(active) == 9 && !recommend_pipeline(tm, 10, "eval").empty();
    const std::string ck = (out / ("model_" + std::string(1, name[0]) + name[2] + ".ckpt")).string();
    const bool cli_ok = run_cli("train --config " + cfg + " --seed 3 --epochs 1 --set dim=8 --set heads=2 --set disabled_interests=" + name + " --out " + ck) == 0 &&
                        run_cli("recommend --checkpoint " + ck + " --k 10 --split eval --out " + ck + ".lists") == 0 &&
                        run_cli("simulate-loop --config " + cfg + " --seed 3 --set dim=8 --set heads=2 --set disabled_interests=" + name + " --checkpoint " + ck +
                                " --turns 2 --out " + ck + ".trace") == 0;
    ok = ok && lib_ok && cli_ok;
    detail += " -" + name + ": " + std::to_string(pairs) + (lib_ok && cli_ok ? "" : " (FAILED)");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"line-graph oracle equivalence", line_graph_oracle},
      {"convolution oracle equivalence", convolution_oracle},
      {"gradient suite", gradient_suite},
      {"closed-form checks", closed_forms},
      {"fairness metric oracles", fairness_oracles},
      {"learning sanity", learning_sanity},
      {"fairness direction", fairness_direction},
      {"determinism", determinism},
      {"ablation structure", ablation_structure},
  };
  // Wall-clock budgets in seconds; 0 means none.
  const double budget[] = {30, 10, 60, 0, 0, 120, 0, 0, 0};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget[i] > 0 && secs >= budget[i]) {
      o.pass = false;
      o.detail += "; over the " + fmt(budget[i], 0) + " s budget";
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail << " (" << fmt(secs, 2) << " s)"
              << std::endl;
  }
  std::error_code ec;
  fs::remove_all(workdir(), ec);
  return failures == 0 ? 0 : 1;
}
