#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hyfair/config.hpp"
#include "hyfair/fairness.hpp"
#include "hyfair/model.hpp"
#include "hyfair/params.hpp"
#include "hyfair/report.hpp"
#include "hyfair/simulate.hpp"
#include "hyfair/synthetic.hpp"
#include "hyfair/train.hpp"

namespace hyfair {

/// Reads every data file the config names; empty paths give empty side data.
inline Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.sessions.empty()) fail(ErrorCode::ConfigError, "sessions path is not set");
  Dataset d;
  d.sessions = load_sessions(cfg.sessions);
  if (!cfg.dbpedia.empty()) d.dbpedia = load_knowledge_graph(cfg.dbpedia);
  if (!cfg.conceptnet.empty()) d.conceptnet = load_knowledge_graph(cfg.conceptnet);
  if (!cfg.reviews.empty()) d.reviews = load_reviews(cfg.reviews);
  if (cfg.lexicon_pos.empty() != cfg.lexicon_neg.empty()) fail(ErrorCode::ConfigError, "lexicon_pos and lexicon_neg must be set together");
  if (!cfg.lexicon_pos.empty()) d.lexicon = load_lexicon(cfg.lexicon_pos, cfg.lexicon_neg);
  return d;
}

inline BuildOptions build_options(const RunConfig& cfg) {
  BuildOptions o;
  o.khop = cfg.k_hop;
  o.views = cfg.active_views;
  o.threads = cfg.threads;
  return o;
}

inline ViewBuilder make_builder(const Dataset& d, const RunConfig& cfg, std::optional<std::vector<ItemId>> catalog = std::nullopt) {
  return ViewBuilder(d.sessions, d.dbpedia, d.conceptnet, d.reviews, d.lexicon, build_options(cfg), std::move(catalog));
}

/// Popularity from the training split only.
inline PopularityTable training_popularity(const std::vector<SessionRecord>& sessions, const std::vector<ItemId>& catalog, std::size_t eval_every) {
  std::vector<SessionRecord> train;
  for (std::size_t i = 0; i < sessions.size(); ++i)
    if (!is_eval_session(i, eval_every)) train.push_back(sessions[i]);
  return popularity_from_sessions(train, catalog);
}

/// Writes `<view>.hg`, `<view>.lg`, `<view>.nodes` per active view plus `popularity.tsv`.
inline void build_graphs(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const Dataset d = load_dataset(cfg);
  const ViewBundle b = make_builder(d, cfg).build();
  std::filesystem::create_directories(out_dir);
  auto open = [&](const std::string& name) {
    std::ofstream os(out_dir / name);
    if (!os) fail(ErrorCode::IoError, "cannot write " + (out_dir / name).string());
    return os;
  };
  for (const auto& [v, vd] : b.views) {
    const std::string stem(view_name(v));
    auto hg = open(stem + ".hg");
    write_hypergraph(hg, vd.hypergraph);
    auto lg = open(stem + ".lg");
    write_line_graph(lg, vd.line_graph);
    auto nodes = open(stem + ".nodes");
    for (const auto& s : vd.nodes.symbols()) nodes << s << '\n';
  }
  auto pop = open("popularity.tsv");
  write_popularity(pop, training_popularity(d.sessions, b.catalog, cfg.eval_every));
}

// ---- checkpoints -----------------------------------------------------------------------------

struct TrainedModel {
  Model model;
  ParameterStore store;
  std::vector<EpochLog> log;
};

/// Config as stored in a checkpoint: thread count is an execution detail and is left out.
inline std::string stored_config(RunConfig cfg) {
  cfg.threads = 1;
  return config_to_text(cfg);
}

inline std::map<std::string, std::string> checkpoint_metadata(const TrainedModel& tm) {
  nlohmann::json catalog = tm.model.bundle().catalog;
  nlohmann::json vocab = tm.model.vocabulary().tokens();
  return {{"config", stored_config(tm.model.config())},
          {"catalog", catalog.dump()},
          {"vocabulary", vocab.dump()},
          {"epochs_trained", std::to_string(tm.log.size())}};
}

/// Builds graphs, initializes parameters from the seed and trains on the training split.
inline TrainedModel train_pipeline(const RunConfig& cfg, std::ostream* log = nullptr) {
  validate_config(cfg);
  const std::uint64_t seed = cfg.require_seed();
  const Dataset d = load_dataset(cfg);
  ViewBundle bundle = make_builder(d, cfg).build();
  Vocabulary vocab = Vocabulary::build(d.sessions, bundle.catalog);
  TrainedModel tm{Model(cfg, std::move(bundle), d.sessions, std::move(vocab)), ParameterStore(seed), {}};
  tm.model.init_parameters(tm.store);
  tm.log = train_model(tm.model, tm.store, split_indices(d.sessions.size(), cfg.eval_every, false), log);
  return tm;
}

/// Restores a trained model. `sessions_path` replaces the stored sessions file; `threads`
/// overrides the thread count.
inline TrainedModel load_trained(const std::string& checkpoint_path, const std::string& sessions_path = {}, unsigned threads = 0) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  auto meta = [&](const char* key) -> const std::string& {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end()) fail(ErrorCode::ParseError, checkpoint_path + ": missing metadata '" + key + "'");
    return it->second;
  };
  std::istringstream cs(meta("config"));
  RunConfig cfg = parse_config(cs);
  if (!sessions_path.empty()) cfg.sessions = sessions_path;
  if (threads) cfg.threads = threads;
  std::vector<ItemId> catalog;
  Vocabulary vocab;
  try {
    catalog = nlohmann::json::parse(meta("catalog")).get<std::vector<ItemId>>();
    for (const auto& tok : nlohmann::json::parse(meta("vocabulary")).get<std::vector<std::string>>()) vocab.add(tok);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, checkpoint_path + ": " + e.what());
  }
  const Dataset d = load_dataset(cfg);
  ViewBundle bundle = make_builder(d, cfg, catalog).build();
  TrainedModel tm{Model(cfg, std::move(bundle), d.sessions, std::move(vocab)), ParameterStore(cfg.seed.value_or(0)), {}};
  tm.model.init_parameters(tm.store);
  if (ck.params.entries().size() != tm.store.entries().size())
    fail(ErrorCode::ShapeMismatch, "checkpoint has " + std::to_string(ck.params.entries().size()) + " parameters, model expects " +
                                       std::to_string(tm.store.entries().size()));
  for (auto& [name, p] : tm.store.entries()) {
    const auto& src = ck.params.at(name).value;
    if (!src.same_shape(p.value)) fail(ErrorCode::ShapeMismatch, "parameter " + name + " is " + src.shape_string() + ", expected " + p.value.shape_string());
    p.value = src;
  }
  return tm;
}

// ---- commands --------------------------------------------------------------------------------

/// Sessions with a ground truth, optionally restricted to one side of the split.
inline std::vector<std::size_t> select_sessions(const Model& m, const std::string& split) {
  if (split != "all" && split != "train" && split != "eval") fail(ErrorCode::ConfigError, "split must be all, train or eval");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.sessions().size(); ++i) {
    if (m.sessions()[i].ground_truth.empty()) continue;
    if (split != "all" && is_eval_session(i, m.config().eval_every) != (split == "eval")) continue;
    out.push_back(i);
  }
  return out;
}

inline std::vector<RecommendationList> recommend_pipeline(TrainedModel& tm, std::size_t k, const std::string& split) {
  if (k == 0) fail(ErrorCode::ConfigError, "k must be positive");
  if (k > tm.model.catalog_size()) fail(ErrorCode::KTooLarge, "K=" + std::to_string(k) + " exceeds catalog of " + std::to_string(tm.model.catalog_size()));
  return tm.model.recommend(tm.store, select_sessions(tm.model, split), k);
}

inline nlohmann::ordered_json evaluate_lists(const std::vector<RecommendationList>& lists, const std::map<std::string, ItemId>& truth,
                                             const std::vector<std::size_t>& ks) {
  std::map<std::size_t, RankingMetrics> by_k;
  for (std::size_t k : ks) by_k[k] = ranking_metrics(lists, truth, k);
  return ranking_to_json(by_k);
}

/// Popularity-ranker and trained-model loop traces share sessions, graphs and popularity.
inline LoopTrace simulate_pipeline(const RunConfig& cfg, TrainedModel* trained) {
  validate_config(cfg);
  cfg.require_seed();
  const Dataset d = load_dataset(cfg);
  std::optional<std::vector<ItemId>> catalog;
  if (trained) catalog = trained->model.bundle().catalog;
  ViewBuilder builder = make_builder(d, cfg, catalog);
  const PopularityTable pop = training_popularity(d.sessions, builder.catalog(), cfg.eval_every);
  UserModel user;
  if (cfg.user_model == "always-accept-top1") {
    user = always_accept_top1();
  } else {
    if (cfg.preferences.empty()) fail(ErrorCode::ConfigError, "preference-threshold needs a preferences file");
    user = preference_threshold(load_preferences(cfg.preferences), cfg.accept_threshold);
  }
  if (cfg.ranker == "popularity") return simulate_loop(cfg, builder, popularity_ranker(pop), user, pop);
  if (!trained) fail(ErrorCode::ConfigError, "the model ranker needs a checkpoint");
  return simulate_loop(cfg, builder, model_ranker(trained->model, trained->store), user, pop);
}

}  // namespace hyfair
