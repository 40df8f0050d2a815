#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hyfair/config.hpp"
#include "hyfair/corpus.hpp"
#include "hyfair/fairness.hpp"
#include "hyfair/model.hpp"
#include "hyfair/recommender.hpp"
#include "hyfair/synthetic.hpp"

namespace hyfair {

struct AcceptedItem {
  std::string session_id;
  ItemId item;
};

struct LoopTurn {
  std::size_t turn = 0;
  FairnessReport fairness;
  std::map<std::size_t, RankingMetrics> ranking;
  std::vector<AcceptedItem> accepted;
};

struct LoopTrace {
  std::vector<LoopTurn> turns;
};

/// Produces top-k lists for every session with a ground truth.
using Ranker = std::function<std::vector<RecommendationList>(const ViewBundle&, const std::vector<SessionRecord>&, std::size_t k)>;

/// Chooses at most one item from a list.
using UserModel = std::function<std::optional<ItemId>(const RecommendationList&)>;

/// Frozen global popularity order, identical for every session.
inline Ranker popularity_ranker(PopularityTable pop) {
  return [pop = std::move(pop)](const ViewBundle& bundle, const std::vector<SessionRecord>& sessions, std::size_t k) {
    std::vector<double> scores;
    for (ItemId i : bundle.catalog) {
      auto it = pop.popularity.find(i);
      scores.push_back(it == pop.popularity.end() ? 0.0 : it->second);
    }
    std::vector<RecommendationList> out;
    for (const auto& s : sessions)
      if (!s.ground_truth.empty()) out.push_back(rank_topk(s.session_id, scores, bundle.catalog, k));
    return out;
  };
}

/// Trained model over the current graphs. The model keeps the latest graphs it was given.
inline Ranker model_ranker(Model& model, ParameterStore& store) {
  return [&model, &store](const ViewBundle& bundle, const std::vector<SessionRecord>& sessions, std::size_t k) {
    model.set_graphs(bundle, sessions);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < sessions.size(); ++i)
      if (!sessions[i].ground_truth.empty()) idx.push_back(i);
    return model.recommend(store, idx, k);
  };
}

inline UserModel always_accept_top1() {
  return [](const RecommendationList& l) -> std::optional<ItemId> {
    if (l.items.empty()) return std::nullopt;
    return l.items.front();
  };
}

/// Accepts the highest-ranked item whose planted preference exceeds the threshold.
inline UserModel preference_threshold(Preferences prefs, double threshold) {
  return [prefs = std::move(prefs), threshold](const RecommendationList& l) -> std::optional<ItemId> {
    for (ItemId i : l.items)
      if (prefs.score(l.session_id, i) > threshold) return i;
    return std::nullopt;
  };
}

/// Inserts a user turn mentioning `item` just before the last ground-truth turn, so it becomes
/// part of the observed context.
inline void append_accepted(SessionRecord& s, ItemId item) {
  Turn t{Role::User, {"i", "accept", item_symbol(item)}, {item}, {}};
  const std::size_t at = s.observed_turn_count();
  s.turns.insert(s.turns.begin() + static_cast<std::ptrdiff_t>(at), std::move(t));
  for (auto& g : s.ground_truth)
    if (g.turn >= at) ++g.turn;
}

/// Ranks, scores, lets the user model accept, feeds acceptances back as context and rebuilds
/// the views, `cfg.turns` times. Only sessions with an acceptance get new hyperedges unless
/// `cfg.full_rebuild` is set.
inline LoopTrace simulate_loop(const RunConfig& cfg, ViewBuilder& builder, const Ranker& ranker, const UserModel& user, const PopularityTable& pop) {
  if (cfg.turns == 0) fail(ErrorCode::ConfigError, "turns must be at least 1");
  std::size_t kmax = 0;
  for (std::size_t k : cfg.ks) kmax = std::max(kmax, k);
  LoopTrace trace;
  std::vector<SessionRecord> sessions = builder.sessions();
  const auto truth = truth_from_sessions(sessions);
  ViewBundle bundle = builder.build(0);
  for (std::size_t turn = 0; turn < cfg.turns; ++turn) {
    LoopTurn lt;
    lt.turn = turn;
    const auto lists = ranker(bundle, sessions, std::min(kmax, bundle.catalog.size()));
    lt.fairness = fairness_report(lists, pop, bundle.catalog.size(), cfg.ks);
    lt.fairness.metadata["turn"] = std::to_string(turn);
    for (std::size_t k : cfg.ks) lt.ranking[k] = ranking_metrics(lists, truth, k);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < sessions.size(); ++i) index[sessions[i].session_id] = i;
    std::vector<std::size_t> touched;
    for (const auto& l : lists) {
      auto choice = user(l);
      if (!choice) continue;
      lt.accepted.push_back({l.session_id, *choice});
      const std::size_t i = index.at(l.session_id);
      append_accepted(sessions[i], *choice);
      touched.push_back(i);
    }
    trace.turns.push_back(std::move(lt));
    if (turn + 1 == cfg.turns) break;
    if (cfg.full_rebuild) {
      for (std::size_t i = 0; i < sessions.size(); ++i) builder.update_session(i, sessions[i]);
    } else {
      for (std::size_t i : touched) builder.update_session(i, sessions[i]);
    }
    bundle = builder.build(static_cast<int>(turn + 1));
  }
  return trace;
}

}  // namespace hyfair
