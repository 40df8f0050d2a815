#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hyfair/autodiff.hpp"
#include "hyfair/corpus.hpp"
#include "hyfair/kernels.hpp"

namespace hyfair {

/// Embeddings of what the current dialogue window mentions, plus everything said before it.
struct SessionContext {
  DenseMatrix current;
  DenseMatrix history;
};

struct FairRepresentation {
  DenseMatrix fair;           // stacked pooled interest vectors, one row each
  std::vector<double> reco;   // recommendation query
  DenseMatrix conv;           // attention of the current context over `fair`
};

struct CandidateItemTable {
  DenseMatrix embeddings;     // |I| x d
  std::vector<ItemId> ids;    // row -> item id
};

struct RecommendationList {
  std::string session_id;
  std::vector<ItemId> items;
  std::vector<double> scores;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// 0.5 * (mean(fair) + mean(current)).
inline ad::Var fuse_reco(ad::Tape& t, ad::Var fair, ad::Var current) {
  return ad::scale(t, ad::add(t, ad::mean_rows(t, fair), ad::mean_rows(t, current)), 0.5);
}

/// Attention of the current context over the stacked interest vectors.
inline ad::Var fuse_conv(ad::Tape& t, ParameterStore& store, const std::string& prefix, std::size_t heads, ad::Var fair, ad::Var current) {
  return multi_head_attention(t, store, prefix, heads, current, fair, fair);
}

/// `expected_rows` is the number of active interest representations.
inline FairRepresentation fuse_fair(ParameterStore& store, const std::string& prefix, std::size_t heads, const DenseMatrix& fair,
                                    const SessionContext& ctx, std::size_t expected_rows) {
  if (fair.rows() != expected_rows)
    fail(ErrorCode::MissingView, "expected " + std::to_string(expected_rows) + " interest vectors, got " + std::to_string(fair.rows()));
  if (ctx.current.rows() == 0) fail(ErrorCode::EmptySelection, "empty current context");
  ad::Tape t;
  ad::Var f = t.constant(fair);
  ad::Var c = t.constant(ctx.current);
  FairRepresentation out;
  out.fair = fair;
  out.reco = t.value(fuse_reco(t, f, c)).data();
  out.conv = t.value(fuse_conv(t, store, prefix, heads, f, c));
  return out;
}

/// Row-wise softmax(Q I^T): one probability vector per query row.
inline ad::Var score_items(ad::Tape& t, ad::Var queries, ad::Var items) { return ad::softmax_rows(t, ad::matmul_nt(t, queries, items)); }

inline std::vector<double> score_items(std::span<const double> query, const CandidateItemTable& items) {
  if (query.size() != items.embeddings.cols())
    fail(ErrorCode::ShapeMismatch, "query dim " + std::to_string(query.size()) + " vs item dim " + std::to_string(items.embeddings.cols()));
  ad::Tape t;
  return t.value(score_items(t, t.constant(DenseMatrix::row_vector(query)), t.constant(items.embeddings))).data();
}

/// Multi-label binary cross-entropy summed over every (session, item) cell.
inline ad::Var rec_loss(ad::Tape& t, ad::Var probabilities, DenseMatrix labels) {
  return ad::binary_cross_entropy_sum(t, probabilities, std::move(labels), kProbabilityFloor);
}

inline double rec_loss(const DenseMatrix& probabilities, const DenseMatrix& labels) {
  ad::Tape t;
  return t.scalar(rec_loss(t, t.constant(probabilities), labels));
}

inline double joint_loss(double contrastive, double task, double weight) { return weight * contrastive + task; }

inline ad::Var joint_loss(ad::Tape& t, std::optional<ad::Var> contrastive, ad::Var task, double weight) {
  if (!contrastive || weight == 0.0) return task;
  return ad::add(t, ad::scale(t, *contrastive, weight), task);
}

/// Top-K by score, ties broken by ascending item id.
inline RecommendationList rank_topk(std::string session_id, std::span<const double> scores, std::span<const ItemId> ids, std::size_t k) {
  if (scores.size() != ids.size()) fail(ErrorCode::ShapeMismatch, "scores and ids differ in length");
  if (k > scores.size()) fail(ErrorCode::KTooLarge, "K=" + std::to_string(k) + " exceeds " + std::to_string(scores.size()) + " items");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b]; };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  RecommendationList out;
  out.session_id = std::move(session_id);
  for (std::size_t i = 0; i < k; ++i) {
    out.items.push_back(ids[order[i]]);
    out.scores.push_back(scores[order[i]]);
  }
  return out;
}

/// 1-based position of `item` within the first k entries, or 0.
inline std::size_t rank_in_top_k(const RecommendationList& list, ItemId item, std::size_t k) {
  const std::size_t n = std::min(k, list.items.size());
  for (std::size_t i = 0; i < n; ++i)
    if (list.items[i] == item) return i + 1;
  return 0;
}

struct RankingMetrics {
  double recall = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;
};

/// Single-relevant-item ranking metrics averaged over lists.
inline RankingMetrics ranking_metrics(const std::vector<RecommendationList>& lists, const std::map<std::string, ItemId>& truth, std::size_t k) {
  RankingMetrics m;
  if (lists.empty()) return m;
  for (const auto& l : lists) {
    auto it = truth.find(l.session_id);
    if (it == truth.end()) fail(ErrorCode::MissingGroundTruth, "no ground truth for session " + l.session_id);
    const std::size_t r = rank_in_top_k(l, it->second, k);
    if (r == 0) continue;
    m.recall += 1.0;
    m.mrr += 1.0 / static_cast<double>(r);
    m.ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  const double n = static_cast<double>(lists.size());
  m.recall /= n;
  m.mrr /= n;
  m.ndcg /= n;
  return m;
}

inline double recall_at_k(const std::vector<RecommendationList>& lists, const std::map<std::string, ItemId>& truth, std::size_t k) {
  return ranking_metrics(lists, truth, k).recall;
}
inline double mrr_at_k(const std::vector<RecommendationList>& lists, const std::map<std::string, ItemId>& truth, std::size_t k) {
  return ranking_metrics(lists, truth, k).mrr;
}
inline double ndcg_at_k(const std::vector<RecommendationList>& lists, const std::map<std::string, ItemId>& truth, std::size_t k) {
  return ranking_metrics(lists, truth, k).ndcg;
}

/// Last ground-truth item per session.
inline std::map<std::string, ItemId> truth_from_sessions(const std::vector<SessionRecord>& sessions) {
  std::map<std::string, ItemId> truth;
  for (const auto& s : sessions)
    if (!s.ground_truth.empty()) truth[s.session_id] = s.ground_truth.back().item;
  return truth;
}

inline nlohmann::ordered_json list_to_json(const RecommendationList& l) {
  nlohmann::ordered_json j;
  j["session_id"] = l.session_id;
  j["items"] = l.items;
  j["scores"] = l.scores;
  return j;
}

inline std::vector<RecommendationList> read_lists(std::istream& is) {
  std::vector<RecommendationList> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      RecommendationList l;
      l.session_id = j.at("session_id").get<std::string>();
      l.items = j.at("items").get<std::vector<ItemId>>();
      if (j.contains("scores")) l.scores = j.at("scores").get<std::vector<double>>();
      out.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<RecommendationList> load_lists(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  return read_lists(is);
}

inline void write_lists(std::ostream& os, const std::vector<RecommendationList>& lists) {
  for (const auto& l : lists) os << list_to_json(l).dump() << '\n';
}

}  // namespace hyfair
