#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hyfair/autodiff.hpp"
#include "hyfair/config.hpp"
#include "hyfair/contrastive.hpp"
#include "hyfair/corpus.hpp"
#include "hyfair/decoder.hpp"
#include "hyfair/kernels.hpp"
#include "hyfair/params.hpp"
#include "hyfair/recommender.hpp"

namespace hyfair {

/// Sparse operators of one view, derived from its hypergraph and line graph.
struct ViewOperators {
  HypergraphOperators hyper;
  std::shared_ptr<const SparseMatrix> line;
  std::size_t node_count = 0;
};

/// Context and targets of one session, resolved against the bundle and vocabulary.
/// Context rows index the context table: catalog item rows, then entity-view node rows.
struct SessionFeatures {
  std::vector<std::size_t> current_rows;
  std::vector<std::size_t> history_rows;
  std::vector<std::size_t> seen_items;    // catalog rows mentioned in observed turns
  std::vector<std::size_t> copy_ids;      // vocabulary ids of those items
  std::vector<std::size_t> response;      // target token ids of the ground-truth turn
  std::optional<std::size_t> label;       // catalog row of the last ground-truth item
};

/// Parameter names.
inline std::string hg_weight_name(View v, std::size_t layer) { return "hg." + std::string(view_name(v)) + "." + std::to_string(layer); }
inline std::string lg_weight_name(View v, std::size_t layer) { return "lg." + std::string(view_name(v)) + "." + std::to_string(layer); }
inline std::string view_embedding_name(View v) { return "emb." + std::string(view_name(v)); }
inline std::string default_row_name(InterestKey k) { return "default." + interest_name(k); }

inline DecoderConfig decoder_config(const RunConfig& cfg) { return {cfg.dim, cfg.heads, cfg.gamma, cfg.max_len}; }

/// Variables produced by one full-graph forward pass.
struct ForwardPass {
  std::map<InterestKey, ad::Var> interest;  // node-level and hyperedge-level embeddings per view
  ad::Var items;                            // candidate item table, |catalog| x d
  ad::Var context;                          // context table
};

/// Multi-view hypergraph model: per-view node embeddings (item rows shared across views),
/// hypergraph and line-graph convolutions, session pooling, fusion, and the decoder.
class Model {
 public:
  Model(RunConfig cfg, ViewBundle bundle, std::vector<SessionRecord> sessions, Vocabulary vocab)
      : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
    validate_config(cfg_);
    set_graphs(std::move(bundle), std::move(sessions));
  }

  const RunConfig& config() const noexcept { return cfg_; }
  const ViewBundle& bundle() const noexcept { return bundle_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const std::vector<SessionRecord>& sessions() const noexcept { return sessions_; }
  const std::vector<SessionFeatures>& features() const noexcept { return features_; }
  std::size_t catalog_size() const noexcept { return bundle_.catalog.size(); }

  /// Interest representations that enter fusion and the contrastive objective.
  std::set<InterestKey> active_interests() const {
    std::set<InterestKey> out;
    for (const auto& k : cfg_.active_interests())
      if (bundle_.has(k.view)) out.insert(k);
    return out;
  }

  /// Swaps in rebuilt graphs (same node tables) and re-resolves session features.
  void set_graphs(ViewBundle bundle, std::vector<SessionRecord> sessions) {
    if (bundle.views.empty()) fail(ErrorCode::MissingView, "no view was built");
    for (const auto& [v, vd] : bundle.views)
      if (vd.sessions.size() != sessions.size()) fail(ErrorCode::ShapeMismatch, "bundle and session list disagree in length");
    bundle_ = std::move(bundle);
    sessions_ = std::move(sessions);
    ops_.clear();
    for (const auto& [v, vd] : bundle_.views)
      ops_.emplace(v, ViewOperators{make_hypergraph_operators(vd.hypergraph), normalized_line_adjacency(vd.line_graph), vd.nodes.size()});
    features_.clear();
    for (const auto& s : sessions_) features_.push_back(resolve(s));
  }

  /// Adds every parameter in a fixed order; values depend only on the store seed.
  void init_parameters(ParameterStore& store) const {
    const std::size_t d = cfg_.dim;
    store.add_glorot("emb.item", catalog_size(), d);
    for (const auto& [v, vd] : bundle_.views) {
      if (vd.nodes.size() > catalog_size()) store.add_glorot(view_embedding_name(v), vd.nodes.size() - catalog_size(), d);
      for (std::size_t l = 0; l < cfg_.hg_layers; ++l) store.add_glorot(hg_weight_name(v, l), d, d);
      for (std::size_t l = 0; l < cfg_.line_layers; ++l) store.add_glorot(lg_weight_name(v, l), d, d);
    }
    for (const auto& k : active_interests()) store.add_glorot(default_row_name(k), 1, d);
    store.add_glorot("default.curr", 1, d);
    store.add_glorot("default.hist", 1, d);
    init_attention(store, "fuse", d, cfg_.heads);
    init_decoder(store, decoder_config(cfg_), vocab_.size());
  }

  /// Convolves every active view over the whole graph.
  ForwardPass forward(ad::Tape& t, ParameterStore& store) const {
    ForwardPass f;
    ad::Var shared = t.param(store, "emb.item");
    for (const auto& [v, op] : ops_) {
      ad::Var input = shared;
      if (op.node_count > catalog_size()) input = ad::concat_rows(t, {shared, t.param(store, view_embedding_name(v))});
      std::vector<ad::Var> hw, lw;
      for (std::size_t l = 0; l < cfg_.hg_layers; ++l) hw.push_back(t.param(store, hg_weight_name(v, l)));
      for (std::size_t l = 0; l < cfg_.line_layers; ++l) lw.push_back(t.param(store, lg_weight_name(v, l)));
      f.interest[{v, Level::Hyper}] = hgconv(t, op.hyper, input, hw);
      // Line-graph nodes start from the mean of their member node embeddings.
      ad::Var edge_input = ad::sparse_left(t, op.hyper.node_to_edge, input);
      f.interest[{v, Level::Line}] = gconv(t, op.line, edge_input, lw, cfg_.line_activation);
    }
    if (bundle_.has(View::Item)) {
      f.items = f.interest.at({View::Item, Level::Hyper});
    } else {
      f.items = shared;
    }
    if (bundle_.has(View::Entity) && bundle_.at(View::Entity).nodes.size() > catalog_size())
      f.context = ad::concat_rows(t, {f.items, ad::gather_rows(t, f.interest.at({View::Entity, Level::Hyper}), entity_rows())});
    else
      f.context = f.items;
    return f;
  }

  /// Session-level vector per active interest; sessions with nothing to pool get the learned
  /// default row. `present` reports which rows were pooled.
  ad::Var pooled(ad::Tape& t, ParameterStore& store, const ForwardPass& f, InterestKey key, const std::vector<std::size_t>& batch,
                 std::vector<bool>* present = nullptr) const {
    const auto& vd = bundle_.at(key.view);
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> index(batch.size());
    std::vector<bool> here(batch.size(), false);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      auto rows = pooling_rows(vd, batch[b], key.level);
      if (rows.empty()) continue;
      here[b] = true;
      index[b] = groups.size();
      groups.push_back(std::move(rows));
    }
    if (present) *present = here;
    return pool_with_default(t, f.interest.at(key), groups, index, here, t.param(store, default_row_name(key)));
  }

  /// Mean of the rows each session mentions in its current window (or the default row).
  ad::Var current_mean(ad::Tape& t, ParameterStore& store, const ForwardPass& f, const std::vector<std::size_t>& batch) const {
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> index(batch.size());
    std::vector<bool> here(batch.size(), false);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& rows = features_.at(batch[b]).current_rows;
      if (rows.empty()) continue;
      here[b] = true;
      index[b] = groups.size();
      groups.push_back(rows);
    }
    return pool_with_default(t, f.context, groups, index, here, t.param(store, "default.curr"));
  }

  /// Recommendation queries 0.5 * (mean of interest vectors + mean of current context), one row
  /// per batch session. Also returns the pooled interest vectors by key.
  ad::Var reco_queries(ad::Tape& t, ParameterStore& store, const ForwardPass& f, const std::vector<std::size_t>& batch,
                       std::map<InterestKey, ad::Var>* pooled_out = nullptr, std::map<InterestKey, std::vector<bool>>* present_out = nullptr) const {
    const auto keys = active_interests();
    std::optional<ad::Var> sum;
    for (const auto& k : keys) {
      std::vector<bool> present;
      ad::Var p = pooled(t, store, f, k, batch, &present);
      if (pooled_out) pooled_out->emplace(k, p);
      if (present_out) present_out->emplace(k, std::move(present));
      sum = sum ? ad::add(t, *sum, p) : p;
    }
    ad::Var fair_mean = ad::scale(t, *sum, 1.0 / static_cast<double>(keys.size()));
    return ad::scale(t, ad::add(t, fair_mean, current_mean(t, store, f, batch)), 0.5);
  }

  /// Contrastive objective over the batch: per level, every view pair, restricted to sessions
  /// present in both views. Pairs with fewer than two shared sessions are skipped.
  std::optional<ad::Var> contrastive(ad::Tape& t, const std::map<InterestKey, ad::Var>& pooled_vectors,
                                     const std::map<InterestKey, std::vector<bool>>& present) const {
    const auto opt = cfg_.contrastive();
    std::optional<ad::Var> total;
    for (Level level : kAllLevels) {
      std::vector<View> views;
      for (const auto& [k, _] : pooled_vectors)
        if (k.level == level) views.push_back(k.view);
      for (auto [a, b] : view_pairs(views)) {
        const InterestKey ka{a, level}, kb{b, level};
        const auto& pa = present.at(ka);
        const auto& pb = present.at(kb);
        const DenseMatrix& va = t.value(pooled_vectors.at(ka));
        const DenseMatrix& vb = t.value(pooled_vectors.at(kb));
        // A zero vector has no direction to contrast, e.g. a line-graph readout fully cut by ReLU.
        auto nonzero = [](const DenseMatrix& m, std::size_t r) {
          for (std::size_t c = 0; c < m.cols(); ++c)
            if (m(r, c) != 0.0) return true;
          return false;
        };
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < pa.size(); ++i)
          if (pa[i] && pb[i] && nonzero(va, i) && nonzero(vb, i)) rows.push_back(i);
        if (rows.size() < 2) continue;
        ad::Var term = pair_loss(t, ad::gather_rows(t, pooled_vectors.at(ka), rows), ad::gather_rows(t, pooled_vectors.at(kb), rows), opt);
        total = total ? ad::add(t, *total, term) : term;
      }
    }
    if (total && opt.mean_levels) total = ad::scale(t, *total, 0.5);
    return total;
  }

  /// Pieces of one objective evaluation.
  struct Objective {
    ad::Var total;
    std::optional<ad::Var> contrastive;
    ad::Var task;
  };

  /// alpha * J_CL + J_R over the labelled sessions of `batch`.
  Objective recommendation_objective(ad::Tape& t, ParameterStore& store, const std::vector<std::size_t>& batch) const {
    std::vector<std::size_t> labelled;
    for (std::size_t i : batch)
      if (features_.at(i).label) labelled.push_back(i);
    if (labelled.empty()) fail(ErrorCode::MissingGroundTruth, "batch has no labelled session");
    ForwardPass f = forward(t, store);
    std::map<InterestKey, ad::Var> pooled_vectors;
    std::map<InterestKey, std::vector<bool>> present;
    ad::Var queries = reco_queries(t, store, f, labelled, &pooled_vectors, &present);
    ad::Var probs = score_items(t, queries, f.items);
    DenseMatrix labels(labelled.size(), catalog_size());
    for (std::size_t b = 0; b < labelled.size(); ++b) labels(b, *features_.at(labelled[b]).label) = 1.0;
    Objective o;
    o.task = rec_loss(t, probs, std::move(labels));
    o.contrastive = contrastive(t, pooled_vectors, present);
    o.total = joint_loss(t, o.contrastive, o.task, cfg_.alpha);
    return o;
  }

  /// Fused inputs of one session for the decoder.
  struct ConversationInputs {
    ad::Var fair_conv, current, history;
  };

  ConversationInputs conversation_inputs(ad::Tape& t, ParameterStore& store, const ForwardPass& f, const std::map<InterestKey, ad::Var>& pooled_vectors,
                                         std::size_t batch_row, std::size_t session) const {
    std::vector<ad::Var> rows;
    for (const auto& [k, p] : pooled_vectors) rows.push_back(ad::gather_rows(t, p, {batch_row}));
    ad::Var fair = ad::concat_rows(t, rows);
    const auto& feat = features_.at(session);
    ConversationInputs in;
    in.current = feat.current_rows.empty() ? t.param(store, "default.curr") : ad::gather_rows(t, f.context, feat.current_rows);
    in.history = feat.history_rows.empty() ? t.param(store, "default.hist") : ad::gather_rows(t, f.context, feat.history_rows);
    in.fair_conv = fuse_conv(t, store, "fuse", cfg_.heads, fair, in.current);
    return in;
  }

  /// beta * J_CL + J_C over the sessions of `batch` that have a response.
  Objective conversation_objective(ad::Tape& t, ParameterStore& store, const std::vector<std::size_t>& batch) const {
    std::vector<std::size_t> usable;
    for (std::size_t i : batch)
      if (!features_.at(i).response.empty()) usable.push_back(i);
    if (usable.empty()) fail(ErrorCode::MissingGroundTruth, "batch has no response to learn from");
    ForwardPass f = forward(t, store);
    std::map<InterestKey, ad::Var> pooled_vectors;
    std::map<InterestKey, std::vector<bool>> present;
    for (const auto& k : active_interests()) {
      std::vector<bool> here;
      pooled_vectors.emplace(k, pooled(t, store, f, k, usable, &here));
      present.emplace(k, std::move(here));
    }
    const auto dcfg = decoder_config(cfg_);
    std::optional<ad::Var> jc;
    for (std::size_t b = 0; b < usable.size(); ++b) {
      const auto& feat = features_.at(usable[b]);
      auto in = conversation_inputs(t, store, f, pooled_vectors, b, usable[b]);
      ad::Var steps = teacher_forced_distributions(t, store, dcfg, in.fair_conv, in.current, in.history, feat.copy_ids, vocab_.bos(), feat.response,
                                                   vocab_.size());
      ad::Var term = conv_loss(t, steps, feat.response);
      jc = jc ? ad::add(t, *jc, term) : term;
    }
    Objective o;
    o.task = *jc;
    o.contrastive = contrastive(t, pooled_vectors, present);
    o.total = joint_loss(t, o.contrastive, o.task, cfg_.beta);
    return o;
  }

  /// Plain J_CL over a batch, for reporting and gradient checks.
  std::optional<ad::Var> contrastive_objective(ad::Tape& t, ParameterStore& store, const std::vector<std::size_t>& batch) const {
    ForwardPass f = forward(t, store);
    std::map<InterestKey, ad::Var> pooled_vectors;
    std::map<InterestKey, std::vector<bool>> present;
    for (const auto& k : active_interests()) {
      std::vector<bool> here;
      pooled_vectors.emplace(k, pooled(t, store, f, k, batch, &here));
      present.emplace(k, std::move(here));
    }
    return contrastive(t, pooled_vectors, present);
  }

  /// Item probabilities, one row per session of `batch`.
  DenseMatrix score(ParameterStore& store, const std::vector<std::size_t>& batch) const {
    ad::Tape t;
    ForwardPass f = forward(t, store);
    return t.value(score_items(t, reco_queries(t, store, f, batch), f.items));
  }

  /// Top-K lists; items already mentioned are skipped when exclude_seen is set.
  std::vector<RecommendationList> recommend(ParameterStore& store, const std::vector<std::size_t>& batch, std::size_t k) const {
    std::vector<RecommendationList> out;
    if (batch.empty()) return out;
    const DenseMatrix probs = score(store, batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      std::vector<double> scores;
      std::vector<ItemId> ids;
      std::vector<bool> skip(catalog_size(), false);
      if (cfg_.exclude_seen)
        for (std::size_t r : features_.at(batch[b]).seen_items) skip[r] = true;
      for (std::size_t r = 0; r < catalog_size(); ++r) {
        if (skip[r]) continue;
        scores.push_back(probs(b, r));
        ids.push_back(bundle_.catalog[r]);
      }
      out.push_back(rank_topk(sessions_.at(batch[b]).session_id, scores, ids, std::min(k, ids.size())));
    }
    return out;
  }

  /// Greedy decoding for one session with the entropy of every step distribution.
  struct Response {
    std::vector<std::size_t> token_ids;
    std::vector<std::string> tokens;
    std::vector<double> entropy;
  };

  Response respond(ParameterStore& store, std::size_t session, std::size_t max_len) const {
    ad::Tape t;
    ForwardPass f = forward(t, store);
    std::map<InterestKey, ad::Var> pooled_vectors;
    for (const auto& k : active_interests()) pooled_vectors.emplace(k, pooled(t, store, f, k, {session}));
    auto in = conversation_inputs(t, store, f, pooled_vectors, 0, session);
    const auto dcfg = decoder_config(cfg_);
    const auto& feat = features_.at(session);
    std::vector<std::size_t> prefix{vocab_.bos()};
    Response r;
    ad::Var table = t.param(store, "dec.tokens");
    for (std::size_t step = 0; step < max_len; ++step) {
      auto tr = decoder_block(t, store, dcfg, ad::gather_rows(t, table, prefix), in.fair_conv, in.current, in.history);
      const DenseMatrix& p = t.value(token_distribution(t, store, tr.out, in.fair_conv, feat.copy_ids, vocab_.size()));
      std::size_t best = 0;
      double h = 0.0;
      for (std::size_t j = 0; j < p.cols(); ++j) {
        if (p(0, j) > p(0, best)) best = j;
        if (p(0, j) > 0.0) h -= p(0, j) * std::log(p(0, j));
      }
      r.token_ids.push_back(best);
      r.tokens.push_back(vocab_.token(best));
      r.entropy.push_back(h);
      prefix.push_back(best);
    }
    return r;
  }

 private:
  /// Rows of the entity view that are not catalog items, in table order.
  std::vector<std::size_t> entity_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t r = catalog_size(); r < bundle_.at(View::Entity).nodes.size(); ++r) rows.push_back(r);
    return rows;
  }

  static ad::Var pool_with_default(ad::Tape& t, ad::Var source, const std::vector<std::vector<std::size_t>>& groups, const std::vector<std::size_t>& index,
                                   const std::vector<bool>& here, ad::Var default_row) {
    const std::size_t n = here.size();
    if (groups.empty()) return ad::gather_rows(t, default_row, std::vector<std::size_t>(n, 0));
    ad::Var pooled = ad::sparse_left(t, pooling_operator(groups, t.value(source).rows()), source);
    if (groups.size() == n) return pooled;
    std::vector<std::size_t> pick(n);
    for (std::size_t b = 0; b < n; ++b) pick[b] = here[b] ? index[b] : groups.size();
    return ad::gather_rows(t, ad::concat_rows(t, {pooled, default_row}), std::move(pick));
  }

  /// Context-table rows for the item and entity mentions of one turn.
  void turn_rows(const Turn& turn, std::vector<std::size_t>& out) const {
    for (ItemId i : turn.item_ids) {
      auto it = std::lower_bound(bundle_.catalog.begin(), bundle_.catalog.end(), i);
      if (it != bundle_.catalog.end() && *it == i) out.push_back(static_cast<std::size_t>(it - bundle_.catalog.begin()));
    }
    if (!bundle_.has(View::Entity)) return;
    const auto& nodes = bundle_.at(View::Entity).nodes;
    for (EntityId e : turn.entity_ids)
      if (auto row = nodes.row_of(entity_symbol(e)); row && *row >= catalog_size()) out.push_back(*row);
  }

  SessionFeatures resolve(const SessionRecord& s) const {
    SessionFeatures f;
    const std::size_t observed = s.observed_turn_count();
    // The current window is the last observed turn that mentions anything; earlier turns are history.
    std::size_t current = observed;
    for (std::size_t i = observed; i-- > 0;) {
      std::vector<std::size_t> rows;
      turn_rows(s.turns[i], rows);
      if (!rows.empty()) {
        current = i;
        f.current_rows = std::move(rows);
        break;
      }
    }
    for (std::size_t i = 0; i < std::min(current, observed); ++i) turn_rows(s.turns[i], f.history_rows);
    std::set<std::size_t> seen;
    for (ItemId i : s.observed_items()) {
      auto it = std::lower_bound(bundle_.catalog.begin(), bundle_.catalog.end(), i);
      if (it != bundle_.catalog.end() && *it == i) seen.insert(static_cast<std::size_t>(it - bundle_.catalog.begin()));
    }
    f.seen_items.assign(seen.begin(), seen.end());
    for (std::size_t r : f.seen_items)
      if (vocab_.contains(item_symbol(bundle_.catalog[r]))) f.copy_ids.push_back(vocab_.id_of(item_symbol(bundle_.catalog[r])));
    if (!s.ground_truth.empty()) {
      const auto& gt = s.ground_truth.back();
      auto it = std::lower_bound(bundle_.catalog.begin(), bundle_.catalog.end(), gt.item);
      if (it != bundle_.catalog.end() && *it == gt.item) f.label = static_cast<std::size_t>(it - bundle_.catalog.begin());
      const auto& tokens = s.turns[gt.turn].tokens;
      for (std::size_t i = 0; i < std::min(tokens.size(), cfg_.max_len); ++i) f.response.push_back(vocab_.id_of(tokens[i]));
    }
    return f;
  }

  RunConfig cfg_;
  Vocabulary vocab_;
  ViewBundle bundle_;
  std::vector<SessionRecord> sessions_;
  std::map<View, ViewOperators> ops_;
  std::vector<SessionFeatures> features_;
};

}  // namespace hyfair
