#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyfair/autodiff.hpp"
#include "hyfair/corpus.hpp"
#include "hyfair/kernels.hpp"

namespace hyfair {

/// Token table. Item-name tokens (`@<item>`) are marked so the copy head can target them.
class Vocabulary {
 public:
  static constexpr const char* kBos = "<bos>";
  static constexpr const char* kUnk = "<unk>";

  Vocabulary() {
    add(kBos);
    add(kUnk);
  }

  std::size_t add(const std::string& token) {
    auto [it, inserted] = index_.emplace(token, tokens_.size());
    if (inserted) {
      tokens_.push_back(token);
      if (KnowledgeGraph::item_of_name(token)) item_tokens_.insert(it->second);
    }
    return it->second;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::set<std::size_t>& item_token_ids() const noexcept { return item_tokens_; }
  bool is_item_token(std::size_t id) const { return item_tokens_.count(id) != 0; }

  std::size_t id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? index_.at(kUnk) : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  std::size_t bos() const { return index_.at(kBos); }

  /// Special tokens, then every catalog item token, then session tokens in order of appearance.
  static Vocabulary build(const std::vector<SessionRecord>& sessions, const std::vector<ItemId>& catalog) {
    Vocabulary v;
    for (ItemId i : catalog) v.add(item_symbol(i));
    for (const auto& s : sessions)
      for (const auto& t : s.turns)
        for (const auto& tok : t.tokens) v.add(tok);
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<std::size_t> item_tokens_;
};

struct DecoderConfig {
  std::size_t dim = 128;
  std::size_t heads = 4;
  double gamma = 0.5;
  std::size_t max_len = 32;
};

inline void init_decoder(ParameterStore& store, const DecoderConfig& cfg, std::size_t vocab_size) {
  if (vocab_size == 0) fail(ErrorCode::EmptyVocabulary, "vocabulary is empty");
  for (const char* name : {"dec.self", "dec.fair", "dec.curr", "dec.hist"}) init_attention(store, name, cfg.dim, cfg.heads);
  init_ffn(store, "dec.ffn", cfg.dim, cfg.dim);
  store.add_glorot("dec.tokens", vocab_size, cfg.dim);
  store.add_glorot("dec.vocab.w", cfg.dim, vocab_size);
  store.add("dec.vocab.b", DenseMatrix(1, vocab_size));
  store.add_glorot("dec.bias.w", cfg.dim, vocab_size);
  store.add_glorot("dec.copy.w", cfg.dim, cfg.dim);
  store.add_glorot("dec.copy.f", cfg.dim, cfg.dim);
}

/// Stages of one decoder block, kept for inspection.
struct DecoderTrace {
  ad::Var a0, a1, a2, a3, a4, out;
};

/// Self-attention, then attention over fused interests, current context and history;
/// A4 = gamma * A2 + (1 - gamma) * A3; output FFN(A4).
inline DecoderTrace decoder_block(ad::Tape& t, ParameterStore& store, const DecoderConfig& cfg, ad::Var prev, ad::Var fair_conv, ad::Var current,
                                  ad::Var history) {
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) fail(ErrorCode::ConfigError, "gamma must lie in [0,1]");
  for (ad::Var v : {prev, fair_conv, current, history})
    if (t.value(v).rows() == 0) fail(ErrorCode::ShapeMismatch, "decoder input with zero rows");
  DecoderTrace tr;
  tr.a0 = multi_head_attention(t, store, "dec.self", cfg.heads, prev, prev, prev);
  tr.a1 = multi_head_attention(t, store, "dec.fair", cfg.heads, tr.a0, fair_conv, fair_conv);
  tr.a2 = multi_head_attention(t, store, "dec.curr", cfg.heads, tr.a1, current, current);
  if (cfg.gamma == 1.0) {
    // Closed gate: history does not enter the graph at all.
    tr.a3 = tr.a2;
    tr.a4 = tr.a2;
  } else {
    tr.a3 = multi_head_attention(t, store, "dec.hist", cfg.heads, tr.a2, history, history);
    tr.a4 = ad::add(t, ad::scale(t, tr.a2, cfg.gamma), ad::scale(t, tr.a3, 1.0 - cfg.gamma));
  }
  tr.out = feed_forward(t, store, "dec.ffn", tr.a4);
  return tr;
}

/// Three heads over the vocabulary from the last decoder row:
///   vocabulary head softmax(T W_v + b), bias head softmax(mean(X_fair_conv) W_b),
///   copy head softmax over `copy_ids` only (zero elsewhere, absent if `copy_ids` is empty);
/// their sum is renormalized to a distribution.
inline ad::Var token_distribution(ad::Tape& t, ParameterStore& store, ad::Var decoded, ad::Var fair_conv, const std::vector<std::size_t>& copy_ids,
                                  std::size_t vocab_size) {
  if (vocab_size == 0) fail(ErrorCode::EmptyVocabulary, "vocabulary is empty");
  if (t.value(decoded).rows() == 0) fail(ErrorCode::ShapeMismatch, "token_distribution needs a non-empty decoder output");
  ad::Var last = ad::last_row(t, decoded);
  ad::Var pooled = ad::mean_rows(t, fair_conv);
  ad::Var p1 = ad::softmax_rows(t, ad::add(t, ad::matmul(t, last, t.param(store, "dec.vocab.w")), t.param(store, "dec.vocab.b")));
  ad::Var p2 = ad::softmax_rows(t, ad::matmul(t, pooled, t.param(store, "dec.bias.w")));
  ad::Var sum = ad::add(t, p1, p2);
  if (!copy_ids.empty()) {
    ad::Var query = ad::add(t, ad::matmul(t, last, t.param(store, "dec.copy.w")), ad::matmul(t, pooled, t.param(store, "dec.copy.f")));
    ad::Var targets = ad::gather_rows(t, t.param(store, "dec.tokens"), copy_ids);
    ad::Var p3 = ad::scatter_cols(t, ad::softmax_rows(t, ad::matmul_nt(t, query, targets)), copy_ids, vocab_size);
    sum = ad::add(t, sum, p3);
  }
  return ad::normalize_row_sums(t, sum);
}

/// -sum over steps of log P[target], probabilities floored at 1e-12. `steps` is (steps x |V|).
inline ad::Var conv_loss(ad::Tape& t, ad::Var steps, const std::vector<std::size_t>& targets) {
  const auto& p = t.value(steps);
  if (p.rows() != targets.size()) fail(ErrorCode::ShapeMismatch, "conv_loss: " + std::to_string(p.rows()) + " steps vs " + std::to_string(targets.size()) + " targets");
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= p.cols()) fail(ErrorCode::TargetOutOfRange, "target " + std::to_string(targets[i]) + " outside vocabulary of " + std::to_string(p.cols()));
    cells.emplace_back(i, targets[i]);
  }
  return ad::scale(t, ad::select_sum(t, ad::log_clamped(t, steps, 1e-12), std::move(cells)), -1.0);
}

inline double conv_loss(const std::vector<DenseMatrix>& sequences, const std::vector<std::vector<std::size_t>>& targets) {
  if (sequences.size() != targets.size()) fail(ErrorCode::ShapeMismatch, "conv_loss batch size mismatch");
  double total = 0.0;
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    ad::Tape t;
    total += t.scalar(conv_loss(t, t.constant(sequences[b]), targets[b]));
  }
  return total;
}

/// Teacher-forced step distributions for one response (truncated to max_len), stacked by row.
inline ad::Var teacher_forced_distributions(ad::Tape& t, ParameterStore& store, const DecoderConfig& cfg, ad::Var fair_conv, ad::Var current,
                                            ad::Var history, const std::vector<std::size_t>& copy_ids, std::size_t bos,
                                            const std::vector<std::size_t>& targets, std::size_t vocab_size) {
  ad::Var table = t.param(store, "dec.tokens");
  std::vector<ad::Var> rows;
  std::vector<std::size_t> prefix{bos};
  for (std::size_t step = 0; step < targets.size(); ++step) {
    ad::Var prev = ad::gather_rows(t, table, prefix);
    auto tr = decoder_block(t, store, cfg, prev, fair_conv, current, history);
    rows.push_back(token_distribution(t, store, tr.out, fair_conv, copy_ids, vocab_size));
    prefix.push_back(targets[step]);
  }
  return ad::concat_rows(t, rows);
}

// ---- generation metrics --------------------------------------------------------------------

/// Distinct n-grams over total n-grams across the corpus.
inline double dist_n(const std::vector<std::vector<std::string>>& utterances, std::size_t n) {
  if (n == 0) fail(ErrorCode::NGramTooLong, "n must be positive");
  std::set<std::vector<std::string>> distinct;
  std::size_t total = 0;
  for (const auto& u : utterances) {
    if (u.size() < n) continue;
    for (std::size_t i = 0; i + n <= u.size(); ++i) {
      distinct.emplace(u.begin() + static_cast<std::ptrdiff_t>(i), u.begin() + static_cast<std::ptrdiff_t>(i + n));
      ++total;
    }
  }
  if (total == 0) fail(ErrorCode::NGramTooLong, "no utterance has " + std::to_string(n) + " tokens");
  return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

/// Corpus BLEU with clipped n-gram precisions for orders 1..n, uniform weights, brevity penalty.
inline double bleu_n(const std::vector<std::vector<std::string>>& candidates, const std::vector<std::vector<std::string>>& references, std::size_t n) {
  if (n == 0) fail(ErrorCode::NGramTooLong, "n must be positive");
  if (candidates.size() != references.size()) fail(ErrorCode::ShapeMismatch, "bleu: candidate/reference count mismatch");
  std::vector<std::size_t> matched(n, 0), total(n, 0);
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& c = candidates[s];
    const auto& r = references[s];
    cand_len += c.size();
    ref_len += r.size();
    for (std::size_t order = 1; order <= n; ++order) {
      std::map<std::vector<std::string>, std::size_t> ref_counts, cand_counts;
      for (std::size_t i = 0; i + order <= r.size(); ++i) ++ref_counts[{r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(i + order)}];
      for (std::size_t i = 0; i + order <= c.size(); ++i) ++cand_counts[{c.begin() + static_cast<std::ptrdiff_t>(i), c.begin() + static_cast<std::ptrdiff_t>(i + order)}];
      for (const auto& [g, cnt] : cand_counts) {
        auto it = ref_counts.find(g);
        matched[order - 1] += std::min(cnt, it == ref_counts.end() ? std::size_t{0} : it->second);
        total[order - 1] += cnt;
      }
    }
  }
  if (total[n - 1] == 0) fail(ErrorCode::NGramTooLong, "no candidate has " + std::to_string(n) + " tokens");
  double log_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (matched[i] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[i]) / static_cast<double>(total[i]));
  }
  const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_sum / static_cast<double>(n));
}

}  // namespace hyfair
