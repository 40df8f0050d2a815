#pragma once

#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hyfair/autodiff.hpp"
#include "hyfair/corpus.hpp"
#include "hyfair/kernels.hpp"

namespace hyfair {

enum class Level { Hyper, Line };

inline constexpr std::array<Level, 2> kAllLevels{Level::Hyper, Level::Line};

/// One of the eight interest representations: a view at hypergraph or line-graph level.
struct InterestKey {
  View view;
  Level level;
  friend auto operator<=>(const InterestKey&, const InterestKey&) = default;
};

/// "h:e", "l:r", ...
inline std::string interest_name(InterestKey k) {
  return std::string(1, k.level == Level::Hyper ? 'h' : 'l') + ":" + view_letter(k.view);
}

inline std::optional<InterestKey> parse_interest(std::string_view s) {
  if (s.size() < 3 || s[1] != ':') return std::nullopt;
  auto v = parse_view(s.substr(2));
  if (!v) return std::nullopt;
  if (s[0] == 'h') return InterestKey{*v, Level::Hyper};
  if (s[0] == 'l') return InterestKey{*v, Level::Line};
  return std::nullopt;
}

inline std::set<InterestKey> all_interests() {
  std::set<InterestKey> out;
  for (Level l : kAllLevels)
    for (View v : kAllViews) out.insert({v, l});
  return out;
}

/// Node-level (hyper) and hyperedge-level (line) embeddings per active view.
struct InterestSet {
  std::map<View, DenseMatrix> hyper;
  std::map<View, DenseMatrix> line;

  const DenseMatrix& at(InterestKey k) const {
    const auto& m = k.level == Level::Hyper ? hyper : line;
    auto it = m.find(k.view);
    if (it == m.end()) fail(ErrorCode::MissingView, interest_name(k) + " is not present");
    return it->second;
  }
};

/// Pooled per-session vectors; rows follow `session_indices`. A session with nothing to pool in
/// some view is marked absent there and left out of that view's contrastive batches.
struct SessionViewVectors {
  std::vector<std::size_t> session_indices;
  std::map<InterestKey, DenseMatrix> vectors;
  std::map<InterestKey, std::vector<bool>> present;
};

/// Rows to average for one session: mentioned nodes (hyper level) or its hyperedges (line level).
inline std::vector<std::size_t> pooling_rows(const ViewData& vd, std::size_t session, Level level) {
  const SessionSpan& span = vd.sessions.at(session);
  if (level == Level::Hyper) return span.mentioned_rows;
  std::vector<std::size_t> rows(span.edge_count);
  for (std::size_t i = 0; i < span.edge_count; ++i) rows[i] = span.first_edge + i;
  return rows;
}

inline SessionViewVectors session_view_vectors(const InterestSet& iset, const ViewBundle& bundle, const std::vector<std::size_t>& session_indices) {
  SessionViewVectors out;
  out.session_indices = session_indices;
  for (const auto& [view, vd] : bundle.views) {
    for (Level level : kAllLevels) {
      const auto& src = level == Level::Hyper ? iset.hyper : iset.line;
      auto it = src.find(view);
      if (it == src.end()) continue;
      const InterestKey key{view, level};
      DenseMatrix m(session_indices.size(), it->second.cols());
      std::vector<bool> present(session_indices.size(), false);
      for (std::size_t b = 0; b < session_indices.size(); ++b) {
        const auto rows = pooling_rows(vd, session_indices[b], level);
        if (rows.empty()) continue;
        const auto pooled = mean_pool(it->second, rows);
        std::copy(pooled.begin(), pooled.end(), m.row(b).begin());
        present[b] = true;
      }
      out.vectors.emplace(key, std::move(m));
      out.present.emplace(key, std::move(present));
    }
  }
  return out;
}

/// Mean over rows b of -log softmax_b'(cos(a_b, p_b') / tau)[b]; in-batch negatives.
inline ad::Var infonce(ad::Tape& t, ad::Var anchors, ad::Var positives, double tau) {
  const auto& a = t.value(anchors);
  const auto& p = t.value(positives);
  a.require_same_shape(p, "infonce");
  const std::size_t batch = a.rows();
  if (batch < 2) fail(ErrorCode::BatchTooSmall, "infonce needs at least 2 rows, got " + std::to_string(batch));
  ad::Var sim = ad::matmul_nt(t, ad::normalize_rows(t, anchors), ad::normalize_rows(t, positives));
  ad::Var logp = ad::log_softmax_rows(t, ad::scale(t, sim, 1.0 / tau));
  std::vector<std::pair<std::size_t, std::size_t>> diag(batch);
  for (std::size_t b = 0; b < batch; ++b) diag[b] = {b, b};
  return ad::scale(t, ad::select_sum(t, logp, std::move(diag)), -1.0 / static_cast<double>(batch));
}

inline double infonce(const DenseMatrix& anchors, const DenseMatrix& positives, double tau) {
  ad::Tape t;
  return t.scalar(infonce(t, t.constant(anchors), t.constant(positives), tau));
}

struct ContrastiveOptions {
  double tau = 0.07;
  bool symmetrize = true;
  /// Halve J_H + J_L instead of summing.
  bool mean_levels = false;
};

inline ad::Var pair_loss(ad::Tape& t, ad::Var a, ad::Var b, const ContrastiveOptions& opt) {
  if (!opt.symmetrize) return infonce(t, a, b, opt.tau);
  return ad::scale(t, ad::add(t, infonce(t, a, b, opt.tau), infonce(t, b, a, opt.tau)), 0.5);
}

/// Unordered pairs of the given views in (entity, item, word, review) order.
inline std::vector<std::pair<View, View>> view_pairs(const std::vector<View>& views) {
  std::vector<std::pair<View, View>> out;
  for (std::size_t i = 0; i < views.size(); ++i)
    for (std::size_t j = i + 1; j < views.size(); ++j) out.emplace_back(views[i], views[j]);
  return out;
}

/// Number of InfoNCE pair terms across both levels for a set of active interests.
inline std::size_t contrastive_pair_count(const std::set<InterestKey>& active) {
  std::size_t total = 0;
  for (Level l : kAllLevels) {
    std::size_t n = 0;
    for (const auto& k : active) n += k.level == l;
    total += n * (n - 1) / 2;
  }
  return total;
}

/// Sum of pair losses over all view pairs at one level. `batch` holds row-aligned session
/// vectors per view; fewer than two views yields zero.
inline std::optional<ad::Var> level_cl_loss(ad::Tape& t, const std::map<View, ad::Var>& batch, const ContrastiveOptions& opt) {
  std::vector<View> views;
  for (const auto& [v, _] : batch) views.push_back(v);
  std::optional<ad::Var> total;
  for (auto [a, b] : view_pairs(views)) {
    ad::Var term = pair_loss(t, batch.at(a), batch.at(b), opt);
    total = total ? ad::add(t, *total, term) : term;
  }
  return total;
}

inline std::optional<ad::Var> total_cl_loss(ad::Tape& t, const std::map<InterestKey, ad::Var>& batch, const ContrastiveOptions& opt) {
  std::optional<ad::Var> total;
  for (Level l : kAllLevels) {
    std::map<View, ad::Var> level_batch;
    for (const auto& [k, v] : batch)
      if (k.level == l) level_batch.emplace(k.view, v);
    if (auto term = level_cl_loss(t, level_batch, opt)) total = total ? ad::add(t, *total, *term) : *term;
  }
  if (total && opt.mean_levels) total = ad::scale(t, *total, 0.5);
  return total;
}

/// Plain evaluation over SessionViewVectors; each pair uses only the sessions present in both views.
inline double level_cl_loss(const SessionViewVectors& svv, Level level, const ContrastiveOptions& opt) {
  std::vector<View> views;
  for (const auto& [k, _] : svv.vectors)
    if (k.level == level) views.push_back(k.view);
  double total = 0.0;
  for (auto [a, b] : view_pairs(views)) {
    const InterestKey ka{a, level}, kb{b, level};
    const auto& pa = svv.present.at(ka);
    const auto& pb = svv.present.at(kb);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < pa.size(); ++i)
      if (pa[i] && pb[i]) rows.push_back(i);
    ad::Tape t;
    ad::Var va = ad::gather_rows(t, t.constant(svv.vectors.at(ka)), rows);
    ad::Var vb = ad::gather_rows(t, t.constant(svv.vectors.at(kb)), rows);
    total += t.scalar(pair_loss(t, va, vb, opt));
  }
  return total;
}

inline double total_cl_loss(const SessionViewVectors& svv, const ContrastiveOptions& opt) {
  const double sum = level_cl_loss(svv, Level::Hyper, opt) + level_cl_loss(svv, Level::Line, opt);
  return opt.mean_levels ? 0.5 * sum : sum;
}

}  // namespace hyfair
