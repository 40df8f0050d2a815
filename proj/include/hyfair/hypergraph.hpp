#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <compare>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hyfair/error.hpp"

namespace hyfair {

enum class View : std::uint8_t { Entity = 0, Item = 1, Word = 2, Review = 3 };

inline constexpr std::array<View, 4> kAllViews{View::Entity, View::Item, View::Word, View::Review};

constexpr std::string_view view_name(View v) {
  switch (v) {
    case View::Entity: return "entity";
    case View::Item: return "item";
    case View::Word: return "word";
    case View::Review: return "review";
  }
  return "?";
}

constexpr char view_letter(View v) { return view_name(v)[0]; }

inline std::optional<View> parse_view(std::string_view s) {
  for (View v : kAllViews)
    if (s == view_name(v) || (s.size() == 1 && s[0] == view_letter(v))) return v;
  return std::nullopt;
}

/// Index into a view-specific node table.
struct NodeId {
  std::uint32_t index = 0;
  friend auto operator<=>(NodeId, NodeId) = default;
};

/// A hyperedge: sorted, duplicate-free, non-empty member set plus a provenance tag.
class Hyperedge {
 public:
  Hyperedge() = default;

  /// Sorts and deduplicates; throws EmptyHyperedge for an empty member list.
  Hyperedge(std::vector<NodeId> members, std::string provenance = {}) : members_(std::move(members)), provenance_(std::move(provenance)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (members_.empty()) fail(ErrorCode::EmptyHyperedge, "hyperedge '" + provenance_ + "' has no members");
  }

  static Hyperedge of(std::initializer_list<std::uint32_t> ids, std::string provenance = {}) {
    std::vector<NodeId> m;
    for (auto i : ids) m.push_back(NodeId{i});
    return Hyperedge(std::move(m), std::move(provenance));
  }

  const std::vector<NodeId>& members() const noexcept { return members_; }
  const std::string& provenance() const noexcept { return provenance_; }
  std::size_t size() const noexcept { return members_.size(); }

  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;

 private:
  std::vector<NodeId> members_;
  std::string provenance_;
};

/// |a ∩ b| via a merge over the sorted member arrays.
inline std::size_t intersection_size(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

/// Jaccard similarity |a ∩ b| / |a ∪ b|; integer counts first, one division last.
inline double jaccard(const Hyperedge& a, const Hyperedge& b) {
  const std::size_t inter = intersection_size(a.members(), b.members());
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Immutable hypergraph with the 0/1 incidence stored column-compressed (per hyperedge)
/// and a node -> hyperedge inverted index.
class Hypergraph {
 public:
  Hypergraph() = default;

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Hyperedge>& hyperedges() const noexcept { return edges_; }
  const Hyperedge& hyperedge(std::size_t h) const { return edges_[h]; }

  /// Hyperedge indices containing node v, ascending.
  const std::vector<std::uint32_t>& incident_edges(std::size_t v) const { return node_edges_[v]; }

  std::size_t node_degree(std::size_t v) const { return node_edges_[v].size(); }
  std::size_t edge_degree(std::size_t h) const { return edges_[h].size(); }
  std::vector<std::size_t> node_degrees() const {
    std::vector<std::size_t> d(node_count_);
    for (std::size_t v = 0; v < node_count_; ++v) d[v] = node_edges_[v].size();
    return d;
  }
  std::vector<std::size_t> edge_degrees() const {
    std::vector<std::size_t> d(edges_.size());
    for (std::size_t h = 0; h < edges_.size(); ++h) d[h] = edges_[h].size();
    return d;
  }

  /// H[v,h] in {0,1}.
  int incidence(std::size_t v, std::size_t h) const {
    const auto& m = edges_[h].members();
    return std::binary_search(m.begin(), m.end(), NodeId{static_cast<std::uint32_t>(v)}) ? 1 : 0;
  }

  std::optional<View> view() const noexcept { return view_; }
  int turn_index() const noexcept { return turn_index_; }

  friend Hypergraph build_incidence(std::vector<Hyperedge> hyperedges, std::size_t node_count, std::optional<View> view, int turn_index);

  friend bool operator==(const Hypergraph& a, const Hypergraph& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_ && a.view_ == b.view_ && a.turn_index_ == b.turn_index_;
  }

 private:
  std::size_t node_count_ = 0;
  std::vector<Hyperedge> edges_;
  std::vector<std::vector<std::uint32_t>> node_edges_;
  std::optional<View> view_;
  int turn_index_ = 0;
};

/// Builds the incidence structure; column order follows the input order.
inline Hypergraph build_incidence(std::vector<Hyperedge> hyperedges, std::size_t node_count, std::optional<View> view = std::nullopt,
                                  int turn_index = 0) {
  Hypergraph g;
  g.node_count_ = node_count;
  g.view_ = view;
  g.turn_index_ = turn_index;
  g.node_edges_.assign(node_count, {});
  for (std::size_t h = 0; h < hyperedges.size(); ++h) {
    const auto& m = hyperedges[h].members();
    if (m.empty()) fail(ErrorCode::EmptyHyperedge, "hyperedge " + std::to_string(h) + " has no members");
    for (NodeId v : m) {
      if (v.index >= node_count)
        fail(ErrorCode::NodeIdOutOfRange, "node " + std::to_string(v.index) + " in hyperedge " + std::to_string(h) + " >= node_count " + std::to_string(node_count));
      g.node_edges_[v.index].push_back(static_cast<std::uint32_t>(h));
    }
  }
  g.edges_ = std::move(hyperedges);
  return g;
}

/// Weighted line graph: one node per hyperedge, symmetric adjacency, zero diagonal.
class LineGraph {
 public:
  struct Edge {
    std::uint32_t p;
    std::uint32_t q;
    double weight;
    friend bool operator==(const Edge&, const Edge&) = default;
  };

  struct Neighbor {
    std::uint32_t node;
    double weight;
  };

  LineGraph() = default;

  /// `upper` must hold p < q pairs sorted by (p, q).
  LineGraph(std::size_t hyperedge_count, std::vector<Edge> upper, int turn_index = 0)
      : hyperedge_count_(hyperedge_count), upper_(std::move(upper)), turn_index_(turn_index) {
    adjacency_.assign(hyperedge_count_, {});
    for (const Edge& e : upper_) {
      adjacency_[e.p].push_back({e.q, e.weight});
      adjacency_[e.q].push_back({e.p, e.weight});
    }
    for (auto& row : adjacency_)
      std::sort(row.begin(), row.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }

  std::size_t hyperedge_count() const noexcept { return hyperedge_count_; }
  std::size_t edge_count() const noexcept { return upper_.size(); }
  int turn_index() const noexcept { return turn_index_; }

  /// Upper-triangle edge list, sorted by (p, q).
  const std::vector<Edge>& edges() const noexcept { return upper_; }
  const std::vector<Neighbor>& neighbors(std::size_t p) const { return adjacency_[p]; }

  double weight(std::size_t p, std::size_t q) const {
    for (const Neighbor& n : adjacency_[p])
      if (n.node == q) return n.weight;
    return 0.0;
  }

  friend bool operator==(const LineGraph& a, const LineGraph& b) {
    return a.hyperedge_count_ == b.hyperedge_count_ && a.upper_ == b.upper_;
  }

 private:
  std::size_t hyperedge_count_ = 0;
  std::vector<Edge> upper_;
  std::vector<std::vector<Neighbor>> adjacency_;
  int turn_index_ = 0;
};

/// Reference induction: every unordered hyperedge pair is tested.
inline LineGraph induce_line_graph_naive(const Hypergraph& g) {
  std::vector<LineGraph::Edge> edges;
  const auto& hs = g.hyperedges();
  for (std::size_t p = 0; p < hs.size(); ++p) {
    for (std::size_t q = p + 1; q < hs.size(); ++q) {
      const std::size_t inter = intersection_size(hs[p].members(), hs[q].members());
      if (inter == 0) continue;
      edges.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q), jaccard(hs[p], hs[q])});
    }
  }
  return LineGraph(hs.size(), std::move(edges), g.turn_index());
}

struct InductionStats {
  /// Raw (p, q) candidates emitted from the inverted index before deduplication.
  std::size_t candidate_pairs = 0;
};

/// Inverted-index induction. Only pairs co-occurring under some node are examined; work is split
/// over hyperedge ranges and merged in range order, so the output does not depend on `threads`.
inline LineGraph induce_line_graph_fast(const Hypergraph& g, unsigned threads, InductionStats* stats = nullptr) {
  if (threads == 0) threads = 1;
  const std::size_t m = g.edge_count();
  const auto& hs = g.hyperedges();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(m, 1)));

  std::vector<std::vector<LineGraph::Edge>> partial(threads);
  std::vector<std::size_t> candidates(threads, 0);

  auto work = [&](unsigned t) {
    const std::size_t begin = m * t / threads;
    const std::size_t end = m * (t + 1) / threads;
    std::vector<std::uint32_t> qs;
    auto& out = partial[t];
    for (std::size_t p = begin; p < end; ++p) {
      qs.clear();
      for (NodeId v : hs[p].members()) {
        const auto& inc = g.incident_edges(v.index);
        auto it = std::upper_bound(inc.begin(), inc.end(), static_cast<std::uint32_t>(p));
        candidates[t] += static_cast<std::size_t>(inc.end() - it);
        qs.insert(qs.end(), it, inc.end());
      }
      std::sort(qs.begin(), qs.end());
      qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
      for (std::uint32_t q : qs) out.push_back({static_cast<std::uint32_t>(p), q, jaccard(hs[p], hs[q])});
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }

  std::vector<LineGraph::Edge> edges;
  std::size_t total = 0;
  for (const auto& part : partial) total += part.size();
  edges.reserve(total);
  for (auto& part : partial) edges.insert(edges.end(), part.begin(), part.end());
  if (stats) {
    stats->candidate_pairs = 0;
    for (std::size_t c : candidates) stats->candidate_pairs += c;
  }
  return LineGraph(m, std::move(edges), g.turn_index());
}

// Text format:
//   nodes=<n> edges=<m> view=<tag>
//   <provenance>\t<space-separated sorted node ids>
inline void write_hypergraph(std::ostream& os, const Hypergraph& g) {
  os << "nodes=" << g.node_count() << " edges=" << g.edge_count() << " view=" << (g.view() ? view_name(*g.view()) : "none") << '\n';
  for (const Hyperedge& e : g.hyperedges()) {
    os << e.provenance() << '\t';
    bool first = true;
    for (NodeId v : e.members()) {
      if (!first) os << ' ';
      os << v.index;
      first = false;
    }
    os << '\n';
  }
}

inline std::string to_text(const Hypergraph& g) {
  std::ostringstream os;
  write_hypergraph(os, g);
  return os.str();
}

inline Hypergraph read_hypergraph(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) fail(ErrorCode::ParseError, "line 1: missing hypergraph header");
  std::size_t n = 0, m = 0;
  std::string view_tag;
  {
    std::istringstream hs(header);
    std::string tok;
    while (hs >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) fail(ErrorCode::ParseError, "line 1: bad header token '" + tok + "'");
      auto key = tok.substr(0, eq);
      auto val = tok.substr(eq + 1);
      try {
        if (key == "nodes") n = std::stoul(val);
        else if (key == "edges") m = std::stoul(val);
        else if (key == "view") view_tag = val;
      } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "line 1: bad header value '" + tok + "'");
      }
    }
  }
  std::vector<Hyperedge> edges;
  edges.reserve(m);
  std::string line;
  std::size_t lineno = 1;
  while (edges.size() < m && std::getline(is, line)) {
    ++lineno;
    auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": missing tab");
    std::vector<NodeId> members;
    std::istringstream ids(line.substr(tab + 1));
    long long id;
    while (ids >> id) {
      if (id < 0) fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": negative node id");
      members.push_back(NodeId{static_cast<std::uint32_t>(id)});
    }
    edges.emplace_back(std::move(members), line.substr(0, tab));
  }
  if (edges.size() != m) fail(ErrorCode::ParseError, "expected " + std::to_string(m) + " hyperedges, read " + std::to_string(edges.size()));
  return build_incidence(std::move(edges), n, parse_view(view_tag), 0);
}

/// One `p q weight` line per undirected edge, weights printed round-trip exact.
inline void write_line_graph(std::ostream& os, const LineGraph& lg) {
  os << "hyperedges=" << lg.hyperedge_count() << " edges=" << lg.edge_count() << '\n';
  for (const auto& e : lg.edges()) os << e.p << ' ' << e.q << ' ' << std::setprecision(17) << e.weight << '\n';
}

}  // namespace hyfair
