#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyfair/error.hpp"
#include "hyfair/hypergraph.hpp"

namespace hyfair {

using ItemId = std::int64_t;
using EntityId = std::int64_t;

enum class Role { User, System };

struct Turn {
  Role role = Role::User;
  std::vector<std::string> tokens;
  std::vector<ItemId> item_ids;
  std::vector<EntityId> entity_ids;
};

struct GroundTruth {
  std::size_t turn = 0;
  ItemId item = 0;
};

struct SessionRecord {
  std::string session_id;
  std::vector<Turn> turns;
  std::vector<GroundTruth> ground_truth;

  /// Turns visible before the last recommendation is made: everything before the last
  /// ground-truth turn, or the whole dialogue when there is none.
  std::size_t observed_turn_count() const { return ground_truth.empty() ? turns.size() : ground_truth.back().turn; }

  std::vector<ItemId> observed_items() const { return mentions(&Turn::item_ids, observed_turn_count()); }
  std::vector<EntityId> observed_entities() const { return mentions(&Turn::entity_ids, observed_turn_count()); }

  /// Distinct ids in order of first mention among turns [0, end).
  std::vector<std::int64_t> mentions(std::vector<std::int64_t> Turn::*field, std::size_t end) const {
    std::vector<std::int64_t> out;
    std::set<std::int64_t> seen;
    for (std::size_t i = 0; i < end && i < turns.size(); ++i)
      for (auto id : turns[i].*field)
        if (seen.insert(id).second) out.push_back(id);
    return out;
  }
};

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(lowercase(tok));
  return out;
}

// ---- sessions ------------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> json_tokens(const nlohmann::json& obj) {
  if (obj.contains("tokens")) {
    std::vector<std::string> out;
    for (const auto& t : obj.at("tokens")) out.push_back(lowercase(t.get<std::string>()));
    return out;
  }
  if (obj.contains("text")) return tokenize(obj.at("text").get<std::string>());
  return {};
}

inline std::vector<std::int64_t> json_ids(const nlohmann::json& obj, const char* key) {
  std::vector<std::int64_t> out;
  if (obj.contains(key))
    for (const auto& v : obj.at(key)) out.push_back(v.get<std::int64_t>());
  return out;
}

}  // namespace detail

inline void validate_session(const SessionRecord& s) {
  std::optional<std::size_t> prev;
  for (const auto& gt : s.ground_truth) {
    if (prev && gt.turn <= *prev) fail(ErrorCode::InvariantViolation, s.session_id + ": ground-truth turn indices not strictly increasing");
    if (gt.turn >= s.turns.size()) fail(ErrorCode::InvariantViolation, s.session_id + ": ground-truth turn " + std::to_string(gt.turn) + " does not exist");
    if (s.turns[gt.turn].role != Role::System) fail(ErrorCode::InvariantViolation, s.session_id + ": ground-truth turn " + std::to_string(gt.turn) + " is not a system turn");
    prev = gt.turn;
  }
}

inline SessionRecord session_from_json(const nlohmann::json& j) {
  SessionRecord s;
  s.session_id = j.at("session_id").is_string() ? j.at("session_id").get<std::string>() : j.at("session_id").dump();
  for (const auto& tj : j.at("turns")) {
    Turn t;
    const auto role = tj.at("role").get<std::string>();
    if (role == "user") t.role = Role::User;
    else if (role == "system") t.role = Role::System;
    else throw nlohmann::json::other_error::create(501, "unknown role '" + role + "'", nullptr);
    t.tokens = detail::json_tokens(tj);
    t.item_ids = detail::json_ids(tj, "item_ids");
    t.entity_ids = detail::json_ids(tj, "entity_ids");
    s.turns.push_back(std::move(t));
  }
  if (j.contains("ground_truth"))
    for (const auto& g : j.at("ground_truth")) s.ground_truth.push_back({g.at("turn").get<std::size_t>(), g.at("item_id").get<ItemId>()});
  return s;
}

inline nlohmann::ordered_json session_to_json(const SessionRecord& s) {
  nlohmann::ordered_json j;
  j["session_id"] = s.session_id;
  j["turns"] = nlohmann::ordered_json::array();
  for (const auto& t : s.turns) {
    nlohmann::ordered_json tj;
    tj["role"] = t.role == Role::User ? "user" : "system";
    tj["tokens"] = t.tokens;
    tj["item_ids"] = t.item_ids;
    tj["entity_ids"] = t.entity_ids;
    j["turns"].push_back(std::move(tj));
  }
  j["ground_truth"] = nlohmann::ordered_json::array();
  for (const auto& g : s.ground_truth) j["ground_truth"].push_back({{"turn", g.turn}, {"item_id", g.item}});
  return j;
}

/// One JSON object per line; blank lines are skipped.
inline std::vector<SessionRecord> read_sessions(std::istream& is) {
  std::vector<SessionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SessionRecord s;
    try {
      s = session_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    validate_session(s);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<SessionRecord> load_sessions(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  return read_sessions(is);
}

inline void write_sessions(std::ostream& os, const std::vector<SessionRecord>& sessions) {
  for (const auto& s : sessions) os << session_to_json(s).dump() << '\n';
}

// ---- knowledge graphs ----------------------------------------------------------------------

struct Triple {
  EntityId head;
  std::string relation;
  EntityId tail;
};

/// Triples over a node table; traversal is undirected and ignores relations.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::map<EntityId, std::string> names, std::vector<Triple> triples) : names_(std::move(names)), triples_(std::move(triples)) {
    for (const auto& t : triples_) {
      if (!names_.count(t.head) || !names_.count(t.tail))
        fail(ErrorCode::InvariantViolation, "triple references unknown node " + std::to_string(names_.count(t.head) ? t.tail : t.head));
      if (t.head == t.tail) fail(ErrorCode::InvariantViolation, "self-loop triple on node " + std::to_string(t.head));
      adjacency_[t.head].push_back(t.tail);
      adjacency_[t.tail].push_back(t.head);
    }
    for (auto& [_, nb] : adjacency_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    for (const auto& [id, name] : names_)
      if (auto item = item_of_name(name)) item_index_.emplace(*item, id);
  }

  bool empty() const noexcept { return names_.empty(); }
  bool contains(EntityId id) const { return names_.count(id) != 0; }
  const std::map<EntityId, std::string>& names() const noexcept { return names_; }
  const std::vector<Triple>& triples() const noexcept { return triples_; }

  const std::vector<EntityId>& neighbors(EntityId id) const {
    static const std::vector<EntityId> none;
    auto it = adjacency_.find(id);
    return it == adjacency_.end() ? none : it->second;
  }

  /// KG node named `@<item>`, if any.
  std::optional<EntityId> node_for_item(ItemId item) const {
    auto it = item_index_.find(item);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Item id denoted by a node name of the form `@<digits>`.
  static std::optional<ItemId> item_of_name(const std::string& name) {
    if (name.size() < 2 || name[0] != '@') return std::nullopt;
    for (std::size_t i = 1; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::nullopt;
    return std::stoll(name.substr(1));
  }

 private:
  std::map<EntityId, std::string> names_;
  std::vector<Triple> triples_;
  std::map<EntityId, std::vector<EntityId>> adjacency_;
  std::map<ItemId, EntityId> item_index_;
};

inline std::map<EntityId, std::string> read_node_table(std::istream& is) {
  std::map<EntityId, std::string> names;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorCode::ParseError, "node table line " + std::to_string(lineno) + ": expected id<TAB>name");
    try {
      names[std::stoll(line.substr(0, tab))] = line.substr(tab + 1);
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "node table line " + std::to_string(lineno) + ": bad id");
    }
  }
  return names;
}

inline std::vector<Triple> read_triples(std::istream& is) {
  std::vector<Triple> triples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) fail(ErrorCode::ParseError, "triples line " + std::to_string(lineno) + ": expected head<TAB>relation<TAB>tail");
    try {
      triples.push_back({std::stoll(line.substr(0, t1)), line.substr(t1 + 1, t2 - t1 - 1), std::stoll(line.substr(t2 + 1))});
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "triples line " + std::to_string(lineno) + ": bad node id");
    }
  }
  return triples;
}

/// Node table path defaults to `<triples_path>.nodes`.
inline KnowledgeGraph load_knowledge_graph(const std::string& triples_path, std::string nodes_path = {}) {
  if (nodes_path.empty()) nodes_path = triples_path + ".nodes";
  std::ifstream ts(triples_path), ns(nodes_path);
  if (!ts) fail(ErrorCode::IoError, "cannot read " + triples_path);
  if (!ns) fail(ErrorCode::IoError, "cannot read " + nodes_path);
  return KnowledgeGraph(read_node_table(ns), read_triples(ts));
}

/// All nodes within k undirected hops of any seed, seeds included.
inline std::set<EntityId> khop_neighbors(const KnowledgeGraph& kg, const std::set<EntityId>& seeds, int k) {
  std::set<EntityId> seen;
  std::deque<std::pair<EntityId, int>> frontier;
  for (EntityId s : seeds) {
    if (!kg.contains(s)) fail(ErrorCode::UnknownSeed, "seed " + std::to_string(s) + " not in knowledge graph");
    if (seen.insert(s).second) frontier.emplace_back(s, 0);
  }
  while (!frontier.empty()) {
    auto [u, depth] = frontier.front();
    frontier.pop_front();
    if (depth >= k) continue;
    for (EntityId w : kg.neighbors(u))
      if (seen.insert(w).second) frontier.emplace_back(w, depth + 1);
  }
  return seen;
}

// ---- reviews and lexicon -------------------------------------------------------------------

struct ReviewCorpus {
  std::map<ItemId, std::vector<std::vector<std::string>>> reviews;
};

inline ReviewCorpus read_reviews(std::istream& is) {
  ReviewCorpus rc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto toks = detail::json_tokens(j);
      if (toks.empty()) fail(ErrorCode::InvariantViolation, "review line " + std::to_string(lineno) + " has no tokens");
      rc.reviews[j.at("item_id").get<ItemId>()].push_back(std::move(toks));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rc;
}

inline ReviewCorpus load_reviews(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  return read_reviews(is);
}

struct SentimentLexicon {
  std::set<std::string> positive;
  std::set<std::string> negative;

  static SentimentLexicon make(std::set<std::string> pos, std::set<std::string> neg) {
    for (const auto& w : pos)
      if (neg.count(w)) fail(ErrorCode::InvariantViolation, "lexicon word '" + w + "' is both positive and negative");
    return {std::move(pos), std::move(neg)};
  }
};

inline std::set<std::string> read_word_list(std::istream& is) {
  std::set<std::string> words;
  std::string w;
  while (is >> w) words.insert(lowercase(w));
  return words;
}

inline SentimentLexicon load_lexicon(const std::string& pos_path, const std::string& neg_path) {
  std::ifstream ps(pos_path), ns(neg_path);
  if (!ps) fail(ErrorCode::IoError, "cannot read " + pos_path);
  if (!ns) fail(ErrorCode::IoError, "cannot read " + neg_path);
  return SentimentLexicon::make(read_word_list(ps), read_word_list(ns));
}

// ---- view construction ---------------------------------------------------------------------

/// Per-view symbol table. Rows [0, item_count) are the catalog items in ascending id order in
/// every view; the remaining rows are view-specific (KG nodes or review words).
class NodeTable {
 public:
  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& symbol(std::size_t row) const { return symbols_[row]; }

  std::optional<std::uint32_t> row_of(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t add(const std::string& symbol) {
    auto [it, inserted] = index_.emplace(symbol, static_cast<std::uint32_t>(symbols_.size()));
    if (inserted) symbols_.push_back(symbol);
    return it->second;
  }

  friend bool operator==(const NodeTable& a, const NodeTable& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

inline std::string item_symbol(ItemId id) { return "@" + std::to_string(id); }
inline std::string entity_symbol(EntityId id) { return "kg:" + std::to_string(id); }

struct BuildOptions {
  int khop = 2;
  std::set<View> views{kAllViews.begin(), kAllViews.end()};
  unsigned threads = 1;
};

/// Per-session bookkeeping inside one view: the contiguous hyperedge range and the node rows the
/// session mentions directly.
struct SessionSpan {
  std::size_t first_edge = 0;
  std::size_t edge_count = 0;
  std::vector<std::size_t> mentioned_rows;
};

struct ViewData {
  Hypergraph hypergraph;
  LineGraph line_graph;
  NodeTable nodes;
  std::vector<SessionSpan> sessions;
};

struct ViewBundle {
  std::vector<ItemId> catalog;
  std::map<View, ViewData> views;
  int turn_index = 0;

  bool has(View v) const { return views.count(v) != 0; }
  const ViewData& at(View v) const {
    auto it = views.find(v);
    if (it == views.end()) fail(ErrorCode::MissingView, std::string(view_name(v)) + " view is not active");
    return it->second;
  }
  std::size_t item_row(ItemId item) const {
    auto it = std::lower_bound(catalog.begin(), catalog.end(), item);
    if (it == catalog.end() || *it != item) fail(ErrorCode::UnknownItem, "item " + std::to_string(item) + " not in catalog");
    return static_cast<std::size_t>(it - catalog.begin());
  }
};

/// Every item id appearing in sessions, reviews, or as an `@<item>` KG node.
inline std::vector<ItemId> derive_catalog(const std::vector<SessionRecord>& sessions, const KnowledgeGraph& dbpedia, const KnowledgeGraph& conceptnet,
                                          const ReviewCorpus& reviews) {
  std::set<ItemId> items;
  for (const auto& s : sessions) {
    for (const auto& t : s.turns) items.insert(t.item_ids.begin(), t.item_ids.end());
    for (const auto& g : s.ground_truth) items.insert(g.item);
  }
  for (const auto& [id, _] : reviews.reviews) items.insert(id);
  for (const auto* kg : {&dbpedia, &conceptnet})
    for (const auto& [_, name] : kg->names())
      if (auto it = KnowledgeGraph::item_of_name(name)) items.insert(*it);
  return {items.begin(), items.end()};
}

/// Builds the four view hypergraphs and their line graphs. Keeps per-session hyperedges so a
/// session update only recomputes that session's hyperedges.
class ViewBuilder {
 public:
  ViewBuilder(std::vector<SessionRecord> sessions, KnowledgeGraph dbpedia, KnowledgeGraph conceptnet, ReviewCorpus reviews, SentimentLexicon lexicon,
              BuildOptions options, std::optional<std::vector<ItemId>> catalog = std::nullopt)
      : sessions_(std::move(sessions)),
        dbpedia_(std::move(dbpedia)),
        conceptnet_(std::move(conceptnet)),
        reviews_(std::move(reviews)),
        lexicon_(std::move(lexicon)),
        options_(std::move(options)) {
    catalog_ = catalog ? *catalog : derive_catalog(sessions_, dbpedia_, conceptnet_, reviews_);
    std::sort(catalog_.begin(), catalog_.end());
    catalog_.erase(std::unique(catalog_.begin(), catalog_.end()), catalog_.end());
    for (View v : options_.views) init_table(v);
    for (View v : options_.views) {
      auto& per = per_session_[v];
      per.resize(sessions_.size());
      for (std::size_t i = 0; i < sessions_.size(); ++i) per[i] = session_edges(v, sessions_[i]);
    }
  }

  const std::vector<SessionRecord>& sessions() const noexcept { return sessions_; }
  const std::vector<ItemId>& catalog() const noexcept { return catalog_; }
  const BuildOptions& options() const noexcept { return options_; }

  /// Replaces one session and recomputes only its hyperedges.
  void update_session(std::size_t index, SessionRecord session) {
    sessions_.at(index) = std::move(session);
    for (View v : options_.views) per_session_[v][index] = session_edges(v, sessions_[index]);
  }

  ViewBundle build(int turn_index = 0) const {
    ViewBundle b;
    b.catalog = catalog_;
    b.turn_index = turn_index;
    for (View v : options_.views) {
      ViewData vd;
      vd.nodes = tables_.at(v);
      std::vector<Hyperedge> edges;
      const auto& per = per_session_.at(v);
      for (std::size_t i = 0; i < per.size(); ++i) {
        SessionSpan span;
        span.first_edge = edges.size();
        span.edge_count = per[i].edges.size();
        span.mentioned_rows = per[i].mentioned_rows;
        edges.insert(edges.end(), per[i].edges.begin(), per[i].edges.end());
        vd.sessions.push_back(std::move(span));
      }
      vd.hypergraph = build_incidence(std::move(edges), vd.nodes.size(), v, turn_index);
      vd.line_graph = induce_line_graph_fast(vd.hypergraph, options_.threads);
      b.views.emplace(v, std::move(vd));
    }
    return b;
  }

 private:
  struct SessionEdges {
    std::vector<Hyperedge> edges;
    std::vector<std::size_t> mentioned_rows;
  };

  void init_table(View v) {
    NodeTable t;
    for (ItemId item : catalog_) t.add(item_symbol(item));
    auto add_kg = [&](const KnowledgeGraph& kg) {
      for (const auto& [id, name] : kg.names()) {
        auto item = KnowledgeGraph::item_of_name(name);
        if (item && std::binary_search(catalog_.begin(), catalog_.end(), *item)) continue;
        t.add(entity_symbol(id));
      }
    };
    if (v == View::Entity) {
      add_kg(dbpedia_);
      // Without a KG, mentioned entity ids become standalone nodes.
      if (dbpedia_.empty()) {
        std::set<EntityId> ents;
        for (const auto& s : sessions_)
          for (const auto& turn : s.turns) ents.insert(turn.entity_ids.begin(), turn.entity_ids.end());
        for (EntityId e : ents) t.add(entity_symbol(e));
      }
    } else if (v == View::Word) {
      add_kg(conceptnet_);
    } else if (v == View::Review) {
      std::set<std::string> words;
      for (const auto& [_, revs] : reviews_.reviews)
        for (const auto& rev : revs)
          for (const auto& tok : rev)
            if (lexicon_.positive.count(tok) || lexicon_.negative.count(tok)) words.insert(tok);
      for (const auto& w : words) t.add("w:" + w);
    }
    tables_.emplace(v, std::move(t));
  }

  std::uint32_t item_row(ItemId item) const {
    auto it = std::lower_bound(catalog_.begin(), catalog_.end(), item);
    if (it == catalog_.end() || *it != item) fail(ErrorCode::UnknownItem, "item " + std::to_string(item) + " not in catalog");
    return static_cast<std::uint32_t>(it - catalog_.begin());
  }

  /// Row of a KG node inside a view table (items map onto their catalog rows).
  std::uint32_t kg_row(View v, const KnowledgeGraph& kg, EntityId id) const {
    const auto& name = kg.names().at(id);
    if (auto item = KnowledgeGraph::item_of_name(name); item && std::binary_search(catalog_.begin(), catalog_.end(), *item)) return item_row(*item);
    return *tables_.at(v).row_of(entity_symbol(id));
  }

  SessionEdges session_edges(View v, const SessionRecord& s) const {
    SessionEdges out;
    const auto items = s.observed_items();
    std::vector<ItemId> known_items;
    for (ItemId i : items)
      if (std::binary_search(catalog_.begin(), catalog_.end(), i)) known_items.push_back(i);
    switch (v) {
      case View::Item: {
        if (known_items.empty()) fail(ErrorCode::EmptySession, s.session_id + " mentions no items");
        std::vector<NodeId> members;
        for (ItemId i : known_items) {
          members.push_back(NodeId{item_row(i)});
          out.mentioned_rows.push_back(item_row(i));
        }
        out.edges.emplace_back(std::move(members), s.session_id);
        break;
      }
      case View::Entity: {
        for (ItemId i : known_items) out.mentioned_rows.push_back(item_row(i));
        for (EntityId seed : s.observed_entities()) {
          std::vector<NodeId> members;
          if (dbpedia_.empty()) {
            members.push_back(NodeId{*tables_.at(v).row_of(entity_symbol(seed))});
          } else {
            for (EntityId e : khop_neighbors(dbpedia_, {seed}, options_.khop)) members.push_back(NodeId{kg_row(v, dbpedia_, e)});
          }
          const std::uint32_t seed_row = dbpedia_.empty() ? members.front().index : kg_row(v, dbpedia_, seed);
          out.mentioned_rows.push_back(seed_row);
          out.edges.emplace_back(std::move(members), s.session_id + ":e" + std::to_string(seed));
        }
        break;
      }
      case View::Word: {
        for (ItemId i : known_items) {
          std::vector<NodeId> members{NodeId{item_row(i)}};
          if (auto node = conceptnet_.node_for_item(i))
            for (EntityId e : khop_neighbors(conceptnet_, {*node}, options_.khop)) members.push_back(NodeId{kg_row(v, conceptnet_, e)});
          out.mentioned_rows.push_back(item_row(i));
          out.edges.emplace_back(std::move(members), s.session_id + ":i" + std::to_string(i));
        }
        break;
      }
      case View::Review: {
        const auto& table = tables_.at(v);
        for (ItemId i : known_items) {
          std::vector<NodeId> pos{NodeId{item_row(i)}}, neg{NodeId{item_row(i)}};
          if (auto it = reviews_.reviews.find(i); it != reviews_.reviews.end()) {
            for (const auto& rev : it->second)
              for (const auto& tok : rev) {
                if (lexicon_.positive.count(tok)) pos.push_back(NodeId{*table.row_of("w:" + tok)});
                if (lexicon_.negative.count(tok)) neg.push_back(NodeId{*table.row_of("w:" + tok)});
              }
          }
          out.mentioned_rows.push_back(item_row(i));
          out.edges.emplace_back(std::move(pos), s.session_id + ":" + std::to_string(i) + ":+");
          out.edges.emplace_back(std::move(neg), s.session_id + ":" + std::to_string(i) + ":-");
        }
        break;
      }
    }
    std::sort(out.mentioned_rows.begin(), out.mentioned_rows.end());
    out.mentioned_rows.erase(std::unique(out.mentioned_rows.begin(), out.mentioned_rows.end()), out.mentioned_rows.end());
    return out;
  }

  std::vector<SessionRecord> sessions_;
  KnowledgeGraph dbpedia_;
  KnowledgeGraph conceptnet_;
  ReviewCorpus reviews_;
  SentimentLexicon lexicon_;
  BuildOptions options_;
  std::vector<ItemId> catalog_;
  std::map<View, NodeTable> tables_;
  std::map<View, std::vector<SessionEdges>> per_session_;
};

inline ViewBundle build_view_bundle(const std::vector<SessionRecord>& sessions, const KnowledgeGraph& dbpedia, const KnowledgeGraph& conceptnet,
                                    const ReviewCorpus& reviews, const SentimentLexicon& lexicon, const BuildOptions& options,
                                    std::optional<std::vector<ItemId>> catalog = std::nullopt) {
  return ViewBuilder(sessions, dbpedia, conceptnet, reviews, lexicon, options, std::move(catalog)).build();
}

/// Single-view builders, for callers that need one view in isolation.
inline Hypergraph build_view(View v, const std::vector<SessionRecord>& sessions, const KnowledgeGraph& dbpedia, const KnowledgeGraph& conceptnet,
                             const ReviewCorpus& reviews, const SentimentLexicon& lexicon, int khop) {
  BuildOptions opt;
  opt.khop = khop;
  opt.views = {v};
  return build_view_bundle(sessions, dbpedia, conceptnet, reviews, lexicon, opt).at(v).hypergraph;
}

inline Hypergraph build_item_view(const std::vector<SessionRecord>& sessions) {
  return build_view(View::Item, sessions, {}, {}, {}, {}, 0);
}
inline Hypergraph build_entity_view(const std::vector<SessionRecord>& sessions, const KnowledgeGraph& kg, int khop) {
  return build_view(View::Entity, sessions, kg, {}, {}, {}, khop);
}
inline Hypergraph build_word_view(const std::vector<SessionRecord>& sessions, const KnowledgeGraph& kg, int khop) {
  return build_view(View::Word, sessions, {}, kg, {}, {}, khop);
}
inline Hypergraph build_review_view(const std::vector<SessionRecord>& sessions, const ReviewCorpus& reviews, const SentimentLexicon& lex) {
  return build_view(View::Review, sessions, {}, {}, reviews, lex, 0);
}

}  // namespace hyfair
