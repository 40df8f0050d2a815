#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hyfair/corpus.hpp"
#include "hyfair/params.hpp"

namespace hyfair {

/// Everything the view builders read.
struct Dataset {
  std::vector<SessionRecord> sessions;
  KnowledgeGraph dbpedia;
  KnowledgeGraph conceptnet;
  ReviewCorpus reviews;
  SentimentLexicon lexicon;
};

/// Planted latent vectors of users (per session) and items.
struct Preferences {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> users;
  std::map<ItemId, std::vector<double>> items;

  double score(const std::string& session_id, ItemId item) const {
    auto u = users.find(session_id);
    auto v = items.find(item);
    if (u == users.end()) fail(ErrorCode::InvariantViolation, "no latent preference for session " + session_id);
    if (v == items.end()) fail(ErrorCode::UnknownItem, "no latent vector for item " + std::to_string(item));
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += u->second[i] * v->second[i];
    return s;
  }
};

inline nlohmann::ordered_json preferences_to_json(const Preferences& p) {
  nlohmann::ordered_json j;
  j["dim"] = p.dim;
  j["users"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : p.users) j["users"][k] = v;
  j["items"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : p.items) j["items"][std::to_string(k)] = v;
  return j;
}

inline Preferences load_preferences(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  Preferences p;
  try {
    auto j = nlohmann::json::parse(is);
    p.dim = j.at("dim").get<std::size_t>();
    for (const auto& [k, v] : j.at("users").items()) p.users[k] = v.get<std::vector<double>>();
    for (const auto& [k, v] : j.at("items").items()) p.items[std::stoll(k)] = v.get<std::vector<double>>();
  } catch (const std::exception& e) {
    fail(ErrorCode::ParseError, path + ": " + e.what());
  }
  for (const auto& [k, v] : p.users)
    if (v.size() != p.dim) fail(ErrorCode::ParseError, path + ": latent of " + k + " has wrong length");
  for (const auto& [k, v] : p.items)
    if (v.size() != p.dim) fail(ErrorCode::ParseError, path + ": latent of item " + std::to_string(k) + " has wrong length");
  return p;
}

struct SyntheticSpec {
  std::size_t sessions = 200;
  std::size_t items = 100;
  std::size_t clusters = 2;
  std::size_t latent_dim = 8;
  std::size_t genres_per_cluster = 3;
  std::size_t keywords_per_cluster = 20;
  std::size_t words_per_cluster = 30;  // per sentiment polarity
  std::uint64_t seed = 7;
};

struct SyntheticData {
  Dataset dataset;
  Preferences preferences;
  std::vector<std::size_t> item_cluster;
  std::vector<std::size_t> user_cluster;
};

namespace synthetic_detail {

inline double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n))); }

/// Weighted draws without replacement.
inline std::vector<std::size_t> sample_weighted(std::mt19937_64& rng, std::vector<double> w, std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < count; ++c) {
    double total = 0.0;
    for (double x : w) total += x;
    double r = unit_uniform(rng) * total;
    std::size_t chosen = w.size() - 1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] == 0.0) continue;
      if (r < w[i]) {
        chosen = i;
        break;
      }
      r -= w[i];
    }
    while (w[chosen] == 0.0) --chosen;
    out.push_back(chosen);
    w[chosen] = 0.0;
  }
  return out;
}

}  // namespace synthetic_detail

/// Planted-preference dialogues. Items and users carry latent vectors around per-cluster
/// centres; each item also has a Zipf popularity weight within its cluster. A session draws
/// five distinct items with weight popularity * exp(2 u.v); the first draw is the ground truth
/// and the other four form the observed context. Side information is cluster-aligned: genres
/// (entity KG), keywords (word KG) and sentiment words in reviews.
inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
  using namespace synthetic_detail;
  if (spec.clusters == 0 || spec.clusters > spec.latent_dim || spec.items < 5 * spec.clusters || spec.sessions == 0)
    fail(ErrorCode::ConfigError, "synthetic spec out of range");
  std::mt19937_64 rng(spec.seed);
  SyntheticData out;
  auto& p = out.preferences;
  p.dim = spec.latent_dim;
  const double centre_scale = 1.5, noise = 0.5;
  auto latent = [&](std::size_t cluster) {
    std::vector<double> v(spec.latent_dim);
    for (double& x : v) x = noise * normal(rng);
    v[cluster] += centre_scale;
    return v;
  };

  // Items: cluster by id modulo, popularity rank shuffled within each cluster.
  std::vector<double> popularity(spec.items);
  out.item_cluster.resize(spec.items);
  for (std::size_t c = 0; c < spec.clusters; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = c; i < spec.items; i += spec.clusters) members.push_back(i);
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[pick(rng, i)]);
    for (std::size_t r = 0; r < members.size(); ++r) {
      popularity[members[r]] = 1.0 / static_cast<double>(r + 1);
      out.item_cluster[members[r]] = c;
    }
  }
  for (std::size_t i = 0; i < spec.items; ++i) p.items[static_cast<ItemId>(i)] = latent(out.item_cluster[i]);

  // Entity KG: item nodes share the item id; genre nodes start at 10000.
  std::map<EntityId, std::string> dnames, cnames;
  std::vector<Triple> dtriples, ctriples;
  std::vector<EntityId> item_genre(spec.items);
  for (std::size_t i = 0; i < spec.items; ++i) {
    dnames[static_cast<EntityId>(i)] = item_symbol(static_cast<ItemId>(i));
    cnames[static_cast<EntityId>(i)] = item_symbol(static_cast<ItemId>(i));
  }
  for (std::size_t c = 0; c < spec.clusters; ++c)
    for (std::size_t g = 0; g < spec.genres_per_cluster; ++g)
      dnames[static_cast<EntityId>(10000 + c * spec.genres_per_cluster + g)] = "genre_" + std::to_string(c) + "_" + std::to_string(g);
  for (std::size_t i = 0; i < spec.items; ++i) {
    item_genre[i] = static_cast<EntityId>(10000 + out.item_cluster[i] * spec.genres_per_cluster + pick(rng, spec.genres_per_cluster));
    dtriples.push_back({static_cast<EntityId>(i), "genre", item_genre[i]});
  }

  // Word KG: two keywords per item from its cluster; keyword nodes start at 20000.
  for (std::size_t c = 0; c < spec.clusters; ++c)
    for (std::size_t k = 0; k < spec.keywords_per_cluster; ++k)
      cnames[static_cast<EntityId>(20000 + c * spec.keywords_per_cluster + k)] = "kw_" + std::to_string(c) + "_" + std::to_string(k);
  for (std::size_t i = 0; i < spec.items; ++i) {
    const std::size_t a = pick(rng, spec.keywords_per_cluster);
    std::size_t b = pick(rng, spec.keywords_per_cluster - 1);
    if (b >= a) ++b;
    for (std::size_t k : {a, b}) ctriples.push_back({static_cast<EntityId>(i), "related_to", static_cast<EntityId>(20000 + out.item_cluster[i] * spec.keywords_per_cluster + k)});
  }
  out.dataset.dbpedia = KnowledgeGraph(std::move(dnames), std::move(dtriples));
  out.dataset.conceptnet = KnowledgeGraph(std::move(cnames), std::move(ctriples));

  // Reviews over a cluster-split sentiment lexicon.
  std::set<std::string> pos, neg;
  auto word = [&](const char* stem, std::size_t c, std::size_t k) { return stem + std::to_string(c * spec.words_per_cluster + k); };
  for (std::size_t c = 0; c < spec.clusters; ++c)
    for (std::size_t k = 0; k < spec.words_per_cluster; ++k) {
      pos.insert(word("pos", c, k));
      neg.insert(word("neg", c, k));
    }
  out.dataset.lexicon = SentimentLexicon::make(pos, neg);
  for (std::size_t i = 0; i < spec.items; ++i) {
    const std::size_t c = out.item_cluster[i];
    for (int r = 0; r < 2; ++r) {
      std::vector<std::string> toks{"this", "one", "was", word("pos", c, pick(rng, spec.words_per_cluster)), "and",
                                    word("pos", c, pick(rng, spec.words_per_cluster)), "but", word("neg", c, pick(rng, spec.words_per_cluster))};
      out.dataset.reviews.reviews[static_cast<ItemId>(i)].push_back(std::move(toks));
    }
  }

  // Sessions.
  out.user_cluster.resize(spec.sessions);
  for (std::size_t s = 0; s < spec.sessions; ++s) {
    const std::size_t c = pick(rng, spec.clusters);
    out.user_cluster[s] = c;
    SessionRecord rec;
    char id[16];
    std::snprintf(id, sizeof id, "s%04zu", s);
    rec.session_id = id;
    auto u = latent(c);
    std::vector<double> w(spec.items);
    for (std::size_t i = 0; i < spec.items; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < spec.latent_dim; ++k) dot += u[k] * p.items[static_cast<ItemId>(i)][k];
      w[i] = popularity[i] * std::exp(2.0 * dot);
    }
    const auto draw = sample_weighted(rng, w, 5);
    const auto item = [&](std::size_t k) { return static_cast<ItemId>(draw[k]); };
    const auto sym = [&](std::size_t k) { return item_symbol(item(k)); };
    rec.turns.push_back({Role::User, {"hi", "i", "like", sym(1), "and", sym(2)}, {item(1), item(2)}, {item_genre[draw[1]]}});
    rec.turns.push_back({Role::System, {"have", "you", "seen", sym(3)}, {item(3)}, {}});
    rec.turns.push_back({Role::User, {"yes", sym(3), "and", sym(4), "were", "great"}, {item(3), item(4)}, {item_genre[draw[4]]}});
    rec.turns.push_back({Role::System, {"you", "should", "watch", sym(0)}, {item(0)}, {}});
    rec.ground_truth.push_back({3, item(0)});
    p.users[rec.session_id] = std::move(u);
    out.dataset.sessions.push_back(std::move(rec));
  }
  return out;
}

// ---- writers ---------------------------------------------------------------------------------

inline void write_knowledge_graph(const std::string& triples_path, const KnowledgeGraph& kg) {
  std::ofstream ts(triples_path), ns(triples_path + ".nodes");
  if (!ts || !ns) fail(ErrorCode::IoError, "cannot write " + triples_path);
  for (const auto& [id, name] : kg.names()) ns << id << '\t' << name << '\n';
  for (const auto& t : kg.triples()) ts << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

/// Writes the dataset, the planted preferences and a ready-to-use config into `dir`.
inline void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) fail(ErrorCode::IoError, "cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("sessions.jsonl");
    write_sessions(os, data.dataset.sessions);
  }
  write_knowledge_graph((dir / "dbpedia.tsv").string(), data.dataset.dbpedia);
  write_knowledge_graph((dir / "conceptnet.tsv").string(), data.dataset.conceptnet);
  {
    auto os = open("reviews.jsonl");
    for (const auto& [item, revs] : data.dataset.reviews.reviews)
      for (const auto& r : revs) {
        nlohmann::ordered_json j;
        j["item_id"] = item;
        j["tokens"] = r;
        os << j.dump() << '\n';
      }
  }
  {
    auto os = open("lexicon_pos.txt");
    for (const auto& w : data.dataset.lexicon.positive) os << w << '\n';
  }
  {
    auto os = open("lexicon_neg.txt");
    for (const auto& w : data.dataset.lexicon.negative) os << w << '\n';
  }
  {
    auto os = open("preferences.json");
    os << preferences_to_json(data.preferences).dump() << '\n';
  }
  {
    auto os = open("config.txt");
    os << "sessions = sessions.jsonl\n"
          "dbpedia = dbpedia.tsv\n"
          "conceptnet = conceptnet.tsv\n"
          "reviews = reviews.jsonl\n"
          "lexicon_pos = lexicon_pos.txt\n"
          "lexicon_neg = lexicon_neg.txt\n"
          "preferences = preferences.json\n"
          "seed = "
       << seed << '\n';
  }
}

}  // namespace hyfair
