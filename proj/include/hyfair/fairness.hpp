#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hyfair/corpus.hpp"
#include "hyfair/recommender.hpp"

namespace hyfair {

/// Item popularity: training-split interaction count over total interactions.
struct PopularityTable {
  std::map<ItemId, double> popularity;

  double at(ItemId item) const {
    auto it = popularity.find(item);
    if (it == popularity.end()) fail(ErrorCode::UnknownItem, "item " + std::to_string(item) + " has no popularity entry");
    return it->second;
  }
};

/// Counts every item mention (all turns plus ground truth) of the given sessions. Every catalog
/// item gets an entry, zero allowed.
inline PopularityTable popularity_from_sessions(const std::vector<SessionRecord>& sessions, const std::vector<ItemId>& catalog) {
  std::map<ItemId, std::size_t> counts;
  for (ItemId i : catalog) counts[i] = 0;
  std::size_t total = 0;
  for (const auto& s : sessions) {
    for (const auto& t : s.turns)
      for (ItemId i : t.item_ids) {
        ++counts[i];
        ++total;
      }
    for (const auto& g : s.ground_truth) {
      // A ground-truth item that the system turn also lists is one interaction, not two.
      const auto& sys = s.turns[g.turn].item_ids;
      if (std::find(sys.begin(), sys.end(), g.item) != sys.end()) continue;
      ++counts[g.item];
      ++total;
    }
  }
  PopularityTable t;
  for (const auto& [i, c] : counts) t.popularity[i] = total ? static_cast<double>(c) / static_cast<double>(total) : 0.0;
  return t;
}

inline void write_popularity(std::ostream& os, const PopularityTable& t) {
  os << std::setprecision(17);
  for (const auto& [i, p] : t.popularity) os << i << '\t' << p << '\n';
}

inline PopularityTable read_popularity(std::istream& is) {
  PopularityTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ItemId id;
    double p;
    if (!(ls >> id >> p)) fail(ErrorCode::ParseError, "popularity line " + std::to_string(lineno));
    t.popularity[id] = p;
  }
  return t;
}

inline PopularityTable load_popularity(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  return read_popularity(is);
}

/// How often each item appears across the top-K slots of all lists.
struct ExposureProfile {
  std::map<ItemId, std::size_t> counts;
  std::size_t total_slots = 0;
};

inline ExposureProfile exposure_profile(const std::vector<RecommendationList>& lists, std::size_t k) {
  ExposureProfile p;
  for (const auto& l : lists) {
    const std::size_t n = std::min(k, l.items.size());
    for (std::size_t i = 0; i < n; ++i) ++p.counts[l.items[i]];
    p.total_slots += n;
  }
  return p;
}

/// Mean popularity over every recommended slot in the top K.
inline double avg_popularity_at_k(const std::vector<RecommendationList>& lists, const PopularityTable& pop, std::size_t k) {
  if (lists.empty()) fail(ErrorCode::EmptyLists, "no recommendation lists");
  double sum = 0.0;
  std::size_t slots = 0;
  for (const auto& l : lists) {
    const std::size_t n = std::min(k, l.items.size());
    for (std::size_t i = 0; i < n; ++i) sum += pop.at(l.items[i]);
    slots += n;
  }
  return slots ? sum / static_cast<double>(slots) : 0.0;
}

/// Gini over exposure counts sorted ascending, with unexposed catalog items as zeros:
/// G = sum_i (2i - m - 1) x_(i) / (m sum x).
inline double gini_from_counts(std::vector<double> counts, std::size_t catalog_size) {
  if (counts.size() > catalog_size) fail(ErrorCode::ShapeMismatch, "more exposed items than catalog size");
  counts.resize(catalog_size, 0.0);
  std::sort(counts.begin(), counts.end());
  double total = 0.0;
  for (double c : counts) total += c;
  if (total == 0.0) fail(ErrorCode::EmptyProfile, "exposure profile is empty");
  const double m = static_cast<double>(catalog_size);
  double num = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) num += (2.0 * static_cast<double>(i + 1) - m - 1.0) * counts[i];
  return num / (m * total);
}

inline double gini_at_k(const ExposureProfile& profile, std::size_t catalog_size) {
  std::vector<double> counts;
  for (const auto& [_, c] : profile.counts) counts.push_back(static_cast<double>(c));
  return gini_from_counts(std::move(counts), catalog_size);
}

/// KL(P || U) in nats, P the normalized exposure and U uniform over the catalog.
inline double kl_from_counts(const std::vector<double>& counts, std::size_t catalog_size) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total == 0.0) fail(ErrorCode::EmptyProfile, "exposure profile is empty");
  const double m = static_cast<double>(catalog_size);
  double kl = 0.0;
  for (double c : counts) {
    if (c == 0.0) continue;
    const double p = c / total;
    kl += p * std::log(p * m);
  }
  return kl;
}

inline double kl_at_k(const ExposureProfile& profile, std::size_t catalog_size) {
  std::vector<double> counts;
  for (const auto& [_, c] : profile.counts) counts.push_back(static_cast<double>(c));
  return kl_from_counts(counts, catalog_size);
}

/// Catalog coverage: distinct items in any top-K list over catalog size.
inline double difference_at_k(const std::vector<RecommendationList>& lists, std::size_t catalog_size, std::size_t k) {
  if (lists.empty()) fail(ErrorCode::EmptyLists, "no recommendation lists");
  std::set<ItemId> distinct;
  for (const auto& l : lists)
    for (std::size_t i = 0; i < std::min(k, l.items.size()); ++i) distinct.insert(l.items[i]);
  return static_cast<double>(distinct.size()) / static_cast<double>(catalog_size);
}

struct FairnessAtK {
  double avg_popularity = 0.0;
  double gini = 0.0;
  double kl = 0.0;
  double difference = 0.0;
};

struct FairnessReport {
  std::map<std::size_t, FairnessAtK> by_k;
  std::map<std::string, std::string> metadata;
};

inline FairnessReport fairness_report(const std::vector<RecommendationList>& lists, const PopularityTable& pop, std::size_t catalog_size,
                                      const std::vector<std::size_t>& ks) {
  FairnessReport r;
  for (std::size_t k : ks) {
    const auto profile = exposure_profile(lists, k);
    FairnessAtK f;
    f.avg_popularity = avg_popularity_at_k(lists, pop, k);
    f.gini = gini_at_k(profile, catalog_size);
    f.kl = kl_at_k(profile, catalog_size);
    f.difference = difference_at_k(lists, catalog_size, k);
    r.by_k[k] = f;
  }
  return r;
}

/// Flat object keyed `A@5`, `G@5`, `L@5`, `D@5`, ...
inline nlohmann::ordered_json fairness_to_json(const FairnessReport& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, f] : r.by_k) {
    const auto ks = std::to_string(k);
    j["A@" + ks] = f.avg_popularity;
    j["G@" + ks] = f.gini;
    j["L@" + ks] = f.kl;
    j["D@" + ks] = f.difference;
  }
  return j;
}

}  // namespace hyfair
