#include <gtest/gtest.h>

#include <sstream>

#include "hyfair/fairness.hpp"
#include "support.hpp"

using namespace hyfair;
using hyfair::testing::uniform_index;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::IoError;
}

/// Gini via mean absolute difference: sum_i sum_j |x_i - x_j| / (2 m^2 mean).
double gini_pairwise(const std::vector<double>& x) {
  const double m = static_cast<double>(x.size());
  double sum = 0.0, diff = 0.0;
  for (double a : x) {
    sum += a;
    for (double b : x) diff += std::abs(a - b);
  }
  return diff / (2.0 * m * sum);
}

std::vector<RecommendationList> random_lists(std::mt19937_64& rng, std::size_t n, std::size_t len, std::size_t catalog) {
  std::vector<RecommendationList> out;
  for (std::size_t s = 0; s < n; ++s) {
    RecommendationList l;
    l.session_id = "s" + std::to_string(s);
    std::set<ItemId> used;
    while (l.items.size() < len) {
      const ItemId i = static_cast<ItemId>(uniform_index(rng, catalog));
      if (used.insert(i).second) l.items.push_back(i);
    }
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

TEST(Gini, ClosedForms) {
  EXPECT_NEAR(gini_from_counts({1, 1, 1, 1}, 4), 0.0, 1e-12);
  EXPECT_NEAR(gini_from_counts({0, 0, 0, 4}, 4), 0.75, 1e-12);
  EXPECT_NEAR(gini_from_counts({4}, 4), 0.75, 1e-12);
  EXPECT_NEAR(gini_from_counts({1, 3}, 2), 0.25, 1e-12);
}

TEST(Gini, MatchesPairwiseOracleAndIsScaleInvariant) {
  std::mt19937_64 rng(109);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(2 + trial % 13);
    for (double& v : x) v = static_cast<double>(uniform_index(rng, 6));
    x[0] += 1.0;
    const double g = gini_from_counts(x, x.size());
    EXPECT_NEAR(g, gini_pairwise(x), 1e-12);
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, 1.0 - 1.0 / static_cast<double>(x.size()) + 1e-12);
    std::vector<double> scaled = x;
    for (double& v : scaled) v *= 7.0;
    EXPECT_NEAR(gini_from_counts(scaled, x.size()), g, 1e-12);
  }
}

TEST(Gini, EmptyProfile) {
  EXPECT_EQ(code_of([] { gini_from_counts({0, 0}, 3); }), ErrorCode::EmptyProfile);
  EXPECT_EQ(code_of([] { gini_at_k(ExposureProfile{}, 3); }), ErrorCode::EmptyProfile);
}

TEST(KL, ClosedForms) {
  EXPECT_NEAR(kl_from_counts({2, 2, 2, 2}, 4), 0.0, 1e-12);
  EXPECT_NEAR(kl_from_counts({3, 1}, 2), 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-12);
  EXPECT_NEAR(kl_from_counts({3, 1}, 2), 0.1308, 1e-4);
  for (std::size_t m : {2u, 10u, 1000u}) EXPECT_NEAR(kl_from_counts({5}, m), std::log(static_cast<double>(m)), 1e-12);
  EXPECT_EQ(code_of([] { kl_from_counts({}, 3); }), ErrorCode::EmptyProfile);
}

TEST(KL, NonNegativeAndBounded) {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(5);
    for (double& v : x) v = static_cast<double>(uniform_index(rng, 4));
    x[2] += 1.0;
    const std::size_t m = 5 + trial;
    const double kl = kl_from_counts(x, m);
    EXPECT_GE(kl, -1e-15);
    EXPECT_LE(kl, std::log(static_cast<double>(m)) + 1e-12);
  }
}

TEST(Exposure, CountsTopKSlots) {
  const std::vector<RecommendationList> lists{{"a", {1, 2, 3}, {}}, {"b", {2, 4}, {}}};
  const auto p = exposure_profile(lists, 2);
  EXPECT_EQ(p.total_slots, 4u);
  EXPECT_EQ(p.counts.at(2), 2u);
  EXPECT_EQ(p.counts.count(3), 0u);
}

TEST(AvgPopularity, MatchesMeanOracle) {
  std::mt19937_64 rng(127);
  PopularityTable pop;
  for (ItemId i = 0; i < 50; ++i) pop.popularity[i] = unit_uniform(rng);
  for (int trial = 0; trial < 20; ++trial) {
    const auto lists = random_lists(rng, 1 + trial, 10, 50);
    for (std::size_t k : {1u, 5u, 10u}) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& l : lists)
        for (std::size_t i = 0; i < k; ++i, ++n) sum += pop.popularity.at(l.items[i]);
      EXPECT_NEAR(avg_popularity_at_k(lists, pop, k), sum / static_cast<double>(n), 1e-12);
    }
  }
  EXPECT_EQ(code_of([&] { avg_popularity_at_k({}, pop, 5); }), ErrorCode::EmptyLists);
  EXPECT_EQ(code_of([&] { avg_popularity_at_k({{"x", {999}, {}}}, pop, 5); }), ErrorCode::UnknownItem);
}

TEST(Difference, MatchesSetOracle) {
  std::mt19937_64 rng(131);
  for (int trial = 0; trial < 20; ++trial) {
    const auto lists = random_lists(rng, 1 + trial, 8, 40);
    for (std::size_t k : {1u, 4u, 8u}) {
      std::set<ItemId> u;
      for (const auto& l : lists) u.insert(l.items.begin(), l.items.begin() + static_cast<std::ptrdiff_t>(k));
      EXPECT_NEAR(difference_at_k(lists, 40, k), static_cast<double>(u.size()) / 40.0, 1e-15);
    }
  }
}

TEST(Difference, ClosedForms) {
  const std::vector<RecommendationList> same{{"a", {1, 2}, {}}, {"b", {1, 2}, {}}};
  EXPECT_DOUBLE_EQ(difference_at_k(same, 4, 2), 0.5);
  const std::vector<RecommendationList> cover{{"a", {1, 2}, {}}, {"b", {3, 4}, {}}};
  EXPECT_DOUBLE_EQ(difference_at_k(cover, 4, 2), 1.0);
}

TEST(Popularity, FromSessionsCountsEachInteractionOnce) {
  SessionRecord s;
  s.session_id = "a";
  s.turns = {{Role::User, {}, {1, 2}, {}}, {Role::System, {}, {3}, {}}, {Role::System, {}, {}, {}}};
  s.ground_truth = {{1, 3}, {2, 4}};
  const auto pop = popularity_from_sessions({s}, {1, 2, 3, 4, 5});
  // Mentions 1, 2, 3 plus ground truth 4 (3 is already in its turn): 4 interactions.
  EXPECT_DOUBLE_EQ(pop.at(1), 0.25);
  EXPECT_DOUBLE_EQ(pop.at(3), 0.25);
  EXPECT_DOUBLE_EQ(pop.at(4), 0.25);
  EXPECT_DOUBLE_EQ(pop.at(5), 0.0);
  double total = 0.0;
  for (const auto& [_, p] : pop.popularity) total += p;
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Popularity, TextRoundTripIsExact) {
  PopularityTable t;
  t.popularity = {{1, 1.0 / 3.0}, {20, 0.1}, {7, 0.0}};
  std::stringstream ss;
  write_popularity(ss, t);
  EXPECT_EQ(read_popularity(ss).popularity, t.popularity);
}

TEST(Report, JsonKeysInOrder) {
  const std::vector<RecommendationList> lists{{"a", {1, 2}, {}}, {"b", {1, 3}, {}}};
  PopularityTable pop;
  pop.popularity = {{1, 0.5}, {2, 0.25}, {3, 0.25}};
  const auto j = fairness_to_json(fairness_report(lists, pop, 3, {1, 2}));
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"A@1", "G@1", "L@1", "D@1", "A@2", "G@2", "L@2", "D@2"}));
  EXPECT_DOUBLE_EQ(j["A@1"].get<double>(), 0.5);
  EXPECT_NEAR(j["G@1"].get<double>(), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(j["L@1"].get<double>(), std::log(3.0), 1e-12);
}
