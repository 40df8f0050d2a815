#include <gtest/gtest.h>

#include "hyfair/decoder.hpp"
#include "support.hpp"

using namespace hyfair;
using namespace hyfair::testing;

namespace {

struct Toy {
  DecoderConfig cfg;
  Vocabulary vocab;
  ParameterStore store{17};
  DenseMatrix fair, current, history;

  explicit Toy(double gamma = 0.5) {
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.gamma = gamma;
    for (const char* t : {"hello", "@5", "like", "@9", "movie", "@12"}) vocab.add(t);
    init_decoder(store, cfg, vocab.size());
    std::mt19937_64 rng(19);
    fair = random_matrix(rng, 8, 8);
    current = random_matrix(rng, 3, 8);
    history = random_matrix(rng, 4, 8);
  }

  DenseMatrix distribution(const std::vector<std::size_t>& prefix, const std::vector<std::size_t>& copy, const DenseMatrix* hist = nullptr) {
    ad::Tape t;
    ad::Var prev = ad::gather_rows(t, t.param(store, "dec.tokens"), prefix);
    auto tr = decoder_block(t, store, cfg, prev, t.constant(fair), t.constant(current), t.constant(hist ? *hist : history));
    return t.value(token_distribution(t, store, tr.out, t.constant(fair), copy, vocab.size()));
  }
};

}  // namespace

TEST(Vocabulary, SpecialsThenItems) {
  SessionRecord s;
  s.turns = {{Role::User, {"hi", "@3", "there"}, {3}, {}}};
  const auto v = Vocabulary::build({s}, {3, 8});
  EXPECT_EQ(v.token(0), "<bos>");
  EXPECT_EQ(v.token(2), "@3");
  EXPECT_EQ(v.token(3), "@8");
  EXPECT_EQ(v.size(), 6u);
  EXPECT_TRUE(v.is_item_token(3));
  EXPECT_FALSE(v.is_item_token(4));
  EXPECT_EQ(v.id_of("nope"), v.id_of("<unk>"));
}

TEST(TokenDistribution, IsProbabilityVector) {
  Toy toy;
  const std::vector<std::size_t> copy{toy.vocab.id_of("@5"), toy.vocab.id_of("@12")};
  for (const auto& prefix : std::vector<std::vector<std::size_t>>{{0}, {0, 2}, {0, 2, 3, 4}}) {
    for (const auto& c : {copy, std::vector<std::size_t>{}}) {
      const DenseMatrix p = toy.distribution(prefix, c);
      ASSERT_EQ(p.rows(), 1u);
      double s = 0.0;
      for (double v : p.data()) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(TokenDistribution, CopyHeadOnlyTouchesItemTokens) {
  Toy toy;
  const std::vector<std::size_t> copy{toy.vocab.id_of("@5"), toy.vocab.id_of("@9")};
  const DenseMatrix with = toy.distribution({0, 2}, copy);
  const DenseMatrix without = toy.distribution({0, 2}, {});
  // Without copy the sum of two distributions is halved; with copy it is divided by 3.
  for (std::size_t i = 0; i < toy.vocab.size(); ++i) {
    if (std::find(copy.begin(), copy.end(), i) != copy.end()) continue;
    EXPECT_NEAR(with(0, i) * 3.0, without(0, i) * 2.0, 1e-12) << toy.vocab.token(i);
  }
  double extra = 0.0;
  for (std::size_t i : copy) extra += with(0, i) * 3.0 - without(0, i) * 2.0;
  EXPECT_NEAR(extra, 1.0, 1e-12);
}

TEST(Decoder, ClosedGateIgnoresHistory) {
  Toy toy(1.0);
  std::mt19937_64 rng(23);
  const DenseMatrix other = random_matrix(rng, 6, 8, 100.0);
  const DenseMatrix a = toy.distribution({0, 3}, {toy.vocab.id_of("@5")});
  const DenseMatrix b = toy.distribution({0, 3}, {toy.vocab.id_of("@5")}, &other);
  EXPECT_TRUE(a == b);
}

TEST(Decoder, OpenGateUsesHistory) {
  Toy toy(0.5);
  std::mt19937_64 rng(29);
  const DenseMatrix other = random_matrix(rng, 6, 8, 3.0);
  EXPECT_FALSE(toy.distribution({0}, {}) == toy.distribution({0}, {}, &other));
}

TEST(Decoder, GammaOutOfRange) {
  Toy toy(1.5);
  try {
    toy.distribution({0}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(ConvLoss, ClosedForms) {
  DenseMatrix onehot(2, 4);
  onehot(0, 1) = 1.0;
  onehot(1, 3) = 1.0;
  EXPECT_NEAR(conv_loss({onehot}, {{1, 3}}), 0.0, 1e-15);
  EXPECT_NEAR(conv_loss({DenseMatrix(1, 4, 0.25)}, {{2}}), std::log(4.0), 1e-12);
  try {
    conv_loss({DenseMatrix(1, 4, 0.25)}, {{4}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TargetOutOfRange);
  }
}

TEST(ConvLoss, MatchesDirectSum) {
  std::mt19937_64 rng(31);
  std::vector<DenseMatrix> seqs;
  std::vector<std::vector<std::size_t>> targets;
  double expect = 0.0;
  for (int b = 0; b < 3; ++b) {
    DenseMatrix p(4, 6);
    std::vector<std::size_t> tg;
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (double& v : p.row(r)) s += (v = 0.1 + unit_uniform(rng));
      for (double& v : p.row(r)) v /= s;
      tg.push_back(uniform_index(rng, 6));
      expect -= std::log(p(r, tg.back()));
    }
    seqs.push_back(p);
    targets.push_back(tg);
  }
  EXPECT_NEAR(conv_loss(seqs, targets), expect, 1e-12);
}

TEST(ConvLoss, GradientCheck) {
  Toy toy;
  std::mt19937_64 rng(37);
  toy.store.add("fair", random_matrix(rng, 8, 8));
  toy.store.add("curr", random_matrix(rng, 2, 8));
  toy.store.add("hist", random_matrix(rng, 2, 8));
  const std::vector<std::size_t> copy{toy.vocab.id_of("@5"), toy.vocab.id_of("@9")};
  const std::vector<std::size_t> targets{2, toy.vocab.id_of("@5"), 4};
  const auto r = check_gradients(
      toy.store,
      [&](bool bp) {
        ad::Tape t;
        ad::Var steps = teacher_forced_distributions(t, toy.store, toy.cfg, t.param(toy.store, "fair"), t.param(toy.store, "curr"),
                                                     t.param(toy.store, "hist"), copy, toy.vocab.bos(), targets, toy.vocab.size());
        ad::Var loss = conv_loss(t, steps, targets);
        if (bp) t.backward(loss);
        return t.scalar(loss);
      },
      1e-5, 1e-6, 12);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst;
}

TEST(GenerationMetrics, DistN) {
  EXPECT_NEAR(dist_n({{"a", "b", "a", "b"}}, 2), 2.0 / 3.0, 1e-15);
  for (std::size_t len : {2u, 5u, 9u}) EXPECT_NEAR(dist_n({std::vector<std::string>(len, "x")}, 2), 1.0 / static_cast<double>(len - 1), 1e-15);
  try {
    dist_n({{"a"}}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NGramTooLong);
  }
}

TEST(GenerationMetrics, Bleu) {
  const std::vector<std::vector<std::string>> ref{{"the", "cat", "sat", "down"}};
  EXPECT_NEAR(bleu_n(ref, ref, 2), 1.0, 1e-15);
  EXPECT_EQ(bleu_n({{"dog", "ran", "off"}}, ref, 2), 0.0);
  // Clipped unigram 2/3, bigram 1/2, brevity exp(1 - 4/3).
  const double b = bleu_n({{"the", "cat", "the"}}, ref, 2);
  EXPECT_NEAR(b, std::exp(1.0 - 4.0 / 3.0) * std::sqrt(2.0 / 3.0 * 0.5), 1e-12);
  EXPECT_GE(b, 0.0);
  EXPECT_LE(b, 1.0);
}
