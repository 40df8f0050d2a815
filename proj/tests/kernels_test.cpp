#include <gtest/gtest.h>

#include "hyfair/kernels.hpp"
#include "support.hpp"

using namespace hyfair;
using namespace hyfair::testing;

namespace {

DenseMatrix apply(DenseMatrix x, double (*f)(double)) {
  for (double& v : x.data()) v = f(v);
  return x;
}

double relu(double v) { return v > 0 ? v : 0.0; }

DenseMatrix naive_softmax_rows(DenseMatrix x) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = -INFINITY, s = 0.0;
    for (double v : x.row(r)) mx = std::max(mx, v);
    for (double& v : x.row(r)) s += (v = std::exp(v - mx));
    for (double& v : x.row(r)) v /= s;
  }
  return x;
}

}  // namespace

TEST(HGConv, MatchesDenseChain) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const auto g = random_hypergraph(rng, 6 + trial, 4 + trial, 5);
    const std::size_t d = 3 + trial % 4;
    const DenseMatrix x = random_matrix(rng, g.node_count(), d);
    std::vector<DenseMatrix> ws{random_matrix(rng, d, d), random_matrix(rng, d, d)};
    const DenseMatrix p = dense_propagation(g);
    DenseMatrix expect = x;
    for (const auto& w : ws) expect = naive_product(naive_product(p, expect), w);
    EXPECT_LT(max_abs_diff(hgconv_forward(g, x, ws), expect), 1e-10);
  }
}

TEST(HGConv, IsLinearInInput) {
  std::mt19937_64 rng(5);
  const auto g = random_hypergraph(rng, 10, 8, 4);
  const DenseMatrix a = random_matrix(rng, 10, 3), b = random_matrix(rng, 10, 3);
  const std::vector<DenseMatrix> ws{random_matrix(rng, 3, 3)};
  const DenseMatrix lhs = hgconv_forward(g, 2.0 * a + b, ws);
  const DenseMatrix rhs = 2.0 * hgconv_forward(g, a, ws) + hgconv_forward(g, b, ws);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(HGConv, PropagationRowsSumToOne) {
  std::mt19937_64 rng(6);
  const auto g = random_hypergraph(rng, 15, 10, 4);
  const DenseMatrix ones(15, 1, 1.0);
  const DenseMatrix out = hgconv_forward(g, ones, {DenseMatrix::identity(1)});
  for (double v : out.data()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(HGConv, RowCountMismatch) {
  const auto g = build_incidence({Hyperedge::of({0, 1})}, 3);
  try {
    hgconv_forward(g, DenseMatrix(4, 2), {DenseMatrix::identity(2)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(GConv, MatchesDenseChain) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 25; ++trial) {
    const auto g = random_hypergraph(rng, 8 + trial, 5 + trial, 4);
    const std::size_t d = 2 + trial % 5;
    const DenseMatrix x = random_matrix(rng, g.edge_count(), d);
    std::vector<DenseMatrix> ws{random_matrix(rng, d, d), random_matrix(rng, d, d)};
    const DenseMatrix a = dense_line_adjacency(g);
    DenseMatrix expect = x;
    for (const auto& w : ws) expect = apply(naive_product(naive_product(a, expect), w), relu);
    EXPECT_LT(max_abs_diff(gconv_forward(induce_line_graph_fast(g, 2), x, ws), expect), 1e-10);
    DenseMatrix expect_tanh = x;
    for (const auto& w : ws) expect_tanh = apply(naive_product(naive_product(a, expect_tanh), w), std::tanh);
    EXPECT_LT(max_abs_diff(gconv_forward(induce_line_graph_fast(g, 1), x, ws, Activation::Tanh), expect_tanh), 1e-10);
  }
}

TEST(GConv, AdjacencyIsSymmetric) {
  std::mt19937_64 rng(8);
  const auto g = random_hypergraph(rng, 10, 12, 4);
  const DenseMatrix a = normalized_line_adjacency(induce_line_graph_naive(g))->to_dense();
  EXPECT_LT(max_abs_diff(a, naive_transpose(a)), 1e-15);
}

TEST(Activation, Parse) {
  EXPECT_EQ(parse_activation("relu"), Activation::Relu);
  EXPECT_EQ(parse_activation("identity"), Activation::Identity);
  EXPECT_FALSE(parse_activation("gelu").has_value());
}

TEST(Attention, MatchesNaiveComputation) {
  std::mt19937_64 rng(41);
  const std::size_t dim = 8, heads = 2, dh = 4;
  ParameterStore store(3);
  init_attention(store, "mha", dim, heads);
  const DenseMatrix q = random_matrix(rng, 3, dim), k = random_matrix(rng, 5, dim), v = random_matrix(rng, 5, dim);
  std::vector<DenseMatrix> attn;
  const DenseMatrix out = multi_head_attention(store, "mha", heads, q, k, v, &attn);
  DenseMatrix cat(3, dim);
  for (std::size_t j = 0; j < heads; ++j) {
    const auto js = std::to_string(j);
    const DenseMatrix qh = naive_product(q, store.at("mha.q" + js).value);
    const DenseMatrix kh = naive_product(k, store.at("mha.k" + js).value);
    const DenseMatrix vh = naive_product(v, store.at("mha.v" + js).value);
    DenseMatrix s = naive_product(qh, naive_transpose(kh));
    s *= 1.0 / std::sqrt(static_cast<double>(dh));
    const DenseMatrix a = naive_softmax_rows(s);
    EXPECT_LT(max_abs_diff(a, attn[j]), 1e-12);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double sum = 0.0;
      for (double x : a.row(r)) sum += x;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    const DenseMatrix o = naive_product(a, vh);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < dh; ++c) cat(r, j * dh + c) = o(r, c);
  }
  EXPECT_LT(max_abs_diff(out, naive_product(cat, store.at("mha.o").value)), 1e-10);
}

TEST(Attention, HeadDivisibility) {
  ParameterStore store;
  try {
    init_attention(store, "mha", 10, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HeadDivisibility);
  }
}

TEST(Attention, GradientCheck) {
  std::mt19937_64 rng(43);
  ParameterStore store(5);
  init_attention(store, "mha", 4, 2);
  store.add("x", random_matrix(rng, 3, 4));
  const DenseMatrix readout = random_matrix(rng, 4, 1);
  const auto r = check_gradients(store, [&](bool bp) {
    ad::Tape t;
    ad::Var x = t.param(store, "x");
    ad::Var y = multi_head_attention(t, store, "mha", 2, ad::gather_rows(t, x, {0}), x, x);
    ad::Var loss = ad::sum_all(t, ad::matmul(t, y, t.constant(readout)));
    if (bp) t.backward(loss);
    return t.scalar(loss);
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst;
}

TEST(Convolution, GradientCheck) {
  std::mt19937_64 rng(47);
  const auto g = random_hypergraph(rng, 8, 6, 3);
  const auto ops = make_hypergraph_operators(g);
  const auto adj = normalized_line_adjacency(induce_line_graph_fast(g, 1));
  ParameterStore store(9);
  store.add("x", random_matrix(rng, 8, 3));
  store.add_glorot("w", 3, 3);
  store.add_glorot("theta", 3, 3);
  const DenseMatrix readout = random_matrix(rng, 3, 1);
  const auto r = check_gradients(store, [&](bool bp) {
    ad::Tape t;
    const ad::Var w[] = {t.param(store, "w")};
    const ad::Var th[] = {t.param(store, "theta")};
    ad::Var nodes = hgconv(t, ops, t.param(store, "x"), w);
    ad::Var lines = gconv(t, adj, ad::sparse_left(t, ops.node_to_edge, nodes), th, Activation::Tanh);
    ad::Var loss = ad::sum_all(t, ad::matmul(t, lines, t.constant(readout)));
    if (bp) t.backward(loss);
    return t.scalar(loss);
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst;
}

TEST(Pooling, MeanPool) {
  const DenseMatrix m(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::size_t rows[] = {0, 2};
  const auto p = mean_pool(m, rows);
  EXPECT_DOUBLE_EQ(p[0], 3.0);
  EXPECT_DOUBLE_EQ(p[1], 4.0);
  try {
    mean_pool(m, std::span<const std::size_t>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySelection);
  }
}

TEST(Pooling, OperatorMatchesMeanPool) {
  std::mt19937_64 rng(53);
  const DenseMatrix m = random_matrix(rng, 6, 3);
  const std::vector<std::vector<std::size_t>> groups{{0, 1, 5}, {3}, {2, 2}};
  const DenseMatrix pooled = pooling_operator(groups, 6)->multiply(m);
  for (std::size_t b = 0; b < groups.size(); ++b) {
    const auto p = mean_pool(m, groups[b]);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(pooled(b, c), p[c], 1e-15);
  }
}
