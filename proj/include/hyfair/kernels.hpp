#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyfair/autodiff.hpp"
#include "hyfair/hypergraph.hpp"
#include "hyfair/matrix.hpp"
#include "hyfair/params.hpp"

namespace hyfair {

enum class Activation { Relu, Identity, Tanh };

inline std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "relu" || s == "rectifier") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  return std::nullopt;
}

/// Sparse factors of the hypergraph propagation V^-1 H E^-1 H^T.
/// Isolated nodes (d(v) = 0) get an identity row instead.
struct HypergraphOperators {
  std::size_t node_count = 0;
  std::shared_ptr<const SparseMatrix> node_to_edge;  // E^-1 H^T, |E| x |V|
  std::shared_ptr<const SparseMatrix> edge_to_node;  // V^-1 H,   |V| x |E|
  std::shared_ptr<const SparseMatrix> isolated;      // diag(d(v) == 0)
  bool has_isolated = false;
};

inline HypergraphOperators make_hypergraph_operators(const Hypergraph& g) {
  const std::size_t n = g.node_count();
  const std::size_t m = g.edge_count();
  std::vector<std::vector<SparseMatrix::Entry>> to_edge(m), to_node(n), iso(n);
  for (std::size_t h = 0; h < m; ++h) {
    const double inv = 1.0 / static_cast<double>(g.edge_degree(h));
    for (NodeId v : g.hyperedge(h).members()) to_edge[h].push_back({v.index, inv});
  }
  HypergraphOperators ops;
  ops.node_count = n;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& inc = g.incident_edges(v);
    if (inc.empty()) {
      iso[v].push_back({v, 1.0});
      ops.has_isolated = true;
      continue;
    }
    const double inv = 1.0 / static_cast<double>(inc.size());
    for (std::uint32_t h : inc) to_node[v].push_back({h, inv});
  }
  ops.node_to_edge = std::make_shared<SparseMatrix>(SparseMatrix::from_rows(n, to_edge));
  ops.edge_to_node = std::make_shared<SparseMatrix>(SparseMatrix::from_rows(m, to_node));
  ops.isolated = std::make_shared<SparseMatrix>(SparseMatrix::from_rows(n, iso));
  return ops;
}

/// V̂^{-1/2} (L + I) V̂^{-1/2} with V̂_pp = sum_q (L + I)_pq.
inline std::shared_ptr<const SparseMatrix> normalized_line_adjacency(const LineGraph& lg) {
  const std::size_t m = lg.hyperedge_count();
  std::vector<double> deg(m, 1.0);
  for (std::size_t p = 0; p < m; ++p)
    for (const auto& nb : lg.neighbors(p)) deg[p] += nb.weight;
  std::vector<std::vector<SparseMatrix::Entry>> rows(m);
  for (std::size_t p = 0; p < m; ++p) {
    const double sp = 1.0 / std::sqrt(deg[p]);
    bool self_done = false;
    for (const auto& nb : lg.neighbors(p)) {
      if (!self_done && nb.node > p) {
        rows[p].push_back({p, sp * sp});
        self_done = true;
      }
      rows[p].push_back({nb.node, sp * nb.weight / std::sqrt(deg[nb.node])});
    }
    if (!self_done) rows[p].push_back({p, sp * sp});
  }
  return std::make_shared<SparseMatrix>(SparseMatrix::from_rows(m, rows));
}

inline ad::Var activate(ad::Tape& t, ad::Var x, Activation act) {
  switch (act) {
    case Activation::Relu: return ad::relu(t, x);
    case Activation::Tanh: return ad::tanh(t, x);
    case Activation::Identity: return x;
  }
  return x;
}

/// L layers of O <- (V^-1 H E^-1 H^T O) W; linear, as in the propagation rule.
inline ad::Var hgconv(ad::Tape& t, const HypergraphOperators& ops, ad::Var input, std::span<const ad::Var> weights) {
  if (t.value(input).rows() != ops.node_count)
    fail(ErrorCode::ShapeMismatch, "hgconv input has " + std::to_string(t.value(input).rows()) + " rows, graph has " + std::to_string(ops.node_count) + " nodes");
  ad::Var o = input;
  for (ad::Var w : weights) {
    ad::Var edges = ad::sparse_left(t, ops.node_to_edge, o);
    ad::Var nodes = ad::sparse_left(t, ops.edge_to_node, edges);
    if (ops.has_isolated) nodes = ad::add(t, nodes, ad::sparse_left(t, ops.isolated, o));
    o = ad::matmul(t, nodes, w);
  }
  return o;
}

/// L̂ layers of O <- σ(Â O Θ) over the normalized line-graph adjacency.
inline ad::Var gconv(ad::Tape& t, const std::shared_ptr<const SparseMatrix>& adjacency, ad::Var input, std::span<const ad::Var> weights,
                     Activation act) {
  if (t.value(input).rows() != adjacency->rows())
    fail(ErrorCode::ShapeMismatch, "gconv input has " + std::to_string(t.value(input).rows()) + " rows, line graph has " + std::to_string(adjacency->rows()) + " nodes");
  ad::Var o = input;
  for (ad::Var w : weights) o = activate(t, ad::matmul(t, ad::sparse_left(t, adjacency, o), w), act);
  return o;
}

/// Plain evaluation of the hypergraph convolution.
inline DenseMatrix hgconv_forward(const Hypergraph& g, const DenseMatrix& input, const std::vector<DenseMatrix>& weights) {
  if (weights.empty()) fail(ErrorCode::ShapeMismatch, "hgconv needs at least one layer");
  ad::Tape t;
  std::vector<ad::Var> ws;
  for (const auto& w : weights) ws.push_back(t.constant(w));
  return t.value(hgconv(t, make_hypergraph_operators(g), t.constant(input), ws));
}

/// Plain evaluation of the line-graph convolution.
inline DenseMatrix gconv_forward(const LineGraph& lg, const DenseMatrix& input, const std::vector<DenseMatrix>& weights,
                                 Activation act = Activation::Relu) {
  if (weights.empty()) fail(ErrorCode::ShapeMismatch, "gconv needs at least one layer");
  ad::Tape t;
  std::vector<ad::Var> ws;
  for (const auto& w : weights) ws.push_back(t.constant(w));
  return t.value(gconv(t, normalized_line_adjacency(lg), t.constant(input), ws, act));
}

// ---- attention -----------------------------------------------------------------------------

/// Per-head query/key/value projections (d x d/h) named <prefix>.q<j>/.k<j>/.v<j> and an output
/// projection <prefix>.o (d x d).
inline void init_attention(ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t heads) {
  if (heads == 0 || dim % heads != 0) fail(ErrorCode::HeadDivisibility, "dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  const std::size_t dh = dim / heads;
  for (std::size_t j = 0; j < heads; ++j) {
    store.add_glorot(prefix + ".q" + std::to_string(j), dim, dh);
    store.add_glorot(prefix + ".k" + std::to_string(j), dim, dh);
    store.add_glorot(prefix + ".v" + std::to_string(j), dim, dh);
  }
  store.add_glorot(prefix + ".o", dim, dim);
}

/// Scaled dot-product attention per head, heads concatenated then output-projected.
/// `weights_out`, if given, receives each head's attention matrix.
inline ad::Var multi_head_attention(ad::Tape& t, ParameterStore& store, const std::string& prefix, std::size_t heads, ad::Var q, ad::Var k,
                                    ad::Var v, std::vector<DenseMatrix>* weights_out = nullptr) {
  const auto& qv = t.value(q);
  const auto& kv = t.value(k);
  const auto& vv = t.value(v);
  if (kv.rows() != vv.rows()) fail(ErrorCode::ShapeMismatch, "attention keys have " + std::to_string(kv.rows()) + " rows, values " + std::to_string(vv.rows()));
  if (kv.rows() == 0) fail(ErrorCode::ShapeMismatch, "attention over zero keys");
  const std::size_t dim = qv.cols();
  if (kv.cols() != dim || vv.cols() != dim) fail(ErrorCode::ShapeMismatch, "attention model dims differ");
  if (heads == 0 || dim % heads != 0) fail(ErrorCode::HeadDivisibility, "dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dim / heads));
  std::vector<ad::Var> outs;
  for (std::size_t j = 0; j < heads; ++j) {
    const std::string js = std::to_string(j);
    ad::Var qh = ad::matmul(t, q, t.param(store, prefix + ".q" + js));
    ad::Var kh = ad::matmul(t, k, t.param(store, prefix + ".k" + js));
    ad::Var vh = ad::matmul(t, v, t.param(store, prefix + ".v" + js));
    ad::Var attn = ad::softmax_rows(t, ad::scale(t, ad::matmul_nt(t, qh, kh), inv_sqrt));
    if (weights_out) weights_out->push_back(t.value(attn));
    outs.push_back(ad::matmul(t, attn, vh));
  }
  ad::Var cat = heads == 1 ? outs[0] : ad::concat_cols(t, outs);
  return ad::matmul(t, cat, t.param(store, prefix + ".o"));
}

/// Plain evaluation of multi_head_attention.
inline DenseMatrix multi_head_attention(ParameterStore& store, const std::string& prefix, std::size_t heads, const DenseMatrix& q,
                                        const DenseMatrix& k, const DenseMatrix& v, std::vector<DenseMatrix>* weights_out = nullptr) {
  ad::Tape t;
  return t.value(multi_head_attention(t, store, prefix, heads, t.constant(q), t.constant(k), t.constant(v), weights_out));
}

/// Two-layer position-wise network: relu(x W1 + b1) W2 + b2.
inline void init_ffn(ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t hidden) {
  store.add_glorot(prefix + ".w1", dim, hidden);
  store.add(prefix + ".b1", DenseMatrix(1, hidden));
  store.add_glorot(prefix + ".w2", hidden, dim);
  store.add(prefix + ".b2", DenseMatrix(1, dim));
}

inline ad::Var feed_forward(ad::Tape& t, ParameterStore& store, const std::string& prefix, ad::Var x) {
  ad::Var h = ad::relu(t, ad::add_row(t, ad::matmul(t, x, t.param(store, prefix + ".w1")), t.param(store, prefix + ".b1")));
  return ad::add_row(t, ad::matmul(t, h, t.param(store, prefix + ".w2")), t.param(store, prefix + ".b2"));
}

/// Arithmetic mean of the selected rows.
inline std::vector<double> mean_pool(const DenseMatrix& m, std::span<const std::size_t> rows) {
  if (rows.empty()) fail(ErrorCode::EmptySelection, "mean_pool over no rows");
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t r : rows) {
    if (r >= m.rows()) fail(ErrorCode::ShapeMismatch, "mean_pool row " + std::to_string(r) + " out of range");
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c);
  }
  for (double& v : out) v /= static_cast<double>(rows.size());
  return out;
}

/// Mean-pooling operator: row b averages the listed rows of a `width`-row matrix.
inline std::shared_ptr<const SparseMatrix> pooling_operator(const std::vector<std::vector<std::size_t>>& groups, std::size_t width) {
  std::vector<std::vector<SparseMatrix::Entry>> rows(groups.size());
  for (std::size_t b = 0; b < groups.size(); ++b) {
    if (groups[b].empty()) fail(ErrorCode::EmptySelection, "pooling group " + std::to_string(b) + " is empty");
    const double inv = 1.0 / static_cast<double>(groups[b].size());
    for (std::size_t r : groups[b]) rows[b].push_back({r, inv});
  }
  return std::make_shared<SparseMatrix>(SparseMatrix::from_rows(width, rows));
}

}  // namespace hyfair
