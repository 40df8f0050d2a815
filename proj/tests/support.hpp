#pragma once

// Shared fixtures and brute-force oracles for the test suites.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "hyfair/autodiff.hpp"
#include "hyfair/hypergraph.hpp"
#include "hyfair/matrix.hpp"
#include "hyfair/params.hpp"

namespace hyfair::testing {

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n)));
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

/// Random hypergraph; hyperedge sizes in [1, max_size]. Some nodes may be isolated.
inline Hypergraph random_hypergraph(std::mt19937_64& rng, std::size_t nodes, std::size_t edges, std::size_t max_size) {
  std::vector<Hyperedge> hs;
  for (std::size_t h = 0; h < edges; ++h) {
    const std::size_t size = 1 + uniform_index(rng, max_size);
    std::vector<NodeId> m;
    for (std::size_t i = 0; i < size; ++i) m.push_back(NodeId{static_cast<std::uint32_t>(uniform_index(rng, nodes))});
    hs.emplace_back(std::move(m), "h" + std::to_string(h));
  }
  return build_incidence(std::move(hs), nodes);
}

inline DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = uniform_real(rng, -scale, scale);
  return m;
}

/// Dense 0/1 incidence matrix, node x hyperedge, from member lists.
inline DenseMatrix dense_incidence(const Hypergraph& g) {
  DenseMatrix h(g.node_count(), g.edge_count());
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    for (NodeId v : g.hyperedge(e).members()) h(v.index, e) = 1.0;
  return h;
}

/// Textbook triple loop, independent of the library's matmul.
inline DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(s);
    }
  return out;
}

inline DenseMatrix naive_transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Largest relative error between analytic and central-difference gradients over every
/// trainable entry. `loss` evaluates the objective and, when `backprop` is set, accumulates
/// gradients into the store. Relative error is |a - n| / max(|a|, |n|, floor).
struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t entries = 0;
  std::string worst;
};

inline GradientCheck check_gradients(ParameterStore& store, const std::function<double(bool backprop)>& loss, double step = 1e-5,
                                     double floor = 1e-6, std::size_t max_entries_per_param = 0) {
  store.zero_grad();
  loss(true);
  GradientCheck out;
  for (auto& [name, p] : store.entries()) {
    if (!p.trainable) continue;
    const DenseMatrix analytic = p.gradient;
    auto& w = p.value.data();
    const std::size_t stride = max_entries_per_param && w.size() > max_entries_per_param ? w.size() / max_entries_per_param : 1;
    for (std::size_t i = 0; i < w.size(); i += stride) {
      const double orig = w[i];
      w[i] = orig + step;
      const double up = loss(false);
      w[i] = orig - step;
      const double down = loss(false);
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.entries;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  store.zero_grad();
  return out;
}

/// Dense V^-1 H E^-1 H^T; isolated nodes keep their own row.
inline DenseMatrix dense_propagation(const Hypergraph& g) {
  const DenseMatrix h = dense_incidence(g);
  const std::size_t n = g.node_count(), m = g.edge_count();
  DenseMatrix dv_inv(n, n), de_inv(m, m);
  for (std::size_t v = 0; v < n; ++v) {
    double d = 0.0;
    for (std::size_t e = 0; e < m; ++e) d += h(v, e);
    dv_inv(v, v) = d > 0 ? 1.0 / d : 0.0;
  }
  for (std::size_t e = 0; e < m; ++e) {
    double d = 0.0;
    for (std::size_t v = 0; v < n; ++v) d += h(v, e);
    de_inv(e, e) = 1.0 / d;
  }
  DenseMatrix p = naive_product(naive_product(naive_product(dv_inv, h), de_inv), naive_transpose(h));
  for (std::size_t v = 0; v < n; ++v)
    if (dv_inv(v, v) == 0.0) p(v, v) = 1.0;
  return p;
}

inline DenseMatrix dense_line_adjacency(const Hypergraph& g) {
  const std::size_t m = g.edge_count();
  DenseMatrix a(m, m);
  for (std::size_t p = 0; p < m; ++p) {
    a(p, p) = 1.0;
    for (std::size_t q = 0; q < m; ++q) {
      if (p == q) continue;
      std::size_t inter = 0;
      for (auto v : g.hyperedge(p).members()) inter += g.incidence(v.index, q);
      a(p, q) = static_cast<double>(inter) / static_cast<double>(g.edge_degree(p) + g.edge_degree(q) - inter);
    }
  }
  std::vector<double> d(m, 0.0);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = 0; q < m; ++q) d[p] += a(p, q);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = 0; q < m; ++q) a(p, q) /= std::sqrt(d[p] * d[q]);
  return a;
}

}  // namespace hyfair::testing
