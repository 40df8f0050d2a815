#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hyfair/error.hpp"
#include "hyfair/matrix.hpp"
#include "hyfair/params.hpp"

namespace hyfair::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Records matrix-valued primitives in topological (creation) order and replays them in reverse
/// to accumulate gradients. Parameter leaves write their gradients back into the ParameterStore.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const DenseMatrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value) { return push(std::move(value), false, nullptr, nullptr); }

  /// The same parameter name maps to one leaf per tape.
  Var param(ParameterStore& store, const std::string& name) {
    if (auto it = param_leaf_.find(name); it != param_leaf_.end()) return it->second;
    Parameter& p = store.at(name);
    Var v = push(p.value, p.trainable, nullptr, &p);
    param_leaf_.emplace(name, v);
    return v;
  }

  /// Records an op output. `backward` runs only if some input needs a gradient.
  Var record(DenseMatrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
  }
  Var record(DenseMatrix value, const std::vector<Var>& inputs, Backward backward) {
    bool needs = false;
    for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr, nullptr);
  }

  const DenseMatrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient accumulated so far (zero-shaped if never touched).
  const DenseMatrix& grad(Var v) { return grad_ref(v); }

  DenseMatrix& grad_ref(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) n.grad = DenseMatrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void accumulate(Var v, const DenseMatrix& g) {
    if (!requires_grad(v)) return;
    grad_ref(v) += g;
  }

  double scalar(Var v) const {
    const auto& m = value(v);
    if (m.rows() != 1 || m.cols() != 1) fail(ErrorCode::ShapeMismatch, "expected scalar, got " + m.shape_string());
    return m(0, 0);
  }

  /// Reverse sweep from a scalar loss; adds parameter gradients into their store entries.
  void backward(Var loss) {
    scalar(loss);
    if (!requires_grad(loss)) fail(ErrorCode::DisconnectedLoss, "loss does not depend on any trainable parameter");
    grad_ref(loss)(0, 0) += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        // Copy out: the callback may grow gradients of earlier nodes but never this one.
        const DenseMatrix g = n.grad;
        n.backward(*this, g);
      }
      if (n.parameter) n.parameter->gradient += n.grad;
    }
  }

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* parameter = nullptr;
  };

  Var push(DenseMatrix value, bool requires_grad, Backward backward, Parameter* p) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(backward), p});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, Var> param_leaf_;
};

// ---- primitives ---------------------------------------------------------------------------

inline Var matmul(Tape& t, Var a, Var b) {
  return t.record(hyfair::matmul(t.value(a), t.value(b)), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, matmul_nt(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, matmul_tn(t.value(a), g));
  });
}

/// a * b^T
inline Var matmul_nt(Tape& t, Var a, Var b) {
  return t.record(hyfair::matmul_nt(t.value(a), t.value(b)), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, hyfair::matmul(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, matmul_tn(g, t.value(a)));
  });
}

inline Var add(Tape& t, Var a, Var b) {
  t.value(a).require_same_shape(t.value(b), "add");
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  t.value(a).require_same_shape(t.value(b), "sub");
  DenseMatrix out = t.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= t.value(b).data()[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -1.0 * g);
  });
}

inline Var scale(Tape& t, Var a, double s) {
  return t.record(s * t.value(a), {a}, [a, s](Tape& t, const DenseMatrix& g) { t.accumulate(a, s * g); });
}

/// Adds the 1 x c row `bias` to every row of `a`.
inline Var add_row(Tape& t, Var a, Var bias) {
  const auto& av = t.value(a);
  const auto& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) fail(ErrorCode::ShapeMismatch, "add_row " + av.shape_string() + " + " + bv.shape_string());
  DenseMatrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  return t.record(std::move(out), {a, bias}, [a, bias](Tape& t, const DenseMatrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(bias)) {
      DenseMatrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      t.accumulate(bias, gb);
    }
  });
}

inline Var relu(Tape& t, Var a) {
  DenseMatrix out = t.value(a);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(out), {a}, [a](Tape& t, const DenseMatrix& g) {
    DenseMatrix ga = g;
    const auto& x = t.value(a);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (!(x.data()[i] > 0.0)) ga.data()[i] = 0.0;
    t.accumulate(a, ga);
  });
}

inline Var tanh(Tape& t, Var a) {
  DenseMatrix out = t.value(a);
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t self = t.size();
  return t.record(std::move(out), {a}, [a, self](Tape& t, const DenseMatrix& g) {
    DenseMatrix ga = g;
    const auto& y = t.value(Var{self});
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] *= 1.0 - y.data()[i] * y.data()[i];
    t.accumulate(a, ga);
  });
}

/// Left-multiplies by a constant sparse operator.
inline Var sparse_left(Tape& t, std::shared_ptr<const SparseMatrix> op, Var a) {
  DenseMatrix out = op->multiply(t.value(a));
  return t.record(std::move(out), {a}, [op, a](Tape& t, const DenseMatrix& g) {
    if (!t.requires_grad(a)) return;
    op->multiply_transpose_add(g, t.grad_ref(a));
  });
}

inline Var gather_rows(Tape& t, Var a, std::vector<std::size_t> rows) {
  const auto& av = t.value(a);
  DenseMatrix out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) fail(ErrorCode::ShapeMismatch, "gather_rows index " + std::to_string(rows[i]) + " >= " + std::to_string(av.rows()));
    auto src = av.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return t.record(std::move(out), {a}, [a, rows = std::move(rows)](Tape& t, const DenseMatrix& g) {
    if (!t.requires_grad(a)) return;
    auto& ga = t.grad_ref(a);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto dst = ga.row(rows[i]);
      auto src = g.row(i);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

/// Column-wise mean over all rows, as a 1 x c row.
inline Var mean_rows(Tape& t, Var a) {
  const auto& av = t.value(a);
  if (av.rows() == 0) fail(ErrorCode::EmptySelection, "mean over zero rows");
  DenseMatrix out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  const double inv = 1.0 / static_cast<double>(av.rows());
  out *= inv;
  return t.record(std::move(out), {a}, [a, inv](Tape& t, const DenseMatrix& g) {
    if (!t.requires_grad(a)) return;
    auto& ga = t.grad_ref(a);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += inv * g(0, c);
  });
}

inline Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_rows of nothing");
  const std::size_t cols = t.value(parts[0]).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (t.value(p).cols() != cols) fail(ErrorCode::ShapeMismatch, "concat_rows column mismatch");
    rows += t.value(p).rows();
  }
  DenseMatrix out(rows, cols);
  std::size_t r0 = 0;
  for (Var p : parts) {
    const auto& pv = t.value(p);
    std::copy(pv.data().begin(), pv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r0 * cols));
    r0 += pv.rows();
  }
  return t.record(std::move(out), parts, [parts](Tape& t, const DenseMatrix& g) {
    std::size_t r0 = 0;
    for (Var p : parts) {
      const std::size_t n = t.value(p).rows();
      if (t.requires_grad(p)) {
        auto& gp = t.grad_ref(p);
        for (std::size_t i = 0; i < gp.size(); ++i) gp.data()[i] += g.data()[r0 * g.cols() + i];
      }
      r0 += n;
    }
  });
}

inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const std::size_t rows = t.value(parts[0]).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) fail(ErrorCode::ShapeMismatch, "concat_cols row mismatch");
    cols += t.value(p).cols();
  }
  DenseMatrix out(rows, cols);
  std::size_t c0 = 0;
  for (Var p : parts) {
    const auto& pv = t.value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, c0 + c) = pv(r, c);
    c0 += pv.cols();
  }
  return t.record(std::move(out), parts, [parts](Tape& t, const DenseMatrix& g) {
    std::size_t c0 = 0;
    for (Var p : parts) {
      const std::size_t n = t.value(p).cols();
      if (t.requires_grad(p)) {
        auto& gp = t.grad_ref(p);
        for (std::size_t r = 0; r < gp.rows(); ++r)
          for (std::size_t c = 0; c < n; ++c) gp(r, c) += g(r, c0 + c);
      }
      c0 += n;
    }
  });
}

inline DenseMatrix softmax_rows_value(const DenseMatrix& x) {
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    auto yr = y.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : xr) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t c = 0; c < xr.size(); ++c) s += (yr[c] = std::exp(xr[c] - mx));
    for (double& v : yr) v /= s;
  }
  return y;
}

inline Var softmax_rows(Tape& t, Var a) {
  const std::size_t self = t.size();
  return t.record(softmax_rows_value(t.value(a)), {a}, [a, self](Tape& t, const DenseMatrix& g) {
    const auto& y = t.value(Var{self});
    DenseMatrix ga(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) = y(r, c) * (g(r, c) - dot);
    }
    t.accumulate(a, ga);
  });
}

inline Var log_softmax_rows(Tape& t, Var a) {
  const auto& x = t.value(a);
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : x.row(r)) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : x.row(r)) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) - lse;
  }
  const std::size_t self = t.size();
  return t.record(std::move(y), {a}, [a, self](Tape& t, const DenseMatrix& g) {
    const auto& y = t.value(Var{self});
    DenseMatrix ga(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gs += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) = g(r, c) - std::exp(y(r, c)) * gs;
    }
    t.accumulate(a, ga);
  });
}

/// Scales each row to unit Euclidean norm; a zero row is an error (cosine undefined).
inline Var normalize_rows(Tape& t, Var a) {
  const auto& x = t.value(a);
  DenseMatrix y(x.rows(), x.cols());
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (norms[r] == 0.0) fail(ErrorCode::ZeroVector, "row " + std::to_string(r) + " has zero norm");
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) / norms[r];
  }
  const std::size_t self = t.size();
  return t.record(std::move(y), {a}, [a, self, norms = std::move(norms)](Tape& t, const DenseMatrix& g) {
    const auto& y = t.value(Var{self});
    DenseMatrix ga(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += y(r, c) * g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) = (g(r, c) - y(r, c) * dot) / norms[r];
    }
    t.accumulate(a, ga);
  });
}

inline Var sum_all(Tape& t, Var a) {
  const auto& x = t.value(a);
  const double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  return t.record(DenseMatrix(1, 1, s), {a}, [a](Tape& t, const DenseMatrix& g) {
    const auto& x = t.value(a);
    t.accumulate(a, DenseMatrix(x.rows(), x.cols(), g(0, 0)));
  });
}

/// Sum of the listed (row, col) entries, as a scalar.
inline Var select_sum(Tape& t, Var a, std::vector<std::pair<std::size_t, std::size_t>> cells) {
  const auto& x = t.value(a);
  double s = 0.0;
  for (auto [r, c] : cells) {
    if (r >= x.rows() || c >= x.cols()) fail(ErrorCode::ShapeMismatch, "select_sum cell out of range");
    s += x(r, c);
  }
  return t.record(DenseMatrix(1, 1, s), {a}, [a, cells = std::move(cells)](Tape& t, const DenseMatrix& g) {
    if (!t.requires_grad(a)) return;
    auto& ga = t.grad_ref(a);
    for (auto [r, c] : cells) ga(r, c) += g(0, 0);
  });
}

/// Elementwise log(max(x, floor)); the gradient is zero where the floor is active.
inline Var log_clamped(Tape& t, Var a, double floor) {
  DenseMatrix y = t.value(a);
  for (double& v : y.data()) v = std::log(std::max(v, floor));
  return t.record(std::move(y), {a}, [a, floor](Tape& t, const DenseMatrix& g) {
    const auto& x = t.value(a);
    DenseMatrix ga(x.rows(), x.cols());
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x.data()[i] > floor) ga.data()[i] = g.data()[i] / x.data()[i];
    t.accumulate(a, ga);
  });
}

/// -sum[y log p + (1 - y) log(1 - p)] with p clamped to [eps, 1 - eps].
inline Var binary_cross_entropy_sum(Tape& t, Var p, DenseMatrix labels, double eps) {
  const auto& pv = t.value(p);
  pv.require_same_shape(labels, "binary_cross_entropy_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double y = labels.data()[i];
    if (y < 0.0 || y > 1.0) fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(y) + " outside [0,1]");
    const double q = std::clamp(pv.data()[i], eps, 1.0 - eps);
    s -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
  }
  return t.record(DenseMatrix(1, 1, s), {p}, [p, labels = std::move(labels), eps](Tape& t, const DenseMatrix& g) {
    const auto& pv = t.value(p);
    DenseMatrix gp(pv.rows(), pv.cols());
    for (std::size_t i = 0; i < gp.size(); ++i) {
      const double x = pv.data()[i];
      if (x <= eps || x >= 1.0 - eps) continue;
      const double y = labels.data()[i];
      gp.data()[i] = -g(0, 0) * (y / x - (1.0 - y) / (1.0 - x));
    }
    t.accumulate(p, gp);
  });
}

/// Each row divided by its own sum.
inline Var normalize_row_sums(Tape& t, Var a) {
  const auto& x = t.value(a);
  DenseMatrix y(x.rows(), x.cols());
  std::vector<double> sums(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (double v : x.row(r)) sums[r] += v;
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) / sums[r];
  }
  const std::size_t self = t.size();
  return t.record(std::move(y), {a}, [a, self, sums = std::move(sums)](Tape& t, const DenseMatrix& g) {
    const auto& y = t.value(Var{self});
    DenseMatrix ga(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) = (g(r, c) - dot) / sums[r];
    }
    t.accumulate(a, ga);
  });
}

/// Places the columns of `a` at positions `cols` of a zero matrix with `width` columns.
inline Var scatter_cols(Tape& t, Var a, std::vector<std::size_t> cols, std::size_t width) {
  const auto& x = t.value(a);
  if (x.cols() != cols.size()) fail(ErrorCode::ShapeMismatch, "scatter_cols index count mismatch");
  DenseMatrix y(x.rows(), width);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) y(r, cols[c]) = x(r, c);
  return t.record(std::move(y), {a}, [a, cols = std::move(cols)](Tape& t, const DenseMatrix& g) {
    if (!t.requires_grad(a)) return;
    auto& ga = t.grad_ref(a);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) ga(r, c) += g(r, cols[c]);
  });
}

/// Last row of `a`.
inline Var last_row(Tape& t, Var a) { return gather_rows(t, a, {t.value(a).rows() - 1}); }

}  // namespace hyfair::ad
