#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adpa/common.hpp"

namespace adpa {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Matrix-level reverse-mode differentiation. Every op appends a node holding
/// its value; backward() walks the nodes in reverse and accumulates exact
/// gradients into every node that depends on a leaf.
class Tape {
 public:
  /// A value that never receives a gradient. Copies `value`.
  Var constant(Matrix value) { return push(std::move(value), false, {}); }

  /// A constant referenced in place; `value` must outlive the tape.
  Var constant_ref(const Matrix& value) {
    Node node;
    node.ref = &value;
    nodes_.push_back(std::move(node));
    return {nodes_.size() - 1};
  }

  /// A differentiable input (parameter).
  Var leaf(const Matrix& value) { return push(value, true, {}); }

  const Matrix& value(Var v) const { return nodes_[v.id].value(); }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Gradient of the last backward() target w.r.t. v; zeros if unreached.
  Matrix grad(Var v) const {
    const Node& node = nodes_[v.id];
    if (node.grad.size() == 0) return Matrix::Zero(node.value().rows(), node.value().cols());
    return node.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(target)/d(target) = 1 for a 1x1 target and propagates.
  void backward(Var target) {
    if (value(target).size() != 1) throw Error("backward target must be a scalar");
    for (Node& node : nodes_) node.grad.resize(0, 0);
    nodes_[target.id].grad = Matrix::Ones(1, 1);
    for (std::size_t i = target.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.needs_grad || !node.back || node.grad.size() == 0) continue;
      node.back(*this, node.grad);
    }
  }

  // ---- ops ---------------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    check(av.cols() == bv.rows(), "matmul", av, bv);
    return push(av * bv, any(a, b), [a, b](Tape& t, const Matrix& g) {
      if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
      if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
    });
  }

  Var add(Var a, Var b) {
    check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add", value(a),
          value(b));
    return push(value(a) + value(b), any(a, b), [a, b](Tape& t, const Matrix& g) {
      if (t.needs_grad(a)) t.accumulate(a, g);
      if (t.needs_grad(b)) t.accumulate(b, g);
    });
  }

  /// Adds a 1 x c row vector to every row.
  Var add_bias(Var a, Var bias) {
    const Matrix& av = value(a);
    const Matrix& bv = value(bias);
    check(bv.rows() == 1 && bv.cols() == av.cols(), "add_bias", av, bv);
    Matrix out = av;
    out.rowwise() += bv.row(0);
    return push(std::move(out), any(a, bias), [a, bias](Tape& t, const Matrix& g) {
      if (t.needs_grad(a)) t.accumulate(a, g);
      if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
    });
  }

  Var relu(Var a) {
    Matrix out = value(a).cwiseMax(0.0);
    return push(std::move(out), any(a), [a](Tape& t, const Matrix& g) {
      t.accumulate(a, (t.value(a).array() > 0.0).select(g.array(), 0.0).matrix());
    });
  }

  Var sigmoid(Var a) {
    Matrix out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    const std::size_t self = nodes_.size();
    return push(std::move(out), any(a), [a, self](Tape& t, const Matrix& g) {
      const auto& s = t.nodes_[self].value().array();
      t.accumulate(a, (g.array() * s * (1.0 - s)).matrix());
    });
  }

  Var hadamard(Var a, Var b) {
    check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "hadamard",
          value(a), value(b));
    return push(value(a).cwiseProduct(value(b)), any(a, b), [a, b](Tape& t, const Matrix& g) {
      if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
      if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
    });
  }

  /// Row i of `a` times scale(i, 0).
  Var scale_rows(Var a, Var scale) {
    const Matrix& av = value(a);
    const Matrix& sv = value(scale);
    check(sv.cols() == 1 && sv.rows() == av.rows(), "scale_rows", av, sv);
    Matrix out = av.array().colwise() * sv.col(0).array();
    return push(std::move(out), any(a, scale), [a, scale](Tape& t, const Matrix& g) {
      if (t.needs_grad(a)) t.accumulate(a, (g.array().colwise() * t.value(scale).col(0).array()).matrix());
      if (t.needs_grad(scale)) {
        t.accumulate(scale, g.cwiseProduct(t.value(a)).rowwise().sum());
      }
    });
  }

  Var column(Var a, Eigen::Index j) {
    const Matrix& av = value(a);
    if (j < 0 || j >= av.cols()) throw Error("column index out of range");
    Matrix out = av.col(j);
    return push(std::move(out), any(a), [a, j](Tape& t, const Matrix& g) {
      Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
      full.col(j) = g.col(0);
      t.accumulate(a, full);
    });
  }

  /// Horizontal concatenation.
  Var hcat(std::span<const Var> parts) {
    if (parts.empty()) throw Error("hcat of nothing");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    bool grad = false;
    for (Var p : parts) {
      check(value(p).rows() == rows, "hcat", value(parts[0]), value(p));
      cols += value(p).cols();
      grad = grad || needs_grad(p);
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return push(std::move(out), grad, [inputs](Tape& t, const Matrix& g) {
      Eigen::Index offset = 0;
      for (Var p : inputs) {
        const Eigen::Index w = t.value(p).cols();
        if (t.needs_grad(p)) t.accumulate(p, g.middleCols(offset, w));
        offset += w;
      }
    });
  }

  /// Numerically stable softmax along each row.
  Var softmax_rows(Var a) {
    Matrix out = value(a);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      auto row = out.row(i);
      row.array() -= row.maxCoeff();
      row = row.array().exp().matrix();
      row /= row.sum();
    }
    const std::size_t self = nodes_.size();
    return push(std::move(out), any(a), [a, self](Tape& t, const Matrix& g) {
      const Matrix& s = t.nodes_[self].value();
      // d/dz softmax: s ⊙ (g − <g, s>) per row.
      Eigen::VectorXd dots = g.cwiseProduct(s).rowwise().sum();
      Matrix dz = s.cwiseProduct(g - dots.replicate(1, g.cols()));
      t.accumulate(a, dz);
    });
  }

  /// Mean softmax cross-entropy of the given rows against their labels.
  Var mean_cross_entropy(Var logits, std::span<const NodeId> rows, std::span<const int> labels) {
    const Matrix& z = value(logits);
    if (rows.empty()) throw Error("cross-entropy over an empty node set");
    Matrix probs(static_cast<Eigen::Index>(rows.size()), z.cols());
    double loss = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = z.row(rows[r]);
      const double mx = row.maxCoeff();
      const double lse = mx + std::log((row.array() - mx).exp().sum());
      loss -= row(labels[rows[r]]) - lse;
      probs.row(static_cast<Eigen::Index>(r)) = (row.array() - lse).exp().matrix();
    }
    loss /= static_cast<double>(rows.size());
    Matrix out(1, 1);
    out(0, 0) = loss;
    std::vector<NodeId> idx(rows.begin(), rows.end());
    std::vector<int> y(labels.begin(), labels.end());
    return push(std::move(out), any(logits),
                [logits, idx = std::move(idx), y = std::move(y), probs = std::move(probs)](Tape& t,
                                                                                          const Matrix& g) {
                  const double scale = g(0, 0) / static_cast<double>(idx.size());
                  Matrix dz = Matrix::Zero(t.value(logits).rows(), t.value(logits).cols());
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    auto drow = dz.row(idx[r]);
                    drow += scale * probs.row(static_cast<Eigen::Index>(r));
                    drow(y[idx[r]]) -= scale;
                  }
                  t.accumulate(logits, dz);
                });
  }

 private:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    Backward back;

    const Matrix& value() const { return ref ? *ref : own; }
  };

  Var push(Matrix value, bool needs_grad, Backward back) {
    Node node;
    node.own = std::move(value);
    node.needs_grad = needs_grad;
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return {nodes_.size() - 1};
  }

  bool any(Var a) const { return needs_grad(a); }
  bool any(Var a, Var b) const { return needs_grad(a) || needs_grad(b); }

  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[v.id];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  static void check(bool ok, const char* op, const Matrix& a, const Matrix& b) {
    if (ok) return;
    throw Error(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()));
  }

  std::vector<Node> nodes_;
};

}  // namespace adpa
