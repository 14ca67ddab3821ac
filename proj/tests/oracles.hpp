// Independent dense reference implementations used only by the tests.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "adpa/adpa.hpp"

namespace adpa::oracle {

inline Matrix dense_adjacency(const DiGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix a = Matrix::Zero(n, n);
  for (const Edge& e : g.edges()) a(e.src, e.dst) = 1.0;
  return a;
}

/// Binarized dense product of the word's factors.
inline Matrix dense_pattern(const DiGraph& g, const DPSpec& spec) {
  const Matrix a = dense_adjacency(g);
  Matrix p = Matrix::Identity(a.rows(), a.cols());
  for (Token t : spec.word()) p = p * (t == Token::Fwd ? a : Matrix(a.transpose()));
  return (p.array() > 0.0).cast<double>().matrix();
}

/// Plain two-pass Pearson correlation; 0 when either vector is constant.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// Explicit pair-indicator vectors over unordered distinct labeled pairs.
inline double dense_pair_correlation(const Matrix& pattern, const LabelVector& labels) {
  std::vector<double> linked, same;
  for (Eigen::Index u = 0; u < pattern.rows(); ++u) {
    for (Eigen::Index v = u + 1; v < pattern.rows(); ++v) {
      if (!labels.known(static_cast<std::size_t>(u)) || !labels.known(static_cast<std::size_t>(v))) continue;
      linked.push_back(pattern(u, v) > 0.0 || pattern(v, u) > 0.0 ? 1.0 : 0.0);
      same.push_back(labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)] ? 1.0 : 0.0);
    }
  }
  return pearson(linked, same);
}

struct DenseAmud {
  std::vector<double> r2;
  double score = 0.0;
};

/// AMUD computed from dense patterns, including the score formula.
inline DenseAmud dense_amud(const DiGraph& g, const LabelVector& labels) {
  DenseAmud out;
  for (const char* w : {"FF", "RR", "FR", "RF"}) {
    const double r = dense_pair_correlation(dense_pattern(g, DPSpec::parse(w)), labels);
    out.r2.push_back(r * r);
  }
  const double mx = *std::max_element(out.r2.begin(), out.r2.end());
  if (mx == 0.0) return out;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i < j) sum += std::fabs(out.r2[static_cast<std::size_t>(i)] - out.r2[static_cast<std::size_t>(j)]);
    }
  }
  out.score = std::sqrt(sum) / mx / 6.0;
  return out;
}

/// D_row^{r-1} (P + I on the diagonal) D_col^{-r}, dense.
inline Matrix dense_propagation(const Matrix& pattern, double r) {
  Matrix m = pattern;
  for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) = 1.0;
  const Eigen::VectorXd rows = m.rowwise().sum();
  const Eigen::VectorXd cols = m.colwise().sum().transpose();
  Matrix dl = Matrix::Zero(m.rows(), m.rows());
  Matrix dr = Matrix::Zero(m.rows(), m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    dl(i, i) = std::pow(rows(i), r - 1.0);
    dr(i, i) = std::pow(cols(i), -r);
  }
  return dl * m * dr;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

/// Random digraph with independent edge probability p (self-loops allowed
/// when `loops` is set).
inline DiGraph random_graph(std::size_t n, double p, std::mt19937_64& rng, bool loops = false) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v && !loops) continue;
      if (coin(rng)) edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
    }
  }
  return DiGraph::from_edge_list(edges, n);
}

inline LabelVector random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = d(rng);
  return {std::move(y), classes};
}

// ---- straight-line model --------------------------------------------------

inline Eigen::RowVectorXd apply_mlp(const Mlp& mlp, Eigen::RowVectorXd x) {
  for (std::size_t i = 0; i < mlp.size(); ++i) {
    x = x * mlp[i].weight + mlp[i].bias;
    if (i + 1 < mlp.size()) x = x.cwiseMax(0.0);
  }
  return x;
}

inline Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& z) {
  Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

/// Per-node slot weights for one step, computed directly from each variant's
/// definition.
inline std::vector<double> slot_weights(const AdpaParameters& p, const AdpaConfig& c,
                                        const std::vector<Eigen::RowVectorXd>& slots, std::size_t node) {
  const std::size_t k1 = slots.size();
  std::vector<double> w(k1);
  switch (c.dp_variant) {
    case DpVariant::Original:
      for (std::size_t g = 0; g < k1; ++g) w[g] = p.w_dp(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(g));
      break;
    case DpVariant::Gate:
      for (std::size_t g = 0; g < k1; ++g) {
        const double z = slots[g].dot(p.gate_weight.col(static_cast<Eigen::Index>(g))) + p.gate_bias(0, static_cast<Eigen::Index>(g));
        w[g] = 1.0 / (1.0 + std::exp(-z));
      }
      break;
    case DpVariant::JK: {
      Eigen::RowVectorXd cat(static_cast<Eigen::Index>(k1) * slots[0].size());
      for (std::size_t g = 0; g < k1; ++g) cat.segment(static_cast<Eigen::Index>(g) * slots[0].size(), slots[0].size()) = slots[g];
      const Eigen::RowVectorXd s = softmax(cat * p.jk_scorer.weight + p.jk_scorer.bias);
      for (std::size_t g = 0; g < k1; ++g) w[g] = s(static_cast<Eigen::Index>(g));
      break;
    }
    case DpVariant::Recursive: {
      Eigen::RowVectorXd running = slots[0];
      w[0] = 1.0;
      for (std::size_t g = 1; g < k1; ++g) {
        const double a = running.dot(p.rec_weight.col(0)) + p.rec_bias(0, 0);
        const double b = slots[g].dot(p.rec_weight.col(1)) + p.rec_bias(0, 1);
        const double m = std::max(a, b);
        const double keep = std::exp(a - m) / (std::exp(a - m) + std::exp(b - m));
        const double take = 1.0 - keep;
        for (std::size_t h = 0; h < g; ++h) w[h] *= keep;
        w[g] = take;
        running = keep * running + take * slots[g];
      }
      break;
    }
  }
  return w;
}

/// Logits computed node by node without the tape.
inline Matrix model_logits(const AdpaParameters& p, const AdpaConfig& c, const PropagatedFeatures& pf) {
  const auto n = static_cast<Eigen::Index>(pf.num_nodes());
  const auto f = static_cast<Eigen::Index>(pf.feature_dim());
  const auto hidden = static_cast<Eigen::Index>(c.hidden);
  Matrix logits(n, static_cast<Eigen::Index>(c.classes));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::RowVectorXd> fused;
    for (std::size_t l = 1; l <= c.steps; ++l) {
      std::vector<Eigen::RowVectorXd> slots;
      for (std::size_t g = 0; g < c.slots(); ++g) slots.push_back(pf.block(l, g).row(i));
      const auto w = slot_weights(p, c, slots, static_cast<std::size_t>(i));
      Eigen::RowVectorXd cat(static_cast<Eigen::Index>(c.slots()) * f);
      for (std::size_t g = 0; g < c.slots(); ++g) cat.segment(static_cast<Eigen::Index>(g) * f, f) = w[g] * slots[g];
      fused.push_back(apply_mlp(p.fusion[c.per_step_fusion ? l - 1 : 0], cat));
    }
    Eigen::RowVectorXd all(static_cast<Eigen::Index>(c.steps) * hidden);
    for (std::size_t l = 0; l < c.steps; ++l) all.segment(static_cast<Eigen::Index>(l) * hidden, hidden) = fused[l];
    Eigen::RowVectorXd e = apply_mlp(p.hop_scorer, all);
    if (c.hop_activation == Activation::Relu) e = e.cwiseMax(0.0);
    const Eigen::RowVectorXd hop = softmax(e);
    Eigen::RowVectorXd star = Eigen::RowVectorXd::Zero(hidden);
    for (std::size_t l = 0; l < c.steps; ++l) star += hop(static_cast<Eigen::Index>(l)) * fused[l];
    logits.row(i) = apply_mlp(p.classifier, star);
  }
  return logits;
}

/// Mean cross-entropy over `nodes`, evaluated with the straight-line model.
inline double model_loss(const AdpaParameters& p, const AdpaConfig& c, const PropagatedFeatures& pf,
                         const LabelVector& labels, const std::vector<NodeId>& nodes) {
  const Matrix z = model_logits(p, c, pf);
  double loss = 0.0;
  for (NodeId v : nodes) {
    const Eigen::RowVectorXd row = z.row(v);
    const double m = row.maxCoeff();
    loss -= row(labels[v]) - (m + std::log((row.array() - m).exp().sum()));
  }
  return loss / static_cast<double>(nodes.size());
}

/// Max relative error between analytic gradients and central differences.
/// Relative error is |a - d| / max(|a|, |d|, floor).
inline double gradient_check(AdpaParameters params, const AdpaConfig& config, const PropagatedFeatures& pf,
                             const LabelVector& labels, const SplitMask& mask, double eps = 1e-5,
                             double floor = 1e-4) {
  const auto analytic = loss_and_grad(params, config, pf, labels, mask).grads;
  auto tensors = params.tensors();
  double worst = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Matrix& m = *tensors[t];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + eps;
      const double up = model_loss(params, config, pf, labels, mask.train);
      m.data()[i] = saved - eps;
      const double down = model_loss(params, config, pf, labels, mask.train);
      m.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t].data()[i];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace adpa::oracle
