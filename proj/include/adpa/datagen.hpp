#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "adpa/graph.hpp"
#include "adpa/labels.hpp"
#include "adpa/training.hpp"

namespace adpa {

/// Directed stochastic block model. P[a][b] is the probability of an edge
/// from a class-a node to a class-b node.
struct DsbmSpec {
  std::vector<std::size_t> class_sizes;
  std::vector<std::vector<double>> p;
  std::uint64_t seed = 0;
  bool reciprocal = false;       // sample each unordered pair once, add both directions
  double feature_signal = 1.0;   // weight of the one-hot class block
  double feature_noise = 0.1;    // uniform noise amplitude
  std::size_t feature_dim = 0;   // 0 means C; extra columns carry noise only

  std::size_t num_nodes() const { return std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0}); }
  std::size_t num_classes() const { return class_sizes.size(); }

  void validate() const {
    if (class_sizes.empty()) throw Error("dsbm: at least one class required");
    for (auto s : class_sizes) {
      if (s == 0) throw Error("dsbm: class sizes must be positive");
    }
    if (p.size() != class_sizes.size()) throw Error("dsbm: P must be C x C");
    for (const auto& row : p) {
      if (row.size() != class_sizes.size()) throw Error("dsbm: P must be C x C");
      for (double x : row) {
        if (!(x >= 0.0 && x <= 1.0)) throw Error("dsbm: probabilities must lie in [0, 1]");
      }
    }
    if (feature_dim != 0 && feature_dim < class_sizes.size()) throw Error("dsbm: feature_dim below class count");
    if (feature_noise < 0.0) throw Error("dsbm: feature_noise must be non-negative");
  }
};

struct GeneratedGraph {
  DiGraph graph;
  LabelVector labels;
  Matrix features;
};

/// Nodes are labeled in class order (class 0 first). Features are the
/// scaled one-hot class plus uniform noise in ±feature_noise.
inline GeneratedGraph generate(const DsbmSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_nodes();
  const std::size_t classes = spec.num_classes();
  std::vector<int> y;
  for (std::size_t c = 0; c < classes; ++c) y.insert(y.end(), spec.class_sizes[c], static_cast<int>(c));

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = spec.reciprocal ? u + 1 : 0; v < n; ++v) {
      if (u == v) continue;
      if (unit(rng) < spec.p[static_cast<std::size_t>(y[u])][static_cast<std::size_t>(y[v])]) {
        edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
        if (spec.reciprocal) edges.push_back({static_cast<NodeId>(v), static_cast<NodeId>(u)});
      }
    }
  }

  const std::size_t f = spec.feature_dim == 0 ? classes : spec.feature_dim;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  std::uniform_real_distribution<double> noise(-spec.feature_noise, spec.feature_noise);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = (j == y[static_cast<std::size_t>(i)] ? spec.feature_signal : 0.0) +
                (spec.feature_noise > 0.0 ? noise(rng) : 0.0);
    }
  }
  return {DiGraph::from_edge_list(edges, n), LabelVector(std::move(y), static_cast<int>(classes)), std::move(x)};
}

/// Uniform random digraph with exactly m distinct non-loop edges.
inline DiGraph random_digraph(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n < 2 || m > n * (n - 1)) throw Error("random_digraph: cannot place " + std::to_string(m) + " edges");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Edge> edges;
  edges.reserve(m);
  std::set<std::pair<NodeId, NodeId>> seen;
  while (edges.size() < m) {
    const auto u = static_cast<NodeId>(pick(rng));
    const auto v = static_cast<NodeId>(pick(rng));
    if (u == v || !seen.insert({u, v}).second) continue;
    edges.push_back({u, v});
  }
  return DiGraph::from_edge_list(edges, n);
}

/// Keeps each edge independently with probability keep_fraction.
inline DiGraph sparsify_edges(const DiGraph& g, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) throw Error("keep_fraction must be in [0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(keep_fraction);
  std::vector<Edge> kept;
  for (const Edge& e : g.edges()) {
    if (keep(rng)) kept.push_back(e);
  }
  return DiGraph::from_edge_list(kept, g.num_nodes());
}

/// Zeroes round(missing_fraction * |nodes| * f) entries chosen uniformly
/// without replacement among the rows listed in `nodes`.
inline Matrix mask_features(const Matrix& x, double missing_fraction, std::span<const NodeId> nodes,
                            std::uint64_t seed) {
  if (!(missing_fraction >= 0.0 && missing_fraction <= 1.0)) throw Error("missing_fraction must be in [0, 1]");
  std::vector<std::pair<NodeId, Eigen::Index>> cells;
  for (NodeId v : nodes) {
    if (v >= x.rows()) throw Error("mask_features: node index out of range");
    for (Eigen::Index j = 0; j < x.cols(); ++j) cells.emplace_back(v, j);
  }
  const auto count = static_cast<std::size_t>(std::llround(missing_fraction * static_cast<double>(cells.size())));
  std::mt19937_64 rng(seed);
  Matrix out = x;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng)]);
    out(cells[i].first, cells[i].second) = 0.0;
  }
  return out;
}

/// Keeps min(per_class, available) train nodes of each class; val and test
/// are untouched.
inline SplitMask subsample_labels(const SplitMask& mask, std::size_t per_class, const LabelVector& labels,
                                  std::uint64_t seed) {
  if (per_class < 1) throw Error("per_class must be at least 1");
  std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(labels.num_classes()));
  for (NodeId v : mask.train) {
    if (labels.known(v)) by_class[static_cast<std::size_t>(labels[v])].push_back(v);
  }
  std::size_t most = 0;
  for (const auto& c : by_class) most = std::max(most, c.size());
  if (per_class > most) {
    throw Error("per_class " + std::to_string(per_class) + " exceeds every class's availability (max " +
                std::to_string(most) + ")");
  }
  std::mt19937_64 rng(seed);
  SplitMask out;
  out.val = mask.val;
  out.test = mask.test;
  for (auto& c : by_class) {
    std::shuffle(c.begin(), c.end(), rng);
    c.resize(std::min(per_class, c.size()));
    out.train.insert(out.train.end(), c.begin(), c.end());
  }
  std::sort(out.train.begin(), out.train.end());
  return out;
}

/// Seeded split by fractions of all labeled nodes.
inline SplitMask random_split(const LabelVector& labels, double train_fraction, double val_fraction,
                              std::uint64_t seed) {
  if (train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0 + 1e-12) {
    throw Error("split fractions must be positive and sum to at most 1");
  }
  std::vector<NodeId> nodes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.known(i)) nodes.push_back(static_cast<NodeId>(i));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  const auto total = static_cast<double>(nodes.size());
  const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(train_fraction * total)));
  const auto n_val = std::min(nodes.size() - n_train, static_cast<std::size_t>(std::llround(val_fraction * total)));
  SplitMask s;
  s.train.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(nodes.begin() + static_cast<std::ptrdiff_t>(n_train),
               nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), nodes.end());
  for (auto* set : {&s.train, &s.val, &s.test}) std::sort(set->begin(), set->end());
  return s;
}

/// Seeded split with a fixed number of train and validation nodes per class;
/// the rest of the labeled nodes form the test set.
inline SplitMask per_class_split(const LabelVector& labels, std::size_t train_per_class, std::size_t val_per_class,
                                 std::uint64_t seed) {
  std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(labels.num_classes()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.known(i)) by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<NodeId>(i));
  }
  std::mt19937_64 rng(seed);
  SplitMask s;
  for (auto& c : by_class) {
    std::shuffle(c.begin(), c.end(), rng);
    const std::size_t t = std::min(train_per_class, c.size());
    const std::size_t v = std::min(val_per_class, c.size() - t);
    s.train.insert(s.train.end(), c.begin(), c.begin() + static_cast<std::ptrdiff_t>(t));
    s.val.insert(s.val.end(), c.begin() + static_cast<std::ptrdiff_t>(t), c.begin() + static_cast<std::ptrdiff_t>(t + v));
    s.test.insert(s.test.end(), c.begin() + static_cast<std::ptrdiff_t>(t + v), c.end());
  }
  for (auto* set : {&s.train, &s.val, &s.test}) std::sort(set->begin(), set->end());
  return s;
}

}  // namespace adpa
