#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "adpa/graph.hpp"
#include "adpa/labels.hpp"

namespace adpa {

enum class DirectionMode { Directed, Symmetrized };

/// Which neighbors define H_node in directed mode.
enum class NeighborSide { Out, In };

inline const char* to_string(DirectionMode m) {
  return m == DirectionMode::Directed ? "directed" : "symmetrized";
}

struct HomophilyReport {
  double h_node = 0.0;
  double h_edge = 0.0;
  double h_class = 0.0;
  double h_adj = 0.0;
  double li = 0.0;
  DirectionMode direction_mode = DirectionMode::Directed;
};

namespace detail {

inline void check_labels_fit(const DiGraph& g, const LabelVector& labels) {
  if (labels.size() != g.num_nodes()) {
    throw Error("label count " + std::to_string(labels.size()) + " differs from node count " +
                std::to_string(g.num_nodes()));
  }
}

// Class-pair counts over stored edges whose endpoints are both labeled.
struct EdgeClassCounts {
  std::vector<double> joint;  // C x C, row = source class
  double total = 0.0;
  int classes = 0;

  double at(int a, int b) const { return joint[static_cast<std::size_t>(a * classes + b)]; }
};

inline EdgeClassCounts count_edge_classes(const DiGraph& g, const LabelVector& labels) {
  check_labels_fit(g, labels);
  EdgeClassCounts c;
  c.classes = labels.num_classes();
  c.joint.assign(static_cast<std::size_t>(c.classes * c.classes), 0.0);
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    if (!labels.known(u)) continue;
    for (NodeId v : g.out_neighbors(u)) {
      if (!labels.known(v)) continue;
      c.joint[static_cast<std::size_t>(labels[u] * c.classes + labels[v])] += 1.0;
      c.total += 1.0;
    }
  }
  if (c.total == 0.0) throw Error("no edges between labeled nodes");
  return c;
}

inline void require_two_classes(const LabelVector& labels) {
  if (labels.num_classes() < 2) throw Error("metric requires at least two classes");
  int first = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels.known(i)) continue;
    if (first < 0) {
      first = labels[i];
    } else if (labels[i] != first) {
      return;
    }
  }
  throw Error("degenerate labeling: a single class among labeled nodes");
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

}  // namespace detail

/// Fraction of stored edges (both endpoints labeled) joining same-class nodes.
inline double edge_homophily(const DiGraph& g, const LabelVector& labels) {
  const auto c = detail::count_edge_classes(g, labels);
  double same = 0.0;
  for (int k = 0; k < c.classes; ++k) same += c.at(k, k);
  return same / c.total;
}

/// Mean over labeled nodes of the same-class share among their labeled
/// neighbors. Nodes without labeled neighbors are skipped.
inline double node_homophily(const DiGraph& g, const LabelVector& labels,
                             NeighborSide side = NeighborSide::Out) {
  detail::check_labels_fit(g, labels);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    if (!labels.known(u)) continue;
    const auto nbrs = side == NeighborSide::Out ? g.out_neighbors(u) : g.in_neighbors(u);
    std::size_t deg = 0;
    std::size_t same = 0;
    for (NodeId v : nbrs) {
      if (!labels.known(v)) continue;
      ++deg;
      same += labels[v] == labels[u];
    }
    if (deg == 0) continue;
    sum += static_cast<double>(same) / static_cast<double>(deg);
    ++counted;
  }
  if (counted == 0) throw Error("every labeled node is isolated");
  return sum / static_cast<double>(counted);
}

/// (1/(C-1)) Σ_k max(0, h_k - n_k/n), where h_k is the same-class share of
/// edges leaving class k.
inline double class_homophily(const DiGraph& g, const LabelVector& labels) {
  detail::require_two_classes(labels);
  const auto c = detail::count_edge_classes(g, labels);
  const int classes = c.classes;
  std::vector<double> class_size(static_cast<std::size_t>(classes), 0.0);
  double known = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels.known(i)) continue;
    class_size[static_cast<std::size_t>(labels[i])] += 1.0;
    known += 1.0;
  }
  double acc = 0.0;
  for (int k = 0; k < classes; ++k) {
    double out = 0.0;
    for (int b = 0; b < classes; ++b) out += c.at(k, b);
    const double h_k = out > 0.0 ? c.at(k, k) / out : 0.0;
    acc += std::max(0.0, h_k - class_size[static_cast<std::size_t>(k)] / known);
  }
  return acc / static_cast<double>(classes - 1);
}

/// Edge homophily corrected for the degree-weighted chance of agreement.
inline double adjusted_homophily(const DiGraph& g, const LabelVector& labels) {
  detail::require_two_classes(labels);
  const auto c = detail::count_edge_classes(g, labels);
  double same = 0.0;
  double chance = 0.0;
  for (int k = 0; k < c.classes; ++k) {
    same += c.at(k, k);
    double endpoints = 0.0;  // edge endpoints carrying class k
    for (int b = 0; b < c.classes; ++b) endpoints += c.at(k, b) + c.at(b, k);
    const double p = endpoints / (2.0 * c.total);
    chance += p * p;
  }
  if (chance >= 1.0) throw Error("degenerate labeling: adjusted homophily undefined");
  return (same / c.total - chance) / (1.0 - chance);
}

/// 1 - H(y_src | y_dst) / H(y_src) over the edge-endpoint class distribution.
inline double label_informativeness(const DiGraph& g, const LabelVector& labels) {
  detail::require_two_classes(labels);
  const auto c = detail::count_edge_classes(g, labels);
  const auto classes = static_cast<std::size_t>(c.classes);
  std::vector<double> joint(c.joint.size());
  std::vector<double> src(classes, 0.0);
  std::vector<double> dst(classes, 0.0);
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = 0; b < classes; ++b) {
      const double p = c.joint[a * classes + b] / c.total;
      joint[a * classes + b] = p;
      src[a] += p;
      dst[b] += p;
    }
  }
  const double h_src = detail::entropy(src);
  if (h_src <= 0.0) throw Error("degenerate labeling: label informativeness undefined");
  const double h_cond = detail::entropy(joint) - detail::entropy(dst);
  return 1.0 - h_cond / h_src;
}

/// All five measures; symmetrized mode evaluates on symmetrize(g).
inline HomophilyReport homophily_report(const DiGraph& g, const LabelVector& labels,
                                        DirectionMode mode = DirectionMode::Directed,
                                        NeighborSide side = NeighborSide::Out) {
  const DiGraph sym = mode == DirectionMode::Symmetrized ? symmetrize(g) : DiGraph();
  const DiGraph& target = mode == DirectionMode::Symmetrized ? sym : g;
  HomophilyReport r;
  r.direction_mode = mode;
  r.h_node = node_homophily(target, labels, side);
  r.h_edge = edge_homophily(target, labels);
  r.h_class = class_homophily(target, labels);
  r.h_adj = adjusted_homophily(target, labels);
  r.li = label_informativeness(target, labels);
  return r;
}

}  // namespace adpa
