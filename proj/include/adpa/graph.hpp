#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <compare>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adpa/common.hpp"

namespace adpa {

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Compressed sparse row structure without values.
struct Csr {
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> indices;

  std::span<const NodeId> row(std::size_t i) const {
    return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  std::size_t degree(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  bool contains(std::size_t i, NodeId j) const {
    const auto r = row(i);
    return std::binary_search(r.begin(), r.end(), j);
  }
};

namespace detail {

// Builds a CSR from edges already sorted by (src, dst) and deduplicated.
inline Csr csr_from_sorted(std::size_t n, std::span<const Edge> sorted, bool by_dst) {
  Csr csr;
  csr.offsets.assign(n + 1, 0);
  csr.indices.resize(sorted.size());
  for (const Edge& e : sorted) ++csr.offsets[(by_dst ? e.dst : e.src) + 1];
  std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
  std::vector<std::size_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  // Counting sort keeps the secondary key ordered because `sorted` is
  // ordered by (src, dst): the transpose comes out sorted by src per row.
  for (const Edge& e : sorted) {
    const NodeId row = by_dst ? e.dst : e.src;
    csr.indices[cursor[row]++] = by_dst ? e.src : e.dst;
  }
  return csr;
}

}  // namespace detail

/// Immutable directed graph with both adjacency directions.
class DiGraph {
 public:
  DiGraph() = default;

  /// Builds a graph from an arbitrary edge list. Duplicates collapse to one
  /// edge; self-loops are kept and counted.
  static DiGraph from_edge_list(std::span<const Edge> edges, std::size_t n) {
    if (n == 0) throw Error("graph must have at least one node");
    for (const Edge& e : edges) {
      if (e.src >= n || e.dst >= n) {
        throw Error("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                    ") out of range for n=" + std::to_string(n));
      }
    }
    std::vector<Edge> sorted(edges.begin(), edges.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    DiGraph g;
    g.n_ = n;
    g.out_ = detail::csr_from_sorted(n, sorted, false);
    g.in_ = detail::csr_from_sorted(n, sorted, true);
    g.self_loops_ = static_cast<std::size_t>(
        std::count_if(sorted.begin(), sorted.end(), [](const Edge& e) { return e.src == e.dst; }));
    return g;
  }

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return out_.indices.size(); }
  std::size_t num_self_loops() const { return self_loops_; }

  std::span<const NodeId> out_neighbors(std::size_t u) const { return out_.row(u); }
  std::span<const NodeId> in_neighbors(std::size_t u) const { return in_.row(u); }
  const Csr& out_adj() const { return out_; }
  const Csr& in_adj() const { return in_; }

  bool has_edge(NodeId u, NodeId v) const { return out_.contains(u, v); }

  /// Edges in (src, dst) order.
  std::vector<Edge> edges() const {
    std::vector<Edge> result;
    result.reserve(num_edges());
    for (std::size_t u = 0; u < n_; ++u) {
      for (NodeId v : out_.row(u)) result.push_back({static_cast<NodeId>(u), v});
    }
    return result;
  }

  bool is_symmetric() const {
    return out_.offsets == in_.offsets && out_.indices == in_.indices;
  }

  /// Hash of n and the sorted edge list.
  std::uint64_t fingerprint() const {
    Fnv1a64 h;
    h.update_value(static_cast<std::uint64_t>(n_));
    for (std::size_t u = 0; u < n_; ++u) {
      for (NodeId v : out_.row(u)) {
        h.update_value(static_cast<std::uint64_t>(u));
        h.update_value(static_cast<std::uint64_t>(v));
      }
    }
    return h.digest();
  }

  friend bool operator==(const DiGraph& a, const DiGraph& b) {
    return a.n_ == b.n_ && a.out_.offsets == b.out_.offsets && a.out_.indices == b.out_.indices;
  }

 private:
  std::size_t n_ = 0;
  std::size_t self_loops_ = 0;
  Csr out_;
  Csr in_;
};

/// Union of the edge set with its reversal.
inline DiGraph symmetrize(const DiGraph& g) {
  std::vector<Edge> edges = g.edges();
  const std::size_t m = edges.size();
  edges.reserve(2 * m);
  for (std::size_t i = 0; i < m; ++i) edges.push_back({edges[i].dst, edges[i].src});
  return DiGraph::from_edge_list(edges, g.num_nodes());
}

/// Relabels node u as perm[u].
inline DiGraph permute_nodes(const DiGraph& g, std::span<const NodeId> perm) {
  std::vector<Edge> edges = g.edges();
  for (Edge& e : edges) e = {perm[e.src], perm[e.dst]};
  return DiGraph::from_edge_list(edges, g.num_nodes());
}

/// Square or rectangular CSR matrix with real values.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
               std::vector<NodeId> indices, std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        offsets_(std::move(offsets)),
        indices_(std::move(indices)),
        values_(std::move(values)) {
    if (offsets_.size() != rows_ + 1 || indices_.size() != values_.size() ||
        offsets_.back() != indices_.size()) {
      throw Error("inconsistent sparse matrix layout");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      if (offsets_[i] > offsets_[i + 1]) throw Error("sparse row offsets must be non-decreasing");
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
        if (indices_[p] >= cols_) throw Error("sparse column index out of range");
        if (p > offsets_[i] && indices_[p] <= indices_[p - 1]) {
          throw Error("sparse column indices must be strictly increasing per row");
        }
        if (!std::isfinite(values_[p])) throw Error("sparse matrix value is not finite");
      }
    }
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<std::size_t> offsets(n + 1);
    std::iota(offsets.begin(), offsets.end(), std::size_t{0});
    std::vector<NodeId> indices(n);
    std::iota(indices.begin(), indices.end(), NodeId{0});
    return {n, n, std::move(offsets), std::move(indices), std::vector<double>(n, 1.0)};
  }

  /// Binary matrix with the structure of `csr`.
  static SparseMatrix from_structure(std::size_t n, const Csr& csr) {
    return {n, n, csr.offsets, csr.indices, std::vector<double>(csr.indices.size(), 1.0)};
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return indices_.size(); }

  std::span<const NodeId> row_indices(std::size_t i) const {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  /// Value at (i, j); zero when not stored.
  double at(std::size_t i, std::size_t j) const {
    const auto idx = row_indices(i);
    const auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<NodeId>(j));
    if (it == idx.end() || *it != j) return 0.0;
    return values_[offsets_[i] + static_cast<std::size_t>(it - idx.begin())];
  }

  bool contains(std::size_t i, std::size_t j) const {
    const auto idx = row_indices(i);
    return std::binary_search(idx.begin(), idx.end(), static_cast<NodeId>(j));
  }

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
        d(static_cast<Eigen::Index>(i), indices_[p]) = values_[p];
      }
    }
    return d;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> indices_;
  std::vector<double> values_;
};

/// One factor of a directed-pattern word: FWD is A, REV is A transposed.
enum class Token : std::uint8_t { Fwd, Rev };

inline constexpr std::size_t kDefaultMaxOrder = 3;

/// A composition word over {FWD, REV}. Text form uses 'F' and 'R', e.g. "FR"
/// is A·Aᵀ.
class DPSpec {
 public:
  DPSpec() = default;
  explicit DPSpec(std::vector<Token> word) : word_(std::move(word)) {
    if (word_.empty()) throw Error("directed-pattern word must be non-empty");
  }

  static DPSpec parse(std::string_view text) {
    std::vector<Token> word;
    for (char c : text) {
      if (c == 'F' || c == 'f') {
        word.push_back(Token::Fwd);
      } else if (c == 'R' || c == 'r') {
        word.push_back(Token::Rev);
      } else {
        throw Error("invalid directed-pattern token '" + std::string(1, c) + "' in \"" +
                    std::string(text) + "\"");
      }
    }
    return DPSpec(std::move(word));
  }

  std::size_t order() const { return word_.size(); }
  const std::vector<Token>& word() const { return word_; }

  std::string to_string() const {
    std::string s;
    for (Token t : word_) s += t == Token::Fwd ? 'F' : 'R';
    return s;
  }

  /// Matrix notation, e.g. "AA^T".
  std::string display_name() const {
    std::string s;
    for (Token t : word_) s += t == Token::Fwd ? "A" : "A^T";
    return s;
  }

  /// (W1 W2 ... Wk)ᵀ = Wkᵀ ... W1ᵀ: reverse the word and flip each token.
  DPSpec transposed() const {
    std::vector<Token> w(word_.rbegin(), word_.rend());
    for (Token& t : w) t = t == Token::Fwd ? Token::Rev : Token::Fwd;
    return DPSpec(std::move(w));
  }

  friend bool operator==(const DPSpec&, const DPSpec&) = default;

 private:
  std::vector<Token> word_;
};

/// All words of length 1..max_hop. Length 2 follows the conventional order
/// AA, AᵀAᵀ, AAᵀ, AᵀA; other lengths enumerate FWD < REV lexicographically.
inline std::vector<DPSpec> enumerate_specs(std::size_t max_hop) {
  if (max_hop < 1 || max_hop > kDefaultMaxOrder) {
    throw Error("max_hop must be in [1, " + std::to_string(kDefaultMaxOrder) + "], got " +
                std::to_string(max_hop));
  }
  std::vector<DPSpec> specs;
  for (std::size_t len = 1; len <= max_hop; ++len) {
    if (len == 2) {
      for (const char* w : {"FF", "RR", "FR", "RF"}) specs.push_back(DPSpec::parse(w));
      continue;
    }
    for (std::size_t bits = 0; bits < (std::size_t{1} << len); ++bits) {
      std::vector<Token> word(len);
      for (std::size_t i = 0; i < len; ++i) {
        word[i] = (bits >> (len - 1 - i)) & 1U ? Token::Rev : Token::Fwd;
      }
      specs.emplace_back(std::move(word));
    }
  }
  return specs;
}

/// Binarized product of the word's factors (FWD = A, REV = Aᵀ). Diagonal
/// entries are kept as computed.
inline SparseMatrix compose_pattern(const DiGraph& g, const DPSpec& spec,
                                    std::size_t max_order = kDefaultMaxOrder) {
  if (spec.order() == 0) throw Error("directed-pattern word must be non-empty");
  if (spec.order() > max_order) {
    throw Error("pattern order " + std::to_string(spec.order()) + " exceeds maximum " +
                std::to_string(max_order));
  }
  const std::size_t n = g.num_nodes();
  auto factor = [&g](Token t) -> const Csr& { return t == Token::Fwd ? g.out_adj() : g.in_adj(); };

  Csr current = factor(spec.word().front());
  std::vector<std::size_t> stamp(n, 0);
  std::vector<NodeId> row;
  for (std::size_t step = 1; step < spec.order(); ++step) {
    const Csr& rhs = factor(spec.word()[step]);
    Csr next;
    next.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      row.clear();
      const std::size_t mark = (step - 1) * n + i + 1;  // unique per (step, row)
      for (NodeId mid : current.row(i)) {
        for (NodeId j : rhs.row(mid)) {
          if (stamp[j] != mark) {
            stamp[j] = mark;
            row.push_back(j);
          }
        }
      }
      std::sort(row.begin(), row.end());
      next.indices.insert(next.indices.end(), row.begin(), row.end());
      next.offsets[i + 1] = next.indices.size();
    }
    current = std::move(next);
  }
  return SparseMatrix::from_structure(n, current);
}

/// Copy of a square pattern with every diagonal entry set to 1.
inline SparseMatrix with_self_loops(const SparseMatrix& pattern) {
  if (pattern.rows() != pattern.cols()) throw Error("self-loops require a square matrix");
  const std::size_t n = pattern.rows();
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<NodeId> indices;
  std::vector<double> values;
  indices.reserve(pattern.nnz() + n);
  values.reserve(pattern.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = pattern.row_indices(i);
    const auto val = pattern.row_values(i);
    bool placed = false;
    for (std::size_t p = 0; p < idx.size(); ++p) {
      if (!placed && idx[p] >= i) {
        indices.push_back(static_cast<NodeId>(i));
        values.push_back(1.0);
        placed = true;
        if (idx[p] == i) continue;
      }
      indices.push_back(idx[p]);
      values.push_back(val[p]);
    }
    if (!placed) {
      indices.push_back(static_cast<NodeId>(i));
      values.push_back(1.0);
    }
    offsets[i + 1] = indices.size();
  }
  return {n, n, std::move(offsets), std::move(indices), std::move(values)};
}

/// D_row^{r-1} · M · D_col^{-r}, with D_row / D_col the row / column sums of M.
/// r = 1/2 gives the symmetric form; r = 0 makes every row sum to one.
inline SparseMatrix normalize(const SparseMatrix& pattern, double r_coeff) {
  if (pattern.rows() != pattern.cols()) throw Error("normalization requires a square matrix");
  if (!(r_coeff >= 0.0 && r_coeff <= 1.0)) throw Error("convolution coefficient r must be in [0, 1]");
  const std::size_t n = pattern.rows();
  std::vector<double> row_sum(n, 0.0);
  std::vector<double> col_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = pattern.row_indices(i);
    const auto val = pattern.row_values(i);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      row_sum[i] += val[p];
      col_sum[idx[p]] += val[p];
    }
  }
  std::vector<double> row_scale(n);
  std::vector<double> col_scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (row_sum[i] <= 0.0 || col_sum[i] <= 0.0) {
      throw Error("zero degree in normalization at node " + std::to_string(i) +
                  " (add self-loops first)");
    }
    row_scale[i] = std::pow(row_sum[i], r_coeff - 1.0);
    col_scale[i] = std::pow(col_sum[i], -r_coeff);
  }
  std::vector<double> values(pattern.values());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = pattern.offsets()[i]; p < pattern.offsets()[i + 1]; ++p) {
      values[p] = row_scale[i] * values[p] * col_scale[pattern.indices()[p]];
    }
  }
  return {n, n, pattern.offsets(), pattern.indices(), std::move(values)};
}

/// Sparse-dense product. Each output row accumulates in stored column order,
/// so results are bit-reproducible.
inline Matrix spmm(const SparseMatrix& m, const Matrix& x) {
  if (m.cols() != static_cast<std::size_t>(x.rows())) {
    throw Error("spmm shape mismatch: " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                " times " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(m.rows()), x.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto dst = out.row(static_cast<Eigen::Index>(i));
    const auto idx = m.row_indices(i);
    const auto val = m.row_values(i);
    for (std::size_t p = 0; p < idx.size(); ++p) dst.noalias() += val[p] * x.row(idx[p]);
  }
  return out;
}

/// A directed-pattern operator: binary pattern plus its normalized,
/// self-looped propagation matrix.
struct DPOperator {
  DPSpec spec;
  SparseMatrix pattern;
  SparseMatrix propagation;
  double r_coeff = 0.5;
};

inline DPOperator make_operator(const DiGraph& g, const DPSpec& spec, double r_coeff,
                                std::size_t max_order = kDefaultMaxOrder) {
  DPOperator op;
  op.spec = spec;
  op.pattern = compose_pattern(g, spec, max_order);
  op.propagation = normalize(with_self_loops(op.pattern), r_coeff);
  op.r_coeff = r_coeff;
  return op;
}

}  // namespace adpa
