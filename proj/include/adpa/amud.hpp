#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adpa/graph.hpp"
#include "adpa/labels.hpp"

namespace adpa {

/// Counts over unordered distinct labeled pairs {u, v}: first index is
/// pattern presence (either direction, diagonal ignored), second is label
/// agreement.
struct PairContingency {
  std::uint64_t n11 = 0;
  std::uint64_t n10 = 0;
  std::uint64_t n01 = 0;
  std::uint64_t n00 = 0;

  std::uint64_t total() const { return n11 + n10 + n01 + n00; }
};

struct PatternCorrelation {
  double r = 0.0;
  PairContingency table;
  bool degenerate = false;  // an indicator was constant; r reported as 0
};

enum class Decision { Directed, Undirected };

inline const char* to_string(Decision d) { return d == Decision::Directed ? "Directed" : "Undirected"; }

struct OperatorCorrelation {
  DPSpec spec;
  double r = 0.0;
  double r2 = 0.0;
  PairContingency table;
  bool degenerate = false;
};

struct AmudReport {
  std::vector<OperatorCorrelation> operators;  // AA, AᵀAᵀ, AAᵀ, AᵀA
  double alpha = 0.0;
  double score = 0.0;
  double theta = 0.5;
  Decision decision = Decision::Undirected;
  bool degenerate = false;  // every R² is zero; score defined as 0
};

inline constexpr double kDefaultTheta = 0.5;

/// Builds the contingency table by walking pattern entries and filling the
/// no-pattern cells from class-size combinatorics; never touches all n² pairs.
inline PairContingency pair_contingency(const SparseMatrix& pattern, const LabelVector& labels) {
  if (pattern.rows() != pattern.cols()) throw Error("pattern must be square");
  if (pattern.rows() != labels.size()) throw Error("pattern size differs from label count");
  const std::size_t n = pattern.rows();

  std::uint64_t pattern_pairs = 0;
  std::uint64_t pattern_same = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (!labels.known(u)) continue;
    for (NodeId v : pattern.row_indices(u)) {
      if (v == u || !labels.known(v)) continue;
      // {u, v} is counted from the smaller endpoint's row when present
      // there, otherwise from the larger endpoint's row.
      if (v < u && pattern.contains(v, u)) continue;
      ++pattern_pairs;
      pattern_same += labels[u] == labels[v];
    }
  }

  std::vector<std::uint64_t> class_size(static_cast<std::size_t>(labels.num_classes()), 0);
  std::uint64_t known = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels.known(i)) continue;
    ++class_size[static_cast<std::size_t>(labels[i])];
    ++known;
  }
  std::uint64_t same_pairs = 0;
  for (auto s : class_size) same_pairs += s * (s - (s > 0 ? 1 : 0)) / 2;
  const std::uint64_t all_pairs = known * (known - (known > 0 ? 1 : 0)) / 2;

  PairContingency t;
  t.n11 = pattern_same;
  t.n10 = pattern_pairs - pattern_same;
  t.n01 = same_pairs - pattern_same;
  t.n00 = all_pairs - pattern_pairs - t.n01;
  return t;
}

/// Phi coefficient of a 2x2 table (Pearson correlation of two binary
/// variables). Constant margins yield r = 0 flagged degenerate.
inline PatternCorrelation phi_coefficient(const PairContingency& t) {
  PatternCorrelation out;
  out.table = t;
  const auto row1 = static_cast<long double>(t.n11 + t.n10);
  const auto row0 = static_cast<long double>(t.n01 + t.n00);
  const auto col1 = static_cast<long double>(t.n11 + t.n01);
  const auto col0 = static_cast<long double>(t.n10 + t.n00);
  if (row1 == 0 || row0 == 0 || col1 == 0 || col0 == 0) {
    out.degenerate = true;
    return out;
  }
  const __int128 num = static_cast<__int128>(t.n11) * t.n00 - static_cast<__int128>(t.n10) * t.n01;
  const long double denom = std::sqrt(row1 * row0) * std::sqrt(col1 * col0);
  out.r = static_cast<double>(static_cast<long double>(num) / denom);
  return out;
}

/// Correlation between "pair is linked by the pattern" and "pair shares a
/// label" over unordered distinct labeled pairs.
inline PatternCorrelation pattern_label_correlation(const SparseMatrix& pattern,
                                                    const LabelVector& labels) {
  if (labels.num_known() < 2) throw Error("correlation requires at least two labeled nodes");
  return phi_coefficient(pair_contingency(pattern, labels));
}

/// The four second-order words scored by AMUD, in report order.
inline std::array<DPSpec, 4> amud_specs() {
  return {DPSpec::parse("FF"), DPSpec::parse("RR"), DPSpec::parse("FR"), DPSpec::parse("RF")};
}

/// S = α · sqrt(Σ_{i<j} |R²_i − R²_j|) / C(4,2) with α = 1 / max R².
inline double guidance_score(std::span<const double> r2, double* alpha_out = nullptr) {
  double max_r2 = 0.0;
  for (double v : r2) max_r2 = std::max(max_r2, v);
  if (alpha_out) *alpha_out = max_r2 > 0.0 ? 1.0 / max_r2 : 0.0;
  if (max_r2 <= 0.0) return 0.0;
  double gaps = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < r2.size(); ++i) {
    for (std::size_t j = i + 1; j < r2.size(); ++j) {
      gaps += std::abs(r2[i] - r2[j]);
      ++pairs;
    }
  }
  return (1.0 / max_r2) * std::sqrt(gaps) / static_cast<double>(pairs);
}

inline AmudReport amud_score(const DiGraph& g, const LabelVector& labels, double theta = kDefaultTheta) {
  if (labels.size() != g.num_nodes()) throw Error("label count differs from node count");
  if (labels.num_known() < 2) throw Error("AMUD requires at least two labeled nodes");
  AmudReport report;
  report.theta = theta;
  std::vector<double> r2;
  for (const DPSpec& spec : amud_specs()) {
    const auto corr = pattern_label_correlation(compose_pattern(g, spec), labels);
    report.operators.push_back({spec, corr.r, corr.r * corr.r, corr.table, corr.degenerate});
    r2.push_back(corr.r * corr.r);
  }
  report.score = guidance_score(r2, &report.alpha);
  report.degenerate = report.alpha == 0.0;
  report.decision = report.score > theta ? Decision::Directed : Decision::Undirected;
  return report;
}

/// Keeps g when AMUD says Directed; otherwise returns its symmetrization.
inline std::pair<DiGraph, AmudReport> decide_and_transform(const DiGraph& g, const LabelVector& labels,
                                                           double theta = kDefaultTheta) {
  AmudReport report = amud_score(g, labels, theta);
  if (report.decision == Decision::Directed) return {g, std::move(report)};
  return {symmetrize(g), std::move(report)};
}

}  // namespace adpa
