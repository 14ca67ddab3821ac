#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adpa/amud.hpp"
#include "adpa/graph.hpp"
#include "adpa/labels.hpp"

namespace adpa {

/// Every word of length 1..max_hop, materialized and normalized with r.
inline std::vector<DPOperator> enumerate_operators(const DiGraph& g, std::size_t max_hop, double r_coeff) {
  std::vector<DPOperator> ops;
  for (const DPSpec& spec : enumerate_specs(max_hop)) ops.push_back(make_operator(g, spec, r_coeff));
  return ops;
}

/// Ranks candidates by signed pattern–label correlation, highest first, and
/// keeps the first top_m. Ties keep enumeration order.
inline std::vector<DPOperator> select_operators(const std::vector<DPOperator>& candidates,
                                                const LabelVector& labels, std::size_t top_m) {
  if (top_m < 1) throw Error("top_m must be at least 1");
  if (labels.num_known() == 0) throw Error("operator selection requires labeled nodes");
  std::vector<double> score;
  score.reserve(candidates.size());
  for (const auto& op : candidates) score.push_back(pattern_label_correlation(op.pattern, labels).r);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(std::min(top_m, order.size()));
  std::vector<DPOperator> chosen;
  for (std::size_t i : order) chosen.push_back(candidates[i]);
  return chosen;
}

struct PropagationPlan {
  std::vector<DPOperator> operators;
  std::size_t steps = 1;  // K
  double r_coeff = 0.5;
  bool include_residual = true;
  std::uint64_t graph_fingerprint = 0;
};

/// Enumerates operators of g up to max_hop and wraps them in a plan.
inline PropagationPlan make_plan(const DiGraph& g, std::size_t max_hop, std::size_t steps, double r_coeff) {
  return {enumerate_operators(g, max_hop, r_coeff), steps, r_coeff, true, g.fingerprint()};
}

/// The K x (k+1) grid of feature blocks. Slot 0 of every step is the
/// unpropagated input; slot g at step l is G̃_g^l X.
class PropagatedFeatures {
 public:
  PropagatedFeatures() = default;
  PropagatedFeatures(Matrix residual, std::vector<std::string> words, std::size_t steps, double r_coeff)
      : residual_(std::move(residual)), words_(std::move(words)), steps_(steps), r_coeff_(r_coeff) {
    blocks_.resize(steps_ * words_.size());
  }

  std::size_t num_nodes() const { return static_cast<std::size_t>(residual_.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(residual_.cols()); }
  std::size_t steps() const { return steps_; }
  std::size_t num_operators() const { return words_.size(); }
  std::size_t slots() const { return words_.size() + 1; }
  double r_coeff() const { return r_coeff_; }
  const std::vector<std::string>& operator_words() const { return words_; }

  /// Block at step l in [1, K] and slot g in [0, k].
  const Matrix& block(std::size_t step, std::size_t slot) const {
    if (step < 1 || step > steps_ || slot > words_.size()) throw Error("block index out of range");
    if (slot == 0) return residual_;
    return blocks_[(step - 1) * words_.size() + (slot - 1)];
  }
  Matrix& mutable_block(std::size_t step, std::size_t slot) {
    return const_cast<Matrix&>(std::as_const(*this).block(step, slot));
  }

  const Matrix& residual() const { return residual_; }

  std::uint64_t graph_fingerprint = 0;
  std::uint64_t feature_fingerprint = 0;

  friend bool operator==(const PropagatedFeatures& a, const PropagatedFeatures& b) {
    if (a.words_ != b.words_ || a.steps_ != b.steps_ || a.r_coeff_ != b.r_coeff_ ||
        a.residual_.rows() != b.residual_.rows() || a.residual_.cols() != b.residual_.cols() ||
        a.residual_ != b.residual_) {
      return false;
    }
    for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
      if (a.blocks_[i] != b.blocks_[i]) return false;
    }
    return a.graph_fingerprint == b.graph_fingerprint && a.feature_fingerprint == b.feature_fingerprint;
  }

 private:
  Matrix residual_;
  std::vector<Matrix> blocks_;
  std::vector<std::string> words_;
  std::size_t steps_ = 0;
  double r_coeff_ = 0.5;
};

/// Parameter-free K-step propagation; each operator's chain is independent.
inline PropagatedFeatures propagate(const PropagationPlan& plan, const Matrix& x) {
  if (plan.steps < 1) throw Error("propagation needs at least one step");
  if (!x.allFinite()) throw Error("feature matrix contains non-finite entries");
  std::vector<std::string> words;
  for (const auto& op : plan.operators) {
    if (op.propagation.rows() != static_cast<std::size_t>(x.rows()) ||
        op.propagation.cols() != static_cast<std::size_t>(x.rows())) {
      throw Error("operator " + op.spec.to_string() + " is " + std::to_string(op.propagation.rows()) +
                  "x" + std::to_string(op.propagation.cols()) + " but features have " +
                  std::to_string(x.rows()) + " rows");
    }
    words.push_back(op.spec.to_string());
  }
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      if (words[i] == words[j]) throw Error("duplicate operator " + words[i] + " in plan");
    }
  }
  PropagatedFeatures pf(plan.include_residual ? x : Matrix(Matrix::Zero(x.rows(), x.cols())), words, plan.steps,
                        plan.r_coeff);
  pf.feature_fingerprint = fingerprint(x);
  pf.graph_fingerprint = plan.graph_fingerprint;
  for (std::size_t g = 0; g < plan.operators.size(); ++g) {
    const SparseMatrix& op = plan.operators[g].propagation;
    for (std::size_t l = 1; l <= plan.steps; ++l) {
      pf.mutable_block(l, g + 1) = spmm(op, l == 1 ? x : pf.block(l - 1, g + 1));
    }
  }
  return pf;
}

inline constexpr char kCacheMagic[4] = {'A', 'D', 'P', 'F'};
inline constexpr std::uint32_t kCacheVersion = 1;

inline void cache_save(const PropagatedFeatures& pf, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  detail::ByteWriter w;
  w.put_bytes({kCacheMagic, 4});
  w.put(kCacheVersion);
  w.put(static_cast<std::uint64_t>(pf.num_nodes()));
  w.put(static_cast<std::uint64_t>(pf.feature_dim()));
  w.put(static_cast<std::uint32_t>(pf.steps()));
  w.put(static_cast<std::uint32_t>(pf.num_operators()));
  w.put(pf.r_coeff());
  w.put(pf.graph_fingerprint);
  w.put(pf.feature_fingerprint);
  for (const auto& word : pf.operator_words()) w.put_string(word);
  for (std::size_t l = 1; l <= pf.steps(); ++l) {
    for (std::size_t g = 0; g < pf.slots(); ++g) w.put_matrix_data(pf.block(l, g));
  }
  w.seal();

  // Write-then-rename: readers never observe a partial file.
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open cache file for writing: " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw Error("failed writing cache file: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Loads a cache; when fingerprints are given they must match the file.
inline PropagatedFeatures cache_load(const std::filesystem::path& path,
                                     std::optional<std::uint64_t> expected_graph = std::nullopt,
                                     std::optional<std::uint64_t> expected_features = std::nullopt) {
  const auto bytes = detail::read_file(path);
  const auto payload = detail::verify_sealed(bytes, "propagation cache");
  detail::ByteReader r(payload);
  if (r.get_bytes(4) != std::string(kCacheMagic, 4)) throw Error("propagation cache: bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kCacheVersion) {
    throw Error("propagation cache: unsupported version " + std::to_string(v));
  }
  const auto n = r.get<std::uint64_t>();
  const auto f = r.get<std::uint64_t>();
  const auto steps = r.get<std::uint32_t>();
  const auto k = r.get<std::uint32_t>();
  const auto r_coeff = r.get<double>();
  const auto graph_fp = r.get<std::uint64_t>();
  const auto feature_fp = r.get<std::uint64_t>();
  if (expected_graph && *expected_graph != graph_fp) {
    throw Error("propagation cache: graph fingerprint mismatch");
  }
  if (expected_features && *expected_features != feature_fp) {
    throw Error("propagation cache: feature fingerprint mismatch");
  }
  std::vector<std::string> words;
  for (std::uint32_t i = 0; i < k; ++i) words.push_back(r.get_string());
  if (r.remaining() != static_cast<std::size_t>(steps) * (k + 1) * n * f * sizeof(double)) {
    throw Error("propagation cache: payload size does not match header");
  }
  Matrix block(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  r.get_matrix_data(block);
  PropagatedFeatures pf(block, std::move(words), steps, r_coeff);
  pf.graph_fingerprint = graph_fp;
  pf.feature_fingerprint = feature_fp;
  for (std::size_t l = 1; l <= steps; ++l) {
    for (std::size_t g = 0; g <= k; ++g) {
      if (l == 1 && g == 0) continue;
      r.get_matrix_data(block);
      if (g == 0) {
        if (block != pf.residual()) throw Error("propagation cache: residual blocks differ across steps");
        continue;
      }
      pf.mutable_block(l, g) = block;
    }
  }
  return pf;
}

}  // namespace adpa
