#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "adpa/common.hpp"
#include "adpa/propagation.hpp"
#include "adpa/tape.hpp"

namespace adpa {

/// How the k+1 slot blocks of one propagation step are weighted before fusion.
enum class DpVariant { Original, Gate, Recursive, JK };

enum class Activation { Relu, Identity };

inline const char* to_string(DpVariant v) {
  switch (v) {
    case DpVariant::Original: return "original";
    case DpVariant::Gate: return "gate";
    case DpVariant::Recursive: return "recursive";
    case DpVariant::JK: return "jk";
  }
  return "?";
}

inline DpVariant parse_dp_variant(const std::string& s) {
  if (s == "original") return DpVariant::Original;
  if (s == "gate") return DpVariant::Gate;
  if (s == "recursive") return DpVariant::Recursive;
  if (s == "jk") return DpVariant::JK;
  throw Error("unknown DP-attention variant \"" + s + "\"");
}

inline const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "identity"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw Error("unknown activation \"" + s + "\"");
}

struct AdpaConfig {
  std::size_t num_nodes = 0;       // n; DP weights are per node
  std::size_t num_operators = 6;   // k
  std::size_t steps = 3;           // K
  std::size_t in_features = 0;     // f
  std::size_t hidden = 64;
  std::size_t classes = 2;
  DpVariant dp_variant = DpVariant::Original;
  std::size_t mlp_layers = 1;      // affine layers per MLP, 1..5
  Activation hop_activation = Activation::Relu;
  std::uint64_t seed = 0;
  bool per_step_fusion = false;    // one fusion MLP per step instead of shared
  bool freeze_dp_weights = false;  // ablation: Original variant with w_dp fixed at 1
  double dropout = 0.0;
  double weight_decay = 0.0;

  std::size_t slots() const { return num_operators + 1; }

  void validate() const {
    if (num_nodes < 1) throw Error("config: num_nodes must be positive");
    if (steps < 1) throw Error("config: steps (K) must be at least 1");
    if (in_features < 1) throw Error("config: in_features must be positive");
    if (hidden < 1) throw Error("config: hidden must be at least 1");
    if (classes < 1) throw Error("config: classes must be at least 1");
    if (mlp_layers < 1 || mlp_layers > 5) throw Error("config: mlp_layers must be in [1, 5]");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("config: dropout must be in [0, 1)");
    if (weight_decay < 0.0) throw Error("config: weight_decay must be non-negative");
  }
};

struct Affine {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

using Mlp = std::vector<Affine>;

/// Every trainable tensor. Variant-specific tensors are empty when unused.
struct AdpaParameters {
  Matrix w_dp;            // n x (k+1), Original
  Matrix gate_weight;     // f x (k+1), Gate: column g scores slot g
  Matrix gate_bias;       // 1 x (k+1)
  Affine jk_scorer;       // (k+1)f -> (k+1), JK
  Matrix rec_weight;      // f x 2, Recursive: columns score running fusion / incoming slot
  Matrix rec_bias;        // 1 x 2
  std::vector<Mlp> fusion;  // (k+1)f -> hidden; one shared, or K
  Mlp hop_scorer;           // K*hidden -> K
  Mlp classifier;           // hidden -> C

  /// Non-empty tensors in declaration order with stable names.
  std::vector<std::pair<std::string, Matrix*>> named_tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    auto add = [&out](std::string name, Matrix& m) {
      if (m.size() > 0) out.emplace_back(std::move(name), &m);
    };
    auto add_mlp = [&add](const std::string& prefix, Mlp& mlp) {
      for (std::size_t i = 0; i < mlp.size(); ++i) {
        add(prefix + "." + std::to_string(i) + ".weight", mlp[i].weight);
        add(prefix + "." + std::to_string(i) + ".bias", mlp[i].bias);
      }
    };
    add("w_dp", w_dp);
    add("gate_weight", gate_weight);
    add("gate_bias", gate_bias);
    add("jk_scorer.weight", jk_scorer.weight);
    add("jk_scorer.bias", jk_scorer.bias);
    add("rec_weight", rec_weight);
    add("rec_bias", rec_bias);
    for (std::size_t s = 0; s < fusion.size(); ++s) add_mlp("fusion" + std::to_string(s), fusion[s]);
    add_mlp("hop_scorer", hop_scorer);
    add_mlp("classifier", classifier);
    return out;
  }

  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for (auto& [name, m] : named_tensors()) out.push_back(m);
    return out;
  }

  std::vector<const Matrix*> tensors() const {
    std::vector<const Matrix*> out;
    for (Matrix* m : const_cast<AdpaParameters*>(this)->tensors()) out.push_back(m);
    return out;
  }
};

namespace detail {

inline Mlp init_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::size_t layers,
                    std::mt19937_64& rng) {
  Mlp mlp;
  std::size_t fan_in = in;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t fan_out = i + 1 == layers ? out : hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Affine layer;
    layer.weight.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index j = 0; j < layer.weight.size(); ++j) layer.weight.data()[j] = dist(rng);
    layer.bias = Matrix::Zero(1, static_cast<Eigen::Index>(fan_out));
    mlp.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return mlp;
}

inline Matrix init_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = dist(rng);
  return m;
}

}  // namespace detail

/// Seed-determined initialization: w_dp = 1, affine weights uniform in
/// ±1/sqrt(fan_in), biases zero.
inline AdpaParameters init_parameters(const AdpaConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t slots = config.slots();
  const std::size_t f = config.in_features;
  AdpaParameters p;
  switch (config.dp_variant) {
    case DpVariant::Original:
      p.w_dp = Matrix::Ones(static_cast<Eigen::Index>(config.num_nodes), static_cast<Eigen::Index>(slots));
      break;
    case DpVariant::Gate:
      p.gate_weight = detail::init_uniform(f, slots, f, rng);
      p.gate_bias = Matrix::Zero(1, static_cast<Eigen::Index>(slots));
      break;
    case DpVariant::JK:
      p.jk_scorer = detail::init_mlp(slots * f, slots, slots, 1, rng).front();
      break;
    case DpVariant::Recursive:
      p.rec_weight = detail::init_uniform(f, 2, f, rng);
      p.rec_bias = Matrix::Zero(1, 2);
      break;
  }
  const std::size_t fusion_count = config.per_step_fusion ? config.steps : 1;
  for (std::size_t s = 0; s < fusion_count; ++s) {
    p.fusion.push_back(detail::init_mlp(slots * f, config.hidden, config.hidden, config.mlp_layers, rng));
  }
  p.hop_scorer = detail::init_mlp(config.steps * config.hidden, config.hidden, config.steps, config.mlp_layers, rng);
  p.classifier = detail::init_mlp(config.hidden, config.hidden, config.classes, config.mlp_layers, rng);
  return p;
}

/// Tape of one forward pass plus handles to the named intermediates.
struct ForwardTrace {
  Tape tape;
  std::vector<Var> parameters;  // aligned with AdpaParameters::tensors()
  std::vector<Var> step_inputs;  // per step: scaled, concatenated slots
  std::vector<Var> fused;        // X̄ per step
  Var hop_logits;                // E
  Var hop_weights;               // W_hop
  Var combined;                  // X*
  Var logits;

  const Matrix& logits_value() const { return tape.value(logits); }
  const Matrix& hop_weights_value() const { return tape.value(hop_weights); }
};

namespace detail {

class ForwardBuilder {
 public:
  ForwardBuilder(const AdpaParameters& params, const AdpaConfig& config, const PropagatedFeatures& pf,
                 std::mt19937_64* dropout_rng, ForwardTrace& trace)
      : params_(params), config_(config), pf_(pf), rng_(dropout_rng), trace_(trace), t_(trace.tape) {}

  void run() {
    check_shapes();
    bind_parameters();
    for (std::size_t l = 1; l <= config_.steps; ++l) {
      std::vector<Var> slots;
      for (std::size_t g = 0; g < config_.slots(); ++g) slots.push_back(t_.constant_ref(pf_.block(l, g)));
      const Var input = t_.hcat(scale_slots(slots));
      trace_.step_inputs.push_back(input);
      const std::size_t which = config_.per_step_fusion ? l - 1 : 0;
      trace_.fused.push_back(mlp(fusion_[which], input, "fusion"));
    }
    trace_.hop_logits = mlp(hop_, t_.hcat(trace_.fused), "hop_scorer");
    Var activated = config_.hop_activation == Activation::Relu ? t_.relu(trace_.hop_logits) : trace_.hop_logits;
    trace_.hop_weights = t_.softmax_rows(activated);
    Var combined = t_.scale_rows(trace_.fused[0], t_.column(trace_.hop_weights, 0));
    for (std::size_t l = 1; l < config_.steps; ++l) {
      combined = t_.add(combined, t_.scale_rows(trace_.fused[l], t_.column(trace_.hop_weights, static_cast<Eigen::Index>(l))));
    }
    trace_.combined = combined;
    trace_.logits = mlp(classifier_, dropout(combined), "classifier");
  }

 private:
  struct AffineVars {
    Var weight;
    Var bias;
  };

  void check_shapes() const {
    config_.validate();
    if (pf_.num_nodes() != config_.num_nodes || pf_.feature_dim() != config_.in_features ||
        pf_.num_operators() != config_.num_operators || pf_.steps() != config_.steps) {
      throw Error("propagated features (n=" + std::to_string(pf_.num_nodes()) + ", f=" +
                  std::to_string(pf_.feature_dim()) + ", k=" + std::to_string(pf_.num_operators()) +
                  ", K=" + std::to_string(pf_.steps()) + ") do not match model config (n=" +
                  std::to_string(config_.num_nodes) + ", f=" + std::to_string(config_.in_features) +
                  ", k=" + std::to_string(config_.num_operators) + ", K=" + std::to_string(config_.steps) + ")");
    }
  }

  Var bind(const Matrix& m, bool trainable = true) {
    const Var v = trainable ? t_.leaf(m) : t_.constant_ref(m);
    trace_.parameters.push_back(v);
    return v;
  }

  std::vector<AffineVars> bind_mlp(const Mlp& mlp) {
    std::vector<AffineVars> out;
    for (const Affine& a : mlp) {
      const Var w = bind(a.weight);
      const Var b = bind(a.bias);
      out.push_back({w, b});
    }
    return out;
  }

  // Binding order must match AdpaParameters::named_tensors().
  void bind_parameters() {
    if (params_.w_dp.size() > 0) w_dp_ = bind(params_.w_dp, !config_.freeze_dp_weights);
    if (params_.gate_weight.size() > 0) gate_weight_ = bind(params_.gate_weight);
    if (params_.gate_bias.size() > 0) gate_bias_ = bind(params_.gate_bias);
    if (params_.jk_scorer.weight.size() > 0) jk_weight_ = bind(params_.jk_scorer.weight);
    if (params_.jk_scorer.bias.size() > 0) jk_bias_ = bind(params_.jk_scorer.bias);
    if (params_.rec_weight.size() > 0) rec_weight_ = bind(params_.rec_weight);
    if (params_.rec_bias.size() > 0) rec_bias_ = bind(params_.rec_bias);
    const std::size_t fusion_count = config_.per_step_fusion ? config_.steps : 1;
    if (params_.fusion.size() != fusion_count) throw Error("parameter set has the wrong number of fusion MLPs");
    for (const Mlp& m : params_.fusion) fusion_.push_back(bind_mlp(m));
    hop_ = bind_mlp(params_.hop_scorer);
    classifier_ = bind_mlp(params_.classifier);
  }

  std::vector<Var> scale_slots(const std::vector<Var>& slots) {
    const auto k1 = static_cast<Eigen::Index>(slots.size());
    std::vector<Var> scaled;
    switch (config_.dp_variant) {
      case DpVariant::Original: {
        require(w_dp_, "w_dp");
        for (Eigen::Index g = 0; g < k1; ++g) scaled.push_back(t_.scale_rows(slots[g], t_.column(*w_dp_, g)));
        break;
      }
      case DpVariant::Gate: {
        require(gate_weight_, "gate_weight");
        std::vector<Var> logits;
        for (Eigen::Index g = 0; g < k1; ++g) logits.push_back(t_.matmul(slots[g], t_.column(*gate_weight_, g)));
        const Var gates = t_.sigmoid(t_.add_bias(t_.hcat(logits), *gate_bias_));
        for (Eigen::Index g = 0; g < k1; ++g) scaled.push_back(t_.scale_rows(slots[g], t_.column(gates, g)));
        break;
      }
      case DpVariant::JK: {
        require(jk_weight_, "jk_scorer");
        const Var scores = t_.add_bias(t_.matmul(t_.hcat(slots), *jk_weight_), *jk_bias_);
        const Var weights = t_.softmax_rows(scores);
        for (Eigen::Index g = 0; g < k1; ++g) scaled.push_back(t_.scale_rows(slots[g], t_.column(weights, g)));
        break;
      }
      case DpVariant::Recursive: {
        require(rec_weight_, "rec_weight");
        // Fold slots left to right; coeff[g] tracks slot g's share of the
        // running convex combination.
        const Var w_running = t_.column(*rec_weight_, 0);
        const Var w_incoming = t_.column(*rec_weight_, 1);
        Var running = slots[0];
        std::vector<Var> coeff{t_.constant(Matrix::Ones(t_.value(slots[0]).rows(), 1))};
        for (std::size_t g = 1; g < slots.size(); ++g) {
          const std::vector<Var> parts{t_.matmul(running, w_running), t_.matmul(slots[g], w_incoming)};
          const Var beta = t_.softmax_rows(t_.add_bias(t_.hcat(parts), *rec_bias_));
          const Var keep = t_.column(beta, 0);
          const Var take = t_.column(beta, 1);
          for (Var& c : coeff) c = t_.hadamard(c, keep);
          coeff.push_back(take);
          running = t_.add(t_.scale_rows(running, keep), t_.scale_rows(slots[g], take));
        }
        for (std::size_t g = 0; g < slots.size(); ++g) scaled.push_back(t_.scale_rows(slots[g], coeff[g]));
        break;
      }
    }
    return scaled;
  }

  Var dropout(Var x) {
    if (rng_ == nullptr || config_.dropout <= 0.0) return x;
    const Matrix& v = t_.value(x);
    std::bernoulli_distribution keep(1.0 - config_.dropout);
    Matrix mask(v.rows(), v.cols());
    const double scale = 1.0 / (1.0 - config_.dropout);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng_) ? scale : 0.0;
    return t_.hadamard(x, t_.constant(std::move(mask)));
  }

  Var mlp(const std::vector<AffineVars>& layers, Var x, const char* name) {
    Var h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      h = t_.add_bias(t_.matmul(h, layers[i].weight), layers[i].bias);
      if (!t_.value(h).allFinite()) {
        throw Error(std::string("non-finite activation in ") + name + " layer " + std::to_string(i));
      }
      if (i + 1 < layers.size()) h = dropout(t_.relu(h));
    }
    return h;
  }

  static void require(const std::optional<Var>& v, const char* name) {
    if (!v) throw Error(std::string("parameter set lacks ") + name + " for the configured DP variant");
  }

  const AdpaParameters& params_;
  const AdpaConfig& config_;
  const PropagatedFeatures& pf_;
  std::mt19937_64* rng_;
  ForwardTrace& trace_;
  Tape& t_;

  std::optional<Var> w_dp_, gate_weight_, gate_bias_, jk_weight_, jk_bias_, rec_weight_, rec_bias_;
  std::vector<std::vector<AffineVars>> fusion_;
  std::vector<AffineVars> hop_;
  std::vector<AffineVars> classifier_;
};

}  // namespace detail

/// Full ADPA forward pass. `dropout_rng` enables dropout (training only).
inline ForwardTrace forward(const AdpaParameters& params, const AdpaConfig& config, const PropagatedFeatures& pf,
                            std::mt19937_64* dropout_rng = nullptr) {
  ForwardTrace trace;
  detail::ForwardBuilder(params, config, pf, dropout_rng, trace).run();
  return trace;
}

}  // namespace adpa
