#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "adpa/labels.hpp"
#include "adpa/model.hpp"

namespace adpa {

/// Disjoint train / validation / test node sets.
struct SplitMask {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  void validate(std::size_t n) const {
    if (train.empty()) throw Error("split: train set is empty");
    std::vector<std::uint8_t> seen(n, 0);
    auto mark = [&](const std::vector<NodeId>& set, const char* name) {
      for (NodeId v : set) {
        if (v >= n) throw Error(std::string("split: ") + name + " index " + std::to_string(v) + " out of range");
        if (seen[v]) throw Error(std::string("split: node ") + std::to_string(v) + " appears twice");
        seen[v] = 1;
      }
    };
    mark(train, "train");
    mark(val, "val");
    mark(test, "test");
  }

  friend bool operator==(const SplitMask&, const SplitMask&) = default;
};

/// One tensor per parameter tensor, same order and shapes.
using Gradients = std::vector<Matrix>;

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

namespace detail {

inline void check_train_labels(const LabelVector& labels, std::span<const NodeId> nodes) {
  for (NodeId v : nodes) {
    if (v >= labels.size() || !labels.known(v)) {
      throw Error("training node " + std::to_string(v) + " has no observed label");
    }
  }
}

}  // namespace detail

/// Mean cross-entropy over train nodes and its exact gradient w.r.t. every
/// parameter tensor (plus L2 weight decay when configured).
inline LossAndGrad loss_and_grad(const AdpaParameters& params, const AdpaConfig& config, const PropagatedFeatures& pf,
                                 const LabelVector& labels, const SplitMask& mask,
                                 std::mt19937_64* dropout_rng = nullptr) {
  if (mask.train.empty()) throw Error("loss requires a non-empty train set");
  detail::check_train_labels(labels, mask.train);
  ForwardTrace trace = forward(params, config, pf, dropout_rng);
  const Var loss = trace.tape.mean_cross_entropy(trace.logits, mask.train, labels.values());
  const double value = trace.tape.value(loss)(0, 0);
  if (!std::isfinite(value)) throw Error("non-finite training loss");
  trace.tape.backward(loss);
  LossAndGrad out;
  out.loss = value;
  const auto tensors = params.tensors();
  for (std::size_t i = 0; i < trace.parameters.size(); ++i) {
    Matrix g = trace.tape.grad(trace.parameters[i]);
    if (config.weight_decay > 0.0 && trace.tape.needs_grad(trace.parameters[i])) {
      g += config.weight_decay * *tensors[i];
    }
    out.grads.push_back(std::move(g));
  }
  return out;
}

/// Index of the largest entry; ties go to the lowest index.
inline int argmax_row(const Matrix& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(row, c) > m(row, best)) best = static_cast<int>(c);
  }
  return best;
}

inline double accuracy(const Matrix& logits, const LabelVector& labels, std::span<const NodeId> subset) {
  if (subset.empty()) return 0.0;
  std::size_t hit = 0;
  for (NodeId v : subset) hit += argmax_row(logits, v) == labels[v];
  return static_cast<double>(hit) / static_cast<double>(subset.size());
}

inline double evaluate(const AdpaParameters& params, const AdpaConfig& config, const PropagatedFeatures& pf,
                       const LabelVector& labels, std::span<const NodeId> subset) {
  if (subset.empty()) throw Error("evaluation subset is empty");
  return accuracy(forward(params, config, pf).logits_value(), labels, subset);
}

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer over a fixed list of tensors.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Matrix*>& params, const Gradients& grads) {
    if (params.size() != grads.size()) throw Error("optimizer: gradient count differs from parameter count");
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseProduct(grads[i]);
      params[i]->array() -= config_.learning_rate * (m_[i].array() / c1) /
                            ((v_[i].array() / c2).sqrt() + config_.epsilon);
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

struct TrainOptions {
  AdamConfig adam;
  std::size_t max_epochs = 1000;
  std::size_t patience = 100;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based epoch whose parameters were kept

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  AdpaParameters params;
  TrainHistory history;
};

/// Raised when the loss becomes non-finite; carries the history so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, TrainHistory history) : Error(what), history_(std::move(history)) {}
  const TrainHistory& history() const { return history_; }

 private:
  TrainHistory history_;
};

/// Full-batch training with early stopping on validation accuracy. Returns
/// the parameters of the best-validation epoch (earliest on ties). Without a
/// validation set, the last epoch is kept.
inline TrainResult train(const AdpaConfig& config, const PropagatedFeatures& pf, const LabelVector& labels,
                         const SplitMask& mask, const TrainOptions& options) {
  mask.validate(pf.num_nodes());
  detail::check_train_labels(labels, mask.train);
  AdpaParameters params = init_parameters(config);
  AdpaParameters best = params;
  Adam adam(options.adam);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainHistory history;
  double best_val = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    LossAndGrad lg;
    try {
      lg = loss_and_grad(params, config, pf, labels, mask, &dropout_rng);
    } catch (const Error& e) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": " + e.what(), history);
    }
    adam.step(params.tensors(), lg.grads);

    const Matrix logits = forward(params, config, pf).logits_value();
    if (!logits.allFinite()) {
      throw TrainingDiverged("non-finite logits after epoch " + std::to_string(epoch), history);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = lg.loss;
    rec.train_acc = accuracy(logits, labels, mask.train);
    rec.val_acc = accuracy(logits, labels, mask.val);
    rec.test_acc = accuracy(logits, labels, mask.test);
    history.epochs.push_back(rec);

    const double val = mask.val.empty() ? static_cast<double>(epoch) : rec.val_acc;
    if (val > best_val) {
      best_val = val;
      best = params;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  return {std::move(best), std::move(history)};
}

}  // namespace adpa
