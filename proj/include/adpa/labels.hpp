#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adpa/common.hpp"

namespace adpa {

/// Per-node class ids with an observed/unobserved mask.
class LabelVector {
 public:
  LabelVector() = default;

  /// All labels known.
  LabelVector(std::vector<int> y, int num_classes)
      : LabelVector(std::move(y), num_classes, std::vector<std::uint8_t>()) {}

  LabelVector(std::vector<int> y, int num_classes, std::vector<std::uint8_t> known)
      : y_(std::move(y)), classes_(num_classes), known_(std::move(known)) {
    if (known_.empty()) known_.assign(y_.size(), 1);
    if (known_.size() != y_.size()) throw Error("label mask size differs from label count");
    if (classes_ < 1) throw Error("class count must be positive");
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (!known_[i]) continue;
      if (y_[i] < 0 || y_[i] >= classes_) {
        throw Error("label " + std::to_string(y_[i]) + " of node " + std::to_string(i) +
                    " outside [0, " + std::to_string(classes_) + ")");
      }
    }
  }

  std::size_t size() const { return y_.size(); }
  int num_classes() const { return classes_; }
  int operator[](std::size_t i) const { return y_[i]; }
  bool known(std::size_t i) const { return known_[i] != 0; }
  const std::vector<int>& values() const { return y_; }
  const std::vector<std::uint8_t>& known_mask() const { return known_; }

  std::size_t num_known() const {
    std::size_t c = 0;
    for (auto k : known_) c += k != 0;
    return c;
  }

  /// Same labels, observed only on `nodes`.
  LabelVector restricted_to(std::span<const NodeId> nodes) const {
    std::vector<std::uint8_t> mask(y_.size(), 0);
    for (NodeId v : nodes) {
      if (v >= y_.size()) throw Error("node index out of range in label restriction");
      mask[v] = known_[v];
    }
    return {y_, classes_, std::move(mask)};
  }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<int> y_;
  int classes_ = 0;
  std::vector<std::uint8_t> known_;
};

}  // namespace adpa
