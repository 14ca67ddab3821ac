// Small random model instances shared by the model and training tests.
#pragma once

#include <random>

#include "oracles.hpp"

namespace adpa::testing {

struct Instance {
  PropagatedFeatures pf;
  LabelVector labels;
  SplitMask mask;
  AdpaConfig config;
};

inline Instance make_instance(std::uint64_t seed, DpVariant variant, std::size_t n = 12, std::size_t f = 5,
                              std::size_t steps = 2, std::size_t hidden = 4, std::size_t classes = 3) {
  std::mt19937_64 rng(seed);
  Instance in;
  const DiGraph g = oracle::random_graph(n, 0.25, rng);
  in.pf = propagate(make_plan(g, 2, steps, 0.5),
                    oracle::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f), rng));
  in.labels = oracle::random_labels(n, static_cast<int>(classes), rng);
  for (NodeId v = 0; v < n; ++v) {
    (v % 3 == 0 ? in.mask.val : v % 3 == 1 ? in.mask.test : in.mask.train).push_back(v);
  }
  in.mask.train.push_back(0);  // guarantees train is never smaller than val
  in.mask.val.erase(in.mask.val.begin());
  std::sort(in.mask.train.begin(), in.mask.train.end());
  in.config.num_nodes = n;
  in.config.num_operators = in.pf.num_operators();
  in.config.steps = steps;
  in.config.in_features = f;
  in.config.hidden = hidden;
  in.config.classes = classes;
  in.config.dp_variant = variant;
  in.config.seed = seed;
  return in;
}

/// Randomizes every parameter so that no unit sits at an initialization
/// symmetry (w_dp = 1, zero biases).
inline void perturb(AdpaParameters& p, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  for (Matrix* m : p.tensors()) *m += oracle::random_matrix(m->rows(), m->cols(), rng, scale);
}

inline constexpr DpVariant kAllVariants[] = {DpVariant::Original, DpVariant::Gate, DpVariant::Recursive,
                                             DpVariant::JK};

}  // namespace adpa::testing
