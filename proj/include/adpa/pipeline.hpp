#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adpa/amud.hpp"
#include "adpa/io.hpp"
#include "adpa/propagation.hpp"
#include "adpa/training.hpp"

namespace adpa {

enum class AmudOverride { Auto, ForceDirected, ForceUndirected, Skip };
enum class LabelScope { All, Train };

inline AmudOverride parse_override(const std::string& s) {
  if (s == "auto") return AmudOverride::Auto;
  if (s == "force_directed") return AmudOverride::ForceDirected;
  if (s == "force_undirected") return AmudOverride::ForceUndirected;
  if (s == "skip") return AmudOverride::Skip;
  throw Error("unknown amud override \"" + s + "\"");
}

inline LabelScope parse_label_scope(const std::string& s) {
  if (s == "all") return LabelScope::All;
  if (s == "train") return LabelScope::Train;
  throw Error("unknown label scope \"" + s + "\" (expected all or train)");
}

struct RunConfig {
  fs::path dataset;
  fs::path output_dir;
  double theta = kDefaultTheta;
  LabelScope label_scope = LabelScope::All;
  AmudOverride amud_override = AmudOverride::Auto;
  std::size_t max_hop = 2;
  std::size_t top_m = 0;  // 0 keeps every enumerated operator
  std::size_t steps = 3;
  double r_coeff = 0.5;
  fs::path cache_path;
  AdpaConfig model;  // data-dependent fields are filled in by the pipeline
  TrainOptions train;
  std::vector<std::uint64_t> seeds{0};

  void validate() const {
    if (seeds.empty()) throw Error("config: seeds must be non-empty");
    if (!fs::is_directory(dataset)) throw Error("config: dataset directory not found: " + dataset.string());
    if (steps < 1) throw Error("config: propagation.steps must be at least 1");
  }
};

/// Parses a run configuration; relative paths resolve against `base`.
inline RunConfig run_config_from_json(const Json& j, const fs::path& base = {}) {
  auto resolve = [&base](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
  };
  RunConfig c;
  try {
    c.dataset = resolve(j.at("dataset").get<std::string>());
    c.output_dir = resolve(j.value("output_dir", std::string("out")));
    if (j.contains("amud")) {
      const auto& a = j["amud"];
      c.theta = a.value("theta", c.theta);
      c.label_scope = parse_label_scope(a.value("label_scope", std::string("all")));
      c.amud_override = parse_override(a.value("override", std::string("auto")));
    }
    if (j.contains("propagation")) {
      const auto& p = j["propagation"];
      c.max_hop = p.value("max_hop", c.max_hop);
      c.top_m = p.value("top_m", c.top_m);
      c.steps = p.value("steps", c.steps);
      c.r_coeff = p.value("r_coeff", c.r_coeff);
      c.cache_path = resolve(p.value("cache_path", std::string()));
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.dp_variant = parse_dp_variant(m.value("dp_variant", std::string("original")));
      c.model.mlp_layers = m.value("mlp_layers", c.model.mlp_layers);
      c.model.hop_activation = parse_activation(m.value("hop_activation", std::string("relu")));
      c.model.per_step_fusion = m.value("per_step_fusion", false);
      c.model.freeze_dp_weights = m.value("freeze_dp_weights", false);
      c.model.dropout = m.value("dropout", 0.0);
      c.model.weight_decay = m.value("weight_decay", 0.0);
    }
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      c.train.adam.learning_rate = o.value("learning_rate", c.train.adam.learning_rate);
      c.train.adam.beta1 = o.value("beta1", c.train.adam.beta1);
      c.train.adam.beta2 = o.value("beta2", c.train.adam.beta2);
      c.train.adam.epsilon = o.value("epsilon", c.train.adam.epsilon);
      c.train.max_epochs = o.value("max_epochs", c.train.max_epochs);
      c.train.patience = o.value("patience", c.train.patience);
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return c;
}

struct PipelineOptions {
  bool timestamp = true;  // include wall-clock fields in the summary
  bool verbose = false;
  std::ostream* log = &std::cerr;
};

/// Error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

namespace detail {

template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Reuses the cache only if it was built from the same graph, features and plan.
inline std::optional<PropagatedFeatures> try_load_cache(const fs::path& path, const PropagationPlan& plan,
                                                        const Matrix& x) {
  if (path.empty() || !fs::exists(path)) return std::nullopt;
  try {
    PropagatedFeatures pf = cache_load(path, plan.graph_fingerprint, fingerprint(x));
    std::vector<std::string> words;
    for (const auto& op : plan.operators) words.push_back(op.spec.to_string());
    if (pf.operator_words() != words || pf.steps() != plan.steps || pf.r_coeff() != plan.r_coeff) {
      return std::nullopt;
    }
    return pf;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Output of the data stages: the bundle, the graph actually modeled and its
/// propagated features.
struct PreparedData {
  DatasetBundle bundle;
  DiGraph graph;
  PropagatedFeatures features;
  Json amud_report;  // null when skipped
  std::string graph_mode;
  bool cached = false;
  double amud_seconds = 0.0;
  double propagation_seconds = 0.0;
};

/// Load, AMUD decision (or override) and cached propagation.
inline PreparedData prepare_features(const RunConfig& config, const PipelineOptions& options = {}) {
  auto log = [&options](const std::string& msg) {
    if (options.verbose && options.log) *options.log << msg << '\n';
  };
  detail::run_stage("config", [&] { config.validate(); return 0; });
  PreparedData out;
  out.bundle = detail::run_stage("load", [&] { return load_bundle(config.dataset); });
  const DatasetBundle& bundle = out.bundle;
  log("loaded " + bundle.name + ": n=" + std::to_string(bundle.graph.num_nodes()) +
      " m=" + std::to_string(bundle.graph.num_edges()));

  auto t0 = std::chrono::steady_clock::now();
  out.graph = bundle.graph;
  detail::run_stage("amud", [&] {
    if (config.amud_override == AmudOverride::Skip) {
      out.amud_report = nullptr;
      out.graph_mode = "as_given";
      return 0;
    }
    const LabelVector scoped =
        config.label_scope == LabelScope::Train ? bundle.labels.restricted_to(bundle.splits.train) : bundle.labels;
    const AmudReport report = amud_score(bundle.graph, scoped, config.theta);
    out.amud_report = to_json(report);
    bool undirected = report.decision == Decision::Undirected;
    if (config.amud_override == AmudOverride::ForceDirected) undirected = false;
    if (config.amud_override == AmudOverride::ForceUndirected) undirected = true;
    if (undirected) out.graph = symmetrize(bundle.graph);
    out.graph_mode = undirected ? "undirected" : "directed";
    log(std::string("AMUD score ") + std::to_string(report.score) + " -> " + to_string(report.decision));
    return 0;
  });
  out.amud_seconds = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  out.features = detail::run_stage("propagate", [&] {
    PropagationPlan plan = make_plan(out.graph, config.max_hop, config.steps, config.r_coeff);
    if (config.top_m > 0) {
      plan.operators = select_operators(plan.operators, bundle.labels.restricted_to(bundle.splits.train), config.top_m);
    }
    if (auto hit = detail::try_load_cache(config.cache_path, plan, bundle.features)) {
      out.cached = true;
      log("propagation cache hit: " + config.cache_path.string());
      return std::move(*hit);
    }
    PropagatedFeatures fresh = propagate(plan, bundle.features);
    if (!config.cache_path.empty()) cache_save(fresh, config.cache_path);
    return fresh;
  });
  out.propagation_seconds = detail::seconds_since(t0);
  return out;
}

/// Model configuration completed with the data-dependent sizes.
inline AdpaConfig complete_model_config(const RunConfig& config, const PreparedData& data, std::uint64_t seed) {
  AdpaConfig mc = config.model;
  mc.num_nodes = data.features.num_nodes();
  mc.num_operators = data.features.num_operators();
  mc.steps = data.features.steps();
  mc.in_features = data.features.feature_dim();
  mc.classes = static_cast<std::size_t>(data.bundle.labels.num_classes());
  mc.seed = seed;
  return mc;
}

/// AMUD decision, operator enumeration/selection, cached propagation and
/// training over every seed. Returns the summary JSON and writes checkpoints,
/// histories and summary.json into output_dir.
inline Json run_pipeline(const RunConfig& config, const PipelineOptions& options = {}) {
  auto log = [&options](const std::string& msg) {
    if (options.verbose && options.log) *options.log << msg << '\n';
  };
  const PreparedData data = prepare_features(config, options);
  const DatasetBundle& bundle = data.bundle;
  const PropagatedFeatures& pf = data.features;

  Json summary;
  summary["dataset"] = bundle.name;
  summary["amud_report"] = data.amud_report;
  summary["graph_mode"] = data.graph_mode;
  summary["operators"] = pf.operator_words();
  Json timing;
  timing["amud_seconds"] = data.amud_seconds;
  timing["propagation_seconds"] = data.propagation_seconds;
  timing["propagation_cached"] = data.cached;
  const bool cached = data.cached;

  // Training over seeds.
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> test_acc;
  std::vector<double> val_acc;
  detail::run_stage("train", [&] {
    fs::create_directories(config.output_dir);
    for (std::uint64_t seed : config.seeds) {
      const AdpaConfig mc = complete_model_config(config, data, seed);
      TrainResult result = train(mc, pf, bundle.labels, bundle.splits, config.train);
      const Matrix logits = forward(result.params, mc, pf).logits_value();
      test_acc.push_back(accuracy(logits, bundle.labels, bundle.splits.test));
      val_acc.push_back(accuracy(logits, bundle.labels, bundle.splits.val));
      const std::string tag = "seed" + std::to_string(seed);
      save_checkpoint(mc, result.params, config.output_dir / ("checkpoint_" + tag + ".adpw"));
      save_history_csv(result.history, config.output_dir / ("history_" + tag + ".csv"));
      log(tag + ": best epoch " + std::to_string(result.history.best_epoch) + ", test acc " +
          std::to_string(test_acc.back()));
    }
    return 0;
  });
  timing["training_seconds"] = detail::seconds_since(t0);

  double mean = 0.0;
  for (double a : test_acc) mean += a;
  mean /= static_cast<double>(test_acc.size());
  double var = 0.0;
  for (double a : test_acc) var += (a - mean) * (a - mean);
  const double stdev = std::sqrt(var / static_cast<double>(test_acc.size()));

  summary["seeds"] = config.seeds;
  summary["per_seed_test_acc"] = test_acc;
  summary["per_seed_val_acc"] = val_acc;
  summary["mean"] = mean;
  summary["std"] = stdev;
  if (options.timestamp) {
    summary["stage_timing"] = timing;
    summary["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));
  } else {
    summary["stage_timing"] = Json{{"propagation_cached", cached}};
  }
  detail::run_stage("write", [&] { save_json(summary, config.output_dir / "summary.json"); return 0; });
  return summary;
}

}  // namespace adpa
