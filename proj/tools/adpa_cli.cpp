// Command-line front end: AMUD guidance, homophily metrics, data generation,
// sparsity protocols, propagation caching, training and evaluation.
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adpa/adpa.hpp"

namespace {

using namespace adpa;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool no_timestamp = false;
  bool verbose = false;

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
};

/// Dataset given either as a bundle directory or as separate files.
struct GraphInput {
  std::string dataset;
  std::string edges;
  std::string labels;
  std::string splits;

  void add_to(CLI::App* app) {
    app->add_option("--dataset", dataset, "Dataset directory (edges.txt, labels.csv, splits.json, features)");
    app->add_option("--edges", edges, "Edge list file");
    app->add_option("--labels", labels, "labels.csv file");
    app->add_option("--splits", splits, "splits.json file (for --label-scope train)");
  }

  struct Loaded {
    DiGraph graph;
    LabelVector labels;
    std::optional<SplitMask> splits;
  };

  Loaded load() const {
    if (!dataset.empty()) {
      DatasetBundle b = load_bundle(dataset);
      return {std::move(b.graph), std::move(b.labels), std::move(b.splits)};
    }
    if (edges.empty() || labels.empty()) throw Error("give --dataset or both --edges and --labels");
    Loaded out;
    out.labels = load_labels(labels);
    out.graph = load_edge_list(edges, out.labels.size());
    if (!splits.empty()) out.splits = load_splits(splits);
    return out;
  }
};

void emit(const Json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    save_json(j, path);
  }
}

RunConfig load_run_config(const Globals& g) {
  if (g.config.empty()) throw Error("--config is required");
  const fs::path path(g.config);
  RunConfig c = run_config_from_json(load_json(path), path.parent_path());
  if (g.seed) c.seeds = {*g.seed};
  return c;
}

PipelineOptions pipeline_options(const Globals& g) {
  PipelineOptions o;
  o.timestamp = !g.no_timestamp;
  o.verbose = g.verbose;
  return o;
}

std::vector<std::vector<double>> square_matrix(const std::vector<double>& flat, std::size_t c) {
  if (flat.size() != c * c) {
    throw Error("--p needs " + std::to_string(c * c) + " values (row-major C x C), got " + std::to_string(flat.size()));
  }
  std::vector<std::vector<double>> p(c, std::vector<double>(c));
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) p[i][j] = flat[i * c + j];
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directed-pattern graph learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "Seed (overrides the config's seed list)");
  app.add_flag("--no-timestamp", g.no_timestamp, "Omit wall-clock fields from summaries");
  app.add_flag("--verbose", g.verbose, "Log stage progress to stderr");

  // amud
  auto* amud = app.add_subcommand("amud", "AMUD guidance score and directed/undirected decision");
  GraphInput amud_in;
  amud_in.add_to(amud);
  double theta = kDefaultTheta;
  std::string scope = "all";
  std::string emit_transformed;
  std::string amud_out;
  amud->add_option("--theta", theta, "Decision threshold")->capture_default_str();
  amud->add_option("--label-scope", scope, "Labels used: all or train")->check(CLI::IsMember({"all", "train"}));
  amud->add_option("--emit-transformed", emit_transformed, "Write the modeled graph (edge list) here");
  amud->add_option("--out", amud_out, "Write the report here instead of stdout");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Homophily and label informativeness");
  GraphInput metrics_in;
  metrics_in.add_to(metrics);
  std::string mode = "directed";
  bool in_neighbors = false;
  std::string metrics_out;
  metrics->add_option("--mode", mode, "directed or symmetrized")->check(CLI::IsMember({"directed", "symmetrized"}));
  metrics->add_flag("--in-neighbors", in_neighbors, "Node homophily over in-neighbors");
  metrics->add_option("--out", metrics_out, "Write the report here instead of stdout");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a directed stochastic block model dataset");
  std::string gen_out;
  std::vector<std::size_t> sizes;
  std::vector<double> probs;
  DsbmSpec dsbm;
  bool binary_features = false;
  std::size_t train_pc = 0, val_pc = 0;
  double train_frac = 0.48, val_frac = 0.32;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--sizes", sizes, "Class sizes")->required()->delimiter(',');
  gen->add_option("--p", probs, "Row-major C x C edge probabilities")->required()->delimiter(',');
  gen->add_flag("--reciprocal", dsbm.reciprocal, "Sample unordered pairs and add both directions");
  gen->add_option("--feature-dim", dsbm.feature_dim, "Feature columns (0 = C)");
  gen->add_option("--signal", dsbm.feature_signal, "One-hot feature weight")->capture_default_str();
  gen->add_option("--noise", dsbm.feature_noise, "Uniform feature noise amplitude")->capture_default_str();
  gen->add_option("--train-per-class", train_pc, "Per-class train count (0 = fractional split)");
  gen->add_option("--val-per-class", val_pc, "Per-class validation count");
  gen->add_option("--train-frac", train_frac, "Train fraction")->capture_default_str();
  gen->add_option("--val-frac", val_frac, "Validation fraction")->capture_default_str();
  gen->add_flag("--binary-features", binary_features, "Write features.bin instead of features.csv");

  // sparsify
  auto* sparsify = app.add_subcommand("sparsify", "Edge removal, feature masking and label subsampling");
  std::string sp_in, sp_out;
  double edge_keep = 1.0, feature_missing = 0.0;
  std::size_t labels_pc = 0;
  sparsify->add_option("--dataset", sp_in, "Input dataset directory")->required();
  sparsify->add_option("--out", sp_out, "Output dataset directory")->required();
  sparsify->add_option("--edge-keep", edge_keep, "Fraction of edges kept")->capture_default_str();
  sparsify->add_option("--feature-missing", feature_missing, "Fraction of unlabeled-node feature entries zeroed")
      ->capture_default_str();
  sparsify->add_option("--labels-per-class", labels_pc, "Train labels kept per class (0 = all)");

  // split
  auto* split = app.add_subcommand("split", "Seeded train/val/test split");
  std::string split_labels, split_out;
  double s_train = 0.48, s_val = 0.32;
  std::size_t s_train_pc = 0, s_val_pc = 0;
  split->add_option("--labels", split_labels, "labels.csv file")->required();
  split->add_option("--out", split_out, "splits.json to write")->required();
  split->add_option("--train", s_train, "Train fraction")->capture_default_str();
  split->add_option("--val", s_val, "Validation fraction")->capture_default_str();
  split->add_option("--train-per-class", s_train_pc, "Per-class train count (overrides fractions)");
  split->add_option("--val-per-class", s_val_pc, "Per-class validation count");

  // propagate
  auto* prop = app.add_subcommand("propagate", "Precompute and cache propagated features");
  std::string prop_dataset, prop_out, prop_override;
  std::optional<std::size_t> prop_hop, prop_steps, prop_top;
  std::optional<double> prop_r;
  prop->add_option("--dataset", prop_dataset, "Dataset directory (overrides the config)");
  prop->add_option("--out", prop_out, "Cache file to write")->required();
  prop->add_option("--max-hop", prop_hop, "Maximum operator order (1-3)");
  prop->add_option("--steps", prop_steps, "Propagation steps K");
  prop->add_option("--r", prop_r, "Normalization coefficient r");
  prop->add_option("--top-m", prop_top, "Keep the m best-correlated operators (0 = all)");
  prop->add_option("--graph", prop_override, "auto, force_directed, force_undirected or skip");

  // train / run / eval
  auto* train_cmd = app.add_subcommand("train", "Train on the graph as given (no AMUD stage)");
  auto* run = app.add_subcommand("run", "Full pipeline: AMUD, propagation, training over seeds");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the configured dataset");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*amud) {
      const auto in = amud_in.load();
      LabelVector labels = in.labels;
      if (scope == "train") {
        if (!in.splits) throw Error("--label-scope train needs splits");
        labels = labels.restricted_to(in.splits->train);
      }
      const auto [graph, report] = decide_and_transform(in.graph, labels, theta);
      if (!emit_transformed.empty()) save_edge_list(graph, emit_transformed);
      emit(to_json(report), amud_out);
    } else if (*metrics) {
      const auto in = metrics_in.load();
      const auto report = homophily_report(in.graph, in.labels,
                                           mode == "directed" ? DirectionMode::Directed : DirectionMode::Symmetrized,
                                           in_neighbors ? NeighborSide::In : NeighborSide::Out);
      emit(to_json(report), metrics_out);
    } else if (*gen) {
      dsbm.class_sizes = sizes;
      dsbm.p = square_matrix(probs, sizes.size());
      dsbm.seed = g.seed_or(0);
      GeneratedGraph out = generate(dsbm);
      DatasetBundle b;
      b.name = fs::path(gen_out).filename().string();
      b.splits = train_pc > 0 ? per_class_split(out.labels, train_pc, val_pc, dsbm.seed)
                              : random_split(out.labels, train_frac, val_frac, dsbm.seed);
      b.graph = std::move(out.graph);
      b.labels = std::move(out.labels);
      b.features = std::move(out.features);
      save_bundle(b, gen_out, binary_features);
      std::cout << Json{{"nodes", b.graph.num_nodes()}, {"edges", b.graph.num_edges()}, {"out", gen_out}}.dump() << '\n';
    } else if (*sparsify) {
      DatasetBundle b = load_bundle(sp_in);
      const std::uint64_t seed = g.seed_or(0);
      b.graph = sparsify_edges(b.graph, edge_keep, seed);
      std::vector<NodeId> unlabeled;
      std::vector<std::uint8_t> in_train(b.graph.num_nodes(), 0);
      for (NodeId v : b.splits.train) in_train[v] = 1;
      for (NodeId v = 0; v < b.graph.num_nodes(); ++v) {
        if (!in_train[v]) unlabeled.push_back(v);
      }
      b.features = mask_features(b.features, feature_missing, unlabeled, seed);
      if (labels_pc > 0) b.splits = subsample_labels(b.splits, labels_pc, b.labels, seed);
      save_bundle(b, sp_out, fs::exists(fs::path(sp_in) / "features.bin"));
      std::cout << Json{{"edges", b.graph.num_edges()}, {"train", b.splits.train.size()}, {"out", sp_out}}.dump()
                << '\n';
    } else if (*split) {
      const LabelVector labels = load_labels(split_labels);
      const std::uint64_t seed = g.seed_or(0);
      const SplitMask s = s_train_pc > 0 ? per_class_split(labels, s_train_pc, s_val_pc, seed)
                                         : random_split(labels, s_train, s_val, seed);
      save_json(to_json(s), split_out);
    } else if (*prop) {
      RunConfig c;
      if (!g.config.empty()) c = load_run_config(g);
      if (!prop_dataset.empty()) c.dataset = prop_dataset;
      if (prop_hop) c.max_hop = *prop_hop;
      if (prop_steps) c.steps = *prop_steps;
      if (prop_r) c.r_coeff = *prop_r;
      if (prop_top) c.top_m = *prop_top;
      if (!prop_override.empty()) c.amud_override = parse_override(prop_override);
      c.cache_path = prop_out;
      const PreparedData data = prepare_features(c, pipeline_options(g));
      std::cout << Json{{"cache", prop_out},
                        {"cached", data.cached},
                        {"graph_mode", data.graph_mode},
                        {"operators", data.features.operator_words()},
                        {"steps", data.features.steps()},
                        {"nodes", data.features.num_nodes()},
                        {"features", data.features.feature_dim()}}
                       .dump(2)
                << '\n';
    } else if (*train_cmd || *run) {
      RunConfig c = load_run_config(g);
      if (*train_cmd) c.amud_override = AmudOverride::Skip;
      const Json summary = run_pipeline(c, pipeline_options(g));
      std::cout << summary.dump(2) << '\n';
    } else if (*eval) {
      RunConfig c = load_run_config(g);
      auto [config, params] = load_checkpoint(checkpoint);
      const PreparedData data = prepare_features(c, pipeline_options(g));
      const Matrix logits = forward(params, config, data.features).logits_value();
      const auto& s = data.bundle.splits;
      std::cout << Json{{"train_acc", accuracy(logits, data.bundle.labels, s.train)},
                        {"val_acc", accuracy(logits, data.bundle.labels, s.val)},
                        {"test_acc", accuracy(logits, data.bundle.labels, s.test)}}
                       .dump(2)
                << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
