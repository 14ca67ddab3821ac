#pragma once

#include <bit>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "adpa/amud.hpp"
#include "adpa/graph.hpp"
#include "adpa/homophily.hpp"
#include "adpa/labels.hpp"
#include "adpa/model.hpp"
#include "adpa/propagation.hpp"
#include "adpa/training.hpp"

namespace adpa {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      value = static_cast<T>(std::stod(text, &used));
      if (used != text.size()) throw Error("");
    } catch (...) {
      throw Error(where + ": cannot parse number \"" + text + "\"");
    }
  } else {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(where + ": cannot parse integer \"" + text + "\"");
    }
  }
  return value;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

inline void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  auto out = open_out(path, true);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace detail

// ---- edge lists ------------------------------------------------------------

/// "u v" per line, '#' comments. Returns the edges and max index + 1.
inline std::pair<std::vector<Edge>, std::size_t> read_edge_list(std::istream& in, const std::string& name = "edges") {
  std::vector<Edge> edges;
  std::size_t inferred = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream fields(t);
    std::string a, b, extra;
    fields >> a >> b;
    if (b.empty() || (fields >> extra)) {
      throw Error(name + ":" + std::to_string(line_no) + ": expected two integers \"u v\"");
    }
    const std::string where = name + ":" + std::to_string(line_no);
    const auto u = detail::parse_number<NodeId>(a, where);
    const auto v = detail::parse_number<NodeId>(b, where);
    edges.push_back({u, v});
    inferred = std::max<std::size_t>(inferred, std::max(u, v) + std::size_t{1});
  }
  return {std::move(edges), inferred};
}

/// Reads an edge list; n = 0 infers the node count from the largest index.
inline DiGraph load_edge_list(const fs::path& path, std::size_t n = 0) {
  auto in = detail::open_in(path);
  auto [edges, inferred] = read_edge_list(in, path.string());
  return DiGraph::from_edge_list(edges, n == 0 ? inferred : n);
}

inline void save_edge_list(const DiGraph& g, const fs::path& path) {
  auto out = detail::open_out(path);
  out << "# n=" << g.num_nodes() << " m=" << g.num_edges() << "\n";
  for (const Edge& e : g.edges()) out << e.src << ' ' << e.dst << '\n';
}

// ---- features --------------------------------------------------------------

inline constexpr char kFeatureMagic[4] = {'A', 'D', 'P', 'X'};

inline Matrix load_features_csv(const fs::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line, ',');
    if (width == 0) {  // header row f0,f1,...
      width = fields.size();
      continue;
    }
    if (fields.size() != width) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                  " columns, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      row.push_back(detail::parse_number<double>(f, path.string() + ":" + std::to_string(line_no)));
    }
    rows.push_back(std::move(row));
  }
  if (width == 0) throw Error(path.string() + ": missing header row");
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return x;
}

inline void save_features_csv(const Matrix& x, const fs::path& path) {
  auto out = detail::open_out(path);
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << 'f' << j;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x(i, j);
    out << '\n';
  }
}

inline void save_features_bin(const Matrix& x, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little);
  detail::ByteWriter w;
  w.put_bytes({kFeatureMagic, 4});
  w.put(static_cast<std::uint64_t>(x.rows()));
  w.put(static_cast<std::uint64_t>(x.cols()));
  w.put_matrix_data(x);
  w.seal();
  detail::write_bytes(path, w.bytes());
}

inline Matrix load_features_bin(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(detail::verify_sealed(bytes, path.string()));
  if (r.get_bytes(4) != std::string(kFeatureMagic, 4)) throw Error(path.string() + ": bad magic");
  const auto n = r.get<std::uint64_t>();
  const auto f = r.get<std::uint64_t>();
  if (r.remaining() != n * f * sizeof(double)) throw Error(path.string() + ": payload size does not match header");
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  r.get_matrix_data(x);
  return x;
}

/// Dispatches on extension: .bin is the binary matrix format, anything else CSV.
inline Matrix load_features(const fs::path& path) {
  return path.extension() == ".bin" ? load_features_bin(path) : load_features_csv(path);
}

// ---- labels and splits -----------------------------------------------------

/// Header "label", then one row per node; -1 or an empty field marks an
/// unobserved label. Class ids must be contiguous from 0.
inline LabelVector load_labels(const fs::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  std::vector<int> y;
  std::vector<std::uint8_t> known;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (header) {
      header = false;
      if (t == "label") continue;
      throw Error(path.string() + ":1: expected header \"label\"");
    }
    if (t.empty() || t == "-1") {
      y.push_back(0);
      known.push_back(0);
      continue;
    }
    const int v = detail::parse_number<int>(t, path.string() + ":" + std::to_string(line_no));
    if (v < 0) throw Error(path.string() + ":" + std::to_string(line_no) + ": negative class id");
    y.push_back(v);
    known.push_back(1);
  }
  int classes = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (known[i]) classes = std::max(classes, y[i] + 1);
  }
  std::vector<std::uint8_t> present(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (known[i]) present[static_cast<std::size_t>(y[i])] = 1;
  }
  for (int c = 0; c < classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) {
      throw Error(path.string() + ": class ids are not contiguous (class " + std::to_string(c) + " missing)");
    }
  }
  if (classes == 0) throw Error(path.string() + ": no labeled nodes");
  return {std::move(y), classes, std::move(known)};
}

inline void save_labels(const LabelVector& labels, const fs::path& path) {
  auto out = detail::open_out(path);
  out << "label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << (labels.known(i) ? labels[i] : -1) << '\n';
}

inline Json to_json(const SplitMask& s) { return Json{{"train", s.train}, {"val", s.val}, {"test", s.test}}; }

inline SplitMask split_from_json(const Json& j) {
  SplitMask s;
  s.train = j.at("train").get<std::vector<NodeId>>();
  s.val = j.value("val", std::vector<NodeId>{});
  s.test = j.value("test", std::vector<NodeId>{});
  return s;
}

inline Json load_json(const fs::path& path) {
  auto in = detail::open_in(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void save_json(const Json& j, const fs::path& path) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline SplitMask load_splits(const fs::path& path) {
  try {
    return split_from_json(load_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---- dataset bundles -------------------------------------------------------

struct DatasetBundle {
  std::string name;
  DiGraph graph;
  Matrix features;
  LabelVector labels;
  SplitMask splits;
};

/// Loads edges.txt, features.csv|features.bin, labels.csv and splits.json.
/// The node count comes from labels.csv.
inline DatasetBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
  for (const char* required : {"edges.txt", "labels.csv", "splits.json"}) {
    if (!fs::exists(dir / required)) throw Error("dataset " + dir.string() + " lacks " + required);
  }
  fs::path feature_path = dir / "features.bin";
  if (!fs::exists(feature_path)) feature_path = dir / "features.csv";
  if (!fs::exists(feature_path)) throw Error("dataset " + dir.string() + " lacks features.csv or features.bin");

  DatasetBundle b;
  b.name = dir.filename().string();
  if (b.name.empty()) b.name = dir.parent_path().filename().string();
  b.labels = load_labels(dir / "labels.csv");
  const std::size_t n = b.labels.size();
  b.features = load_features(feature_path);
  if (static_cast<std::size_t>(b.features.rows()) != n) {
    throw Error("features have " + std::to_string(b.features.rows()) + " rows but labels.csv has " +
                std::to_string(n) + " nodes");
  }
  {
    auto in = detail::open_in(dir / "edges.txt");
    auto [edges, inferred] = read_edge_list(in, (dir / "edges.txt").string());
    if (inferred > n) {
      throw Error("edges.txt references node " + std::to_string(inferred - 1) + " but labels.csv has " +
                  std::to_string(n) + " nodes");
    }
    b.graph = DiGraph::from_edge_list(edges, n);
  }
  b.splits = load_splits(dir / "splits.json");
  b.splits.validate(n);
  for (const auto* set : {&b.splits.train, &b.splits.val, &b.splits.test}) {
    for (NodeId v : *set) {
      if (!b.labels.known(v)) throw Error("split node " + std::to_string(v) + " has no label");
    }
  }
  return b;
}

inline void save_bundle(const DatasetBundle& b, const fs::path& dir, bool binary_features = false) {
  fs::create_directories(dir);
  save_edge_list(b.graph, dir / "edges.txt");
  fs::remove(dir / (binary_features ? "features.csv" : "features.bin"));
  if (binary_features) {
    save_features_bin(b.features, dir / "features.bin");
  } else {
    save_features_csv(b.features, dir / "features.csv");
  }
  save_labels(b.labels, dir / "labels.csv");
  save_json(to_json(b.splits), dir / "splits.json");
}

// ---- checkpoints -----------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'A', 'D', 'P', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const AdpaConfig& config, const AdpaParameters& params, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little);
  detail::ByteWriter w;
  w.put_bytes({kCheckpointMagic, 4});
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint64_t>(config.num_nodes));
  w.put(static_cast<std::uint64_t>(config.num_operators));
  w.put(static_cast<std::uint64_t>(config.steps));
  w.put(static_cast<std::uint64_t>(config.in_features));
  w.put(static_cast<std::uint64_t>(config.hidden));
  w.put(static_cast<std::uint64_t>(config.classes));
  w.put(static_cast<std::uint32_t>(config.dp_variant));
  w.put(static_cast<std::uint64_t>(config.mlp_layers));
  w.put(static_cast<std::uint32_t>(config.hop_activation));
  w.put(config.seed);
  w.put(static_cast<std::uint8_t>(config.per_step_fusion));
  w.put(static_cast<std::uint8_t>(config.freeze_dp_weights));
  w.put(config.dropout);
  w.put(config.weight_decay);
  const auto tensors = params.tensors();
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const Matrix* m : tensors) {
    w.put(static_cast<std::uint64_t>(m->rows()));
    w.put(static_cast<std::uint64_t>(m->cols()));
    w.put_matrix_data(*m);
  }
  w.seal();
  detail::write_bytes(path, w.bytes());
}

inline std::pair<AdpaConfig, AdpaParameters> load_checkpoint(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(detail::verify_sealed(bytes, "checkpoint " + path.string()));
  if (r.get_bytes(4) != std::string(kCheckpointMagic, 4)) throw Error("checkpoint: bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(v));
  }
  AdpaConfig c;
  c.num_nodes = r.get<std::uint64_t>();
  c.num_operators = r.get<std::uint64_t>();
  c.steps = r.get<std::uint64_t>();
  c.in_features = r.get<std::uint64_t>();
  c.hidden = r.get<std::uint64_t>();
  c.classes = r.get<std::uint64_t>();
  const auto variant = r.get<std::uint32_t>();
  if (variant > static_cast<std::uint32_t>(DpVariant::JK)) throw Error("checkpoint: unknown DP variant");
  c.dp_variant = static_cast<DpVariant>(variant);
  c.mlp_layers = r.get<std::uint64_t>();
  const auto act = r.get<std::uint32_t>();
  if (act > static_cast<std::uint32_t>(Activation::Identity)) throw Error("checkpoint: unknown activation");
  c.hop_activation = static_cast<Activation>(act);
  c.seed = r.get<std::uint64_t>();
  c.per_step_fusion = r.get<std::uint8_t>() != 0;
  c.freeze_dp_weights = r.get<std::uint8_t>() != 0;
  c.dropout = r.get<double>();
  c.weight_decay = r.get<double>();
  AdpaParameters p = init_parameters(c);
  auto tensors = p.tensors();
  if (r.get<std::uint32_t>() != tensors.size()) throw Error("checkpoint: tensor count does not match config");
  for (Matrix* m : tensors) {
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(m->rows()) || cols != static_cast<std::uint64_t>(m->cols())) {
      throw Error("checkpoint: tensor shape does not match config");
    }
    r.get_matrix_data(*m);
  }
  if (r.remaining() != 0) throw Error("checkpoint: trailing bytes");
  return {c, std::move(p)};
}

// ---- JSON views ------------------------------------------------------------

inline Json to_json(const HomophilyReport& h) {
  return Json{{"h_node", h.h_node}, {"h_edge", h.h_edge}, {"h_class", h.h_class},
              {"h_adj", h.h_adj},   {"li", h.li},         {"direction_mode", to_string(h.direction_mode)}};
}

inline Json to_json(const AmudReport& report) {
  Json ops = Json::array();
  for (const auto& op : report.operators) {
    ops.push_back(Json{{"operator", op.spec.to_string()},
                       {"name", op.spec.display_name()},
                       {"r", op.r},
                       {"r2", op.r2},
                       {"degenerate", op.degenerate},
                       {"contingency", {{"n11", op.table.n11}, {"n10", op.table.n10}, {"n01", op.table.n01}, {"n00", op.table.n00}}}});
  }
  return Json{{"operators", ops},          {"alpha", report.alpha},       {"score", report.score},
              {"theta", report.theta},     {"decision", to_string(report.decision)},
              {"degenerate", report.degenerate}};
}

inline void save_history_csv(const TrainHistory& h, const fs::path& path) {
  auto out = detail::open_out(path);
  out.precision(17);
  out << "epoch,train_loss,train_acc,val_acc,test_acc\n";
  for (const auto& e : h.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_acc << ',' << e.test_acc << '\n';
  }
}

}  // namespace adpa
