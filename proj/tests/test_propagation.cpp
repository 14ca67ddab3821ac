#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "adpa/propagation.hpp"
#include "oracles.hpp"

using namespace adpa;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "adpa_test_propagation";
  fs::create_directories(dir);
  return dir / name;
}

PropagatedFeatures sample(std::uint64_t seed, std::size_t n = 20, std::size_t f = 4, std::size_t steps = 2) {
  std::mt19937_64 rng(seed);
  const DiGraph g = oracle::random_graph(n, 0.1, rng);
  return propagate(make_plan(g, 2, steps, 0.5),
                   oracle::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f), rng));
}

}  // namespace

TEST(EnumerateOperators, Counts) {
  std::mt19937_64 rng(1);
  const DiGraph g = oracle::random_graph(10, 0.2, rng);
  EXPECT_EQ(enumerate_operators(g, 1, 0.5).size(), 2u);
  EXPECT_EQ(enumerate_operators(g, 2, 0.5).size(), 6u);
  EXPECT_EQ(enumerate_operators(g, 3, 0.5).size(), 14u);
}

TEST(SelectOperators, RanksByCorrelation) {
  std::mt19937_64 rng(2);
  const DiGraph g = oracle::random_graph(40, 0.06, rng);
  const LabelVector y = oracle::random_labels(40, 3, rng);
  const auto all = enumerate_operators(g, 2, 0.5);
  const auto top = select_operators(all, y, 3);
  ASSERT_EQ(top.size(), 3u);
  std::vector<double> dense;
  for (const auto& op : all) dense.push_back(oracle::dense_pair_correlation(op.pattern.to_dense(), y));
  std::vector<double> sorted = dense;
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(oracle::dense_pair_correlation(top[i].pattern.to_dense(), y), sorted[i], 1e-12);
  }
  EXPECT_EQ(select_operators(all, y, 100).size(), 6u);
  EXPECT_THROW(select_operators(all, y, 0), Error);
}

TEST(Propagate, HandWorkedThreeNodeCase) {
  // Path 0 -> 1 -> 2 with F only, r = 0 (row-stochastic after self-loops).
  const std::vector<Edge> edges{{0, 1}, {1, 2}};
  const DiGraph g = DiGraph::from_edge_list(edges, 3);
  PropagationPlan plan{{make_operator(g, DPSpec::parse("F"), 0.0)}, 2, 0.0, true, g.fingerprint()};
  Matrix x(3, 1);
  x << 1.0, 2.0, 4.0;
  const PropagatedFeatures pf = propagate(plan, x);
  Matrix one(3, 1);
  one << 1.5, 3.0, 4.0;
  Matrix two(3, 1);
  two << 2.25, 3.5, 4.0;
  EXPECT_EQ(pf.block(1, 1), one);
  EXPECT_EQ(pf.block(2, 1), two);
  EXPECT_EQ(pf.block(1, 0), x);
  EXPECT_EQ(pf.block(2, 0), x);
}

TEST(Propagate, MatchesDenseMatrixPowers) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 16 + static_cast<std::size_t>(trial) * 7;
    const DiGraph g = oracle::random_graph(n, 0.08, rng, trial % 2 == 0);
    const double r = 0.2 * trial;
    const Matrix x = oracle::random_matrix(static_cast<Eigen::Index>(n), 5, rng);
    const PropagatedFeatures pf = propagate(make_plan(g, 2, 4, r), x);
    ASSERT_EQ(pf.slots(), 7u);
    for (std::size_t s = 0; s < 6; ++s) {
      const Matrix m = oracle::dense_propagation(oracle::dense_pattern(g, enumerate_specs(2)[s]), r);
      Matrix expected = x;
      for (std::size_t l = 1; l <= 4; ++l) {
        expected = m * expected;
        EXPECT_LT((pf.block(l, s + 1) - expected).cwiseAbs().maxCoeff(), 1e-10);
      }
    }
  }
}

TEST(Propagate, ResidualCanBeDisabled) {
  std::mt19937_64 rng(4);
  const DiGraph g = oracle::random_graph(10, 0.2, rng);
  PropagationPlan plan = make_plan(g, 1, 2, 0.5);
  plan.include_residual = false;
  const Matrix x = oracle::random_matrix(10, 3, rng);
  const PropagatedFeatures pf = propagate(plan, x);
  EXPECT_EQ(pf.block(2, 0).squaredNorm(), 0.0);
  EXPECT_EQ(pf.block(1, 1), spmm(plan.operators[0].propagation, x));
}

TEST(Propagate, RowStochasticPreservesConstants) {
  std::mt19937_64 rng(5);
  const DiGraph g = oracle::random_graph(30, 0.1, rng);
  const Matrix x = Matrix::Constant(30, 2, 3.0);
  const PropagatedFeatures pf = propagate(make_plan(g, 2, 3, 0.0), x);
  for (std::size_t s = 1; s < pf.slots(); ++s) {
    EXPECT_LT((pf.block(3, s) - x).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Propagate, RejectsBadInput) {
  std::mt19937_64 rng(6);
  const DiGraph g = oracle::random_graph(10, 0.2, rng);
  Matrix x = oracle::random_matrix(9, 2, rng);
  EXPECT_THROW(propagate(make_plan(g, 1, 1, 0.5), x), Error);
  Matrix y = oracle::random_matrix(10, 2, rng);
  y(0, 0) = std::nan("");
  EXPECT_THROW(propagate(make_plan(g, 1, 1, 0.5), y), Error);
  EXPECT_THROW(propagate(make_plan(g, 1, 0, 0.5), oracle::random_matrix(10, 2, rng)), Error);
}

TEST(Cache, RoundTripIsBitExact) {
  const PropagatedFeatures pf = sample(7);
  const fs::path path = temp_path("roundtrip.adpf");
  cache_save(pf, path);
  EXPECT_FALSE(fs::exists(fs::path(path).concat(".tmp")));
  const PropagatedFeatures back = cache_load(path, pf.graph_fingerprint, pf.feature_fingerprint);
  EXPECT_EQ(back, pf);
}

TEST(Cache, HeaderLayout) {
  const PropagatedFeatures pf = sample(8, 5, 3, 2);
  const fs::path path = temp_path("layout.adpf");
  cache_save(pf, path);
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "ADPF");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  EXPECT_EQ(version, 1u);
  std::uint64_t n = 0, f = 0;
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&f), 8);
  EXPECT_EQ(n, 5u);
  EXPECT_EQ(f, 3u);
}

TEST(Cache, RejectsTruncationCorruptionAndMismatch) {
  const PropagatedFeatures pf = sample(9);
  const fs::path path = temp_path("bad.adpf");
  cache_save(pf, path);
  const auto size = fs::file_size(path);

  EXPECT_THROW(cache_load(path, pf.graph_fingerprint + 1), Error);
  EXPECT_THROW(cache_load(path, std::nullopt, pf.feature_fingerprint + 1), Error);

  {
    std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(static_cast<std::streamoff>(size / 2));
    char c = 0;
    io.read(&c, 1);
    io.seekp(static_cast<std::streamoff>(size / 2));
    c = static_cast<char>(c ^ 0x5a);
    io.write(&c, 1);
  }
  EXPECT_THROW(cache_load(path), Error);

  cache_save(pf, path);
  fs::resize_file(path, size - 9);
  EXPECT_THROW(cache_load(path), Error);
  EXPECT_THROW(cache_load(temp_path("missing.adpf")), Error);
}

TEST(Fingerprint, SensitiveToGraphAndFeatures) {
  std::mt19937_64 rng(10);
  const DiGraph g = oracle::random_graph(15, 0.2, rng);
  std::vector<Edge> edges = g.edges();
  edges.pop_back();
  EXPECT_NE(g.fingerprint(), DiGraph::from_edge_list(edges, 15).fingerprint());
  Matrix x = oracle::random_matrix(4, 4, rng);
  const auto before = fingerprint(x);
  x(3, 3) += 1e-12;
  EXPECT_NE(before, fingerprint(x));
}
