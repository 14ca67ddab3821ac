#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "adpa/graph.hpp"
#include "oracles.hpp"

using namespace adpa;

TEST(DiGraph, EmptyEdgeList) {
  const DiGraph g = DiGraph::from_edge_list({}, 3);
  EXPECT_EQ(g.num_nodes(), 3u);
  EXPECT_EQ(g.num_edges(), 0u);
  EXPECT_TRUE(g.is_symmetric());
}

TEST(DiGraph, DuplicatesCollapse) {
  const std::vector<Edge> edges{{0, 1}, {0, 1}, {1, 2}};
  const DiGraph g = DiGraph::from_edge_list(edges, 3);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.out_neighbors(0).size(), 1u);
}

TEST(DiGraph, SelfLoopsKeptAndCounted) {
  const std::vector<Edge> edges{{1, 1}, {0, 1}, {1, 1}};
  const DiGraph g = DiGraph::from_edge_list(edges, 2);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.num_self_loops(), 1u);
  EXPECT_TRUE(g.has_edge(1, 1));
}

TEST(DiGraph, RejectsBadInput) {
  const std::vector<Edge> bad{{0, 3}};
  EXPECT_THROW(DiGraph::from_edge_list(bad, 3), Error);
  EXPECT_THROW(DiGraph::from_edge_list({}, 0), Error);
}

TEST(DiGraph, InAdjacencyIsTransposeOfOut) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<NodeId> pick(0, 49);
  std::vector<Edge> edges;
  for (int i = 0; i < 200; ++i) edges.push_back({pick(rng), pick(rng)});
  const DiGraph g = DiGraph::from_edge_list(edges, 50);

  const Matrix a = oracle::dense_adjacency(g);
  Matrix in = Matrix::Zero(50, 50);
  for (std::size_t v = 0; v < 50; ++v) {
    for (NodeId u : g.in_neighbors(v)) in(static_cast<Eigen::Index>(v), u) = 1.0;
    const auto row = g.in_neighbors(v);
    EXPECT_TRUE(std::is_sorted(row.begin(), row.end()));
  }
  EXPECT_EQ(in, Matrix(a.transpose()));

  // Transpose involution: rebuilding from the in-adjacency reproduces out.
  std::vector<Edge> back;
  for (std::size_t v = 0; v < 50; ++v) {
    for (NodeId u : g.in_neighbors(v)) back.push_back({u, static_cast<NodeId>(v)});
  }
  EXPECT_EQ(DiGraph::from_edge_list(back, 50), g);
}

TEST(Symmetrize, SingleEdge) {
  const std::vector<Edge> edges{{0, 1}};
  const DiGraph s = symmetrize(DiGraph::from_edge_list(edges, 2));
  EXPECT_EQ(s.edges(), (std::vector<Edge>{{0, 1}, {1, 0}}));
  EXPECT_TRUE(s.is_symmetric());
}

TEST(Symmetrize, IdempotentOnRandomGraphs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const DiGraph g = oracle::random_graph(25, 0.08, rng, true);
    const DiGraph s = symmetrize(g);
    EXPECT_TRUE(s.is_symmetric());
    EXPECT_EQ(symmetrize(s), s);
  }
}

TEST(ComposePattern, PathTwoHop) {
  const std::vector<Edge> edges{{0, 1}, {1, 2}};
  const DiGraph g = DiGraph::from_edge_list(edges, 3);
  const SparseMatrix p = compose_pattern(g, DPSpec::parse("FF"));
  EXPECT_EQ(p.nnz(), 1u);
  EXPECT_EQ(p.at(0, 2), 1.0);
}

TEST(ComposePattern, WordOrderIrrelevantOnSymmetricGraph) {
  std::mt19937_64 rng(3);
  const DiGraph g = symmetrize(oracle::random_graph(20, 0.1, rng));
  EXPECT_EQ(compose_pattern(g, DPSpec::parse("FR")), compose_pattern(g, DPSpec::parse("RF")));
  for (const auto& spec : enumerate_specs(3)) {
    EXPECT_EQ(compose_pattern(g, spec), compose_pattern(g, spec.transposed())) << spec.to_string();
  }
}

TEST(ComposePattern, MatchesDenseOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const DiGraph g = oracle::random_graph(30, 0.07, rng, trial % 2 == 0);
    for (const auto& spec : enumerate_specs(3)) {
      EXPECT_EQ(compose_pattern(g, spec).to_dense(), oracle::dense_pattern(g, spec)) << spec.to_string();
    }
  }
}

TEST(ComposePattern, OrderGuard) {
  const DiGraph g = DiGraph::from_edge_list({}, 2);
  EXPECT_THROW(compose_pattern(g, DPSpec::parse("FFFF")), Error);
  EXPECT_NO_THROW(compose_pattern(g, DPSpec::parse("FFFF"), 4));
  EXPECT_THROW(DPSpec::parse(""), Error);
  EXPECT_THROW(DPSpec::parse("FX"), Error);
}

TEST(ComposePattern, PermutationEquivariance) {
  std::mt19937_64 rng(19);
  const DiGraph g = oracle::random_graph(18, 0.12, rng);
  std::vector<NodeId> perm(18);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix pm = Matrix::Zero(18, 18);
  for (Eigen::Index i = 0; i < 18; ++i) pm(perm[static_cast<std::size_t>(i)], i) = 1.0;
  const DiGraph h = permute_nodes(g, perm);
  for (const auto& spec : enumerate_specs(2)) {
    const Matrix original = compose_pattern(g, spec).to_dense();
    EXPECT_EQ(compose_pattern(h, spec).to_dense(), pm * original * pm.transpose()) << spec.to_string();
  }
}

TEST(EnumerateSpecs, OperatorCounts) {
  EXPECT_EQ(enumerate_specs(1).size(), 2u);
  EXPECT_EQ(enumerate_specs(2).size(), 6u);
  EXPECT_EQ(enumerate_specs(3).size(), 14u);
  EXPECT_THROW(enumerate_specs(0), Error);
  EXPECT_THROW(enumerate_specs(4), Error);
  const auto two = enumerate_specs(2);
  EXPECT_EQ(two[2].to_string(), "FF");
  EXPECT_EQ(two[3].to_string(), "RR");
  EXPECT_EQ(two[4].to_string(), "FR");
  EXPECT_EQ(two[5].to_string(), "RF");
}

TEST(Normalize, IdentityStaysIdentity) {
  const SparseMatrix id = SparseMatrix::identity(5);
  for (double r : {0.0, 0.3, 0.5, 1.0}) EXPECT_EQ(normalize(id, r).to_dense(), Matrix::Identity(5, 5));
}

TEST(Normalize, ZeroCoefficientIsRowStochastic) {
  std::mt19937_64 rng(2);
  const DiGraph g = oracle::random_graph(40, 0.1, rng);
  const SparseMatrix m = normalize(with_self_loops(compose_pattern(g, DPSpec::parse("FR"))), 0.0);
  const Matrix d = m.to_dense();
  for (Eigen::Index i = 0; i < d.rows(); ++i) EXPECT_NEAR(d.row(i).sum(), 1.0, 1e-14);
}

TEST(Normalize, SymmetricFormMatchesDense) {
  std::mt19937_64 rng(13);
  const DiGraph g = oracle::random_graph(35, 0.08, rng);
  for (const auto& spec : enumerate_specs(2)) {
    const Matrix pattern = oracle::dense_pattern(g, spec);
    Matrix looped = pattern;
    for (Eigen::Index i = 0; i < looped.rows(); ++i) looped(i, i) = 1.0;
    const Eigen::VectorXd deg_row = looped.rowwise().sum();
    const Eigen::VectorXd deg_col = looped.colwise().sum().transpose();
    Matrix expected = looped;
    for (Eigen::Index i = 0; i < looped.rows(); ++i) {
      for (Eigen::Index j = 0; j < looped.cols(); ++j) {
        expected(i, j) = looped(i, j) / std::sqrt(deg_row(i)) / std::sqrt(deg_col(j));
      }
    }
    const Matrix got = normalize(with_self_loops(compose_pattern(g, spec)), 0.5).to_dense();
    EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Normalize, RejectsBadInput) {
  const std::vector<Edge> edges{{0, 1}};
  const SparseMatrix p = compose_pattern(DiGraph::from_edge_list(edges, 2), DPSpec::parse("F"));
  EXPECT_THROW(normalize(p, 0.5), Error);  // node 0 has zero in-degree without self-loops
  EXPECT_THROW(normalize(with_self_loops(p), 1.5), Error);
}

TEST(WithSelfLoops, SetsDiagonalOnly) {
  const std::vector<Edge> edges{{0, 0}, {0, 2}, {2, 1}};
  const SparseMatrix p = compose_pattern(DiGraph::from_edge_list(edges, 3), DPSpec::parse("F"));
  Matrix expected = p.to_dense();
  expected.diagonal().setOnes();
  EXPECT_EQ(with_self_loops(p).to_dense(), expected);
}

TEST(Spmm, IdentityAndSingleEntry) {
  std::mt19937_64 rng(1);
  const Matrix x = oracle::random_matrix(4, 3, rng);
  EXPECT_EQ(spmm(SparseMatrix::identity(4), x), x);

  const SparseMatrix m(3, 3, {0, 1, 1, 1}, {2}, {2.0});
  const Matrix out = spmm(m, Matrix::Identity(3, 3));
  EXPECT_EQ(out.row(0), (Eigen::RowVector3d(0.0, 0.0, 2.0)));
  EXPECT_EQ(out.row(1).squaredNorm(), 0.0);
}

TEST(Spmm, MatchesDenseProduct) {
  std::mt19937_64 rng(17);
  const DiGraph g = oracle::random_graph(60, 0.05, rng);
  const SparseMatrix m = normalize(with_self_loops(compose_pattern(g, DPSpec::parse("RF"))), 0.3);
  const Matrix x = oracle::random_matrix(60, 9, rng);
  EXPECT_LT((spmm(m, x) - m.to_dense() * x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(spmm(m, x), spmm(m, x));  // bit-identical reruns
  EXPECT_THROW(spmm(m, oracle::random_matrix(59, 2, rng)), Error);
}

TEST(SparseMatrix, ValidatesLayout) {
  EXPECT_THROW(SparseMatrix(2, 2, {0, 2, 2}, {1, 0}, {1.0, 1.0}), Error);  // unsorted row
  EXPECT_THROW(SparseMatrix(2, 2, {0, 1, 1}, {5}, {1.0}), Error);          // column out of range
  EXPECT_THROW(SparseMatrix(2, 2, {0, 1, 1}, {1}, {std::nan("")}), Error);
}

TEST(DPOperator, PropagationHasNoZeroRows) {
  std::mt19937_64 rng(23);
  const DiGraph g = oracle::random_graph(30, 0.02, rng);
  for (const auto& spec : enumerate_specs(2)) {
    const DPOperator op = make_operator(g, spec, 0.5);
    for (std::size_t i = 0; i < g.num_nodes(); ++i) EXPECT_FALSE(op.propagation.row_indices(i).empty());
    for (double v : op.pattern.values()) EXPECT_EQ(v, 1.0);
  }
}
