#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "support/desk.hpp"

using namespace asyncopt;

namespace {

template <DecomposableObjective Obj>
void check_gradients(const Obj& obj, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int t = 0; t < 100; ++t) {
    const auto x = desk::random_point(obj.dim(), rng);
    const auto g = full_gradient(obj, x);
    const auto fd = desk::fd_gradient(obj, x);
    for (std::size_t v = 0; v < x.size(); ++v) ASSERT_NEAR(g[v], fd[v], 1e-5) << "coordinate " << v;
  }
}

template <DecomposableObjective Obj>
void check_term_structure(const Obj& obj, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int t = 0; t < 10; ++t) {
    const auto x = desk::random_point(obj.dim(), rng);
    std::vector<double> sum(obj.dim(), 0.0);
    for (std::size_t i = 0; i < obj.num_terms(); ++i) {
      const auto sup = obj.support(i);
      const auto g = desk::dense_term_gradient(obj, i, x);
      for (std::size_t v = 0; v < g.size(); ++v) {
        if (!std::binary_search(sup.begin(), sup.end(), static_cast<index_t>(v))) {
          ASSERT_EQ(g[v], 0.0);
        }
        sum[v] += g[v];
      }
    }
    const auto full = full_gradient(obj, x);
    for (std::size_t v = 0; v < full.size(); ++v) {
      EXPECT_NEAR(sum[v] / static_cast<double>(obj.num_terms()), full[v], 1e-12 * std::max(1.0, std::abs(full[v])));
    }
  }
}

template <DecomposableObjective Obj>
void check_curvature(const Obj& obj, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double m = obj.strong_convexity();
  const double L = obj.smoothness();
  for (int t = 0; t < 100; ++t) {
    const auto x = desk::random_point(obj.dim(), rng, -2.0, 2.0);
    const auto y = desk::random_point(obj.dim(), rng, -2.0, 2.0);
    const auto gx = full_gradient(obj, x);
    const auto gy = full_gradient(obj, y);
    double inner = 0.0;
    double gdiff = 0.0;
    for (std::size_t v = 0; v < x.size(); ++v) {
      inner += (gx[v] - gy[v]) * (x[v] - y[v]);
      gdiff += (gx[v] - gy[v]) * (gx[v] - gy[v]);
    }
    const double dist2 = sq_distance(x, y);
    EXPECT_GE(inner, m * dist2 - 1e-12);
    EXPECT_LE(std::sqrt(gdiff), L * std::sqrt(dist2) + 1e-12);
    for (std::size_t i = 0; i < obj.num_terms(); i += 7) {
      const auto a = desk::dense_term_gradient(obj, i, x);
      const auto b = desk::dense_term_gradient(obj, i, y);
      EXPECT_LE(std::sqrt(sq_distance(a, b)), obj.term_smoothness(i) * std::sqrt(dist2) + 1e-12);
    }
  }
}

}  // namespace

TEST(Objectives, RidgeGradients) {
  const auto obj = desk::ridge();
  check_gradients(obj, 1);
  check_term_structure(obj, 2);
  check_curvature(obj, 3);
}

TEST(Objectives, LogisticGradients) {
  const auto obj = desk::logistic();
  check_gradients(obj, 4);
  check_term_structure(obj, 5);
  check_curvature(obj, 6);
}

TEST(Objectives, VertexCoverGradients) {
  const auto obj = desk::vertex_cover(true);
  check_gradients(obj, 7);
  check_term_structure(obj, 8);
  check_curvature(obj, 9);
}

TEST(Objectives, RegularizerAveragesToRidgePenalty) {
  auto data = desk::regression(50, 10, 3, LabelModel::linear, 0.7, 21);
  const LeastSquaresObjective obj(data);
  std::mt19937_64 rng(1);
  const auto x = desk::random_point(10, rng);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double margin = 0.0;
    for (std::size_t k = 0; k < data.rows[i].nnz(); ++k) margin += data.rows[i].values()[k] * x[data.rows[i].indices()[k]];
    loss += 0.5 * (margin - data.labels[i]) * (margin - data.labels[i]);
  }
  double penalty = 0.0;
  const auto& w = obj.weights();
  for (std::size_t v = 0; v < 10; ++v) penalty += w.covered(static_cast<index_t>(v)) ? x[v] * x[v] : 0.0;
  EXPECT_NEAR(full_value(obj, x), loss / 50.0 + 0.35 * penalty, 1e-12);
}

TEST(Objectives, VertexCoverSumsToRelaxation) {
  const auto p = desk::random_graph(12, 15, 0.8, 5);
  VertexCoverProblem with_isolated = p;
  with_isolated.num_vertices = 14;
  const VertexCoverObjective obj(with_isolated, false);
  std::vector<int> deg(14, 0);
  for (const auto& [u, v] : p.edges) ++deg[u], ++deg[v];
  EXPECT_EQ(obj.num_terms(), 15u + static_cast<std::size_t>(std::count(deg.begin(), deg.end(), 0)));
  std::mt19937_64 rng(2);
  const auto x = desk::random_point(obj.dim(), rng, 0.0, 1.0);
  double expected = 0.0;
  for (std::size_t v = 0; v < 14; ++v) expected += x[v] + x[v] * x[v] / (2.0 * 0.8);
  for (std::size_t k = 0; k < p.edges.size(); ++k) {
    const double xe = x[14 + k];
    const double r = x[p.edges[k].first] + x[p.edges[k].second] - xe - 1.0;
    expected += 0.4 * r * r + xe * xe;
  }
  EXPECT_NEAR(full_value(obj, x) * static_cast<double>(obj.num_terms()), expected, 1e-10);
}

TEST(Objectives, ConstrainedVertexCoverHasUnitBox) {
  const auto obj = desk::vertex_cover(true);
  EXPECT_EQ(obj.box().lower, 0.0);
  EXPECT_EQ(obj.box().upper, 1.0);
  EXPECT_TRUE(desk::vertex_cover(false).box().unbounded());
}

TEST(Objectives, Validation) {
  auto data = desk::regression(20, 5, 2, LabelModel::linear, 0.1, 1);
  data.labels[3] = 0.5;
  EXPECT_THROW(LogisticObjective{data}, std::invalid_argument);
  auto singular = desk::regression(3, 10, 2, LabelModel::linear, 0.0, 1);
  EXPECT_THROW(LeastSquaresObjective{singular}, std::invalid_argument);
  VertexCoverProblem vc{3, {{0, 0}}, 1.0};
  EXPECT_THROW(VertexCoverObjective{vc}, std::invalid_argument);
  vc.edges = {{0, 5}};
  EXPECT_THROW(VertexCoverObjective{vc}, std::invalid_argument);
  vc.edges = {{0, 1}};
  vc.beta = 0.0;
  EXPECT_THROW(VertexCoverObjective{vc}, std::invalid_argument);
}

TEST(Objectives, UnregularizedLeastSquaresUsesGramSpectrum) {
  auto data = desk::regression(200, 6, 3, LabelModel::linear, 0.0, 9);
  const LeastSquaresObjective obj(data);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(200, 6);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t k = 0; k < data.rows[i].nnz(); ++k) A(i, data.rows[i].indices()[k]) = data.rows[i].values()[k];
  }
  const Eigen::MatrixXd gram = A.transpose() * A / 200.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
  EXPECT_NEAR(obj.strong_convexity(), svd.singularValues().minCoeff(), 1e-10);
}

TEST(Objectives, FullGradientThreadCountIsImmaterial) {
  const auto obj = desk::logistic();
  std::mt19937_64 rng(3);
  const auto x = desk::random_point(obj.dim(), rng);
  const auto g1 = full_gradient(obj, x, 1);
  const auto g3 = full_gradient(obj, x, 3);
  for (std::size_t v = 0; v < g1.size(); ++v) EXPECT_NEAR(g1[v], g3[v], 1e-14);
  EXPECT_EQ(g3, full_gradient(obj, x, 3));
}

TEST(Objectives, CoordinatePartialMatchesFullGradient) {
  const auto obj = desk::ridge();
  const CoordinateIndex index(obj);
  std::mt19937_64 rng(4);
  const auto x = desk::random_point(obj.dim(), rng);
  const auto g = full_gradient(obj, x);
  std::vector<double> xs(obj.max_support()), gs(obj.max_support());
  for (index_t v = 0; v < obj.dim(); ++v) EXPECT_NEAR(coordinate_partial(obj, index, v, x, xs, gs), g[v], 1e-13);
}

TEST(Reference, RidgeMatchesNormalEquations) {
  const auto data = desk::regression(100, 20, 3, LabelModel::linear, 1.0, 7);
  const LeastSquaresObjective obj(data);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(100, 20);
  Eigen::VectorXd b(100);
  for (std::size_t i = 0; i < 100; ++i) {
    b(i) = data.labels[i];
    for (std::size_t k = 0; k < data.rows[i].nnz(); ++k) A(i, data.rows[i].indices()[k]) = data.rows[i].values()[k];
  }
  Eigen::MatrixXd H = A.transpose() * A / 100.0;
  for (int v = 0; v < 20; ++v) {
    if (obj.weights().covered(static_cast<index_t>(v))) H(v, v) += 1.0;
    else H(v, v) = 1.0;
  }
  const Eigen::VectorXd xs = H.colPivHouseholderQr().solve(A.transpose() * b / 100.0);
  const auto ref = solve_reference(obj);
  for (int v = 0; v < 20; ++v) EXPECT_NEAR(ref.x[v], xs(v), 1e-9);
  EXPECT_TRUE(ref.converged);
}

TEST(Reference, LogisticAndVertexCoverStationary) {
  const auto lg = desk::logistic();
  const auto r1 = solve_reference(lg);
  EXPECT_TRUE(r1.converged);
  EXPECT_LT(r1.grad_norm, 1e-9);
  const auto vc = desk::vertex_cover(true);
  const auto r2 = solve_reference(vc);
  EXPECT_TRUE(r2.converged);
  for (double v : r2.x) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Constants, GradientBoundCoversBall) {
  const auto obj = desk::logistic();
  const auto ref = solve_reference(obj);
  const auto c = problem_constants(obj, ref.x, 1.0);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    auto x = desk::random_point(obj.dim(), rng);
    const double r = std::sqrt(sq_distance(x, std::vector<double>(obj.dim(), 0.0)));
    for (std::size_t v = 0; v < x.size(); ++v) x[v] = ref.x[v] + x[v] / r;
    for (std::size_t i = 0; i < obj.num_terms(); ++i) {
      EXPECT_LE(std::sqrt(squared_norm(desk::dense_term_gradient(obj, i, x))), c.M * (1.0 + 1e-12));
    }
  }
}
