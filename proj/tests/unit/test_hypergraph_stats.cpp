#include <gtest/gtest.h>

#include "support/desk.hpp"

using namespace asyncopt;

TEST(ConflictStats, MatchesPairwiseOracle) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 1 + rng() % 120;
    const std::size_t d = 1 + rng() % 60;
    const auto edges = desk::random_hypergraph(n, d, 5, rng);
    const auto hs = desk::to_hyperedges(edges);
    const auto st = conflict_stats(hs, d);
    const auto oracle = desk::naive_stats(edges, d);
    EXPECT_EQ(st.n, n);
    EXPECT_EQ(st.degrees, oracle.conflict_degree);
    EXPECT_NEAR(st.avg_conflict_degree, oracle.avg_conflict, 1e-12);
    EXPECT_EQ(st.max_conflict_degree, oracle.max_conflict);
    EXPECT_EQ(st.max_left_degree, oracle.max_left);
    EXPECT_EQ(st.max_right_degree, oracle.max_right);
    EXPECT_LE(st.avg_conflict_degree, static_cast<double>(st.max_conflict_degree));
    EXPECT_LE(st.max_conflict_degree, n - 1);
    EXPECT_LE(st.max_left_degree, d);
    EXPECT_LE(st.max_right_degree, n);
  }
}

TEST(ConflictStats, DisjointEdgesHaveNoConflicts) {
  std::vector<Hyperedge> e{{0, {0}}, {1, {1}}, {2, {2, 3}}};
  const auto st = conflict_stats(e, 4);
  EXPECT_EQ(st.avg_conflict_degree, 0.0);
  const auto tb = tau_bound_comparison(st, 3);
  EXPECT_TRUE(std::isinf(tb.this_work));
}

TEST(ConflictStats, StarGraph) {
  std::vector<Hyperedge> e{{0, {0, 1}}, {1, {0, 2}}, {2, {0, 3}}};
  const auto st = conflict_stats(e, 4);
  EXPECT_EQ(st.avg_conflict_degree, 2.0);
  EXPECT_EQ(st.max_right_degree, 3u);
  EXPECT_DOUBLE_EQ(intersection_probability_bound(st, 3), 1.0);
}

TEST(CoordinateWeights, CountingIdentity) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng() % 80;
    const std::size_t d = 1 + rng() % 40;
    const auto edges = desk::random_hypergraph(n, d, 4, rng);
    const auto w = coordinate_weights(desk::to_hyperedges(edges), d);
    for (std::size_t v = 0; v < d; ++v) {
      std::size_t count = 0;
      for (const auto& e : edges) count += std::count(e.begin(), e.end(), static_cast<index_t>(v));
      EXPECT_EQ(w.p[v], static_cast<double>(count) / static_cast<double>(n));
      if (count == 0) {
        EXPECT_NE(std::find(w.uncovered.begin(), w.uncovered.end(), v), w.uncovered.end());
        EXPECT_EQ(w.d_inv[v], 0.0);
      } else {
        EXPECT_DOUBLE_EQ(w.d_inv[v] * w.p[v], 1.0);
      }
    }
  }
}

TEST(CoordinateRemap, DropsUncovered) {
  std::vector<Hyperedge> e{{0, {0, 3}}, {1, {3}}};
  const auto w = coordinate_weights(e, 5);
  const auto r = CoordinateRemap::from_weights(w);
  EXPECT_EQ(r.new_dim, 2u);
  EXPECT_EQ(r.to_old, (std::vector<index_t>{0, 3}));
  EXPECT_EQ(r.to_new[1], -1);
  EXPECT_EQ(r.to_new[3], 1);
  EXPECT_FALSE(r.identity());
}

TEST(TauBounds, DegreeInequality) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng() % 150;
    const std::size_t d = 1 + rng() % 50;
    const auto st = conflict_stats(desk::to_hyperedges(desk::random_hypergraph(n, d, 6, rng)), d);
    const double r = static_cast<double>(st.max_right_degree);
    const double l = static_cast<double>(st.max_left_degree);
    EXPECT_GE(r * l * l, l * static_cast<double>(st.max_conflict_degree));
  }
}

TEST(TauBounds, KnownValues) {
  ConflictStats st;
  st.n = 16;
  st.avg_conflict_degree = 2.0;
  st.max_left_degree = 1;
  st.max_right_degree = 1;
  const auto b = tau_bound_comparison(st, 16);
  EXPECT_DOUBLE_EQ(b.this_work, 8.0);
  EXPECT_DOUBLE_EQ(b.prior, 2.0);
}
