#pragma once

// Small instances and brute-force oracles shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "asyncopt/asyncopt.hpp"

namespace desk {

using namespace asyncopt;

inline RegressionDataset regression(std::size_t n, std::size_t d, std::size_t nnz, LabelModel model, double lambda,
                                    std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.d = d;
  spec.nnz = nnz;
  spec.label_model = model;
  spec.seed = seed;
  auto data = gen_synthetic(spec);
  data.l2_reg = lambda;
  return data;
}

inline LeastSquaresObjective ridge(std::uint64_t seed = 7) {
  return LeastSquaresObjective(regression(100, 20, 3, LabelModel::linear, 1.0, seed));
}

inline LogisticObjective logistic(std::uint64_t seed = 11) {
  return LogisticObjective(regression(200, 30, 5, LabelModel::logistic, 0.1, seed));
}

inline VertexCoverProblem random_graph(std::size_t vertices, std::size_t edges, double beta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<index_t> pick(0, static_cast<index_t>(vertices - 1));
  std::set<std::pair<index_t, index_t>> seen;
  VertexCoverProblem p;
  p.num_vertices = vertices;
  p.beta = beta;
  while (p.edges.size() < edges) {
    index_t u = pick(rng);
    index_t v = pick(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (seen.insert({u, v}).second) p.edges.emplace_back(u, v);
  }
  return p;
}

/// 20 vertices, 30 edges, beta = 1, unconstrained so the simulator accepts it.
inline VertexCoverObjective vertex_cover(bool constrained = false, std::uint64_t seed = 3) {
  return VertexCoverObjective(random_graph(20, 30, 1.0, seed), constrained);
}

inline std::vector<double> random_point(std::size_t d, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(d);
  for (auto& v : x) v = u(rng);
  return x;
}

/// f_i(x) = (c/2)(x_{i mod d} - 1)^2: n terms on singleton supports. A
/// negative c makes every solver diverge, which exercises the guards.
class Separable {
 public:
  Separable(std::size_t n, std::size_t d, double c) : n_(n), d_(d), c_(c), idx_(n) {
    for (std::size_t i = 0; i < n; ++i) idx_[i] = static_cast<index_t>(i % d);
  }
  std::size_t num_terms() const { return n_; }
  std::size_t dim() const { return d_; }
  std::span<const index_t> support(std::size_t i) const { return {&idx_[i], 1}; }
  std::size_t max_support() const { return 1; }
  Box box() const { return {}; }
  double term_value(std::size_t, std::span<const double> xs) const { return 0.5 * c_ * (xs[0] - 1.0) * (xs[0] - 1.0); }
  void term_gradient(std::size_t, std::span<const double> xs, std::span<double> out) const { out[0] = c_ * (xs[0] - 1.0); }
  double term_smoothness(std::size_t) const { return std::abs(c_); }
  double smoothness() const { return std::abs(c_); }
  double strong_convexity() const { return c_ > 0.0 ? c_ / static_cast<double>(d_) : 0.0; }

 private:
  std::size_t n_, d_;
  double c_;
  std::vector<index_t> idx_;
};

/// Full gradient by central differences of the full objective.
template <DecomposableObjective Obj>
std::vector<double> fd_gradient(const Obj& obj, std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t v = 0; v < x.size(); ++v) {
    const double keep = x[v];
    x[v] = keep + h;
    const double fp = full_value(obj, x);
    x[v] = keep - h;
    const double fm = full_value(obj, x);
    x[v] = keep;
    g[v] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Dense gradient of a single term, assembled through the term_gradient API
/// but indexed by a naive linear scan of the support.
template <DecomposableObjective Obj>
std::vector<double> dense_term_gradient(const Obj& obj, std::size_t i, std::span<const double> x) {
  const auto sup = obj.support(i);
  std::vector<double> xs(sup.size());
  std::vector<double> gs(sup.size());
  for (std::size_t p = 0; p < sup.size(); ++p) xs[p] = x[sup[p]];
  obj.term_gradient(i, xs, gs);
  std::vector<double> g(obj.dim(), 0.0);
  for (std::size_t p = 0; p < sup.size(); ++p) g[sup[p]] += gs[p];
  return g;
}

/// O(n^2) conflict statistics by pairwise set intersection.
struct NaiveStats {
  double avg_conflict = 0.0;
  std::size_t max_conflict = 0;
  std::size_t max_left = 0;
  std::size_t max_right = 0;
  std::vector<std::size_t> conflict_degree;
};

inline NaiveStats naive_stats(const std::vector<std::vector<index_t>>& edges, std::size_t d) {
  NaiveStats s;
  const std::size_t n = edges.size();
  s.conflict_degree.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    s.max_left = std::max(s.max_left, edges[i].size());
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      bool meet = false;
      for (index_t a : edges[i]) {
        for (index_t b : edges[j]) meet = meet || a == b;
      }
      if (meet) ++s.conflict_degree[i];
    }
    s.max_conflict = std::max(s.max_conflict, s.conflict_degree[i]);
    s.avg_conflict += static_cast<double>(s.conflict_degree[i]);
  }
  s.avg_conflict /= static_cast<double>(n);
  for (std::size_t v = 0; v < d; ++v) {
    std::size_t c = 0;
    for (const auto& e : edges) {
      for (index_t a : e) c += a == v;
    }
    s.max_right = std::max(s.max_right, c);
  }
  return s;
}

inline std::vector<std::vector<index_t>> random_hypergraph(std::size_t n, std::size_t d, std::size_t max_size,
                                                          std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> size(1, max_size);
  std::uniform_int_distribution<index_t> coord(0, static_cast<index_t>(d - 1));
  std::vector<std::vector<index_t>> out(n);
  for (auto& e : out) {
    std::set<index_t> s;
    const std::size_t k = std::min(size(rng), d);
    while (s.size() < k) s.insert(coord(rng));
    e.assign(s.begin(), s.end());
  }
  return out;
}

inline std::vector<Hyperedge> to_hyperedges(const std::vector<std::vector<index_t>>& edges) {
  std::vector<Hyperedge> out;
  for (std::size_t i = 0; i < edges.size(); ++i) out.push_back(Hyperedge{static_cast<index_t>(i), edges[i]});
  return out;
}

/// Upper tail of the chi-square distribution, Wilson-Hilferty approximation.
inline double chi_square_upper_tail(double x, double df) {
  const double z = (std::cbrt(x / df) - (1.0 - 2.0 / (9.0 * df))) / std::sqrt(2.0 / (9.0 * df));
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace desk
