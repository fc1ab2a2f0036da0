#pragma once

// Statistics of the term/coordinate bipartite graph and of the conflict
// graph between terms (two terms conflict when their hyperedges share a
// coordinate).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "asyncopt/model_core.hpp"

namespace asyncopt {

/// Term -> coordinate adjacency plus the inverted coordinate -> term index.
class BipartiteGraph {
 public:
  BipartiteGraph(std::span<const Hyperedge> edges, std::size_t d) : d_(d) {
    if (edges.empty()) throw std::invalid_argument("bipartite graph needs at least one term");
    validate_hyperedges(edges, d);
    left_.resize(edges.size());
    for (const auto& e : edges) left_[e.id] = e.coords;
    right_.resize(d);
    for (std::size_t i = 0; i < left_.size(); ++i) {
      for (index_t v : left_[i]) right_[v].push_back(i);
    }
  }

  std::size_t num_terms() const noexcept { return left_.size(); }
  std::size_t dim() const noexcept { return d_; }
  std::span<const index_t> coords_of(std::size_t term) const { return left_[term]; }
  std::span<const std::size_t> terms_of(index_t v) const { return right_[v]; }

 private:
  std::size_t d_;
  std::vector<std::vector<index_t>> left_;
  std::vector<std::vector<std::size_t>> right_;
};

struct ConflictStats {
  std::size_t n = 0;
  std::size_t d = 0;
  double avg_conflict_degree = 0.0;   // mean conflict degree over terms
  std::size_t max_conflict_degree = 0;
  std::size_t max_left_degree = 0;    // largest hyperedge
  std::size_t max_right_degree = 0;   // most shared coordinate
  std::vector<std::size_t> degrees;   // conflict degree per term
};

/// Conflict degrees via the inverted index with a per-term stamp array;
/// cost is sum over coordinates of deg(v)^2 rather than n^2.
inline ConflictStats conflict_stats(std::span<const Hyperedge> edges, std::size_t d) {
  const BipartiteGraph g(edges, d);
  const std::size_t n = g.num_terms();
  ConflictStats s;
  s.n = n;
  s.d = d;
  s.degrees.assign(n, 0);
  std::vector<std::size_t> stamp(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < n; ++i) {
    stamp[i] = i;
    std::size_t deg = 0;
    for (index_t v : g.coords_of(i)) {
      for (std::size_t j : g.terms_of(v)) {
        if (stamp[j] != i) {
          stamp[j] = i;
          ++deg;
        }
      }
    }
    s.degrees[i] = deg;
    s.max_conflict_degree = std::max(s.max_conflict_degree, deg);
    s.max_left_degree = std::max(s.max_left_degree, g.coords_of(i).size());
  }
  for (std::size_t v = 0; v < d; ++v) {
    s.max_right_degree = std::max(s.max_right_degree, g.terms_of(static_cast<index_t>(v)).size());
  }
  double total = 0.0;
  for (std::size_t deg : s.degrees) total += static_cast<double>(deg);
  s.avg_conflict_degree = total / static_cast<double>(n);
  return s;
}

/// p_v = (#hyperedges containing v) / n and the diagonal of D = diag(1/p_v).
/// Coordinates no hyperedge touches are listed in `uncovered` and carry
/// d_inv = 0; they are outside the optimization variable space.
struct CoordinateWeights {
  std::vector<double> p;
  std::vector<double> d_inv;
  std::vector<index_t> uncovered;

  bool covered(index_t v) const { return p[v] > 0.0; }
};

inline CoordinateWeights coordinate_weights(std::span<const Hyperedge> edges, std::size_t d) {
  if (edges.empty()) throw std::invalid_argument("coordinate_weights needs at least one term");
  validate_hyperedges(edges, d);
  std::vector<std::size_t> count(d, 0);
  for (const auto& e : edges) {
    for (index_t v : e.coords) ++count[v];
  }
  const double n = static_cast<double>(edges.size());
  CoordinateWeights w;
  w.p.resize(d);
  w.d_inv.resize(d);
  for (std::size_t v = 0; v < d; ++v) {
    w.p[v] = static_cast<double>(count[v]) / n;
    if (count[v] == 0) {
      w.d_inv[v] = 0.0;
      w.uncovered.push_back(static_cast<index_t>(v));
    } else {
      w.d_inv[v] = n / static_cast<double>(count[v]);
    }
  }
  return w;
}

/// Probability that two hyperedges drawn uniformly with replacement
/// intersect, bounded by 2 * avg conflict degree / n (capped at 1).
inline double intersection_probability_bound(const ConflictStats& stats, std::size_t n) {
  if (n == 0) throw std::invalid_argument("intersection_probability_bound: n must be positive");
  return std::min(1.0, 2.0 * stats.avg_conflict_degree / static_cast<double>(n));
}

struct TauBounds {
  double this_work = 0.0;  // n / avg conflict degree
  double prior = 0.0;      // (n / (max right degree * max left degree^2))^(1/4)
};

inline TauBounds tau_bound_comparison(const ConflictStats& stats, std::size_t n) {
  if (n == 0 || stats.max_left_degree == 0 || stats.max_right_degree == 0) {
    throw std::invalid_argument("tau_bound_comparison: degrees must be positive");
  }
  TauBounds b;
  b.this_work = stats.avg_conflict_degree > 0.0
                    ? static_cast<double>(n) / stats.avg_conflict_degree
                    : std::numeric_limits<double>::infinity();
  const double rl2 = static_cast<double>(stats.max_right_degree) *
                     static_cast<double>(stats.max_left_degree) *
                     static_cast<double>(stats.max_left_degree);
  b.prior = std::pow(static_cast<double>(n) / rl2, 0.25);
  return b;
}

/// Old-to-new coordinate map that drops uncovered coordinates.
struct CoordinateRemap {
  std::size_t old_dim = 0;
  std::size_t new_dim = 0;
  std::vector<std::int64_t> to_new;   // -1 for dropped coordinates
  std::vector<index_t> to_old;

  static CoordinateRemap from_weights(const CoordinateWeights& w) {
    CoordinateRemap r;
    r.old_dim = w.p.size();
    r.to_new.assign(r.old_dim, -1);
    for (std::size_t v = 0; v < r.old_dim; ++v) {
      if (w.p[v] > 0.0) {
        r.to_new[v] = static_cast<std::int64_t>(r.to_old.size());
        r.to_old.push_back(static_cast<index_t>(v));
      }
    }
    r.new_dim = r.to_old.size();
    return r;
  }

  bool identity() const noexcept { return new_dim == old_dim; }
};

}  // namespace asyncopt
