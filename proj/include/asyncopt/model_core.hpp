#pragma once

// Core value types shared by every solver: sparse vectors, hyperedges,
// problem constants and the coordinate-wise box used for projection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace asyncopt {

using index_t = std::uint32_t;

/// Sorted (index, value) pairs over a fixed dimension. Explicit zeros are
/// dropped at construction so that the support equals the nonzero pattern.
class SparseVector {
 public:
  SparseVector() = default;

  explicit SparseVector(std::size_t dim) : dim_(dim) {}

  SparseVector(std::size_t dim, std::vector<index_t> indices, std::vector<double> values)
      : dim_(dim) {
    if (indices.size() != values.size()) {
      throw std::invalid_argument("SparseVector: indices/values length mismatch");
    }
    indices_.reserve(indices.size());
    values_.reserve(values.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= dim) {
        throw std::invalid_argument("SparseVector: index " + std::to_string(indices[k]) +
                                    " out of range for dim " + std::to_string(dim));
      }
      if (k > 0 && indices[k] <= indices[k - 1]) {
        throw std::invalid_argument("SparseVector: indices must be strictly increasing");
      }
      if (values[k] != 0.0) {
        indices_.push_back(indices[k]);
        values_.push_back(values[k]);
      }
    }
  }

  SparseVector(std::size_t dim, std::initializer_list<std::pair<index_t, double>> entries)
      : SparseVector(dim, split_indices(entries), split_values(entries)) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::span<const index_t> indices() const noexcept { return indices_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Value at coordinate v (zero outside the support).
  double operator[](index_t v) const {
    auto it = std::lower_bound(indices_.begin(), indices_.end(), v);
    if (it == indices_.end() || *it != v) return 0.0;
    return values_[static_cast<std::size_t>(it - indices_.begin())];
  }

  double squared_norm() const noexcept {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  static std::vector<index_t> split_indices(std::initializer_list<std::pair<index_t, double>> e) {
    std::vector<index_t> out;
    for (const auto& p : e) out.push_back(p.first);
    return out;
  }
  static std::vector<double> split_values(std::initializer_list<std::pair<index_t, double>> e) {
    std::vector<double> out;
    for (const auto& p : e) out.push_back(p.second);
    return out;
  }

  std::size_t dim_ = 0;
  std::vector<index_t> indices_;
  std::vector<double> values_;
};

/// The coordinate set a single term depends on.
struct Hyperedge {
  std::size_t id = 0;
  std::vector<index_t> coords;  // sorted, non-empty
};

/// Checks hyperedge invariants: non-empty, sorted, in range, unique ids.
inline void validate_hyperedges(std::span<const Hyperedge> edges, std::size_t d) {
  std::vector<bool> seen(edges.size(), false);
  for (const auto& e : edges) {
    if (e.coords.empty()) throw std::invalid_argument("hyperedge " + std::to_string(e.id) + " is empty");
    if (e.id >= edges.size() || seen[e.id]) {
      throw std::invalid_argument("hyperedge ids must be unique in 0..n-1");
    }
    seen[e.id] = true;
    for (std::size_t k = 0; k < e.coords.size(); ++k) {
      if (e.coords[k] >= d) throw std::invalid_argument("hyperedge coordinate out of range");
      if (k > 0 && e.coords[k] <= e.coords[k - 1]) {
        throw std::invalid_argument("hyperedge coordinates must be strictly increasing");
      }
    }
  }
}

/// L: smoothness (per term and for f); m: strong convexity of f;
/// M: uniform bound on the norm of the stochastic gradients.
struct ProblemConstants {
  double L = 0.0;
  double m = 0.0;
  double kappa = 0.0;
  double M = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;

  static ProblemConstants make(double L, double m, double M, std::size_t n, std::size_t d) {
    if (!(m > 0.0)) throw std::invalid_argument("strong convexity constant m must be positive");
    if (!(L >= m)) throw std::invalid_argument("smoothness L must be at least m");
    if (!(M > 0.0)) throw std::invalid_argument("gradient bound M must be positive");
    return ProblemConstants{L, m, L / m, M, n, d};
  }
};

/// Symmetric l-infinity ball; radius == infinity means unbounded.
struct LinfBall {
  double radius = std::numeric_limits<double>::infinity();

  static LinfBall unbounded() { return {}; }
  static LinfBall of_radius(double r) {
    if (!(r > 0.0)) throw std::invalid_argument("l-infinity radius must be positive");
    return {r};
  }
  bool bounded() const noexcept { return std::isfinite(radius); }
};

/// Coordinate-wise interval constraint [lower, upper]. Objectives with a
/// natural box (vertex cover: [0,1]) carry one; LinfBall maps to [-r, r].
struct Box {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  static Box from(LinfBall ball) { return {-ball.radius, ball.radius}; }
  bool unbounded() const noexcept { return std::isinf(lower) && std::isinf(upper); }
  double clamp(double v) const noexcept { return std::min(std::max(v, lower), upper); }

  /// Intersection of two boxes.
  Box intersect(const Box& o) const noexcept {
    return {std::max(lower, o.lower), std::min(upper, o.upper)};
  }
};

/// x[v] += alpha * g[v] on the support of g. `Dense` is any random-access
/// container with size() and operator[] (instrumented wrappers included).
template <class Dense>
void sparse_axpy(Dense& x, double alpha, const SparseVector& g) {
  if (g.dim() != static_cast<std::size_t>(x.size())) {
    throw std::invalid_argument("sparse_axpy: dimension mismatch");
  }
  const auto idx = g.indices();
  const auto val = g.values();
  for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] += alpha * val[k];
}

inline std::vector<double> project_linf(std::vector<double> x, LinfBall ball) {
  if (!ball.bounded()) return x;
  for (double& v : x) v = std::clamp(v, -ball.radius, ball.radius);
  return x;
}

inline double sq_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("sq_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) {
    const double diff = x[v] - y[v];
    s += diff * diff;
  }
  return s;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) s += x[v] * y[v];
  return s;
}

inline double squared_norm(std::span<const double> x) { return dot(x, x); }

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace asyncopt
