#pragma once

// Decomposable objectives f(x) = (1/n) * sum_i f_i(x) where each term f_i
// only reads the coordinates of its hyperedge. Term evaluation takes the
// values of x gathered on that hyperedge (in support order), which is
// exactly what an asynchronous worker reads from shared memory.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "asyncopt/hypergraph_stats.hpp"
#include "asyncopt/model_core.hpp"

namespace asyncopt {

// Data -----------------------------------------------------------------------

struct RegressionDataset {
  std::size_t d = 0;
  std::vector<SparseVector> rows;
  std::vector<double> labels;
  double l2_reg = 0.0;

  std::size_t size() const noexcept { return rows.size(); }

  void validate() const {
    if (rows.empty()) throw std::invalid_argument("dataset has no rows");
    if (labels.size() != rows.size()) throw std::invalid_argument("labels length must equal row count");
    if (!(l2_reg >= 0.0)) throw std::invalid_argument("l2_reg must be non-negative");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].empty()) throw std::invalid_argument("row " + std::to_string(i) + " has no nonzeros");
      if (rows[i].dim() != d) throw std::invalid_argument("row " + std::to_string(i) + " has wrong dimension");
    }
  }
};

struct VertexCoverProblem {
  std::size_t num_vertices = 0;
  std::vector<std::pair<index_t, index_t>> edges;
  double beta = 1.0;

  std::size_t variable_dim() const noexcept { return num_vertices + edges.size(); }
};

// Objective concept ----------------------------------------------------------

template <class O>
concept DecomposableObjective = requires(const O& o, std::size_t i, std::span<const double> xs,
                                         std::span<double> out) {
  { o.num_terms() } -> std::convertible_to<std::size_t>;
  { o.dim() } -> std::convertible_to<std::size_t>;
  { o.support(i) } -> std::same_as<std::span<const index_t>>;
  { o.term_value(i, xs) } -> std::convertible_to<double>;
  o.term_gradient(i, xs, out);
  { o.term_smoothness(i) } -> std::convertible_to<double>;
  { o.smoothness() } -> std::convertible_to<double>;
  { o.strong_convexity() } -> std::convertible_to<double>;
  { o.box() } -> std::same_as<Box>;
  { o.max_support() } -> std::convertible_to<std::size_t>;
};

namespace detail {

/// Compressed hyperedge storage shared by the concrete objectives.
class SupportTable {
 public:
  void add(std::span<const index_t> coords) {
    cols_.insert(cols_.end(), coords.begin(), coords.end());
    ptr_.push_back(cols_.size());
    max_ = std::max(max_, coords.size());
  }
  std::span<const index_t> operator[](std::size_t i) const {
    return {cols_.data() + ptr_[i], ptr_[i + 1] - ptr_[i]};
  }
  std::size_t size() const noexcept { return ptr_.size() - 1; }
  std::size_t max_size() const noexcept { return max_; }
  std::size_t begin_of(std::size_t i) const noexcept { return ptr_[i]; }

 private:
  std::vector<std::size_t> ptr_{0};
  std::vector<index_t> cols_;
  std::size_t max_ = 0;
};

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

struct SquaredLoss {
  static constexpr const char* name = "linreg";
  static constexpr double curvature = 1.0;
  static double value(double margin, double label) {
    const double r = margin - label;
    return 0.5 * r * r;
  }
  static double derivative(double margin, double label) { return margin - label; }
};

struct LogisticLoss {
  static constexpr const char* name = "logreg";
  static constexpr double curvature = 0.25;
  static double value(double margin, double label) { return detail::softplus(-label * margin); }
  static double derivative(double margin, double label) { return -label * detail::sigmoid(-label * margin); }
};

/// Generalized linear model term: loss(<a_i, w>, b_i) plus the l2 penalty
/// spread over the term's support with weights 1/p_v, so that averaging the
/// terms reconstructs (lambda/2)*||w||^2 on covered coordinates.
template <class Loss>
class GlmObjective {
 public:
  explicit GlmObjective(const RegressionDataset& data) : d_(data.d), lambda_(data.l2_reg) {
    data.validate();
    std::vector<Hyperedge> edges;
    edges.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto idx = data.rows[i].indices();
      const auto val = data.rows[i].values();
      supports_.add(idx);
      vals_.insert(vals_.end(), val.begin(), val.end());
      edges.push_back({i, {idx.begin(), idx.end()}});
    }
    labels_ = data.labels;
    weights_ = coordinate_weights(edges, d_);
    reg_.resize(d_);
    for (std::size_t v = 0; v < d_; ++v) reg_[v] = lambda_ * weights_.d_inv[v];

    term_L_.resize(num_terms());
    for (std::size_t i = 0; i < num_terms(); ++i) {
      double a2 = 0.0;
      double rmax = 0.0;
      const auto sup = support(i);
      for (std::size_t k = 0; k < sup.size(); ++k) {
        a2 += value_at(i, k) * value_at(i, k);
        rmax = std::max(rmax, reg_[sup[k]]);
      }
      term_L_[i] = Loss::curvature * a2 + rmax;
      L_ = std::max(L_, term_L_[i]);
    }
    m_ = lambda_;
  }

  std::size_t num_terms() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return d_; }
  std::span<const index_t> support(std::size_t i) const { return supports_[i]; }
  std::size_t max_support() const noexcept { return supports_.max_size(); }
  Box box() const noexcept { return {}; }
  double lambda() const noexcept { return lambda_; }
  const CoordinateWeights& weights() const noexcept { return weights_; }
  double label(std::size_t i) const { return labels_[i]; }
  std::span<const double> row_values(std::size_t i) const {
    return {vals_.data() + supports_.begin_of(i), support(i).size()};
  }

  double term_value(std::size_t i, std::span<const double> xs) const {
    const auto sup = support(i);
    const double* a = vals_.data() + supports_.begin_of(i);
    double margin = 0.0;
    double reg = 0.0;
    for (std::size_t k = 0; k < sup.size(); ++k) {
      margin += a[k] * xs[k];
      reg += reg_[sup[k]] * xs[k] * xs[k];
    }
    return Loss::value(margin, labels_[i]) + 0.5 * reg;
  }

  void term_gradient(std::size_t i, std::span<const double> xs, std::span<double> out) const {
    const auto sup = support(i);
    const double* a = vals_.data() + supports_.begin_of(i);
    double margin = 0.0;
    for (std::size_t k = 0; k < sup.size(); ++k) margin += a[k] * xs[k];
    const double dl = Loss::derivative(margin, labels_[i]);
    for (std::size_t k = 0; k < sup.size(); ++k) out[k] = dl * a[k] + reg_[sup[k]] * xs[k];
  }

  double term_smoothness(std::size_t i) const { return term_L_[i]; }
  double smoothness() const noexcept { return L_; }
  double strong_convexity() const noexcept { return m_; }

 protected:
  double value_at(std::size_t i, std::size_t k) const { return vals_[supports_.begin_of(i) + k]; }
  void set_strong_convexity(double m) { m_ = m; }

  std::size_t d_;
  double lambda_;
  detail::SupportTable supports_;
  std::vector<double> vals_;
  std::vector<double> labels_;
  std::vector<double> reg_;
  std::vector<double> term_L_;
  CoordinateWeights weights_;
  double L_ = 0.0;
  double m_ = 0.0;
};

class LeastSquaresObjective : public GlmObjective<SquaredLoss> {
 public:
  explicit LeastSquaresObjective(const RegressionDataset& data) : GlmObjective(data) {
    if (lambda_ == 0.0) set_strong_convexity(min_gram_eigenvalue(data));
  }

 private:
  // Without regularization strong convexity comes from A^T A / n alone.
  static double min_gram_eigenvalue(const RegressionDataset& data) {
    if (data.d > 4096) {
      throw std::invalid_argument("least squares with l2_reg = 0: dimension too large to certify strong convexity");
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.d),
                                                 static_cast<Eigen::Index>(data.d));
    for (const auto& row : data.rows) {
      const auto idx = row.indices();
      const auto val = row.values();
      for (std::size_t p = 0; p < idx.size(); ++p) {
        for (std::size_t q = 0; q < idx.size(); ++q) gram(idx[p], idx[q]) += val[p] * val[q];
      }
    }
    gram /= static_cast<double>(data.size());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 1e-12 * std::max(1.0, hi))) {
      throw std::invalid_argument("least squares with l2_reg = 0 and rank-deficient data: strong convexity violated");
    }
    return lo;
  }
};

class LogisticObjective : public GlmObjective<LogisticLoss> {
 public:
  explicit LogisticObjective(const RegressionDataset& data) : GlmObjective(check_labels(data)) {}

 private:
  static const RegressionDataset& check_labels(const RegressionDataset& data) {
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (data.labels[i] != 1.0 && data.labels[i] != -1.0) {
        throw std::invalid_argument("logistic labels must be -1 or +1 (row " + std::to_string(i) + ")");
      }
    }
    return data;
  }
};

/// Quadratic penalty relaxation of vertex cover over variables
/// (x_v for vertices, then x_e for edges). One term per edge on
/// {u, v, |V| + edge}; per-vertex pieces are split over incident edges by
/// inverse degree; isolated vertices get a singleton term. The sum of the
/// terms is the relaxation objective, so f is that objective divided by n.
class VertexCoverObjective {
 public:
  explicit VertexCoverObjective(const VertexCoverProblem& p, bool constrained = true)
      : V_(p.num_vertices), beta_(p.beta), constrained_(constrained) {
    if (!(beta_ > 0.0)) throw std::invalid_argument("vertex cover: beta must be positive");
    if (V_ == 0) throw std::invalid_argument("vertex cover: graph has no vertices");
    degree_.assign(V_, 0);
    for (const auto& [u, v] : p.edges) {
      if (u >= V_ || v >= V_) throw std::invalid_argument("vertex cover: edge references unknown vertex");
      if (u == v) throw std::invalid_argument("vertex cover: self-loops are not allowed");
      ++degree_[u];
      ++degree_[v];
    }
    E_ = p.edges.size();
    for (std::size_t k = 0; k < E_; ++k) {
      auto [u, v] = p.edges[k];
      if (u > v) std::swap(u, v);
      const index_t e = static_cast<index_t>(V_ + k);
      const index_t coords[3] = {u, v, e};
      supports_.add(coords);
      const double vert = std::max(1.0 / (beta_ * degree_[u]), 1.0 / (beta_ * degree_[v]));
      term_L_.push_back(3.0 * beta_ + std::max(2.0, vert));
    }
    for (std::size_t v = 0; v < V_; ++v) {
      if (degree_[v] == 0) {
        const index_t coords[1] = {static_cast<index_t>(v)};
        supports_.add(coords);
        term_L_.push_back(1.0 / beta_);
      }
    }
    for (double l : term_L_) L_ = std::max(L_, l);
    m_ = (E_ > 0 ? std::min(1.0 / beta_, 2.0) : 1.0 / beta_) / static_cast<double>(num_terms());
  }

  std::size_t num_terms() const noexcept { return supports_.size(); }
  std::size_t dim() const noexcept { return V_ + E_; }
  std::size_t num_vertices() const noexcept { return V_; }
  std::size_t num_edges() const noexcept { return E_; }
  double beta() const noexcept { return beta_; }
  std::span<const index_t> support(std::size_t i) const { return supports_[i]; }
  std::size_t max_support() const noexcept { return supports_.max_size(); }
  Box box() const noexcept { return constrained_ ? Box{0.0, 1.0} : Box{}; }

  double term_value(std::size_t i, std::span<const double> xs) const {
    const auto sup = support(i);
    if (sup.size() == 1) return vertex_piece(xs[0], 1.0);
    const double r = xs[0] + xs[1] - xs[2] - 1.0;
    return 0.5 * beta_ * r * r + xs[2] * xs[2] + vertex_piece(xs[0], degree_[sup[0]]) +
           vertex_piece(xs[1], degree_[sup[1]]);
  }

  void term_gradient(std::size_t i, std::span<const double> xs, std::span<double> out) const {
    const auto sup = support(i);
    if (sup.size() == 1) {
      out[0] = 1.0 + xs[0] / beta_;
      return;
    }
    const double r = beta_ * (xs[0] + xs[1] - xs[2] - 1.0);
    out[0] = r + (1.0 + xs[0] / beta_) / static_cast<double>(degree_[sup[0]]);
    out[1] = r + (1.0 + xs[1] / beta_) / static_cast<double>(degree_[sup[1]]);
    out[2] = -r + 2.0 * xs[2];
  }

  double term_smoothness(std::size_t i) const { return term_L_[i]; }
  double smoothness() const noexcept { return L_; }
  double strong_convexity() const noexcept { return m_; }

 private:
  double vertex_piece(double x, double deg) const { return (x + x * x / (2.0 * beta_)) / deg; }

  std::size_t V_ = 0;
  std::size_t E_ = 0;
  double beta_;
  bool constrained_;
  std::vector<std::size_t> degree_;
  detail::SupportTable supports_;
  std::vector<double> term_L_;
  double L_ = 0.0;
  double m_ = 0.0;
};

inline LeastSquaresObjective least_squares_objective(const RegressionDataset& data) {
  return LeastSquaresObjective(data);
}
inline LogisticObjective logistic_objective(const RegressionDataset& data) { return LogisticObjective(data); }
inline VertexCoverObjective vertex_cover_objective(const VertexCoverProblem& p, bool constrained = true) {
  return VertexCoverObjective(p, constrained);
}

// Generic helpers ----------------------------------------------------------------

template <DecomposableObjective Obj>
std::vector<Hyperedge> hyperedges(const Obj& obj) {
  std::vector<Hyperedge> out(obj.num_terms());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto s = obj.support(i);
    out[i] = {i, {s.begin(), s.end()}};
  }
  return out;
}

template <DecomposableObjective Obj>
CoordinateWeights coordinate_weights(const Obj& obj) {
  return coordinate_weights(hyperedges(obj), obj.dim());
}

inline void gather(std::span<const double> x, std::span<const index_t> sup, std::span<double> out) {
  for (std::size_t k = 0; k < sup.size(); ++k) out[k] = x[sup[k]];
}

/// Term gradient at a dense point, as a SparseVector over the full dimension.
template <DecomposableObjective Obj>
SparseVector term_gradient(const Obj& obj, std::size_t i, std::span<const double> x) {
  const auto sup = obj.support(i);
  std::vector<double> xs(sup.size());
  std::vector<double> g(sup.size());
  gather(x, sup, xs);
  obj.term_gradient(i, xs, g);
  return SparseVector(obj.dim(), {sup.begin(), sup.end()}, std::move(g));
}

template <DecomposableObjective Obj>
double full_value(const Obj& obj, std::span<const double> x) {
  std::vector<double> xs(obj.max_support());
  double total = 0.0;
  for (std::size_t i = 0; i < obj.num_terms(); ++i) {
    const auto sup = obj.support(i);
    gather(x, sup, xs);
    total += obj.term_value(i, std::span<const double>(xs.data(), sup.size()));
  }
  return total / static_cast<double>(obj.num_terms());
}

/// (1/n) * sum_i grad f_i(x). Terms are split into `threads` contiguous
/// chunks whose partial sums are reduced in chunk order, so the result is a
/// deterministic function of (x, threads).
template <DecomposableObjective Obj>
std::vector<double> full_gradient(const Obj& obj, std::span<const double> x, unsigned threads = 1) {
  const std::size_t n = obj.num_terms();
  const std::size_t d = obj.dim();
  if (x.size() != d) throw std::invalid_argument("full_gradient: dimension mismatch");
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));

  auto accumulate = [&](std::size_t begin, std::size_t end, std::vector<double>& acc) {
    std::vector<double> xs(obj.max_support());
    std::vector<double> g(obj.max_support());
    for (std::size_t i = begin; i < end; ++i) {
      const auto sup = obj.support(i);
      gather(x, sup, xs);
      obj.term_gradient(i, std::span<const double>(xs.data(), sup.size()), std::span<double>(g.data(), sup.size()));
      for (std::size_t k = 0; k < sup.size(); ++k) acc[sup[k]] += g[k];
    }
  };

  std::vector<std::vector<double>> partial(threads, std::vector<double>(d, 0.0));
  if (threads == 1) {
    accumulate(0, n, partial[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = n * t / threads;
      const std::size_t e = n * (t + 1) / threads;
      pool.emplace_back(accumulate, b, e, std::ref(partial[t]));
    }
    for (auto& th : pool) th.join();
  }
  std::vector<double> grad = std::move(partial[0]);
  for (unsigned t = 1; t < threads; ++t) {
    for (std::size_t v = 0; v < d; ++v) grad[v] += partial[t][v];
  }
  const double nn = static_cast<double>(n);
  for (double& g : grad) g /= nn;
  return grad;
}

/// Coordinate -> (term, position in that term's support), plus the union of
/// supports of the terms touching each coordinate (the read set needed to
/// evaluate one partial derivative of f).
class CoordinateIndex {
 public:
  struct Entry {
    std::size_t term;
    std::size_t pos;
  };

  template <DecomposableObjective Obj>
  explicit CoordinateIndex(const Obj& obj) : entries_(obj.dim()), neighborhood_(obj.dim()) {
    for (std::size_t i = 0; i < obj.num_terms(); ++i) {
      const auto sup = obj.support(i);
      for (std::size_t k = 0; k < sup.size(); ++k) entries_[sup[k]].push_back({i, k});
    }
    for (std::size_t v = 0; v < obj.dim(); ++v) {
      auto& nb = neighborhood_[v];
      for (const auto& e : entries_[v]) {
        const auto sup = obj.support(e.term);
        nb.insert(nb.end(), sup.begin(), sup.end());
      }
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
  }

  std::span<const Entry> terms_of(index_t v) const { return entries_[v]; }
  std::span<const index_t> neighborhood(index_t v) const { return neighborhood_[v]; }

 private:
  std::vector<std::vector<Entry>> entries_;
  std::vector<std::vector<index_t>> neighborhood_;
};

/// [grad f(x)]_v evaluated from a dense view of x (only the neighborhood of
/// v is read). `xs` and `g` are scratch of at least max_support().
template <DecomposableObjective Obj>
double coordinate_partial(const Obj& obj, const CoordinateIndex& index, index_t v, std::span<const double> x,
                          std::span<double> xs, std::span<double> g) {
  double acc = 0.0;
  for (const auto& e : index.terms_of(v)) {
    const auto sup = obj.support(e.term);
    gather(x, sup, xs);
    obj.term_gradient(e.term, std::span<const double>(xs.data(), sup.size()), std::span<double>(g.data(), sup.size()));
    acc += g[e.pos];
  }
  return acc / static_cast<double>(obj.num_terms());
}

/// L and m from the objective, M = max_i (||grad f_i(center)|| + L_i * radius):
/// a valid uniform gradient bound on the Euclidean ball of that radius.
template <DecomposableObjective Obj>
ProblemConstants problem_constants(const Obj& obj, std::span<const double> center, double radius) {
  std::vector<double> xs(obj.max_support());
  std::vector<double> g(obj.max_support());
  double M = 0.0;
  for (std::size_t i = 0; i < obj.num_terms(); ++i) {
    const auto sup = obj.support(i);
    gather(center, sup, xs);
    obj.term_gradient(i, std::span<const double>(xs.data(), sup.size()), std::span<double>(g.data(), sup.size()));
    const double gn = std::sqrt(squared_norm(std::span<const double>(g.data(), sup.size())));
    M = std::max(M, gn + obj.term_smoothness(i) * radius);
  }
  return ProblemConstants::make(obj.smoothness(), obj.strong_convexity(), M, obj.num_terms(), obj.dim());
}

// Reference solutions --------------------------------------------------------------

struct ReferenceSolution {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;  // projected gradient norm when a box is active
  std::size_t iterations = 0;
  bool converged = false;
};

struct ReferenceOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
};

namespace detail {

inline double projected_gradient_norm(std::span<const double> x, std::span<const double> grad, const Box& box) {
  double s = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) {
    const double step = x[v] - box.clamp(x[v] - grad[v]);
    s += step * step;
  }
  return std::sqrt(s);
}

/// Projected gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking.
template <DecomposableObjective Obj>
ReferenceSolution descend(const Obj& obj, std::vector<double> x, const ReferenceOptions& opt) {
  const Box box = obj.box();
  for (double& v : x) v = box.clamp(v);
  const std::size_t d = obj.dim();
  ReferenceSolution out;
  std::vector<double> grad = full_gradient(obj, x);
  double fx = full_value(obj, x);
  double step = 1.0 / obj.smoothness();
  std::vector<double> trial(d);
  std::vector<double> prev_x;
  std::vector<double> prev_g;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    out.grad_norm = projected_gradient_norm(x, grad, box);
    out.iterations = it;
    if (out.grad_norm <= opt.tolerance) {
      out.converged = true;
      break;
    }
    if (!prev_x.empty()) {
      double sy = 0.0;
      double ss = 0.0;
      for (std::size_t v = 0; v < d; ++v) {
        const double sv = x[v] - prev_x[v];
        const double yv = grad[v] - prev_g[v];
        sy += sv * yv;
        ss += sv * sv;
      }
      if (sy > 0.0 && std::isfinite(ss / sy)) step = ss / sy;
    }
    double t = step;
    double f_trial = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      double decrease = 0.0;
      for (std::size_t v = 0; v < d; ++v) {
        trial[v] = box.clamp(x[v] - t * grad[v]);
        decrease += grad[v] * (trial[v] - x[v]);
      }
      f_trial = full_value(obj, trial);
      // Near the optimum the Armijo decrease falls below the rounding error of f.
      const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(fx);
      if (f_trial <= fx + 1e-4 * decrease + slack || decrease == 0.0) break;
      t *= 0.5;
    }
    prev_x = x;
    prev_g = grad;
    x = trial;
    fx = f_trial;
    grad = full_gradient(obj, x);
  }
  out.grad_norm = projected_gradient_norm(x, grad, box);
  out.converged = out.grad_norm <= opt.tolerance;
  out.value = full_value(obj, x);
  out.x = std::move(x);
  return out;
}

}  // namespace detail

/// Minimizer of f. Least squares uses the closed-form ridge normal
/// equations (with iterative refinement); the other families use
/// deterministic projected gradient descent with line search.
template <DecomposableObjective Obj>
ReferenceSolution solve_reference(const Obj& obj, const ReferenceOptions& opt = {}) {
  if (!(obj.strong_convexity() > 0.0)) {
    throw std::invalid_argument("solve_reference: objective is not strongly convex");
  }
  if constexpr (std::derived_from<Obj, GlmObjective<SquaredLoss>>) {
    const std::size_t d = obj.dim();
    if (d <= 4096) {
      const auto& w = obj.weights();
      std::vector<Eigen::Index> slot(d, -1);
      Eigen::Index dc = 0;
      for (std::size_t v = 0; v < d; ++v) {
        if (w.p[v] > 0.0) slot[v] = dc++;
      }
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dc, dc);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dc);
      const double n = static_cast<double>(obj.num_terms());
      for (std::size_t i = 0; i < obj.num_terms(); ++i) {
        const auto sup = obj.support(i);
        const auto a = obj.row_values(i);
        for (std::size_t p = 0; p < sup.size(); ++p) {
          rhs(slot[sup[p]]) += a[p] * obj.label(i) / n;
          for (std::size_t q = 0; q < sup.size(); ++q) H(slot[sup[p]], slot[sup[q]]) += a[p] * a[q] / n;
        }
      }
      H.diagonal().array() += obj.lambda();
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      std::vector<double> x(d, 0.0);
      Eigen::VectorXd sol = ldlt.solve(rhs);
      auto scatter = [&](const Eigen::VectorXd& s) {
        for (std::size_t v = 0; v < d; ++v) {
          if (slot[v] >= 0) x[v] = s(slot[v]);
        }
      };
      scatter(sol);
      ReferenceSolution out;
      for (int refine = 0; refine < 5; ++refine) {
        const auto grad = full_gradient(obj, x);
        out.grad_norm = std::sqrt(squared_norm(grad));
        if (out.grad_norm <= opt.tolerance) break;
        Eigen::VectorXd gc(dc);
        for (std::size_t v = 0; v < d; ++v) {
          if (slot[v] >= 0) gc(slot[v]) = grad[v];
        }
        sol -= ldlt.solve(gc);
        scatter(sol);
        out.iterations = static_cast<std::size_t>(refine + 1);
      }
      out.grad_norm = std::sqrt(squared_norm(full_gradient(obj, x)));
      out.converged = out.grad_norm <= opt.tolerance;
      out.value = full_value(obj, x);
      out.x = std::move(x);
      return out;
    }
  }
  return detail::descend(obj, std::vector<double>(obj.dim(), 0.0), opt);
}

}  // namespace asyncopt
