#pragma once

// Serial baselines: SGM, stochastic coordinate descent, dense SVRG and
// sparse SVRG. The per-sample update kernels in `kernels` are shared with
// the asynchronous engine, which is what makes a one-worker asynchronous run
// bit-identical to its serial counterpart.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncopt/hypergraph_stats.hpp"
#include "asyncopt/model_core.hpp"
#include "asyncopt/objectives.hpp"
#include "asyncopt/rng.hpp"

namespace asyncopt {

enum class StepRule { explicit_step, hogwild_rate, svrg_rate, scd_rate };

enum class Family { sgm, scd, svrg };

struct Reference {
  std::vector<double> x;
  double value = 0.0;
};

struct SolverConfig {
  StepRule step_rule = StepRule::explicit_step;
  double step_size = 0.0;          // used by explicit_step
  std::size_t iterations = 0;      // T for SGM / SCD family; 0 lets a named rule choose
  std::size_t epoch_size = 0;      // S for the SVRG family; 0 lets the rule choose
  std::size_t epochs = 0;          // E for the SVRG family; 0 lets the rule choose
  std::size_t snapshot_interval = 1;
  std::uint64_t seed = 0;
  LinfBall linf;
  std::size_t record_every = 0;    // 0: record only at start, end and epoch ends
  bool record_objective = true;
  double epsilon = 0.0;            // target accuracy for the named rules
  double a0 = 0.0;                 // ||x0 - x*||^2; derived from `reference` when 0
  double scd_constant = 1.0 / 6.0; // gamma = c / (d L kappa)
  double gradient_bound = 0.0;     // M for hogwild_rate; derived when 0
  unsigned gradient_threads = 1;   // threads for full gradients at snapshots
  std::optional<Reference> reference;
};

struct ResolvedSchedule {
  double gamma = 0.0;
  std::size_t iterations = 0;  // total samples
  std::size_t epoch_size = 0;  // 0 outside the SVRG family
  std::size_t epochs = 0;
};

struct TraceRecord {
  std::size_t iter = 0;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  double a = std::numeric_limits<double>::quiet_NaN();
  double f_gap = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::int64_t wall_ns = 0;
  bool epoch_end = false;
};

struct RunResult {
  std::vector<double> x;
  std::vector<TraceRecord> trace;
  ResolvedSchedule schedule;
  std::size_t samples = 0;
  bool diverged = false;
  std::int64_t wall_ns = 0;
};

/// Turns the configured rule into a concrete (gamma, T, S, E).
template <DecomposableObjective Obj>
ResolvedSchedule resolve_schedule(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0,
                                  Family family) {
  const double L = obj.smoothness();
  const double m = obj.strong_convexity();
  const double d = static_cast<double>(obj.dim());
  ResolvedSchedule s;

  auto need_a0 = [&]() {
    if (cfg.a0 > 0.0) return cfg.a0;
    if (!cfg.reference) throw std::invalid_argument("step rule needs a0 or a reference solution");
    return sq_distance(x0, cfg.reference->x);
  };
  auto need_eps = [&]() {
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("step rule needs epsilon > 0");
    return cfg.epsilon;
  };
  auto need_m = [&]() {
    if (!(m > 0.0)) throw std::invalid_argument("step rule needs a strongly convex objective");
    return m;
  };

  switch (cfg.step_rule) {
    case StepRule::explicit_step:
      if (!(cfg.step_size > 0.0)) throw std::invalid_argument("explicit step rule needs step_size > 0");
      s.gamma = cfg.step_size;
      break;
    case StepRule::hogwild_rate: {
      if (family != Family::sgm) throw std::invalid_argument("hogwild_rate applies to SGM/Hogwild only");
      const double eps = need_eps();
      const double a0 = need_a0();
      const double mm = need_m();
      double M = cfg.gradient_bound;
      if (!(M > 0.0)) {
        if (!cfg.reference) throw std::invalid_argument("hogwild_rate needs gradient_bound or a reference");
        M = problem_constants(obj, cfg.reference->x, std::sqrt(a0)).M;
      }
      s.gamma = eps * mm / (2.0 * M * M);
      if (cfg.iterations == 0) {
        s.iterations = static_cast<std::size_t>(
            std::ceil(2.0 * M * M / (eps * mm * mm) * std::log(std::max(2.0 * a0 / eps, 1.0))));
      }
      break;
    }
    case StepRule::scd_rate: {
      if (family != Family::scd) throw std::invalid_argument("scd_rate applies to SCD/ASCD only");
      const double mm = need_m();
      const double kappa = L / mm;
      s.gamma = cfg.scd_constant / (d * L * kappa);
      if (cfg.iterations == 0) {
        const double ratio = std::max(need_a0() / need_eps(), 1.0);
        s.iterations = static_cast<std::size_t>(std::ceil(d * kappa * kappa / cfg.scd_constant * std::log(ratio)));
      }
      break;
    }
    case StepRule::svrg_rate: {
      if (family != Family::svrg) throw std::invalid_argument("svrg_rate applies to the SVRG family only");
      const double kappa = L / need_m();
      s.gamma = 1.0 / (4.0 * L * kappa);
      if (cfg.epoch_size == 0) s.epoch_size = static_cast<std::size_t>(std::ceil(8.0 * kappa * kappa));
      if (cfg.epochs == 0) {
        const double ratio = std::max(need_a0() / need_eps(), 1.0);
        s.epochs = static_cast<std::size_t>(std::ceil(std::log(ratio) / std::log(4.0 / 3.0)));
      }
      break;
    }
  }

  if (family == Family::svrg) {
    if (cfg.epoch_size != 0) s.epoch_size = cfg.epoch_size;
    if (cfg.epochs != 0) s.epochs = cfg.epochs;
    if (s.epoch_size == 0 || s.epochs == 0) throw std::invalid_argument("SVRG needs epoch_size >= 1 and epochs >= 1");
    s.iterations = s.epoch_size * s.epochs;
    if (cfg.snapshot_interval == 0) throw std::invalid_argument("snapshot_interval must be >= 1");
  } else {
    if (cfg.iterations != 0) s.iterations = cfg.iterations;
    if (s.iterations == 0) throw std::invalid_argument("iterations must be >= 1");
  }
  if (m > 0.0 && s.gamma * m > 1.0) {
    throw std::invalid_argument("step size too large: gamma * m = " + std::to_string(s.gamma * m) + " > 1");
  }
  return s;
}

/// Global sample indices at which the trace is recorded: 0, every
/// `record_every` samples, every epoch boundary, and T.
inline std::vector<std::size_t> record_points(const ResolvedSchedule& s, std::size_t record_every) {
  std::vector<std::size_t> pts{0};
  const std::size_t T = s.iterations;
  std::size_t next_rec = record_every ? record_every : T;
  std::size_t next_epoch = s.epoch_size ? s.epoch_size : T;
  while (pts.back() < T) {
    const std::size_t p = std::min({next_rec, next_epoch, T});
    pts.push_back(p);
    if (p == next_rec) next_rec += record_every ? record_every : T;
    if (p == next_epoch) next_epoch += s.epoch_size ? s.epoch_size : T;
  }
  return pts;
}

namespace detail {

/// Trace bookkeeping. Wall time accumulates only while the solver runs; the
/// time spent evaluating a and f at record points is excluded.
template <DecomposableObjective Obj>
class Recorder {
 public:
  using clock = std::chrono::steady_clock;

  Recorder(const Obj& obj, const SolverConfig& cfg, const ResolvedSchedule& s, RunResult& out)
      : obj_(obj), cfg_(cfg), sched_(s), out_(out) {
    out_.schedule = s;
  }

  void start() { last_ = clock::now(); }

  /// Returns false once the iterate is non-finite.
  bool record(std::size_t iter, std::span<const double> x) {
    const auto now = clock::now();
    active_ += std::chrono::duration_cast<std::chrono::nanoseconds>(now - last_).count();
    TraceRecord r;
    r.iter = iter;
    r.seed = cfg_.seed;
    r.wall_ns = active_;
    if (sched_.epoch_size) {
      r.epoch = iter / sched_.epoch_size;
      r.epoch_end = iter > 0 && iter % sched_.epoch_size == 0;
    } else {
      r.epoch = iter / epoch_unit_;
    }
    const bool finite = all_finite(x);
    if (finite) {
      if (cfg_.reference) r.a = sq_distance(x, cfg_.reference->x);
      if (cfg_.record_objective) {
        r.objective = full_value(obj_, x);
        if (cfg_.reference) r.f_gap = r.objective - cfg_.reference->value;
      }
    } else {
      out_.diverged = true;
    }
    out_.trace.push_back(r);
    out_.samples = iter;
    out_.wall_ns = active_;
    last_ = clock::now();
    return finite;
  }

  void set_epoch_unit(std::size_t unit) { epoch_unit_ = std::max<std::size_t>(unit, 1); }

 private:
  const Obj& obj_;
  const SolverConfig& cfg_;
  ResolvedSchedule sched_;
  RunResult& out_;
  clock::time_point last_;
  std::int64_t active_ = 0;
  std::size_t epoch_unit_ = 1;
};

inline void check_start(std::size_t d, std::span<const double> x0) {
  if (x0.size() != d) throw std::invalid_argument("x0 has wrong dimension");
}

}  // namespace detail

/// Per-sample updates. `read(v)` returns the value of coordinate v as seen by
/// the worker and `write(v, delta)` applies x[v] <- clamp(x[v] + delta).
namespace kernels {

struct Scratch {
  std::vector<double> xs, ys, gx, gy;
  explicit Scratch(std::size_t k = 0) : xs(k), ys(k), gx(k), gy(k) {}
};

template <DecomposableObjective Obj, class Read, class Write>
void sgm(const Obj& obj, std::size_t s, double gamma, Read&& read, Write&& write, Scratch& sc) {
  const auto sup = obj.support(s);
  const std::size_t k = sup.size();
  for (std::size_t p = 0; p < k; ++p) sc.xs[p] = read(sup[p]);
  obj.term_gradient(s, std::span<const double>(sc.xs.data(), k), std::span<double>(sc.gx.data(), k));
  for (std::size_t p = 0; p < k; ++p) write(sup[p], -gamma * sc.gx[p]);
}

/// Sparse variance-reduced step on support(s): g(x,s) - g(y,s) + D_s z.
template <DecomposableObjective Obj, class Read, class Write>
void svrg_sparse(const Obj& obj, std::size_t s, double gamma, std::span<const double> y, std::span<const double> z,
                 std::span<const double> d_inv, Read&& read, Write&& write, Scratch& sc) {
  const auto sup = obj.support(s);
  const std::size_t k = sup.size();
  for (std::size_t p = 0; p < k; ++p) {
    sc.xs[p] = read(sup[p]);
    sc.ys[p] = y[sup[p]];
  }
  obj.term_gradient(s, std::span<const double>(sc.xs.data(), k), std::span<double>(sc.gx.data(), k));
  obj.term_gradient(s, std::span<const double>(sc.ys.data(), k), std::span<double>(sc.gy.data(), k));
  for (std::size_t p = 0; p < k; ++p) {
    const index_t v = sup[p];
    write(v, -gamma * ((sc.gx[p] - sc.gy[p]) + d_inv[v] * z[v]));
  }
}

/// SCD step value for coordinate v, evaluated on a dense view of x.
template <DecomposableObjective Obj>
double scd_delta(const Obj& obj, const CoordinateIndex& index, index_t v, double gamma, std::span<const double> x,
                 Scratch& sc) {
  const double partial = coordinate_partial(obj, index, v, x, sc.xs, sc.gx);
  return -gamma * (static_cast<double>(obj.dim()) * partial);
}

}  // namespace kernels

// Update directions for enumeration oracles ----------------------------------------

template <DecomposableObjective Obj>
SparseVector sgm_direction(const Obj& obj, std::span<const double> x, std::size_t s) {
  return term_gradient(obj, s, x);
}

template <DecomposableObjective Obj>
SparseVector svrg_sparse_direction(const Obj& obj, const CoordinateWeights& w, std::span<const double> x,
                                   std::span<const double> y, std::span<const double> z, std::size_t s) {
  const auto sup = obj.support(s);
  const auto gx = term_gradient(obj, s, x);
  const auto gy = term_gradient(obj, s, y);
  std::vector<double> v(sup.size());
  for (std::size_t p = 0; p < sup.size(); ++p) v[p] = (gx[sup[p]] - gy[sup[p]]) + w.d_inv[sup[p]] * z[sup[p]];
  return SparseVector(obj.dim(), {sup.begin(), sup.end()}, std::move(v));
}

template <DecomposableObjective Obj>
std::vector<double> svrg_dense_direction(const Obj& obj, std::span<const double> x, std::span<const double> y,
                                         std::span<const double> z, std::size_t s) {
  std::vector<double> u(z.begin(), z.end());
  const auto sup = obj.support(s);
  const auto gx = term_gradient(obj, s, x);
  const auto gy = term_gradient(obj, s, y);
  for (index_t v : sup) u[v] = (gx[v] - gy[v]) + u[v];
  return u;
}

template <DecomposableObjective Obj>
SparseVector scd_direction(const Obj& obj, const CoordinateIndex& index, std::span<const double> x, index_t v) {
  kernels::Scratch sc(obj.max_support());
  const double partial = coordinate_partial(obj, index, v, x, sc.xs, sc.gx);
  return SparseVector(obj.dim(), {v}, {static_cast<double>(obj.dim()) * partial});
}

// Solvers --------------------------------------------------------------------------

template <DecomposableObjective Obj>
RunResult run_sgm(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0) {
  detail::check_start(obj.dim(), x0);
  const auto sched = resolve_schedule(obj, cfg, x0, Family::sgm);
  const Box box = obj.box().intersect(Box::from(cfg.linf));
  RunResult out;
  std::vector<double> x(x0.begin(), x0.end());
  kernels::Scratch sc(obj.max_support());
  detail::Recorder rec(obj, cfg, sched, out);
  rec.set_epoch_unit(obj.num_terms());
  auto read = [&](index_t v) { return x[v]; };
  auto write = [&](index_t v, double delta) { x[v] = box.clamp(x[v] + delta); };
  const auto pts = record_points(sched, cfg.record_every);
  rec.start();
  rec.record(0, x);
  for (std::size_t r = 1; r < pts.size(); ++r) {
    for (std::size_t i = pts[r - 1]; i < pts[r]; ++i) {
      kernels::sgm(obj, draw_sample(cfg.seed, i, obj.num_terms()), sched.gamma, read, write, sc);
    }
    if (!rec.record(pts[r], x)) break;
  }
  out.x = std::move(x);
  return out;
}

template <DecomposableObjective Obj>
RunResult run_scd(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0) {
  detail::check_start(obj.dim(), x0);
  const auto sched = resolve_schedule(obj, cfg, x0, Family::scd);
  const Box box = obj.box().intersect(Box::from(cfg.linf));
  const CoordinateIndex index(obj);
  RunResult out;
  std::vector<double> x(x0.begin(), x0.end());
  kernels::Scratch sc(obj.max_support());
  detail::Recorder rec(obj, cfg, sched, out);
  rec.set_epoch_unit(obj.dim());
  const auto pts = record_points(sched, cfg.record_every);
  rec.start();
  rec.record(0, x);
  for (std::size_t r = 1; r < pts.size(); ++r) {
    for (std::size_t i = pts[r - 1]; i < pts[r]; ++i) {
      const auto v = static_cast<index_t>(draw_sample(cfg.seed, i, obj.dim()));
      const double delta = kernels::scd_delta(obj, index, v, sched.gamma, x, sc);
      x[v] = box.clamp(x[v] + delta);
    }
    if (!rec.record(pts[r], x)) break;
  }
  out.x = std::move(x);
  return out;
}

namespace detail {

/// Shared epoch loop of the serial SVRG variants; `step(i, s, y, z)`
/// performs one inner update.
template <DecomposableObjective Obj, class Step>
RunResult svrg_loop(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0, std::vector<double>& x,
                    Step&& step) {
  const auto sched = resolve_schedule(obj, cfg, x0, Family::svrg);
  RunResult out;
  Recorder rec(obj, cfg, sched, out);
  const auto pts = record_points(sched, cfg.record_every);
  std::vector<double> y;
  std::vector<double> z;
  rec.start();
  rec.record(0, x);
  for (std::size_t r = 1; r < pts.size(); ++r) {
    const std::size_t begin = pts[r - 1];
    if (begin % sched.epoch_size == 0) {
      const std::size_t epoch = begin / sched.epoch_size;
      if (epoch % cfg.snapshot_interval == 0) {
        y = x;
        z = full_gradient(obj, y, cfg.gradient_threads);
      }
    }
    for (std::size_t i = begin; i < pts[r]; ++i) step(i, draw_sample(cfg.seed, i, obj.num_terms()), y, z);
    if (!rec.record(pts[r], x)) break;
  }
  out.x = std::move(x);
  return out;
}

}  // namespace detail

template <DecomposableObjective Obj>
RunResult run_svrg_dense(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0) {
  detail::check_start(obj.dim(), x0);
  const Box box = obj.box().intersect(Box::from(cfg.linf));
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> u(obj.dim());
  kernels::Scratch sc(obj.max_support());
  const double gamma = resolve_schedule(obj, cfg, x0, Family::svrg).gamma;
  auto step = [&](std::size_t, std::size_t s, const std::vector<double>& y, const std::vector<double>& z) {
    const auto sup = obj.support(s);
    const std::size_t k = sup.size();
    gather(x, sup, sc.xs);
    gather(y, sup, sc.ys);
    obj.term_gradient(s, std::span<const double>(sc.xs.data(), k), std::span<double>(sc.gx.data(), k));
    obj.term_gradient(s, std::span<const double>(sc.ys.data(), k), std::span<double>(sc.gy.data(), k));
    std::copy(z.begin(), z.end(), u.begin());
    for (std::size_t p = 0; p < k; ++p) u[sup[p]] = (sc.gx[p] - sc.gy[p]) + u[sup[p]];
    for (std::size_t v = 0; v < u.size(); ++v) x[v] = box.clamp(x[v] + -gamma * u[v]);
  };
  return detail::svrg_loop(obj, cfg, x0, x, step);
}

template <DecomposableObjective Obj>
RunResult run_svrg_sparse(const Obj& obj, const CoordinateWeights& weights, const SolverConfig& cfg,
                          std::span<const double> x0) {
  detail::check_start(obj.dim(), x0);
  if (weights.d_inv.size() != obj.dim()) throw std::invalid_argument("coordinate weights have wrong dimension");
  const Box box = obj.box().intersect(Box::from(cfg.linf));
  std::vector<double> x(x0.begin(), x0.end());
  kernels::Scratch sc(obj.max_support());
  const double gamma = resolve_schedule(obj, cfg, x0, Family::svrg).gamma;
  auto read = [&](index_t v) { return x[v]; };
  auto write = [&](index_t v, double delta) { x[v] = box.clamp(x[v] + delta); };
  auto step = [&](std::size_t, std::size_t s, const std::vector<double>& y, const std::vector<double>& z) {
    kernels::svrg_sparse(obj, s, gamma, y, z, weights.d_inv, read, write, sc);
  };
  return detail::svrg_loop(obj, cfg, x0, x, step);
}

// Variance of the sparse SVRG estimate -------------------------------------------------

struct VarianceCheck {
  double lhs = 0.0;        // E_s ||v(x, s)||^2
  double rhs = 0.0;        // 2E||g(x)-g(x*)||^2 + 2E||g(y)-g(x*)||^2 - 2 grad f(y)^T D grad f(y)
  double correction = 0.0; // grad f(y)^T D grad f(y)
};

template <DecomposableObjective Obj>
VarianceCheck svrg_variance_check(const Obj& obj, const CoordinateWeights& w, std::span<const double> x,
                                  std::span<const double> y, std::span<const double> x_star) {
  const auto z = full_gradient(obj, y);
  VarianceCheck out;
  double ex = 0.0;
  double ey = 0.0;
  for (std::size_t s = 0; s < obj.num_terms(); ++s) {
    const auto v = svrg_sparse_direction(obj, w, x, y, z, s);
    out.lhs += v.squared_norm();
    const auto gx = term_gradient(obj, s, x);
    const auto gy = term_gradient(obj, s, y);
    const auto gs = term_gradient(obj, s, x_star);
    for (index_t c : obj.support(s)) {
      ex += (gx[c] - gs[c]) * (gx[c] - gs[c]);
      ey += (gy[c] - gs[c]) * (gy[c] - gs[c]);
    }
  }
  const double n = static_cast<double>(obj.num_terms());
  for (std::size_t v = 0; v < z.size(); ++v) out.correction += z[v] * w.d_inv[v] * z[v];
  out.lhs /= n;
  out.rhs = 2.0 * ex / n + 2.0 * ey / n - 2.0 * out.correction;
  return out;
}

// CSV ------------------------------------------------------------------------------

inline void write_trace_csv_header(std::ostream& os) {
  os << "iter,epoch,seed,a_j,f_gap,objective,wall_ns\n";
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace, bool header = true) {
  if (header) write_trace_csv_header(os);
  const auto old = os.precision(17);
  for (const auto& r : trace) {
    os << r.iter << ',' << r.epoch << ',' << r.seed << ',' << r.a << ',' << r.f_gap << ',' << r.objective << ','
       << r.wall_ns << '\n';
  }
  os.precision(old);
}

}  // namespace asyncopt
