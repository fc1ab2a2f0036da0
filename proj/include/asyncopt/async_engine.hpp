#pragma once

// Lock-free shared-memory execution of Hogwild!, asynchronous stochastic
// coordinate descent (ASCD) and KroMagnon (sparse asynchronous SVRG).
//
// Workers share one atomic counter that hands out global sample indices; the
// sample drawn for index i depends only on (seed, i). Coordinates live in
// independent atomic cells updated by a compare-and-swap loop. Threads are
// joined only at trace record points and at KroMagnon epoch boundaries.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "asyncopt/hypergraph_stats.hpp"
#include "asyncopt/model_core.hpp"
#include "asyncopt/objectives.hpp"
#include "asyncopt/rng.hpp"
#include "asyncopt/serial_solvers.hpp"

namespace asyncopt {

static_assert(std::atomic<double>::is_always_lock_free, "lock-free atomic<double> required");

enum class ReadMode { sparse, full };
enum class LogLevel { none, timing, full };

struct AsyncOptions {
  unsigned workers = 1;
  ReadMode read = ReadMode::sparse;
  LogLevel log = LogLevel::none;
};

/// Dense iterate of independently atomic coordinates. There is no
/// cross-coordinate consistency: a reader may observe any interleaving.
class SharedIterate {
 public:
  explicit SharedIterate(std::span<const double> x0) : d_(x0.size()), cells_(new std::atomic<double>[x0.size()]) {
    for (std::size_t v = 0; v < d_; ++v) cells_[v].store(x0[v], std::memory_order_relaxed);
  }

  std::size_t size() const noexcept { return d_; }

  double load(index_t v) const noexcept { return cells_[v].load(std::memory_order_relaxed); }

  /// x[v] <- box.clamp(x[v] + delta) as one indivisible update. Returns the
  /// change actually applied.
  double add(index_t v, double delta, const Box& box) noexcept {
    auto& cell = cells_[v];
    double old = cell.load(std::memory_order_relaxed);
    double next = box.clamp(old + delta);
    while (!cell.compare_exchange_weak(old, next, std::memory_order_relaxed, std::memory_order_relaxed)) {
      next = box.clamp(old + delta);
    }
    return next - old;
  }

  void store(index_t v, double value) noexcept { cells_[v].store(value, std::memory_order_relaxed); }

  std::vector<double> snapshot() const {
    std::vector<double> out(d_);
    for (std::size_t v = 0; v < d_; ++v) out[v] = load(static_cast<index_t>(v));
    return out;
  }

 private:
  std::size_t d_;
  std::unique_ptr<std::atomic<double>[]> cells_;
};

struct SampleRecord {
  std::uint64_t index = 0;
  std::uint32_t sample = 0;   // hyperedge id (coordinate id for ASCD)
  std::uint32_t worker = 0;
  std::uint64_t t_sample = 0; // logical clock when the index was taken
  std::uint64_t t_end = 0;    // logical clock after the last write
  std::vector<std::pair<index_t, double>> updates;  // only with LogLevel::full
};

struct OverlapReport {
  bool measured = false;
  std::size_t tau_observed = 0;
  double mean_overlap = 0.0;
  std::vector<std::size_t> histogram;  // histogram[c] = #samples overlapping exactly c others
};

struct AsyncResult {
  RunResult run;
  std::vector<SampleRecord> log;
  OverlapReport overlap;
};

/// Overlap count of sample i: #{j != i : [t_sample_j, t_end_j] meets [t_sample_i, t_end_i]}.
inline OverlapReport overlap_report(const std::vector<SampleRecord>& log) {
  OverlapReport rep;
  rep.measured = true;
  const std::size_t N = log.size();
  if (N == 0) return rep;
  std::vector<std::uint64_t> starts(N);
  std::vector<std::uint64_t> ends(N);
  for (std::size_t i = 0; i < N; ++i) {
    starts[i] = log[i].t_sample;
    ends[i] = log[i].t_end;
  }
  std::sort(starts.begin(), starts.end());
  std::sort(ends.begin(), ends.end());
  double total = 0.0;
  for (const auto& r : log) {
    const auto started_before_end =
        static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), r.t_end) - starts.begin());
    const auto ended_before_start =
        static_cast<std::size_t>(std::lower_bound(ends.begin(), ends.end(), r.t_sample) - ends.begin());
    const std::size_t c = started_before_end - ended_before_start - 1;
    if (rep.histogram.size() <= c) rep.histogram.resize(c + 1, 0);
    ++rep.histogram[c];
    rep.tau_observed = std::max(rep.tau_observed, c);
    total += static_cast<double>(c);
  }
  rep.mean_overlap = total / static_cast<double>(N);
  return rep;
}

inline void write_overlap_csv(std::ostream& os, const OverlapReport& rep) {
  os << "overlap,count\n";
  for (std::size_t c = 0; c < rep.histogram.size(); ++c) os << c << ',' << rep.histogram[c] << '\n';
}

/// x0 plus every logged update, summed per coordinate in sample order.
inline std::vector<double> replay_updates(std::span<const double> x0, const std::vector<SampleRecord>& log) {
  std::vector<double> x(x0.begin(), x0.end());
  for (const auto& r : log) {
    for (const auto& [v, delta] : r.updates) x[v] += delta;
  }
  return x;
}

namespace detail {

struct alignas(64) PaddedCounter {
  std::atomic<std::uint64_t> value{0};
};

struct WorkerState {
  kernels::Scratch scratch;
  std::vector<double> dense;
  std::vector<SampleRecord> log;
};

/// Shared driver: runs global sample indices [pts[r-1], pts[r]) lock-free for
/// each record interval, with `prepare(begin)` called between rounds.
class Engine {
 public:
  Engine(std::span<const double> x0, const AsyncOptions& opt, std::size_t max_support)
      : x_(x0), opt_(opt), workers_(std::max(1u, opt.workers)) {
    for (unsigned w = 0; w < workers_; ++w) {
      state_.push_back({kernels::Scratch(max_support), std::vector<double>(x0.size(), 0.0), {}});
    }
  }

  SharedIterate& x() { return x_; }
  WorkerState& state(unsigned w) { return state_[w]; }
  bool logging() const { return opt_.log != LogLevel::none; }
  bool full_log() const { return opt_.log == LogLevel::full; }
  bool full_read() const { return opt_.read == ReadMode::full; }

  std::uint64_t tick() { return clock_.value.fetch_add(1, std::memory_order_relaxed); }

  /// Runs body(worker, global_index) for every index in [begin, end).
  template <class Body>
  void round(std::size_t begin, std::size_t end, Body&& body) {
    next_.value.store(begin, std::memory_order_relaxed);
    auto loop = [&](unsigned w) {
      for (;;) {
        const std::size_t i = next_.value.fetch_add(1, std::memory_order_relaxed);
        if (i >= end) break;
        body(w, i);
      }
    };
    if (workers_ == 1) {
      loop(0);
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers_);
    for (unsigned w = 0; w < workers_; ++w) pool.emplace_back(loop, w);
    for (auto& t : pool) t.join();
  }

  /// Reads the whole iterate into the worker's dense buffer.
  void read_all(WorkerState& ws) {
    for (std::size_t v = 0; v < x_.size(); ++v) ws.dense[v] = x_.load(static_cast<index_t>(v));
  }

  std::vector<SampleRecord> take_log() {
    std::vector<SampleRecord> all;
    for (auto& s : state_) {
      std::move(s.log.begin(), s.log.end(), std::back_inserter(all));
      s.log.clear();
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    return all;
  }

 private:
  SharedIterate x_;
  AsyncOptions opt_;
  unsigned workers_;
  std::vector<WorkerState> state_;
  PaddedCounter next_;
  PaddedCounter clock_;
};

template <DecomposableObjective Obj, class Prepare, class Body>
AsyncResult drive(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0, const AsyncOptions& opt,
                  const ResolvedSchedule& sched, std::size_t epoch_unit, Prepare&& prepare, Body&& body) {
  check_start(obj.dim(), x0);
  AsyncResult out;
  Engine eng(x0, opt, obj.max_support());
  Recorder rec(obj, cfg, sched, out.run);
  rec.set_epoch_unit(epoch_unit);
  const auto pts = record_points(sched, cfg.record_every);
  rec.start();
  rec.record(0, eng.x().snapshot());
  for (std::size_t r = 1; r < pts.size(); ++r) {
    prepare(eng, pts[r - 1]);
    eng.round(pts[r - 1], pts[r], [&](unsigned w, std::size_t i) { body(eng, w, i); });
    if (!rec.record(pts[r], eng.x().snapshot())) break;
  }
  out.run.x = eng.x().snapshot();
  if (eng.logging()) {
    out.log = eng.take_log();
    out.overlap = overlap_report(out.log);
  }
  return out;
}

/// Wraps one sample's processing with logical-clock stamps and update logging.
template <class Process>
void logged_sample(Engine& eng, unsigned w, std::size_t i, Process&& process) {
  auto& ws = eng.state(w);
  if (!eng.logging()) {
    process(ws, [](index_t, double) {});
    return;
  }
  SampleRecord rec;
  rec.index = i;
  rec.worker = w;
  rec.t_sample = eng.tick();
  const bool full = eng.full_log();
  rec.sample = static_cast<std::uint32_t>(process(ws, [&](index_t v, double delta) {
    if (full) rec.updates.emplace_back(v, delta);
  }));
  rec.t_end = eng.tick();
  ws.log.push_back(std::move(rec));
}

}  // namespace detail

/// Hogwild!: each worker samples a hyperedge, reads its coordinates, and
/// atomically adds -gamma * g coordinate by coordinate.
template <DecomposableObjective Obj>
AsyncResult run_hogwild(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0,
                        const AsyncOptions& opt) {
  const auto sched = resolve_schedule(obj, cfg, x0, Family::sgm);
  const Box box = obj.box().intersect(Box::from(cfg.linf));
  const std::size_t n = obj.num_terms();
  auto body = [&](detail::Engine& eng, unsigned w, std::size_t i) {
    detail::logged_sample(eng, w, i, [&](detail::WorkerState& ws, auto&& log_update) {
      if (eng.full_read()) eng.read_all(ws);
      const std::size_t s = draw_sample(cfg.seed, i, n);
      auto write = [&](index_t v, double delta) {
        log_update(v, eng.x().add(v, delta, box));
      };
      if (eng.full_read()) {
        kernels::sgm(obj, s, sched.gamma, [&](index_t v) { return ws.dense[v]; }, write, ws.scratch);
      } else {
        kernels::sgm(obj, s, sched.gamma, [&](index_t v) { return eng.x().load(v); }, write, ws.scratch);
      }
      return s;
    });
  };
  return detail::drive(obj, cfg, x0, opt, sched, n, [](detail::Engine&, std::size_t) {}, body);
}

/// ASCD: each worker samples a coordinate v, reads what [grad f]_v depends on
/// (the union of hyperedges containing v, or everything in full mode), and
/// atomically adds -gamma * d * [grad f]_v to x_v.
template <DecomposableObjective Obj>
AsyncResult run_ascd(const Obj& obj, const SolverConfig& cfg, std::span<const double> x0, const AsyncOptions& opt) {
  const auto sched = resolve_schedule(obj, cfg, x0, Family::scd);
  const Box box = obj.box().intersect(Box::from(cfg.linf));
  const CoordinateIndex index(obj);
  const std::size_t d = obj.dim();
  auto body = [&](detail::Engine& eng, unsigned w, std::size_t i) {
    detail::logged_sample(eng, w, i, [&](detail::WorkerState& ws, auto&& log_update) {
      if (eng.full_read()) eng.read_all(ws);
      const auto v = static_cast<index_t>(draw_sample(cfg.seed, i, d));
      if (!eng.full_read()) {
        for (index_t u : index.neighborhood(v)) ws.dense[u] = eng.x().load(u);
      }
      const double delta = kernels::scd_delta(obj, index, v, sched.gamma, ws.dense, ws.scratch);
      log_update(v, eng.x().add(v, delta, box));
      return static_cast<std::size_t>(v);
    });
  };
  return detail::drive(obj, cfg, x0, opt, sched, d, [](detail::Engine&, std::size_t) {}, body);
}

/// KroMagnon: Hogwild!-style lock-free epochs with the sparse variance-reduced
/// update; at each snapshot boundary all workers stop, y <- x, and z = grad f(y)
/// is computed in parallel.
template <DecomposableObjective Obj>
AsyncResult run_kromagnon(const Obj& obj, const CoordinateWeights& weights, const SolverConfig& cfg,
                          std::span<const double> x0, const AsyncOptions& opt) {
  if (weights.d_inv.size() != obj.dim()) throw std::invalid_argument("coordinate weights have wrong dimension");
  const auto sched = resolve_schedule(obj, cfg, x0, Family::svrg);
  const Box box = obj.box().intersect(Box::from(cfg.linf));
  const std::size_t n = obj.num_terms();
  const unsigned threads = std::max(1u, opt.workers);
  std::vector<double> y;
  std::vector<double> z;
  auto prepare = [&](detail::Engine& eng, std::size_t begin) {
    if (begin % sched.epoch_size != 0) return;
    if ((begin / sched.epoch_size) % cfg.snapshot_interval != 0) return;
    y = eng.x().snapshot();
    z = full_gradient(obj, y, threads);
  };
  auto body = [&](detail::Engine& eng, unsigned w, std::size_t i) {
    detail::logged_sample(eng, w, i, [&](detail::WorkerState& ws, auto&& log_update) {
      if (eng.full_read()) eng.read_all(ws);
      const std::size_t s = draw_sample(cfg.seed, i, n);
      auto write = [&](index_t v, double delta) {
        log_update(v, eng.x().add(v, delta, box));
      };
      if (eng.full_read()) {
        kernels::svrg_sparse(obj, s, sched.gamma, y, z, weights.d_inv, [&](index_t v) { return ws.dense[v]; }, write,
                             ws.scratch);
      } else {
        kernels::svrg_sparse(obj, s, sched.gamma, y, z, weights.d_inv, [&](index_t v) { return eng.x().load(v); },
                             write, ws.scratch);
      }
      return s;
    });
  };
  return detail::drive(obj, cfg, x0, opt, sched, n, prepare, body);
}

// Speedup ------------------------------------------------------------------------

/// Wall time at which the run first reaches `fraction` of the progress from its
/// initial objective to its own minimum. Empty when no progress was made.
inline std::optional<std::int64_t> time_to_target(const std::vector<TraceRecord>& trace, double fraction) {
  if (trace.empty() || !std::isfinite(trace.front().objective)) return std::nullopt;
  const double f0 = trace.front().objective;
  double fmin = f0;
  for (const auto& r : trace) {
    if (std::isfinite(r.objective)) fmin = std::min(fmin, r.objective);
  }
  if (!(f0 > fmin)) return std::nullopt;
  for (const auto& r : trace) {
    if (std::isfinite(r.objective) && (f0 - r.objective) >= fraction * (f0 - fmin)) return r.wall_ns;
  }
  return std::nullopt;
}

struct SpeedupRow {
  unsigned workers = 1;
  std::optional<std::int64_t> time_ns;
  std::optional<double> speedup;  // t(1 worker) / t(k workers)
};

inline std::vector<SpeedupRow> measure_speedup(const std::map<unsigned, std::vector<TraceRecord>>& runs,
                                               double target_fraction) {
  if (!(target_fraction > 0.0 && target_fraction <= 1.0)) {
    throw std::invalid_argument("target fraction must be in (0, 1]");
  }
  const auto base_it = runs.find(1);
  if (base_it == runs.end()) throw std::invalid_argument("measure_speedup needs a 1-worker run");
  const auto base = time_to_target(base_it->second, target_fraction);
  std::vector<SpeedupRow> rows;
  for (const auto& [w, trace] : runs) {
    SpeedupRow row;
    row.workers = w;
    row.time_ns = time_to_target(trace, target_fraction);
    if (base && row.time_ns) {
      row.speedup = *row.time_ns > 0 ? static_cast<double>(*base) / static_cast<double>(*row.time_ns)
                                     : (*base == 0 ? 1.0 : std::numeric_limits<double>::infinity());
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<SpeedupRow> measure_speedup(const std::map<unsigned, RunResult>& runs, double target_fraction) {
  std::map<unsigned, std::vector<TraceRecord>> traces;
  for (const auto& [w, r] : runs) traces.emplace(w, r.trace);
  return measure_speedup(traces, target_fraction);
}

}  // namespace asyncopt
