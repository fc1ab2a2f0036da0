#pragma once

// Deterministic single-threaded model of asynchronous execution.
//
// Samples j = 0..T-1 are drawn exactly as in the serial solvers. A
// DelaySchedule decides, per pair (j, i) with |i - j| <= tau and per
// coordinate of update i, whether that write is visible in the value x̂_j
// read by sample j. Earlier updates outside the window are always visible,
// later ones never. The "fake" iterate x_j = x_0 - gamma * sum_{i<j} g_i is
// kept exactly, so every quantity of the perturbed-iterate analysis can be
// measured directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncopt/async_engine.hpp"
#include "asyncopt/hypergraph_stats.hpp"
#include "asyncopt/model_core.hpp"
#include "asyncopt/objectives.hpp"
#include "asyncopt/rng.hpp"
#include "asyncopt/serial_solvers.hpp"

namespace asyncopt {

enum class ScheduleStyle { none, random, adversarial_stale };
enum class SimAlgo { sgm, scd, svrg_sparse };

inline const char* to_string(ScheduleStyle s) {
  switch (s) {
    case ScheduleStyle::none: return "none";
    case ScheduleStyle::random: return "random";
    case ScheduleStyle::adversarial_stale: return "adversarial_stale";
  }
  return "?";
}

inline ScheduleStyle parse_schedule_style(const std::string& s) {
  if (s == "none") return ScheduleStyle::none;
  if (s == "random") return ScheduleStyle::random;
  if (s == "adversarial_stale") return ScheduleStyle::adversarial_stale;
  throw std::invalid_argument("unknown schedule style: " + s);
}

/// Visibility of in-window updates. Bit (p % 64) of mask(j, i) tells whether
/// coordinate p of update i's support is visible to the read of sample j.
/// Reads happen in `order()`; an update can only be visible to reads that come
/// after it in that order, which keeps every schedule causal.
class DelaySchedule {
 public:
  DelaySchedule() = default;

  static DelaySchedule generate(std::size_t T, long long tau, std::uint64_t seed, ScheduleStyle style) {
    if (tau < 0) throw std::invalid_argument("tau must be non-negative");
    DelaySchedule s;
    s.T_ = T;
    s.tau_ = static_cast<std::size_t>(tau);
    s.seed_ = seed;
    s.style_ = style;
    s.masks_.assign(T * 2 * s.tau_, 0);
    std::vector<double> key(T);
    for (std::size_t j = 0; j < T; ++j) {
      const double u = style == ScheduleStyle::random
                           ? unit_double(counter_hash(seed, streams::kSchedule, 2 * static_cast<std::uint64_t>(j)))
                           : 0.0;
      // Jitter below tau + 1 reorders only samples at most tau apart.
      key[j] = static_cast<double>(j) + u * static_cast<double>(s.tau_ + 1);
    }
    s.order_.resize(T);
    std::iota(s.order_.begin(), s.order_.end(), std::size_t{0});
    std::stable_sort(s.order_.begin(), s.order_.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    s.rank_.resize(T);
    for (std::size_t r = 0; r < T; ++r) s.rank_[s.order_[r]] = r;

    for (std::size_t j = 0; j < T; ++j) {
      for (std::size_t i = j >= s.tau_ ? j - s.tau_ : 0; i <= std::min(T - 1, j + s.tau_); ++i) {
        if (i == j || s.rank_[i] > s.rank_[j]) continue;
        std::uint64_t m = 0;
        switch (style) {
          case ScheduleStyle::none: m = i < j ? ~std::uint64_t{0} : 0; break;
          case ScheduleStyle::adversarial_stale: m = 0; break;
          case ScheduleStyle::random:
            m = counter_hash(seed, streams::kSchedule, 2 * (j * (2 * s.tau_) + s.slot(j, i)) + 1);
            break;
        }
        s.masks_[j * 2 * s.tau_ + s.slot(j, i)] = m;
      }
    }
    return s;
  }

  std::size_t length() const noexcept { return T_; }
  std::size_t tau() const noexcept { return tau_; }
  std::uint64_t seed() const noexcept { return seed_; }
  ScheduleStyle style() const noexcept { return style_; }
  std::size_t rank(std::size_t j) const { return rank_[j]; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  std::uint64_t mask(std::size_t j, std::size_t i) const {
    if (i == j || !in_window(j, i)) return 0;
    return masks_[j * 2 * tau_ + slot(j, i)];
  }

  void set_mask(std::size_t j, std::size_t i, std::uint64_t m) {
    if (i == j || !in_window(j, i)) throw std::invalid_argument("set_mask: pair outside the tau window");
    if (m != 0 && rank_[i] > rank_[j]) throw std::invalid_argument("set_mask: update read before it is computed");
    masks_[j * 2 * tau_ + slot(j, i)] = m;
  }

  /// Whether coordinate position p of update i is visible to read j.
  bool visible(std::size_t j, std::size_t i, std::size_t p) const {
    if (i + tau_ < j) return true;
    if (i > j + tau_) return false;
    if (i == j) return false;
    return (mask(j, i) >> (p % 64)) & 1u;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "delay_schedule 1\n"
       << "T " << T_ << " tau " << tau_ << " seed " << seed_ << " style " << to_string(style_) << '\n';
    os << "order";
    for (std::size_t j : order_) os << ' ' << j;
    os << '\n' << std::hex;
    for (std::size_t j = 0; j < T_; ++j) {
      for (std::size_t k = 0; k < 2 * tau_; ++k) os << (k ? " " : "") << masks_[j * 2 * tau_ + k];
      os << '\n';
    }
    return os.str();
  }

  static DelaySchedule parse(const std::string& text) {
    std::istringstream is(text);
    std::string tag;
    int version = 0;
    DelaySchedule s;
    std::string style;
    std::string kT, kTau, kSeed, kStyle;
    if (!(is >> tag >> version) || tag != "delay_schedule" || version != 1) {
      throw std::invalid_argument("not a delay schedule");
    }
    if (!(is >> kT >> s.T_ >> kTau >> s.tau_ >> kSeed >> s.seed_ >> kStyle >> style) || kT != "T" || kTau != "tau") {
      throw std::invalid_argument("malformed delay schedule header");
    }
    s.style_ = parse_schedule_style(style);
    if (!(is >> tag) || tag != "order") throw std::invalid_argument("malformed delay schedule order");
    s.order_.resize(s.T_);
    s.rank_.assign(s.T_, s.T_);
    for (std::size_t r = 0; r < s.T_; ++r) {
      if (!(is >> s.order_[r]) || s.order_[r] >= s.T_ || s.rank_[s.order_[r]] != s.T_) {
        throw std::invalid_argument("delay schedule order is not a permutation");
      }
      s.rank_[s.order_[r]] = r;
    }
    s.masks_.resize(s.T_ * 2 * s.tau_);
    is >> std::hex;
    for (auto& m : s.masks_) {
      if (!(is >> m)) throw std::invalid_argument("truncated delay schedule masks");
    }
    return s;
  }

  friend bool operator==(const DelaySchedule&, const DelaySchedule&) = default;

 private:
  bool in_window(std::size_t j, std::size_t i) const { return i + tau_ >= j && i <= j + tau_; }
  std::size_t slot(std::size_t j, std::size_t i) const { return i < j ? i + tau_ - j : i - j + tau_ - 1; }

  std::size_t T_ = 0;
  std::size_t tau_ = 0;
  std::uint64_t seed_ = 0;
  ScheduleStyle style_ = ScheduleStyle::none;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rank_;
  std::vector<std::uint64_t> masks_;
};

/// Index set S_r^j = [max(j - r tau, lo), min(j + r tau, hi)].
struct Window {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t size() const noexcept { return last - first + 1; }
};

inline Window window(std::size_t j, std::size_t r, std::size_t tau, std::size_t lo, std::size_t hi) {
  const std::size_t w = r * tau;
  return {std::max(j >= w ? j - w : 0, lo), std::min(j + w, hi)};
}

struct SimConfig {
  SimAlgo algo = SimAlgo::sgm;
  double gamma = 0.0;
  std::size_t iterations = 0;  // SGM / SCD
  std::size_t epoch_size = 0;  // SVRG
  std::size_t epochs = 0;      // SVRG
  std::size_t snapshot_interval = 1;
  std::uint64_t seed = 0;
  ReadMode read = ReadMode::sparse;
};

struct SimStep {
  std::size_t j = 0;
  std::size_t sample = 0;
  std::size_t segment = 0;
  std::vector<index_t> g_index;
  std::vector<double> g_value;
  double a = 0.0;            // ||x_j - x*||^2
  double a_snapshot = 0.0;   // ||y - x*||^2 (SVRG)
  double r0 = 0.0;           // ||g_j||^2
  double r1 = 0.0;           // ||x̂_j - x_j||^2
  double r2 = 0.0;           // <x̂_j - x_j, g_j>
  double r3 = 0.0;           // <x_j - x*, g(x̄_j) - g(x̂_j)>
  double r4 = 0.0;           // ||x̄_j - x̂_j||^2
  double sc_lhs = 0.0;       // <x̂_j - x*, grad f(x̂_j)>
  double sc_rhs = 0.0;       // (m/2) a_j - m r1
  double identity_residual = 0.0;
  double decomposition_residual = 0.0;
};

struct SimTrace {
  SimAlgo algo = SimAlgo::sgm;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  std::size_t tau = 0;
  std::size_t T = 0;
  std::size_t d = 0;
  std::size_t n = 0;
  double L = 0.0;
  double m = 0.0;
  std::vector<std::size_t> segment_begin;  // plus T as sentinel
  std::vector<SimStep> steps;
  std::vector<double> fake;   // (T + 1) x d, row j is x_j
  std::vector<double> xhat;   // T x d, row j is x̂_j

  std::span<const double> x(std::size_t j) const { return {fake.data() + j * d, d}; }
  std::span<const double> read(std::size_t j) const { return {xhat.data() + j * d, d}; }
  std::span<const double> final_iterate() const { return x(T); }
  double a_final = 0.0;  // ||x_T - x*||^2
  /// a_j for j = 0..T.
  double a_at(std::size_t j) const { return j < T ? steps[j].a : a_final; }
  std::size_t segment_first(std::size_t j) const { return segment_begin[steps[j].segment]; }
  std::size_t segment_last(std::size_t j) const { return segment_begin[steps[j].segment + 1] - 1; }
};

namespace detail {

inline double dot_sparse(std::span<const double> dense, const std::vector<index_t>& idx,
                         const std::vector<double>& val) {
  double s = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) s += dense[idx[k]] * val[k];
  return s;
}

}  // namespace detail

/// Runs the algorithm under `schedule` and records every analysis quantity.
/// The objective must be unconstrained (no box).
template <DecomposableObjective Obj>
SimTrace simulate(const Obj& obj, const SimConfig& cfg, std::span<const double> x0, const DelaySchedule& schedule,
                  std::span<const double> x_star, const CoordinateWeights* weights = nullptr) {
  if (!obj.box().unbounded()) throw std::invalid_argument("simulate: objective must be unconstrained");
  if (!(cfg.gamma > 0.0)) throw std::invalid_argument("simulate: gamma must be positive");
  const std::size_t d = obj.dim();
  const std::size_t n = obj.num_terms();
  if (x0.size() != d || x_star.size() != d) throw std::invalid_argument("simulate: dimension mismatch");

  SimTrace tr;
  tr.algo = cfg.algo;
  tr.seed = cfg.seed;
  tr.gamma = cfg.gamma;
  tr.tau = schedule.tau();
  tr.d = d;
  tr.n = n;
  tr.L = obj.smoothness();
  tr.m = obj.strong_convexity();

  std::size_t seg_len = 0;
  if (cfg.algo == SimAlgo::svrg_sparse) {
    if (!weights) throw std::invalid_argument("simulate: sparse SVRG needs coordinate weights");
    if (cfg.epoch_size == 0 || cfg.epochs == 0 || cfg.snapshot_interval == 0) {
      throw std::invalid_argument("simulate: SVRG needs epoch_size, epochs, snapshot_interval >= 1");
    }
    tr.T = cfg.epoch_size * cfg.epochs;
    seg_len = cfg.epoch_size;
  } else {
    if (cfg.iterations == 0) throw std::invalid_argument("simulate: iterations must be >= 1");
    tr.T = cfg.iterations;
    seg_len = tr.T;
  }
  const std::size_t T = tr.T;
  const std::size_t tau = schedule.tau();
  if (schedule.length() < T) throw std::invalid_argument("simulate: schedule shorter than the run");
  for (std::size_t b = 0; b < T; b += seg_len) tr.segment_begin.push_back(b);
  tr.segment_begin.push_back(T);

  tr.fake.assign((T + 1) * d, 0.0);
  tr.xhat.assign(T * d, 0.0);
  std::copy(x0.begin(), x0.end(), tr.fake.begin());
  tr.steps.resize(T);

  const CoordinateIndex index(obj);
  kernels::Scratch sc(obj.max_support());
  std::vector<double> y;
  std::vector<double> z;
  std::vector<double> xbar(d);
  std::vector<char> done(T, 0);
  std::vector<std::vector<double>> gbar_minus_ghat(T);
  std::size_t fake_done = 0;  // rows 0..fake_done of `fake` are final

  auto advance_fake = [&](std::size_t upto) {
    while (fake_done < upto) {
      const std::size_t i = fake_done;
      double* next = tr.fake.data() + (i + 1) * d;
      const double* cur = tr.fake.data() + i * d;
      std::copy(cur, cur + d, next);
      const auto& st = tr.steps[i];
      for (std::size_t k = 0; k < st.g_index.size(); ++k) {
        next[st.g_index[k]] = next[st.g_index[k]] + -cfg.gamma * st.g_value[k];
      }
      ++fake_done;
    }
  };

  // g(point, s) for the configured algorithm, as (indices, values).
  auto step_at = [&](std::span<const double> point, std::size_t s, std::vector<index_t>& idx,
                     std::vector<double>& val) {
    idx.clear();
    val.clear();
    if (cfg.algo == SimAlgo::scd) {
      const double partial = coordinate_partial(obj, index, static_cast<index_t>(s), point, sc.xs, sc.gx);
      idx.push_back(static_cast<index_t>(s));
      val.push_back(static_cast<double>(d) * partial);
      return;
    }
    const auto sup = obj.support(s);
    const std::size_t k = sup.size();
    gather(point, sup, sc.xs);
    obj.term_gradient(s, std::span<const double>(sc.xs.data(), k), std::span<double>(sc.gx.data(), k));
    idx.assign(sup.begin(), sup.end());
    if (cfg.algo == SimAlgo::sgm) {
      val.assign(sc.gx.begin(), sc.gx.begin() + static_cast<std::ptrdiff_t>(k));
      return;
    }
    gather(y, sup, sc.ys);
    obj.term_gradient(s, std::span<const double>(sc.ys.data(), k), std::span<double>(sc.gy.data(), k));
    val.resize(k);
    for (std::size_t p = 0; p < k; ++p) val[p] = (sc.gx[p] - sc.gy[p]) + weights->d_inv[sup[p]] * z[sup[p]];
  };

  const std::size_t draw_range = cfg.algo == SimAlgo::scd ? d : n;
  const bool full_read = cfg.read == ReadMode::full;
  std::vector<index_t> bar_idx;
  std::vector<double> bar_val;

  for (std::size_t seg = 0; seg + 1 < tr.segment_begin.size(); ++seg) {
    const std::size_t first = tr.segment_begin[seg];
    const std::size_t last = tr.segment_begin[seg + 1] - 1;
    advance_fake(first);
    if (cfg.algo == SimAlgo::svrg_sparse && seg % cfg.snapshot_interval == 0) {
      const auto xs = tr.x(first);
      y.assign(xs.begin(), xs.end());
      z = full_gradient(obj, y, 1);
    }
    const double a_snap = cfg.algo == SimAlgo::svrg_sparse ? sq_distance(y, x_star) : 0.0;

    std::vector<std::size_t> order;
    for (std::size_t j = first; j <= last; ++j) order.push_back(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return schedule.rank(a) < schedule.rank(b); });

    for (std::size_t j : order) {
      const std::size_t lo = std::max(first, j >= tau ? j - tau : 0);
      const std::size_t hi = std::min(last, j + tau);
      for (std::size_t i = fake_done; i < lo; ++i) {
        if (!done[i]) throw std::logic_error("simulate: schedule is not causal");
      }
      advance_fake(std::max(fake_done, lo));
      double* xh = tr.xhat.data() + j * d;
      const auto base = tr.x(lo);
      std::copy(base.begin(), base.end(), xh);
      for (std::size_t i = lo; i <= hi; ++i) {
        if (i == j || (full_read && i > j)) continue;
        if (i > j && schedule.mask(j, i) == 0) continue;
        const auto& st = tr.steps[i];
        for (std::size_t p = 0; p < st.g_index.size(); ++p) {
          if (!schedule.visible(j, i, p)) continue;
          if (!done[i]) throw std::logic_error("simulate: read of an update not yet computed");
          xh[st.g_index[p]] = xh[st.g_index[p]] + -cfg.gamma * st.g_value[p];
        }
      }
      std::copy(base.begin(), base.end(), xbar.begin());
      for (std::size_t i = lo; i < j; ++i) {
        const auto& st = tr.steps[i];
        for (std::size_t p = 0; p < st.g_index.size(); ++p) {
          if (schedule.visible(j, i, p)) xbar[st.g_index[p]] = xbar[st.g_index[p]] + -cfg.gamma * st.g_value[p];
        }
      }

      auto& st = tr.steps[j];
      st.j = j;
      st.segment = seg;
      st.sample = draw_sample(cfg.seed, j, draw_range);
      st.a_snapshot = a_snap;
      const std::span<const double> xhat_j(xh, d);
      step_at(xhat_j, st.sample, st.g_index, st.g_value);
      st.r4 = sq_distance(xbar, xhat_j);
      if (st.r4 > 0.0) {
        step_at(xbar, st.sample, bar_idx, bar_val);
        auto& diff = gbar_minus_ghat[j];
        diff.resize(bar_val.size());
        for (std::size_t k = 0; k < bar_val.size(); ++k) diff[k] = bar_val[k] - st.g_value[k];
      }
      done[j] = 1;
    }
    advance_fake(last + 1);
  }

  // Second pass: every fake iterate is now known.
  std::vector<double> recon(d);
  for (std::size_t j = 0; j < T; ++j) {
    auto& st = tr.steps[j];
    const auto xj = tr.x(j);
    const auto xj1 = tr.x(j + 1);
    const auto xh = tr.read(j);
    st.a = sq_distance(xj, x_star);
    st.r0 = 0.0;
    for (double g : st.g_value) st.r0 += g * g;
    st.r1 = sq_distance(xh, xj);
    double hat_minus_star_g = 0.0;
    double hat_minus_x_g = 0.0;
    for (std::size_t k = 0; k < st.g_index.size(); ++k) {
      const index_t v = st.g_index[k];
      hat_minus_star_g += (xh[v] - x_star[v]) * st.g_value[k];
      hat_minus_x_g += (xh[v] - xj[v]) * st.g_value[k];
    }
    st.r2 = hat_minus_x_g;
    const double lhs = sq_distance(xj1, x_star);
    const double rhs = st.a - 2.0 * cfg.gamma * hat_minus_star_g + cfg.gamma * cfg.gamma * st.r0 +
                       2.0 * cfg.gamma * hat_minus_x_g;
    st.identity_residual = std::abs(lhs - rhs);

    const auto grad = full_gradient(obj, xh, 1);
    st.sc_lhs = 0.0;
    for (std::size_t v = 0; v < d; ++v) st.sc_lhs += (xh[v] - x_star[v]) * grad[v];
    st.sc_rhs = 0.5 * tr.m * st.a - tr.m * st.r1;

    if (!gbar_minus_ghat[j].empty()) {
      st.r3 = 0.0;
      for (std::size_t k = 0; k < st.g_index.size(); ++k) {
        st.r3 += (xj[st.g_index[k]] - x_star[st.g_index[k]]) * gbar_minus_ghat[j][k];
      }
    }

    // x̂_j - x_j rebuilt from signed, masked window updates.
    std::fill(recon.begin(), recon.end(), 0.0);
    const std::size_t first = tr.segment_first(j);
    const std::size_t last = tr.segment_last(j);
    const std::size_t lo = std::max(first, j >= tau ? j - tau : 0);
    const std::size_t hi = std::min(last, j + tau);
    for (std::size_t i = lo; i <= hi; ++i) {
      if (i == j) continue;
      const auto& si = tr.steps[i];
      for (std::size_t p = 0; p < si.g_index.size(); ++p) {
        const bool vis = !(cfg.read == ReadMode::full && i > j) && schedule.visible(j, i, p);
        double sign = 0.0;
        if (i < j && !vis) sign = 1.0;
        if (i > j && vis) sign = -1.0;
        recon[si.g_index[p]] += sign * cfg.gamma * si.g_value[p];
      }
    }
    double worst = 0.0;
    for (std::size_t v = 0; v < d; ++v) worst = std::max(worst, std::abs((xh[v] - xj[v]) - recon[v]));
    st.decomposition_residual = worst;
  }
  tr.a_final = sq_distance(tr.final_iterate(), x_star);
  return tr;
}

// Statistics over seeds ---------------------------------------------------------------

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> v) {
  MeanSe out;
  if (v.empty()) return out;
  const double k = static_cast<double>(v.size());
  for (double x : v) out.mean += x;
  out.mean /= k;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (k - 1.0) / k);
  }
  return out;
}

/// One inequality family checked over many steps.
struct BoundCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max of lhs - (rhs + slack)
  std::size_t worst_index = 0;

  bool ok() const noexcept { return violations == 0; }
  void add(double lhs, double rhs_with_slack, std::size_t where) {
    ++checked;
    const double excess = lhs - rhs_with_slack;
    if (excess > 0.0) ++violations;
    if (excess > worst_excess) {
      worst_excess = excess;
      worst_index = where;
    }
  }
};

inline std::ostream& operator<<(std::ostream& os, const BoundCheck& c) {
  return os << c.name << ": " << (c.ok() ? "ok" : "VIOLATED") << " (" << c.violations << "/" << c.checked
            << " violations, worst excess " << c.worst_excess << " at " << c.worst_index << ")";
}

struct RecursionReport {
  BoundCheck identity{"per-step identity"};
  BoundCheck decomposition{"mismatch decomposition"};
  BoundCheck strong_convexity{"strong-convexity step"};
  BoundCheck recursion{"recursion (conditional on reads)"};
  BoundCheck recursion_pooled{"recursion (pooled over steps)"};
  std::optional<BoundCheck> r1_bound;
  std::optional<BoundCheck> r2_bound;
  std::size_t raw_pointwise_exceedances = 0;  // steps where the raw seed mean exceeds 3 SE
  double gradient_bound = 0.0;
  double max_r3 = 0.0;
  double max_r4 = 0.0;

  bool ok() const {
    return identity.ok() && decomposition.ok() && strong_convexity.ok() && recursion.ok() && recursion_pooled.ok() &&
           (!r1_bound || r1_bound->ok()) && (!r2_bound || r2_bound->ok());
  }
};

struct RecursionOptions {
  double identity_tol = 1e-9;
  double decomposition_tol = 1e-12;
  double se_slack = 3.0;
  std::size_t min_seeds = 5;
};

namespace detail {

inline void check_seed_set(const std::vector<SimTrace>& traces, std::size_t min_seeds) {
  if (traces.size() < min_seeds) {
    throw std::invalid_argument("need at least " + std::to_string(min_seeds) + " seeds to estimate expectations");
  }
  for (const auto& t : traces) {
    if (t.T != traces.front().T || t.tau != traces.front().tau || t.algo != traces.front().algo) {
      throw std::invalid_argument("traces must share T, tau and algorithm");
    }
  }
}

}  // namespace detail

/// Checks the per-step identity, the mismatch decomposition, the
/// strong-convexity step and the recursion
///   a_{j+1} <= (1 - gamma m) a_j + gamma^2 R0 + 2 gamma m R1 + 2 gamma R2.
/// The recursion is checked per step with the sample expectation of the
/// cross term taken exactly (x̂_j is independent of s_j), and as a pooled
/// average over steps with raw seed means and 3-SE slack. With conflict
/// statistics, the Hogwild! bounds on R1 and R2 are checked per step.
inline RecursionReport check_recursion(const std::vector<SimTrace>& traces, const ConflictStats* stats = nullptr,
                                       double gradient_bound = 0.0, const RecursionOptions& opt = {}) {
  detail::check_seed_set(traces, opt.min_seeds);
  RecursionReport rep;
  const auto& t0 = traces.front();
  const double g = t0.gamma;
  const double m = t0.m;
  const std::size_t T = t0.T;
  const std::size_t S = traces.size();

  double M = gradient_bound;
  if (!(M > 0.0)) {
    for (const auto& t : traces) {
      for (const auto& st : t.steps) M = std::max(M, std::sqrt(st.r0));
    }
  }
  rep.gradient_bound = M;

  std::vector<double> pooled(S, 0.0);
  std::vector<double> buf(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t j = 0; j < T; ++j) {
      const auto& st = traces[s].steps[j];
      const double scale = std::max(1.0, st.a);
      rep.identity.add(st.identity_residual, opt.identity_tol * scale, j);
      rep.decomposition.add(st.decomposition_residual, opt.decomposition_tol * std::max(1.0, std::sqrt(st.a)), j);
      const double sc_tol = 1e-12 * std::max({1.0, std::abs(st.sc_lhs), std::abs(st.sc_rhs)});
      rep.strong_convexity.add(st.sc_rhs, st.sc_lhs + sc_tol, j);
      rep.max_r3 = std::max(rep.max_r3, std::abs(st.r3));
      rep.max_r4 = std::max(rep.max_r4, st.r4);
    }
  }

  const bool hogwild_bounds = stats != nullptr && t0.algo == SimAlgo::sgm;
  if (hogwild_bounds) {
    rep.r1_bound = BoundCheck{"Hogwild R1 bound"};
    rep.r2_bound = BoundCheck{"Hogwild R2 bound"};
  }
  const double tau = static_cast<double>(t0.tau);
  const double ratio = hogwild_bounds ? stats->avg_conflict_degree / static_cast<double>(t0.n) : 0.0;
  const double r1_cap = g * g * M * M * (2.0 * tau + 8.0 * tau * tau * ratio);
  const double r2_cap = 4.0 * g * M * M * tau * ratio;

  for (std::size_t j = 0; j < T; ++j) {
    // Conditional form: E_s[<x̂_j - x*, g_j>] = <x̂_j - x*, grad f(x̂_j)>.
    for (std::size_t s = 0; s < S; ++s) {
      const auto& st = traces[s].steps[j];
      buf[s] = g * m * st.a - 2.0 * g * st.sc_lhs - 2.0 * g * m * st.r1;
    }
    const auto cond = mean_se(buf);
    rep.recursion.add(cond.mean, opt.se_slack * cond.se + 1e-12 * std::max(1.0, traces[0].steps[j].a), j);

    // Raw form with realized samples.
    for (std::size_t s = 0; s < S; ++s) {
      const auto& tr = traces[s];
      const auto& st = tr.steps[j];
      buf[s] = tr.a_at(j + 1) - ((1.0 - g * m) * st.a + g * g * st.r0 + 2.0 * g * m * st.r1 + 2.0 * g * st.r2);
      pooled[s] += buf[s] / static_cast<double>(T);
    }
    const auto raw = mean_se(buf);
    if (raw.mean > opt.se_slack * raw.se) ++rep.raw_pointwise_exceedances;

    if (hogwild_bounds) {
      for (std::size_t s = 0; s < S; ++s) buf[s] = traces[s].steps[j].r1;
      const auto r1 = mean_se(buf);
      rep.r1_bound->add(r1.mean, r1_cap + opt.se_slack * r1.se, j);
      for (std::size_t s = 0; s < S; ++s) buf[s] = traces[s].steps[j].r2;
      const auto r2 = mean_se(buf);
      rep.r2_bound->add(r2.mean, r2_cap + opt.se_slack * r2.se, j);
    }
  }
  const auto pooled_stat = mean_se(pooled);
  rep.recursion_pooled.add(pooled_stat.mean, opt.se_slack * pooled_stat.se, 0);
  return rep;
}

struct WindowReport {
  BoundCheck gradient_chain{"G_r bound"};
  BoundCheck mismatch_chain{"Delta_r <= (3 gamma tau (r+1))^2 G_{r+1}"};
  BoundCheck shifted{"shifted gradient bound"};
  std::size_t max_window = 0;
  std::size_t r_max = 0;

  bool ok() const { return gradient_chain.ok() && mismatch_chain.ok() && shifted.ok(); }
};

struct WindowOptions {
  std::size_t r_max = 4;
  double se_slack = 3.0;
  std::size_t min_seeds = 5;
  std::size_t stride = 1;  // check every stride-th j
};

namespace detail {

/// `cap(a_j, a_snapshot, delta)` is the right-hand side of the gradient bound.
template <class Cap>
WindowReport check_windows(const std::vector<SimTrace>& traces, const WindowOptions& opt, Cap&& cap) {
  check_seed_set(traces, opt.min_seeds);
  if (opt.r_max == 0 || opt.stride == 0) throw std::invalid_argument("r_max and stride must be >= 1");
  WindowReport rep;
  rep.r_max = opt.r_max;
  const auto& t0 = traces.front();
  const std::size_t S = traces.size();
  const std::size_t T = t0.T;
  const std::size_t tau = t0.tau;
  const double gamma = t0.gamma;
  std::vector<double> buf(S);
  std::vector<MeanSe> D;
  std::vector<MeanSe> G;

  for (std::size_t j = 0; j < T; j += opt.stride) {
    const std::size_t lo = t0.segment_first(j);
    const std::size_t hi = t0.segment_last(j);
    const Window outer = window(j, opt.r_max, tau, lo, hi);
    rep.max_window = std::max(rep.max_window, outer.size());
    for (std::size_t s = 0; s < S; ++s) buf[s] = traces[s].steps[j].a;
    const double a_j = mean_se(buf).mean;
    for (std::size_t s = 0; s < S; ++s) buf[s] = traces[s].steps[j].a_snapshot;
    const double a_snap = mean_se(buf).mean;

    D.assign(outer.size(), {});
    G.assign(outer.size(), {});
    for (std::size_t k = outer.first; k <= outer.last; ++k) {
      for (std::size_t s = 0; s < S; ++s) buf[s] = sq_distance(traces[s].read(k), traces[s].x(j));
      D[k - outer.first] = mean_se(buf);
      for (std::size_t s = 0; s < S; ++s) buf[s] = traces[s].steps[k].r0;
      G[k - outer.first] = mean_se(buf);
      const auto& gk = G[k - outer.first];
      rep.shifted.add(gk.mean, cap(a_j, a_snap, D[k - outer.first].mean) + opt.se_slack * gk.se, j);
    }

    std::vector<double> delta_r(opt.r_max + 1);
    std::vector<MeanSe> g_r(opt.r_max + 1);
    for (std::size_t r = 0; r <= opt.r_max; ++r) {
      const Window w = window(j, r, tau, lo, hi);
      if (w.size() > 2 * r * tau + 1) throw std::logic_error("window larger than 2 r tau + 1");
      double dmax = 0.0;
      MeanSe gmax{-1.0, 0.0};
      for (std::size_t k = w.first; k <= w.last; ++k) {
        dmax = std::max(dmax, D[k - outer.first].mean);
        if (G[k - outer.first].mean > gmax.mean) gmax = G[k - outer.first];
      }
      delta_r[r] = dmax;
      g_r[r] = gmax;
      rep.gradient_chain.add(gmax.mean, cap(a_j, a_snap, dmax) + opt.se_slack * gmax.se, j);
    }
    for (std::size_t r = 0; r < opt.r_max; ++r) {
      const double f = 3.0 * gamma * static_cast<double>(tau) * static_cast<double>(r + 1);
      const double rhs = f * f * g_r[r + 1].mean;
      rep.mismatch_chain.add(delta_r[r], rhs * (1.0 + 1e-9) + 1e-300, j);
    }
  }
  return rep;
}

}  // namespace detail

/// Asynchronous coordinate descent window chains, with d and L from the trace:
///   G_r <= 2 d L^2 (a_j + Delta_r),  Delta_r <= (3 gamma tau (r+1))^2 G_{r+1},
/// and the shifted bound E||g_k||^2 <= 2 d L^2 (a_j + E||x_j - x̂_k||^2) for
/// every k in the largest window.
inline WindowReport check_ascd_windows(const std::vector<SimTrace>& traces, const WindowOptions& opt = {}) {
  if (traces.empty() || traces.front().algo != SimAlgo::scd) {
    throw std::invalid_argument("check_ascd_windows needs coordinate descent traces");
  }
  const double c = 2.0 * static_cast<double>(traces.front().d) * traces.front().L * traces.front().L;
  return detail::check_windows(traces, opt, [c](double a, double, double delta) { return c * (a + delta); });
}

/// Sparse SVRG window chains: G_r <= 4 L^2 (a_j + a_y + Delta_r) and
/// Delta_r <= (3 gamma tau (r+1))^2 G_{r+1}, windows restricted to the epoch;
/// a_y is the squared distance of the epoch's snapshot to x*.
inline WindowReport check_svrg_variance_window(const std::vector<SimTrace>& traces, const WindowOptions& opt = {}) {
  if (traces.empty() || traces.front().algo != SimAlgo::svrg_sparse) {
    throw std::invalid_argument("check_svrg_variance_window needs sparse SVRG traces");
  }
  const double c = 4.0 * traces.front().L * traces.front().L;
  return detail::check_windows(traces, opt,
                               [c](double a, double a_snap, double delta) { return c * (a + a_snap + delta); });
}

inline void write_sim_csv(std::ostream& os, const SimTrace& tr) {
  os << "j,sample,a,r0,r1,r2,r3,r4,sc_lhs,sc_rhs,identity_residual,decomposition_residual\n";
  const auto old = os.precision(17);
  for (const auto& st : tr.steps) {
    os << st.j << ',' << st.sample << ',' << st.a << ',' << st.r0 << ',' << st.r1 << ',' << st.r2 << ',' << st.r3
       << ',' << st.r4 << ',' << st.sc_lhs << ',' << st.sc_rhs << ',' << st.identity_residual << ','
       << st.decomposition_residual << '\n';
  }
  os.precision(old);
}

}  // namespace asyncopt
