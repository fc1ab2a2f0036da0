#pragma once

// Benchmark grids: solver x worker count x seed on one dataset, with raw and
// normalized traces, time-to-target speedup tables and a replayable manifest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "asyncopt/async_engine.hpp"
#include "asyncopt/data_io.hpp"
#include "asyncopt/hypergraph_stats.hpp"
#include "asyncopt/objectives.hpp"
#include "asyncopt/serial_solvers.hpp"

namespace asyncopt {

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names{"sgm", "scd", "svrg_dense", "svrg_sparse", "hogwild", "ascd", "kromagnon"};
  return names;
}

inline bool is_async(const std::string& algo) { return algo == "hogwild" || algo == "ascd" || algo == "kromagnon"; }

struct BenchPlan {
  std::string problem = "logreg";  // linreg | logreg | vertexcover
  std::string data;                // libsvm / edge-list path; empty means synthetic
  SyntheticSpec synthetic;
  double l2_reg = 1e-4;
  double beta = 1.0;
  std::vector<std::string> algorithms{"hogwild", "kromagnon", "svrg_dense"};
  std::vector<unsigned> workers{1, 2, 4};
  std::size_t epochs = 50;
  std::size_t snapshot_interval = 2;
  std::size_t epoch_size = 0;         // SVRG inner steps; 0 means n
  std::size_t records_per_epoch = 2;
  std::vector<std::uint64_t> seeds{1};
  std::optional<double> gamma;        // overrides the theorem-derived steps
  double epsilon = 1e-3;              // accuracy used by the SGM step rule
  ReadMode read = ReadMode::sparse;
  double linf_radius = std::numeric_limits<double>::infinity();
  std::string output_dir = "bench_out";

  void validate() const {
    if (problem != "linreg" && problem != "logreg" && problem != "vertexcover") {
      throw std::invalid_argument("unknown problem: " + problem);
    }
    for (const auto& a : algorithms) {
      if (std::find(known_algorithms().begin(), known_algorithms().end(), a) == known_algorithms().end()) {
        throw std::invalid_argument("unknown algorithm: " + a);
      }
    }
    for (unsigned w : workers) {
      if (w < 1) throw std::invalid_argument("worker counts must be >= 1");
    }
    if (epochs == 0 || snapshot_interval == 0 || records_per_epoch == 0) {
      throw std::invalid_argument("epochs, snapshot_interval and records_per_epoch must be >= 1");
    }
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (gamma && !(*gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  }
};

using AnyObjective = std::variant<LeastSquaresObjective, LogisticObjective, VertexCoverObjective>;

/// Loads or generates the plan's dataset and builds its objective.
inline AnyObjective build_objective(const BenchPlan& plan) {
  if (plan.problem == "vertexcover") {
    if (plan.data.empty()) throw std::invalid_argument("vertexcover needs an edge-list file");
    return AnyObjective(std::in_place_type<VertexCoverObjective>, parse_edge_list(plan.data, plan.beta));
  }
  RegressionDataset data;
  if (plan.data.empty()) {
    SyntheticSpec spec = plan.synthetic;
    spec.label_model = plan.problem == "logreg" ? LabelModel::logistic : LabelModel::linear;
    data = gen_synthetic(spec, std::max(1u, std::thread::hardware_concurrency()));
  } else {
    data = parse_libsvm(plan.data);
  }
  data.l2_reg = plan.l2_reg;
  if (plan.problem == "logreg") return AnyObjective(std::in_place_type<LogisticObjective>, data);
  return AnyObjective(std::in_place_type<LeastSquaresObjective>, data);
}

/// Samples per epoch for an algorithm: n for term-sampling methods, d for
/// coordinate methods, the configured epoch size for the SVRG family.
template <DecomposableObjective Obj>
std::size_t epoch_unit(const Obj& obj, const BenchPlan& plan, const std::string& algo) {
  if (algo == "scd" || algo == "ascd") return obj.dim();
  if (algo == "svrg_dense" || algo == "svrg_sparse" || algo == "kromagnon") {
    return plan.epoch_size ? plan.epoch_size : obj.num_terms();
  }
  return obj.num_terms();
}

/// Theorem-derived step size (or the plan's explicit override).
template <DecomposableObjective Obj>
double bench_step(const Obj& obj, const BenchPlan& plan, const std::string& algo, const ProblemConstants& c) {
  if (plan.gamma) return *plan.gamma;
  if (algo == "scd" || algo == "ascd") return 1.0 / (6.0 * static_cast<double>(obj.dim()) * c.L * c.kappa);
  if (algo == "sgm" || algo == "hogwild") return plan.epsilon * c.m / (2.0 * c.M * c.M);
  return 1.0 / (4.0 * c.L * c.kappa);
}

struct BenchRun {
  std::string algorithm;
  unsigned workers = 1;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  RunResult result;
};

inline std::string run_name(const BenchRun& r) {
  return r.algorithm + "_w" + std::to_string(r.workers) + "_s" + std::to_string(r.seed);
}

template <DecomposableObjective Obj>
RunResult run_algorithm(const Obj& obj, const std::string& algo, const SolverConfig& cfg, std::span<const double> x0,
                        unsigned workers, ReadMode read, const CoordinateWeights& w) {
  const AsyncOptions opt{workers, read, LogLevel::none};
  if (algo == "sgm") return run_sgm(obj, cfg, x0);
  if (algo == "scd") return run_scd(obj, cfg, x0);
  if (algo == "svrg_dense") return run_svrg_dense(obj, cfg, x0);
  if (algo == "svrg_sparse") return run_svrg_sparse(obj, w, cfg, x0);
  if (algo == "hogwild") return run_hogwild(obj, cfg, x0, opt).run;
  if (algo == "ascd") return run_ascd(obj, cfg, x0, opt).run;
  if (algo == "kromagnon") return run_kromagnon(obj, w, cfg, x0, opt).run;
  throw std::invalid_argument("unknown algorithm: " + algo);
}

namespace detail {

inline std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

template <class T>
std::string list(const std::vector<T>& v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
  return os.str();
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

/// Key=value lines whose keys match the CLI's `bench` options, so a manifest
/// can be fed back as a config file.
inline std::string plan_manifest(const BenchPlan& plan) {
  std::ostringstream os;
  os << "problem=" << plan.problem << '\n';
  if (!plan.data.empty()) os << "data=\"" << plan.data << "\"\n";
  os << "synthetic-n=" << plan.synthetic.n << '\n'
     << "synthetic-d=" << plan.synthetic.d << '\n'
     << "synthetic-nnz=" << plan.synthetic.nnz << '\n'
     << "data-seed=" << plan.synthetic.seed << '\n'
     << "l2-reg=" << detail::fmt(plan.l2_reg) << '\n'
     << "beta=" << detail::fmt(plan.beta) << '\n'
     << "algorithms=[" << detail::join([&] {
          std::vector<std::string> q;
          for (const auto& a : plan.algorithms) q.push_back('"' + a + '"');
          return q;
        }()) << "]\n"
     << "workers=" << detail::list(plan.workers) << '\n'
     << "epochs=" << plan.epochs << '\n'
     << "snapshot-interval=" << plan.snapshot_interval << '\n'
     << "epoch-size=" << plan.epoch_size << '\n'
     << "records-per-epoch=" << plan.records_per_epoch << '\n'
     << "seeds=" << detail::list(plan.seeds) << '\n';
  if (plan.gamma) os << "gamma=" << detail::fmt(*plan.gamma) << '\n';
  os << "epsilon=" << detail::fmt(plan.epsilon) << '\n'
     << "read=" << (plan.read == ReadMode::full ? "full" : "sparse") << '\n';
  if (std::isfinite(plan.linf_radius)) os << "linf-radius=" << detail::fmt(plan.linf_radius) << '\n';
  return os.str();
}

inline void write_stats_block(std::ostream& os, const ConflictStats& st, const CoordinateWeights& w) {
  const auto tb = tau_bound_comparison(st, st.n);
  os << "n=" << st.n << '\n'
     << "d=" << st.d << '\n'
     << "avg_conflict_degree=" << detail::fmt(st.avg_conflict_degree) << '\n'
     << "max_conflict_degree=" << st.max_conflict_degree << '\n'
     << "max_left_degree=" << st.max_left_degree << '\n'
     << "max_right_degree=" << st.max_right_degree << '\n'
     << "tau_this_work=" << detail::fmt(tb.this_work) << '\n'
     << "tau_prior=" << detail::fmt(tb.prior) << '\n'
     << "uncovered_coordinates=" << w.uncovered.size() << '\n';
}

inline void write_stats_csv(std::ostream& os, const ConflictStats& st, const CoordinateWeights& w, bool header) {
  const auto tb = tau_bound_comparison(st, st.n);
  if (header) {
    os << "n,d,avg_conflict_degree,max_conflict_degree,max_left_degree,max_right_degree,tau_this_work,tau_prior,"
          "uncovered\n";
  }
  os << st.n << ',' << st.d << ',' << detail::fmt(st.avg_conflict_degree) << ',' << st.max_conflict_degree << ','
     << st.max_left_degree << ',' << st.max_right_degree << ',' << detail::fmt(tb.this_work) << ','
     << detail::fmt(tb.prior) << ',' << w.uncovered.size() << '\n';
}

struct NormalizedPoint {
  std::int64_t wall_ns = 0;
  std::size_t iter = 0;
  double value = 0.0;
};

/// Maps f0 to 1 and fmin to 0. Returns an empty trace when f0 == fmin.
inline std::vector<NormalizedPoint> normalize_trace(const std::vector<TraceRecord>& trace, double f0, double fmin) {
  std::vector<NormalizedPoint> out;
  const double span = f0 - fmin;
  for (const auto& r : trace) {
    const double v = span > 0.0 ? (r.objective - fmin) / span : 0.0;
    out.push_back({r.wall_ns, r.iter, v});
  }
  return out;
}

struct GridOutcome {
  std::vector<BenchRun> runs;
  double f0 = 0.0;
  double fmin = 0.0;
  std::vector<std::string> diverged;
};

/// Runs the plan and writes the artifact directory:
///   manifest.txt, stats.txt, traces/<run>.csv, normalized/<run>.csv, speedup.csv
inline GridOutcome run_plan(const BenchPlan& plan, std::ostream* progress = nullptr) {
  plan.validate();
  namespace fs = std::filesystem;
  const fs::path dir(plan.output_dir);
  fs::create_directories(dir / "traces");
  fs::create_directories(dir / "normalized");

  const AnyObjective any = build_objective(plan);
  GridOutcome out;
  std::ostringstream derived;

  std::visit(
      [&](const auto& obj) {
        const auto edges = hyperedges(obj);
        const auto stats = conflict_stats(edges, obj.dim());
        const auto weights = coordinate_weights(edges, obj.dim());
        {
          std::ofstream s(dir / "stats.txt");
          write_stats_block(s, stats, weights);
        }
        const std::vector<double> x0(obj.dim(), 0.0);
        const auto ref = solve_reference(obj);
        const double radius = std::sqrt(sq_distance(x0, ref.x));
        const auto constants = problem_constants(obj, ref.x, std::max(radius, 1e-12));
        derived << "derived.L=" << detail::fmt(constants.L) << '\n'
                << "derived.m=" << detail::fmt(constants.m) << '\n'
                << "derived.kappa=" << detail::fmt(constants.kappa) << '\n'
                << "derived.M=" << detail::fmt(constants.M) << '\n'
                << "derived.n=" << obj.num_terms() << '\n'
                << "derived.d=" << obj.dim() << '\n'
                << "derived.f_star=" << detail::fmt(ref.value) << '\n'
                << "derived.reference_grad_norm=" << detail::fmt(ref.grad_norm) << '\n'
                << "derived.reference_converged=" << (ref.converged ? "true" : "false") << '\n';

        for (const auto& algo : plan.algorithms) {
          const double gamma = bench_step(obj, plan, algo, constants);
          derived << "derived.gamma." << algo << '=' << detail::fmt(gamma) << '\n'
                  << "derived.gamma_source." << algo << '=' << (plan.gamma ? "explicit" : "theorem") << '\n';
          const std::size_t unit = epoch_unit(obj, plan, algo);
          for (unsigned w : plan.workers) {
            if (!is_async(algo) && w != 1) continue;
            for (auto seed : plan.seeds) {
              SolverConfig cfg;
              cfg.step_size = gamma;
              cfg.seed = seed;
              cfg.linf = std::isfinite(plan.linf_radius) ? LinfBall::of_radius(plan.linf_radius) : LinfBall{};
              cfg.snapshot_interval = plan.snapshot_interval;
              cfg.record_every = std::max<std::size_t>(1, unit / plan.records_per_epoch);
              cfg.reference = Reference{ref.x, ref.value};
              cfg.gradient_threads = algo == "kromagnon" ? w : 1;
              if (algo == "svrg_dense" || algo == "svrg_sparse" || algo == "kromagnon") {
                cfg.epoch_size = unit;
                cfg.epochs = plan.epochs;
              } else {
                cfg.iterations = plan.epochs * unit;
              }
              BenchRun run{algo, w, seed, gamma, run_algorithm(obj, algo, cfg, x0, w, plan.read, weights)};
              if (progress) {
                *progress << run_name(run) << ": wall " << run.result.wall_ns / 1e6 << " ms"
                          << (run.result.diverged ? " (diverged)" : "") << '\n';
              }
              out.runs.push_back(std::move(run));
            }
          }
        }
      },
      any);

  out.f0 = out.runs.empty() ? 0.0 : out.runs.front().result.trace.front().objective;
  out.fmin = out.f0;
  for (const auto& r : out.runs) {
    if (r.result.diverged) {
      out.diverged.push_back(run_name(r));
      continue;
    }
    for (const auto& t : r.result.trace) out.fmin = std::min(out.fmin, t.objective);
  }

  for (const auto& r : out.runs) {
    std::ofstream t(dir / "traces" / (run_name(r) + ".csv"));
    write_trace_csv(t, r.result.trace);
    std::ofstream nt(dir / "normalized" / (run_name(r) + ".csv"));
    nt << "wall_ns,iter,normalized_objective\n" << std::setprecision(17);
    for (const auto& p : normalize_trace(r.result.trace, out.f0, out.fmin)) {
      nt << p.wall_ns << ',' << p.iter << ',' << p.value << '\n';
    }
  }

  {
    std::ofstream sp(dir / "speedup.csv");
    sp << "algorithm,seed,workers,target,time_ns,speedup\n";
    for (const auto& algo : plan.algorithms) {
      for (auto seed : plan.seeds) {
        std::map<unsigned, std::vector<TraceRecord>> traces;
        for (const auto& r : out.runs) {
          if (r.algorithm == algo && r.seed == seed && !r.result.diverged) traces.emplace(r.workers, r.result.trace);
        }
        if (!traces.count(1)) continue;
        for (double target : {0.999, 0.9999}) {
          for (const auto& row : measure_speedup(traces, target)) {
            sp << algo << ',' << seed << ',' << row.workers << ',' << target << ',';
            if (row.time_ns) sp << *row.time_ns;
            sp << ',';
            if (row.speedup) sp << detail::fmt(*row.speedup);
            sp << '\n';
          }
        }
      }
    }
  }

  {
    std::ofstream m(dir / "manifest.txt");
    m << plan_manifest(plan) << derived.str();
    m << "normalization.f0=" << detail::fmt(out.f0) << '\n'
      << "normalization.fmin=" << detail::fmt(out.fmin) << '\n'
      << "diverged_runs=\"" << detail::join(out.diverged) << "\"\n"
      << "hardware.threads=" << std::thread::hardware_concurrency() << '\n'
#ifdef __VERSION__
      << "hardware.compiler=\"" << __VERSION__ << "\"\n"
#endif
      << "runs=" << out.runs.size() << '\n';
  }
  return out;
}

// Summary ---------------------------------------------------------------------------

struct AlgorithmSummary {
  std::string algorithm;
  double best_normalized = std::numeric_limits<double>::infinity();
  std::map<unsigned, double> time_to_999_ns;  // mean over seeds that reached the target
  std::map<unsigned, double> speedup_999;     // mean over seeds
};

struct Summary {
  std::vector<AlgorithmSummary> algorithms;
  std::optional<double> kromagnon_vs_svrg_dense;  // t(svrg_dense) / t(kromagnon), both 1 worker
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace detail

inline Summary summarize(const std::string& dir_path) {
  namespace fs = std::filesystem;
  const fs::path dir(dir_path);
  Summary sum;
  if (!fs::exists(dir / "speedup.csv")) {
    sum.warnings.push_back("no speedup.csv in " + dir_path);
  }
  std::map<std::string, AlgorithmSummary> by_algo;
  if (fs::exists(dir / "normalized")) {
    for (const auto& e : fs::directory_iterator(dir / "normalized")) {
      if (e.path().extension() != ".csv") continue;
      const std::string stem = e.path().stem().string();
      const auto w = stem.rfind("_w");
      if (w == std::string::npos) {
        sum.warnings.push_back("unrecognized trace file " + stem);
        continue;
      }
      auto& a = by_algo[stem.substr(0, w)];
      a.algorithm = stem.substr(0, w);
      const auto rows = detail::read_csv(e.path());
      if (rows.empty()) sum.warnings.push_back("empty trace " + stem);
      for (const auto& r : rows) {
        if (r.size() >= 3) a.best_normalized = std::min(a.best_normalized, std::stod(r[2]));
      }
    }
  }
  if (fs::exists(dir / "speedup.csv")) {
    std::map<std::pair<std::string, unsigned>, std::vector<double>> times;
    std::map<std::pair<std::string, unsigned>, std::vector<double>> speedups;
    for (const auto& r : detail::read_csv(dir / "speedup.csv")) {
      if (r.size() < 6 || std::abs(std::stod(r[3]) - 0.999) > 1e-12) continue;
      const unsigned w = static_cast<unsigned>(std::stoul(r[2]));
      if (!r[4].empty()) times[{r[0], w}].push_back(std::stod(r[4]));
      if (!r[5].empty()) speedups[{r[0], w}].push_back(std::stod(r[5]));
      by_algo[r[0]].algorithm = r[0];
    }
    for (const auto& [key, v] : times) {
      double s = 0.0;
      for (double t : v) s += t;
      by_algo[key.first].time_to_999_ns[key.second] = s / static_cast<double>(v.size());
    }
    for (const auto& [key, v] : speedups) {
      double s = 0.0;
      for (double t : v) s += t;
      by_algo[key.first].speedup_999[key.second] = s / static_cast<double>(v.size());
    }
  }
  for (auto& [name, a] : by_algo) sum.algorithms.push_back(a);
  if (by_algo.count("kromagnon") && by_algo.count("svrg_dense")) {
    const auto& k = by_algo["kromagnon"].time_to_999_ns;
    const auto& s = by_algo["svrg_dense"].time_to_999_ns;
    if (k.count(1) && s.count(1) && k.at(1) > 0.0) sum.kromagnon_vs_svrg_dense = s.at(1) / k.at(1);
  }
  if (sum.algorithms.empty()) sum.warnings.push_back("no runs found in " + dir_path);
  return sum;
}

inline void write_summary(std::ostream& os, const Summary& sum) {
  for (const auto& w : sum.warnings) os << "warning: " << w << '\n';
  os << "algorithm,workers,best_normalized,time_to_99.9_ns,speedup_99.9\n";
  for (const auto& a : sum.algorithms) {
    std::set<unsigned> ws;
    for (const auto& [w, t] : a.time_to_999_ns) ws.insert(w);
    for (const auto& [w, t] : a.speedup_999) ws.insert(w);
    if (ws.empty()) ws.insert(1);
    for (unsigned w : ws) {
      os << a.algorithm << ',' << w << ',' << detail::fmt(a.best_normalized) << ',';
      if (a.time_to_999_ns.count(w)) os << detail::fmt(a.time_to_999_ns.at(w));
      os << ',';
      if (a.speedup_999.count(w)) os << detail::fmt(a.speedup_999.at(w));
      os << '\n';
    }
  }
  if (sum.kromagnon_vs_svrg_dense) {
    os << "kromagnon_vs_svrg_dense_time_ratio=" << detail::fmt(*sum.kromagnon_vs_svrg_dense) << '\n';
  }
}

}  // namespace asyncopt
