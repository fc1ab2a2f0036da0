// asyncopt: hypergraph statistics, single solver runs, benchmark grids and
// summaries. Run `asyncopt_cli <subcommand> --help` for options.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "asyncopt/asyncopt.hpp"

namespace {

using namespace asyncopt;

void add_dataset_options(CLI::App& app, BenchPlan& plan) {
  app.add_option("--problem", plan.problem, "linreg | logreg | vertexcover")
      ->check(CLI::IsMember({"linreg", "logreg", "vertexcover"}));
  app.add_option("--data", plan.data, "libsvm file (regression) or edge list (vertexcover); .gz accepted");
  app.add_option("--synthetic-n", plan.synthetic.n, "synthetic rows when --data is absent");
  app.add_option("--synthetic-d", plan.synthetic.d, "synthetic dimension");
  app.add_option("--synthetic-nnz", plan.synthetic.nnz, "nonzeros per synthetic row");
  app.add_option("--data-seed", plan.synthetic.seed, "seed of the synthetic generator");
  app.add_option("--l2-reg", plan.l2_reg, "l2 regularization lambda");
  app.add_option("--beta", plan.beta, "vertex cover penalty weight");
}

ReadMode parse_read(const std::string& s) { return s == "full" ? ReadMode::full : ReadMode::sparse; }

int cmd_stats(const BenchPlan& plan, const std::string& csv) {
  const auto any = build_objective(plan);
  std::visit(
      [&](const auto& obj) {
        const auto edges = hyperedges(obj);
        const auto st = conflict_stats(edges, obj.dim());
        const auto w = coordinate_weights(edges, obj.dim());
        write_stats_block(std::cout, st, w);
        if (!csv.empty()) {
          std::ofstream os(csv);
          write_stats_csv(os, st, w, true);
        }
      },
      any);
  return 0;
}

struct RunArgs {
  std::string algorithm = "hogwild";
  unsigned workers = 1;
  std::string read = "sparse";
  std::optional<double> gamma;
  double epsilon = 1e-3;
  std::size_t iterations = 0;
  std::size_t epoch_size = 0;
  std::size_t epochs = 0;
  std::size_t snapshot_interval = 1;
  std::size_t record_every = 0;
  std::uint64_t seed = 1;
  std::optional<double> linf_radius;
  std::string trace_path;
  std::string overlap_path;
};

int cmd_run(const BenchPlan& plan, const RunArgs& a) {
  const auto any = build_objective(plan);
  return std::visit(
      [&](const auto& obj) {
        const std::vector<double> x0(obj.dim(), 0.0);
        const auto ref = solve_reference(obj);
        SolverConfig cfg;
        cfg.seed = a.seed;
        cfg.iterations = a.iterations;
        cfg.epoch_size = a.epoch_size;
        cfg.epochs = a.epochs;
        cfg.snapshot_interval = a.snapshot_interval;
        cfg.record_every = a.record_every;
        cfg.epsilon = a.epsilon;
        cfg.reference = Reference{ref.x, ref.value};
        cfg.gradient_threads = a.algorithm == "kromagnon" ? a.workers : 1;
        if (a.linf_radius) cfg.linf = LinfBall::of_radius(*a.linf_radius);
        if (a.gamma) {
          cfg.step_size = *a.gamma;
        } else if (a.algorithm == "sgm" || a.algorithm == "hogwild") {
          cfg.step_rule = StepRule::hogwild_rate;
        } else if (a.algorithm == "scd" || a.algorithm == "ascd") {
          cfg.step_rule = StepRule::scd_rate;
        } else {
          cfg.step_rule = StepRule::svrg_rate;
        }
        const auto weights = coordinate_weights(obj);
        AsyncOptions opt{a.workers, parse_read(a.read), a.overlap_path.empty() ? LogLevel::none : LogLevel::timing};
        AsyncResult res;
        if (a.algorithm == "hogwild") res = run_hogwild(obj, cfg, x0, opt);
        else if (a.algorithm == "ascd") res = run_ascd(obj, cfg, x0, opt);
        else if (a.algorithm == "kromagnon") res = run_kromagnon(obj, weights, cfg, x0, opt);
        else res.run = run_algorithm(obj, a.algorithm, cfg, x0, 1, opt.read, weights);

        const auto& r = res.run;
        const auto& last = r.trace.back();
        std::cout << "algorithm=" << a.algorithm << "\nworkers=" << a.workers << "\ngamma=" << r.schedule.gamma
                  << "\nsamples=" << r.samples << "\nwall_ms=" << static_cast<double>(r.wall_ns) / 1e6
                  << "\na_final=" << last.a << "\nf_gap_final=" << last.f_gap
                  << "\ndiverged=" << (r.diverged ? "true" : "false") << '\n';
        if (res.overlap.measured) std::cout << "tau_observed=" << res.overlap.tau_observed << '\n';
        if (!a.trace_path.empty()) {
          std::ofstream os(a.trace_path);
          write_trace_csv(os, r.trace);
        }
        if (!a.overlap_path.empty()) {
          std::ofstream os(a.overlap_path);
          write_overlap_csv(os, res.overlap);
        }
        return r.diverged ? 3 : 0;
      },
      any);
}

/// CLI11 reads config files only on the root app, so `bench --config` expands
/// the file into arguments for every option not given on the command line.
std::vector<std::string> config_args(CLI::App& sub, const std::string& path) {
  std::vector<std::string> out;
  for (const auto& item : CLI::ConfigBase().from_file(path)) {
    if (!item.parents.empty()) continue;
    auto* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr || opt->count() > 0) continue;
    out.push_back("--" + item.name);
    out.insert(out.end(), item.inputs.begin(), item.inputs.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lock-free asynchronous optimization toolkit"};
  app.require_subcommand(1);

  BenchPlan plan;
  std::string stats_csv;
  auto* stats = app.add_subcommand("stats", "conflict-graph statistics of a dataset");
  add_dataset_options(*stats, plan);
  stats->add_option("--csv", stats_csv, "also write the statistics as a CSV row");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run one solver and print its final state");
  add_dataset_options(*run, plan);
  run->add_option("--algorithm,--mode", run_args.algorithm)->check(CLI::IsMember(known_algorithms()));
  run->add_option("--workers", run_args.workers)->check(CLI::PositiveNumber);
  run->add_option("--read", run_args.read)->check(CLI::IsMember({"sparse", "full"}));
  run->add_option("--gamma", run_args.gamma, "explicit step size; default is the theorem rule");
  run->add_option("--epsilon", run_args.epsilon, "target accuracy for the theorem rules");
  run->add_option("--iters", run_args.iterations, "samples for SGM/SCD-type solvers");
  run->add_option("--epoch-size", run_args.epoch_size);
  run->add_option("--epochs", run_args.epochs);
  run->add_option("--snapshot-interval", run_args.snapshot_interval);
  run->add_option("--record-every", run_args.record_every);
  run->add_option("--seed", run_args.seed);
  run->add_option("--linf-radius", run_args.linf_radius);
  run->add_option("--trace", run_args.trace_path, "trace CSV output");
  run->add_option("--overlap", run_args.overlap_path, "overlap histogram CSV output (enables timing logs)");

  auto* bench = app.add_subcommand("bench", "run a benchmark grid");
  std::string bench_config;
  bench->add_option("--config", bench_config, "key=value plan file; a bench manifest.txt replays its grid");
  add_dataset_options(*bench, plan);
  bench->add_option("--algorithms", plan.algorithms)->check(CLI::IsMember(known_algorithms()));
  bench->add_option("--workers", plan.workers)->check(CLI::PositiveNumber);
  bench->add_option("--epochs", plan.epochs);
  bench->add_option("--snapshot-interval", plan.snapshot_interval);
  bench->add_option("--epoch-size", plan.epoch_size);
  bench->add_option("--records-per-epoch", plan.records_per_epoch);
  bench->add_option("--seeds", plan.seeds);
  bench->add_option("--gamma", plan.gamma, "explicit step size for every solver");
  bench->add_option("--epsilon", plan.epsilon);
  std::string bench_read = "sparse";
  bench->add_option("--read", bench_read)->check(CLI::IsMember({"sparse", "full"}));
  bench->add_option("--linf-radius", plan.linf_radius);
  bench->add_option("--out", plan.output_dir, "artifact directory");

  std::string sum_dir;
  std::string sum_csv;
  auto* summ = app.add_subcommand("summarize", "summarize a benchmark directory");
  summ->add_option("dir", sum_dir)->required();
  summ->add_option("--csv", sum_csv, "write the summary table here as well");

  CLI11_PARSE(app, argc, argv);
  if (bench->parsed() && !bench_config.empty()) {
    try {
      std::vector<std::string> args(argv + 1, argv + argc);
      const auto extra = config_args(*bench, bench_config);
      args.insert(args.end(), extra.begin(), extra.end());
      std::reverse(args.begin(), args.end());
      app.clear();
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
  }

  try {
    if (stats->parsed()) return cmd_stats(plan, stats_csv);
    if (run->parsed()) return cmd_run(plan, run_args);
    if (bench->parsed()) {
      plan.read = parse_read(bench_read);
      const auto out = run_plan(plan, &std::cerr);
      std::cout << "runs=" << out.runs.size() << "\ndiverged=" << out.diverged.size() << "\noutput=" << plan.output_dir
                << '\n';
      return 0;
    }
    if (summ->parsed()) {
      const auto sum = summarize(sum_dir);
      write_summary(std::cout, sum);
      if (!sum_csv.empty()) {
        std::ofstream os(sum_csv);
        write_summary(os, sum);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
