// Sparse logistic regression solved with Hogwild! and KroMagnon on a small
// synthetic dataset, compared against serial SGM.

#include <iostream>
#include <thread>

#include "asyncopt/asyncopt.hpp"

int main() {
  using namespace asyncopt;

  SyntheticSpec spec;
  spec.n = 20000;
  spec.d = 500;
  spec.nnz = 10;
  spec.label_model = LabelModel::logistic;
  auto data = gen_synthetic(spec);
  data.l2_reg = 1e-3;
  const LogisticObjective obj(data);

  const auto stats = conflict_stats(hyperedges(obj), obj.dim());
  std::cout << "n=" << stats.n << " d=" << stats.d << " avg conflict degree=" << stats.avg_conflict_degree << '\n';

  const auto ref = solve_reference(obj);
  const std::vector<double> x0(obj.dim(), 0.0);
  const unsigned workers = std::max(2u, std::thread::hardware_concurrency());

  SolverConfig cfg;
  cfg.step_size = 0.05;
  cfg.iterations = 10 * spec.n;
  cfg.record_every = spec.n;
  cfg.reference = Reference{ref.x, ref.value};

  const auto serial = run_sgm(obj, cfg, x0);
  const auto hogwild = run_hogwild(obj, cfg, x0, AsyncOptions{workers});

  SolverConfig vr = cfg;
  vr.iterations = 0;
  vr.epoch_size = spec.n;
  vr.epochs = 10;
  vr.snapshot_interval = 2;
  const auto kromagnon = run_kromagnon(obj, coordinate_weights(obj), vr, x0, AsyncOptions{workers});

  auto report = [](const char* name, const RunResult& r) {
    std::cout << name << ": f - f* = " << r.trace.back().f_gap << " in " << r.wall_ns / 1e6 << " ms\n";
  };
  report("sgm (serial)", serial);
  report("hogwild", hogwild.run);
  report("kromagnon", kromagnon.run);
}
