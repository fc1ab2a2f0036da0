#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "support/desk.hpp"

using namespace asyncopt;

namespace {

SolverConfig config(double gamma, std::size_t iters, std::uint64_t seed) {
  SolverConfig cfg;
  cfg.step_size = gamma;
  cfg.iterations = iters;
  cfg.seed = seed;
  cfg.record_every = iters / 8;
  return cfg;
}

void expect_identical(const RunResult& serial, const RunResult& async) {
  EXPECT_EQ(serial.x, async.x);
  ASSERT_EQ(serial.trace.size(), async.trace.size());
  for (std::size_t k = 0; k < serial.trace.size(); ++k) {
    EXPECT_EQ(serial.trace[k].iter, async.trace[k].iter);
    EXPECT_EQ(serial.trace[k].objective, async.trace[k].objective);
  }
}

}  // namespace

TEST(AsyncEngine, OneWorkerReducesToSerial) {
  const auto obj = desk::logistic();
  const auto w = coordinate_weights(obj);
  const std::vector<double> x0(obj.dim(), 0.0);
  const auto cfg = config(0.05, 4000, 3);
  const AsyncOptions one{1, ReadMode::sparse, LogLevel::timing};
  const auto hw = run_hogwild(obj, cfg, x0, one);
  expect_identical(run_sgm(obj, cfg, x0), hw.run);
  EXPECT_EQ(hw.overlap.tau_observed, 0u);
  expect_identical(run_scd(obj, cfg, x0), run_ascd(obj, cfg, x0, one).run);
  auto svrg = cfg;
  svrg.epoch_size = 500;
  svrg.epochs = 4;
  svrg.snapshot_interval = 2;
  expect_identical(run_svrg_sparse(obj, w, svrg, x0), run_kromagnon(obj, w, svrg, x0, one).run);
  const AsyncOptions full{1, ReadMode::full, LogLevel::none};
  expect_identical(run_sgm(obj, cfg, x0), run_hogwild(obj, cfg, x0, full).run);
  expect_identical(run_scd(obj, cfg, x0), run_ascd(obj, cfg, x0, full).run);
}

TEST(AsyncEngine, FinalIterateIsSumOfLoggedUpdates) {
  const auto obj = desk::ridge();
  const auto w = coordinate_weights(obj);
  const std::vector<double> x0(obj.dim(), 0.25);
  const AsyncOptions opt{4, ReadMode::sparse, LogLevel::full};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto hw = run_hogwild(obj, config(0.02, 3000, seed), x0, opt);
    ASSERT_EQ(hw.log.size(), 3000u);
    const auto replay = replay_updates(x0, hw.log);
    for (std::size_t v = 0; v < replay.size(); ++v) EXPECT_NEAR(replay[v], hw.run.x[v], 1e-9);
    for (std::size_t i = 0; i < hw.log.size(); ++i) EXPECT_EQ(hw.log[i].index, i);
  }
  auto cfg = config(0.02, 0, 1);
  cfg.epoch_size = 500;
  cfg.epochs = 4;
  const auto km = run_kromagnon(obj, w, cfg, x0, opt);
  const auto replay = replay_updates(x0, km.log);
  for (std::size_t v = 0; v < replay.size(); ++v) EXPECT_NEAR(replay[v], km.run.x[v], 1e-9);
}

TEST(AsyncEngine, ClampedUpdatesReplayExactly) {
  const auto obj = desk::vertex_cover(true);
  const std::vector<double> x0(obj.dim(), 0.5);
  const auto r = run_hogwild(obj, config(0.3, 5000, 2), x0, AsyncOptions{3, ReadMode::sparse, LogLevel::full});
  const auto replay = replay_updates(x0, r.log);
  for (std::size_t v = 0; v < replay.size(); ++v) {
    EXPECT_NEAR(replay[v], r.run.x[v], 1e-9);
    EXPECT_GE(r.run.x[v], 0.0);
    EXPECT_LE(r.run.x[v], 1.0);
  }
}

TEST(AsyncEngine, MultiWorkerRunsConverge) {
  const auto obj = desk::logistic();
  const auto w = coordinate_weights(obj);
  const auto ref = solve_reference(obj);
  const std::vector<double> x0(obj.dim(), 0.0);
  const double a0 = sq_distance(x0, ref.x);
  auto cfg = config(0.005, 400000, 5);
  cfg.reference = Reference{ref.x, ref.value};
  const AsyncOptions opt{4};
  EXPECT_LT(run_hogwild(obj, cfg, x0, opt).run.trace.back().a, 0.05 * a0);
  EXPECT_LT(run_ascd(obj, cfg, x0, opt).run.trace.back().a, 0.05 * a0);
  EXPECT_LT(run_ascd(obj, cfg, x0, AsyncOptions{4, ReadMode::full}).run.trace.back().a, 0.05 * a0);
  cfg.iterations = 0;
  cfg.epoch_size = 400;
  cfg.epochs = 30;
  cfg.step_size = 0.1;
  EXPECT_LT(run_kromagnon(obj, w, cfg, x0, opt).run.trace.back().a, 1e-3 * a0);
}

TEST(AsyncEngine, SampleDistributionIsUniform) {
  // 4 singleton terms; each index position across 10^4 runs should be uniform.
  const desk::Separable obj(4, 4, 1.0);
  const std::vector<double> x0(4, 0.0);
  constexpr std::size_t kRuns = 10000;
  constexpr std::size_t kPositions = 6;
  std::vector<std::array<double, 4>> counts(kPositions, {0, 0, 0, 0});
  for (std::uint64_t seed = 0; seed < kRuns; ++seed) {
    SolverConfig cfg;
    cfg.step_size = 0.01;
    cfg.iterations = kPositions;
    cfg.seed = seed;
    cfg.record_objective = false;
    const auto r = run_hogwild(obj, cfg, x0, AsyncOptions{2, ReadMode::sparse, LogLevel::timing});
    for (const auto& rec : r.log) counts[rec.index][rec.sample] += 1.0;
  }
  for (std::size_t p = 0; p < kPositions; ++p) {
    double chi2 = 0.0;
    for (double c : counts[p]) chi2 += (c - kRuns / 4.0) * (c - kRuns / 4.0) / (kRuns / 4.0);
    EXPECT_GT(desk::chi_square_upper_tail(chi2, 3.0), 0.01) << "position " << p << " chi2 " << chi2;
  }
}

TEST(SharedIterate, NoTornReads) {
  // Writers add exact integers; every read must be an integer no larger than
  // the final total, and reads by one reader never decrease.
  const std::vector<double> x0(2, 0.0);
  SharedIterate x(x0);
  constexpr int kWriters = 3;
  constexpr int kAdds = 200000;
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> bad{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < kWriters; ++w) {
    pool.emplace_back([&, w] {
      const double delta = w == 0 ? 4294967296.0 : 1.0;  // 2^32 exercises the high bits, sums stay below 2^53
      for (int k = 0; k < kAdds; ++k) x.add(static_cast<index_t>(w % 2), delta, Box{});
    });
  }
  std::thread reader([&] {
    double last0 = 0.0;
    double last1 = 0.0;
    while (!stop.load()) {
      const double a = x.load(0);
      const double b = x.load(1);
      if (a != std::floor(a) || b != std::floor(b) || a < last0 || b < last1) ++bad;
      last0 = a;
      last1 = b;
    }
  });
  for (auto& t : pool) t.join();
  stop = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0u);
  EXPECT_EQ(x.load(0), 4294967296.0 * kAdds + kAdds);
  EXPECT_EQ(x.load(1), static_cast<double>(kAdds));
}

TEST(SharedIterate, AddReturnsAppliedChange) {
  const std::vector<double> x0{0.9};
  SharedIterate x(x0);
  EXPECT_DOUBLE_EQ(x.add(0, 0.5, Box{0.0, 1.0}), 0.1);
  EXPECT_EQ(x.load(0), 1.0);
}

TEST(Overlap, CountsIntervalIntersections) {
  std::vector<SampleRecord> log(4);
  log[0].t_sample = 0, log[0].t_end = 3;
  log[1].t_sample = 1, log[1].t_end = 2;
  log[2].t_sample = 4, log[2].t_end = 5;
  log[3].t_sample = 5, log[3].t_end = 7;
  const auto rep = overlap_report(log);
  EXPECT_EQ(rep.tau_observed, 1u);
  EXPECT_EQ(rep.histogram, (std::vector<std::size_t>{0, 4}));
  EXPECT_DOUBLE_EQ(rep.mean_overlap, 1.0);
}

TEST(Speedup, KnownTimes) {
  auto trace = [](std::vector<std::pair<std::int64_t, double>> pts) {
    std::vector<TraceRecord> t;
    for (auto [w, f] : pts) {
      TraceRecord r;
      r.wall_ns = w;
      r.objective = f;
      t.push_back(r);
    }
    return t;
  };
  std::map<unsigned, std::vector<TraceRecord>> runs;
  runs[1] = trace({{0, 1.0}, {100, 0.5}, {400, 0.0}});
  runs[2] = trace({{0, 1.0}, {50, 0.5}, {200, 0.0}});
  runs[4] = trace({{0, 1.0}, {300, 0.9}});
  const auto rows = measure_speedup(runs, 0.999);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(*rows[0].speedup, 1.0);
  EXPECT_EQ(*rows[1].time_ns, 200);
  EXPECT_DOUBLE_EQ(*rows[1].speedup, 2.0);
  EXPECT_EQ(*rows[2].time_ns, 300);  // its own minimum is reached at 300
  EXPECT_DOUBLE_EQ(*rows[2].speedup, 400.0 / 300.0);
  runs.erase(1);
  EXPECT_THROW(measure_speedup(runs, 0.999), std::invalid_argument);
  EXPECT_EQ(time_to_target(trace({{0, 1.0}, {10, 1.0}}), 0.5), std::nullopt);
}
