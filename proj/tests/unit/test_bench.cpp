#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support/desk.hpp"

using namespace asyncopt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "asyncopt_bench_test" / name;
  fs::remove_all(dir);
  return dir;
}

BenchPlan small_plan(const std::string& name) {
  BenchPlan plan;
  plan.problem = "logreg";
  plan.synthetic.n = 2000;
  plan.synthetic.d = 100;
  plan.synthetic.nnz = 5;
  plan.l2_reg = 1e-2;
  plan.epochs = 4;
  plan.gamma = 0.05;
  plan.output_dir = fresh_dir(name).string();
  return plan;
}

std::size_t count_files(const fs::path& dir) {
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}));
}

std::map<std::string, std::string> read_manifest(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

TEST(Bench, SingleRunPlan) {
  auto plan = small_plan("single");
  plan.algorithms = {"sgm"};
  plan.workers = {1};
  const auto out = run_plan(plan);
  ASSERT_EQ(out.runs.size(), 1u);
  const fs::path dir(plan.output_dir);
  EXPECT_EQ(count_files(dir / "traces"), 1u);
  EXPECT_TRUE(fs::exists(dir / "manifest.txt"));
  EXPECT_TRUE(fs::exists(dir / "stats.txt"));
  const auto kv = read_manifest(dir / "manifest.txt");
  EXPECT_EQ(kv.at("problem"), "logreg");
  EXPECT_EQ(kv.at("derived.gamma_source.sgm"), "explicit");
  EXPECT_EQ(kv.at("runs"), "1");
}

TEST(Bench, GridNormalizationAndSpeedup) {
  auto plan = small_plan("grid");
  plan.algorithms = {"hogwild", "kromagnon", "svrg_dense", "sgm"};
  plan.workers = {1, 2};
  plan.seeds = {1, 2};
  const auto out = run_plan(plan);
  EXPECT_EQ(out.runs.size(), 2u * 2u + 2u * 2u + 2u + 2u);  // serial ones skip 2 workers
  const fs::path dir(plan.output_dir);
  EXPECT_EQ(count_files(dir / "normalized"), out.runs.size());

  double grid_min = 1.0;
  for (const auto& r : out.runs) {
    const auto norm = normalize_trace(r.result.trace, out.f0, out.fmin);
    EXPECT_EQ(norm.front().value, 1.0);
    std::size_t raw_argmin = 0;
    std::size_t norm_argmin = 0;
    for (std::size_t k = 0; k < norm.size(); ++k) {
      EXPECT_GE(norm[k].value, -1e-12);
      EXPECT_LE(norm[k].value, 1.0 + 1e-12);
      if (r.result.trace[k].objective < r.result.trace[raw_argmin].objective) raw_argmin = k;
      if (norm[k].value < norm[norm_argmin].value) norm_argmin = k;
      grid_min = std::min(grid_min, norm[k].value);
    }
    EXPECT_EQ(raw_argmin, norm_argmin);
  }
  EXPECT_EQ(grid_min, 0.0);

  const auto sum = summarize(plan.output_dir);
  EXPECT_TRUE(sum.warnings.empty());
  ASSERT_EQ(sum.algorithms.size(), 4u);
  for (const auto& a : sum.algorithms) {
    if (a.speedup_999.count(1)) {
      EXPECT_EQ(a.speedup_999.at(1), 1.0);
    }
  }
  EXPECT_TRUE(sum.kromagnon_vs_svrg_dense.has_value());
  std::ostringstream os;
  write_summary(os, sum);
  EXPECT_NE(os.str().find("kromagnon_vs_svrg_dense_time_ratio="), std::string::npos);
}

TEST(Bench, TheoremStepsAreLabeled) {
  auto plan = small_plan("theorem");
  plan.gamma.reset();
  plan.algorithms = {"svrg_sparse", "scd"};
  plan.workers = {1};
  plan.epochs = 1;
  run_plan(plan);
  const auto kv = read_manifest(fs::path(plan.output_dir) / "manifest.txt");
  EXPECT_EQ(kv.at("derived.gamma_source.svrg_sparse"), "theorem");
  const double L = std::stod(kv.at("derived.L"));
  const double kappa = std::stod(kv.at("derived.kappa"));
  EXPECT_NEAR(std::stod(kv.at("derived.gamma.svrg_sparse")), 1.0 / (4.0 * L * kappa), 1e-15);
}

TEST(Bench, DivergentRunsAreExcludedAndFlagged) {
  auto plan = small_plan("diverge");
  plan.problem = "linreg";
  plan.algorithms = {"sgm", "svrg_dense"};
  plan.workers = {1};
  plan.gamma = 50.0;  // far beyond 2/L
  plan.l2_reg = 1e-4;
  const auto out = run_plan(plan);
  EXPECT_FALSE(out.diverged.empty());
  EXPECT_TRUE(std::isfinite(out.fmin));
  const auto kv = read_manifest(fs::path(plan.output_dir) / "manifest.txt");
  EXPECT_NE(kv.at("diverged_runs").find("sgm_w1_s1"), std::string::npos);
}

TEST(Bench, PlanValidation) {
  BenchPlan plan;
  plan.algorithms = {"adam"};
  EXPECT_THROW(plan.validate(), std::invalid_argument);
  plan = BenchPlan{};
  plan.workers = {0};
  EXPECT_THROW(plan.validate(), std::invalid_argument);
  plan = BenchPlan{};
  plan.problem = "svm";
  EXPECT_THROW(plan.validate(), std::invalid_argument);
}

TEST(Summarize, EmptyDirectoryWarns) {
  const auto dir = fresh_dir("empty");
  fs::create_directories(dir);
  const auto sum = summarize(dir.string());
  EXPECT_TRUE(sum.algorithms.empty());
  EXPECT_FALSE(sum.warnings.empty());
}

TEST(Summarize, CraftedSpeedupTable) {
  const auto dir = fresh_dir("crafted");
  fs::create_directories(dir / "normalized");
  {
    std::ofstream sp(dir / "speedup.csv");
    sp << "algorithm,seed,workers,target,time_ns,speedup\n"
       << "hogwild,1,1,0.999,800,1\n"
       << "hogwild,1,4,0.999,200,4\n"
       << "hogwild,2,1,0.999,1000,1\n"
       << "hogwild,2,4,0.999,400,2.5\n"
       << "hogwild,1,4,0.9999,300,3\n"
       << "kromagnon,1,1,0.999,100,1\n"
       << "svrg_dense,1,1,0.999,1500,1\n"
       << "svrg_dense,2,1,0.999,,\n";
    std::ofstream n(dir / "normalized" / "hogwild_w4_s1.csv");
    n << "wall_ns,iter,normalized_objective\n0,0,1\n10,5,0.25\n";
  }
  const auto sum = summarize(dir.string());
  std::map<std::string, AlgorithmSummary> by;
  for (const auto& a : sum.algorithms) by[a.algorithm] = a;
  EXPECT_EQ(by.at("hogwild").time_to_999_ns.at(1), 900.0);
  EXPECT_EQ(by.at("hogwild").time_to_999_ns.at(4), 300.0);
  EXPECT_EQ(by.at("hogwild").speedup_999.at(4), 3.25);
  EXPECT_EQ(by.at("hogwild").best_normalized, 0.25);
  EXPECT_EQ(*sum.kromagnon_vs_svrg_dense, 15.0);
}
