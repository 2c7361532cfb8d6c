// Copyright 2026 The mipsbandit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mipsbandit/harness.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "mipsbandit/oful.hpp"

namespace mipsbandit {
namespace {

namespace fs = std::filesystem;

RunConfig small(Algorithm a) {
  RunConfig c;
  c.algo = a;
  c.num_arms = 40;
  c.dim = 4;
  c.horizon = 150;
  c.eta = 0.1;
  c.seed = 3;
  c.deterministic = true;
  return c;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mipsbandit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(RunConfig, Validation) {
  RunConfig c = small(Algorithm::kOful);
  EXPECT_NO_THROW(c.validate());
  c.eta = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.algo = Algorithm::kOfulExact;
  EXPECT_NO_THROW(c.validate());
  c.horizon = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small(Algorithm::kLints);
  c.num_arms = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small(Algorithm::kLints);
  c.delta = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(run_single(c, 0), std::invalid_argument);
}

TEST(Parse, Names) {
  EXPECT_EQ(parse_algorithm("lints-exact"), Algorithm::kLintsExact);
  EXPECT_FALSE(parse_algorithm("ucb").has_value());
  EXPECT_EQ(parse_backend("lsh"), OracleBackend::kLsh);
  EXPECT_EQ(parse_instance_kind("planted-gap"), InstanceKind::kPlantedGap);
  EXPECT_STREQ(to_string(Algorithm::kOful), "oful");
}

TEST(RunExperiment, ExactOfulFindsPlantedArm) {
  RunConfig c = small(Algorithm::kOfulExact);
  c.instance = InstanceKind::kPlantedGap;
  c.num_arms = 10;
  c.horizon = 200;
  c.noise_std = 0.0;
  const RunResult r = run_single(c, 0);
  const Environment<double> env = make_environment(c, 0);
  const ArmId best = env.arms().id(env.best_arm());
  // The theoretical beta keeps widths above the gap at T = 200, so a few
  // exploratory pulls remain; the optimal arm must dominate the tail.
  std::map<ArmId, int> tail;
  int head_best = 0;
  for (std::size_t t = 150; t < 200; ++t) ++tail[r.steps[t].arm];
  for (std::size_t t = 0; t < 50; ++t) head_best += r.steps[t].arm == best ? 1 : 0;
  for (const auto& [arm, n] : tail) {
    if (arm != best) EXPECT_LT(n, tail[best]) << "arm " << arm;
  }
  EXPECT_GT(tail[best], head_best);
  EXPECT_TRUE(std::isfinite(r.summary.final_regret));
  EXPECT_LE(r.summary.potential, r.summary.potential_bound);
}

// Two arms e1, e2 with theta* = e1: the UCB schedule is fixed by symmetry.
// Step 1 ties (both widths 1, mean 0) and goes to the smaller id; step 2
// then prefers the unexplored e2 since e1's width has shrunk.
TEST(RunExperiment, HandTracedTwoArmSchedule) {
  const fs::path dir = temp_dir("two_arm");
  {
    std::ofstream(dir / "arms.csv") << "1,0\n0,1\n";
    std::ofstream(dir / "inst.json") << R"({"theta_star":[1,0],"noise_std":0,"points":"arms.csv"})";
  }
  RunConfig c = small(Algorithm::kOfulExact);
  c.instance_file = (dir / "inst.json").string();
  c.horizon = 4;
  const RunResult r = run_single(c, 0);
  ASSERT_EQ(r.steps.size(), 4u);
  EXPECT_EQ(r.steps[0].arm, 0u);
  EXPECT_EQ(r.steps[1].arm, 1u);
  // After one pull each: mean(e1) = 1/2, mean(e2) = 0, equal widths.
  EXPECT_EQ(r.steps[2].arm, 0u);
  EXPECT_DOUBLE_EQ(r.steps[1].regret, 1.0);
  EXPECT_DOUBLE_EQ(r.steps[3].cum_regret, r.steps[3].arm == 0 ? 1.0 : 2.0);
}

TEST(RunExperiment, AllAlgorithmsRunAndSatisfyInvariants) {
  for (Algorithm a : {Algorithm::kOful, Algorithm::kOfulExact, Algorithm::kLints, Algorithm::kLintsExact}) {
    const RunConfig c = small(a);
    const RunResult r = run_single(c, 0);
    EXPECT_EQ(r.steps.size(), static_cast<std::size_t>(c.horizon));
    EXPECT_LE(r.summary.potential, r.summary.potential_bound + 1e-8);
    EXPECT_GT(r.summary.bound, 0.0);
    for (std::size_t t = 1; t < r.steps.size(); ++t) {
      EXPECT_GE(r.steps[t].cum_regret, r.steps[t - 1].cum_regret);
    }
    if (is_oful(a) && is_accelerated(a)) EXPECT_LE(r.summary.final_stage, r.summary.max_stage);
  }
}

TEST(RunExperiment, LshBackendRuns) {
  RunConfig c = small(Algorithm::kLints);
  c.oracle = OracleBackend::kLsh;
  c.horizon = 60;
  const RunResult r = run_single(c, 0);
  EXPECT_EQ(r.steps.size(), 60u);
  EXPECT_TRUE(r.index_stats.contains("pool"));
}

TEST(RunExperiment, PairedSeedsAndDeterminism) {
  RunConfig c = small(Algorithm::kLints);
  c.reps = 2;
  c.jobs = 2;
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  std::ostringstream sa, sb;
  write_steps_csv(sa, a[1].steps, true);
  write_steps_csv(sb, b[1].steps, true);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a[0].summary.seed + 1, a[1].summary.seed);
}

TEST(CompareBound, ExactVariantHasNoAdditiveTerm) {
  RunConfig c = small(Algorithm::kOfulExact);
  const double beta = confidence_radius(c.dim, c.horizon, c.delta / 2.0);
  EXPECT_DOUBLE_EQ(regret_bound(c), oful_regret_bound(c.dim, c.horizon, beta, 0.0));
  c.algo = Algorithm::kOful;
  EXPECT_NEAR(regret_bound(c) - oful_regret_bound(c.dim, c.horizon, beta, 0.0), 40.0 * c.eta * c.horizon, 1e-9);
  RunResult r;
  r.summary.final_regret = 10.0;
  const BoundReport br = compare_bound(r, c);
  EXPECT_TRUE(br.within);
  EXPECT_NEAR(br.ratio, 10.0 / br.bound, 1e-15);
}

TEST(Outputs, FilesAreWrittenAndByteStable) {
  const fs::path d1 = temp_dir("out1");
  const fs::path d2 = temp_dir("out2");
  RunConfig c = small(Algorithm::kOful);
  c.reps = 2;
  c.out = d1.string();
  write_outputs(c, run_experiment(c));
  c.out = d2.string();
  write_outputs(c, run_experiment(c));
  for (const char* f : {"steps_rep0.csv", "steps_rep1.csv", "summary.csv", "index_stats.json"}) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    std::ifstream a(d1 / f), b(d2 / f);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << f;
  }
  std::ifstream steps(d1 / "steps_rep0.csv");
  std::string header;
  std::getline(steps, header);
  EXPECT_EQ(header, "t,arm,regret,cum_regret,probes,stage_or_level,select_micros,fallback");
}

TEST(PointsCsv, RoundTrip) {
  InstanceOptions o;
  o.num_arms = 20;
  o.dim = 3;
  const auto env = make_instance<double>(o);
  std::stringstream ss;
  write_points_csv(ss, env.arms());
  const PointSet<double> back = read_points_csv(ss);
  EXPECT_EQ(back.points(), env.arms().points());
  std::stringstream bad("1,2\n3\n");
  EXPECT_THROW(read_points_csv(bad), std::invalid_argument);
  std::stringstream nan_text("0.1,abc\n");
  EXPECT_THROW(read_points_csv(nan_text), std::invalid_argument);
}

TEST(Instance, SaveLoadRoundTrip) {
  const fs::path dir = temp_dir("inst");
  RunConfig c = small(Algorithm::kOfulExact);
  const auto env = make_environment(c, 0);
  save_instance((dir / "h.json").string(), (dir / "p.csv").string(), env, c.seed);
  const auto back = load_instance((dir / "h.json").string(), 1);
  EXPECT_EQ(back.arms().points(), env.arms().points());
  EXPECT_EQ(back.theta_star(), env.theta_star());
  EXPECT_EQ(back.noise_std(), env.noise_std());
  RunConfig f = c;
  f.instance_file = (dir / "h.json").string();
  EXPECT_EQ(run_single(f, 0).steps.back().cum_regret, run_single(c, 0).steps.back().cum_regret);
}

}  // namespace
}  // namespace mipsbandit
