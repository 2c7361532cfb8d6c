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

#include "mipsbandit/environment.hpp"

#include <cmath>
#include <memory>

#include <gtest/gtest.h>

namespace mipsbandit {
namespace {

using Vec = Vector<double>;
using Mat = Matrix<double>;

TEST(Environment, NoiselessPulls) {
  auto ps = std::make_shared<const PointSet<double>>(Mat::Identity(2, 2));
  Environment<double> env(ps, Vec::Unit(2, 0), 0.0, 1);
  EXPECT_EQ(env.pull(0), 1.0);
  EXPECT_EQ(env.pull(1), 0.0);
  EXPECT_EQ(env.regret(0), 0.0);
  EXPECT_EQ(env.regret(1), 1.0);
  EXPECT_EQ(env.best_arm(), 0);
  EXPECT_THROW(env.pull(2), std::out_of_range);
  EXPECT_THROW(env.pull_id(7), std::out_of_range);
}

TEST(Environment, NoisyMean) {
  Mat m(2, 1);
  m << 0.6, 0.8;
  auto ps = std::make_shared<const PointSet<double>>(m);
  const Vec theta = (Vec(2) << 0.5, 0.5).finished();
  Environment<double> env(ps, theta, 0.5, 3);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += env.pull(0);
  EXPECT_NEAR(sum / n, 0.7, 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST(Environment, RejectsInvalid) {
  auto ps = std::make_shared<const PointSet<double>>(Mat::Identity(2, 2));
  EXPECT_THROW(Environment<double>(ps, Vec::Constant(2, 1.0), 0.1, 1), std::invalid_argument);
  EXPECT_THROW(Environment<double>(ps, Vec::Unit(2, 0), 1.5, 1), std::invalid_argument);
  EXPECT_THROW(Environment<double>(ps, Vec::Unit(3, 0), 0.1, 1), std::invalid_argument);
}

TEST(MakeInstance, PlantedGap) {
  InstanceOptions o;
  o.kind = InstanceKind::kPlantedGap;
  o.num_arms = 300;
  o.dim = 5;
  o.gap = 0.3;
  o.seed = 4;
  const auto env = make_instance<double>(o);
  int at_one = 0;
  double second = -1.0;
  for (Index i = 0; i < env.arms().size(); ++i) {
    const double v = env.mean(i);
    if (std::abs(v - 1.0) < 1e-12) {
      ++at_one;
    } else {
      second = std::max(second, v);
    }
    EXPECT_NEAR(env.arms().point(i).norm(), 1.0, 1e-12);
  }
  EXPECT_EQ(at_one, 1);
  EXPECT_LE(second, 0.7 + 1e-12);
}

TEST(MakeInstance, SphereUniformNorms) {
  InstanceOptions o;
  o.num_arms = 500;
  o.dim = 7;
  const auto env = make_instance<double>(o);
  for (Index i = 0; i < env.arms().size(); ++i) EXPECT_NEAR(env.arms().point(i).norm(), 1.0, 1e-12);
  EXPECT_NEAR(env.theta_star().norm(), 1.0, 1e-12);
}

TEST(MakeInstance, ClusteredStaysInBall) {
  InstanceOptions o;
  o.kind = InstanceKind::kClustered;
  o.num_arms = 400;
  o.dim = 6;
  const auto env = make_instance<double>(o);
  for (Index i = 0; i < env.arms().size(); ++i) EXPECT_LE(env.arms().point(i).norm(), 1.0 + 1e-12);
}

TEST(MakeInstance, DeterministicPerSeed) {
  for (auto kind : {InstanceKind::kSphereUniform, InstanceKind::kClustered, InstanceKind::kPlantedGap}) {
    InstanceOptions o;
    o.kind = kind;
    o.num_arms = 50;
    o.dim = 4;
    o.seed = 12;
    auto a = make_instance<double>(o);
    auto b = make_instance<double>(o);
    EXPECT_EQ(a.arms().points(), b.arms().points());
    EXPECT_EQ(a.theta_star(), b.theta_star());
    for (int i = 0; i < 5; ++i) EXPECT_EQ(a.pull(i), b.pull(i));
    o.seed = 13;
    EXPECT_NE(make_instance<double>(o).arms().points(), a.arms().points());
  }
}

TEST(MakeInstance, RejectsBadSizes) {
  InstanceOptions o;
  o.num_arms = 1;
  EXPECT_THROW(make_instance<double>(o), std::invalid_argument);
  o.num_arms = 5;
  o.dim = 0;
  EXPECT_THROW(make_instance<double>(o), std::invalid_argument);
}

TEST(Environment, AlwaysOptimalHasZeroRegret) {
  InstanceOptions o;
  o.num_arms = 30;
  o.dim = 3;
  auto env = make_instance<double>(o);
  double total = 0.0;
  for (int t = 0; t < 100; ++t) {
    env.pull(env.best_arm());
    total += env.regret(env.best_arm());
  }
  EXPECT_EQ(total, 0.0);
}

}  // namespace
}  // namespace mipsbandit
