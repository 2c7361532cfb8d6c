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

#include "mipsbandit/mips.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace mipsbandit {
namespace {

using Vec = Vector<double>;
using Mat = Matrix<double>;

Vec random_ball(Index d, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(d);
  for (Index i = 0; i < d; ++i) v(i) = n(rng);
  return v.normalized() * (radius * u(rng));
}

TEST(LiftPoint, Examples) {
  EXPECT_TRUE(lift_point(Vec::Zero(2)).isApprox((Vec(4) << 0, 0, 1, 0).finished()));
  EXPECT_TRUE(lift_point(Vec::Unit(2, 0)).isApprox((Vec(4) << 1, 0, 0, 0).finished()));
  const Vec p = (Vec(2) << 0.6, 0.0).finished();
  const Vec l = lift_point(p);
  EXPECT_NEAR(l(0), 0.6, 1e-15);
  EXPECT_NEAR(l(2), 0.8, 1e-15);
  EXPECT_NEAR(l.norm(), 1.0, 1e-15);
}

TEST(LiftPoint, RejectsOutsideBall) {
  EXPECT_THROW(lift_point((Vec(2) << 1.0, 0.1).finished()), std::invalid_argument);
  // Round-off just above 1 is tolerated and clamped.
  const Vec l = lift_point((Vec(1) << 1.0 + 1e-15).finished());
  EXPECT_EQ(l(1), 0.0);
}

TEST(LiftQuery, Examples) {
  const Vec q = (Vec(2) << 1.2, 1.6).finished();  // norm 2
  const Vec l = lift_query(q, 2.0);
  EXPECT_TRUE(l.isApprox((Vec(4) << 0.6, 0.8, 0, 0).finished()));
  const Vec z = lift_query(Vec::Zero(3), 1.5);
  EXPECT_TRUE(z.isApprox((Vec(5) << 0, 0, 0, 0, 1).finished()));
  EXPECT_THROW(lift_query(q, 1.9), std::invalid_argument);
}

TEST(Lift, DistanceIdentityAndUnitNorms) {
  std::mt19937_64 rng(17);
  for (double q_bar : {0.5, 1.0, 3.0, 40.0}) {
    for (int i = 0; i < 2000; ++i) {
      const Vec p = random_ball(6, 1.0, rng);
      const Vec q = random_ball(6, q_bar, rng);
      const Vec lp = lift_point(p);
      const Vec lq = lift_query(q, q_bar);
      ASSERT_NEAR(lp.norm(), 1.0, 1e-10);
      ASSERT_NEAR(lq.norm(), 1.0, 1e-10);
      ASSERT_NEAR((lp - lq).squaredNorm(), 2.0 - 2.0 * p.dot(q) / q_bar, 1e-10);
    }
  }
}

TEST(AnnParams, ExactSearchLimit) {
  const AnnSpec a = ann_params({1.0, 0.5, 0.0, 2.0, 0.1});
  EXPECT_DOUBLE_EQ(a.c_prime, 1.0);
}

TEST(AnnParams, FormulaValues) {
  const AnnSpec a = ann_params({0.5, 0.8, 0.0, 2.0, 0.1});
  EXPECT_NEAR(a.c_prime, std::sqrt(1.6 / 1.2), 1e-12);
  EXPECT_NEAR(a.c_prime, 1.1547005, 1e-7);
  EXPECT_NEAR(a.r_prime, 1.0954451, 1e-7);
  // c'^2 = 4/3 gives rho_q = 15/16.
  EXPECT_NEAR(a.rho_q, 0.9375, 1e-12);
}

TEST(AnnParams, RejectsRadiusAtOrAboveBound) {
  EXPECT_THROW(ann_params({0.5, 2.0, 0.0, 2.0, 0.1}), std::invalid_argument);
  EXPECT_THROW(ann_params({0.5, 3.0, 0.0, 2.0, 0.1}), std::invalid_argument);
}

TEST(MipsSpec, VacuityAndValidation) {
  MipsSpec s{0.5, 0.9, 0.2, 1.0, 0.1};
  EXPECT_TRUE(s.vacuous());
  s.eps = 0.1;
  EXPECT_FALSE(s.vacuous());
  EXPECT_DOUBLE_EQ(s.sanity_threshold(), 0.35);
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW((MipsSpec{1.5, 0.5, 0.0, 1.0, 0.1}.validate()), std::invalid_argument);
  EXPECT_THROW((MipsSpec{0.5, 0.5, -0.1, 1.0, 0.1}.validate()), std::invalid_argument);
  EXPECT_THROW((MipsSpec{0.5, 0.5, 0.1, 1.0, 1.0}.validate()), std::invalid_argument);
}

TEST(PointSet, ValidatesNormsAndIds) {
  Mat m(2, 2);
  m << 1.0, 0.0, 0.0, 1.0 + 1e-13;
  EXPECT_NO_THROW(PointSet<double>{m});
  m(1, 1) = 1.01;
  EXPECT_THROW(PointSet<double>{m}, std::invalid_argument);
  m(1, 1) = 0.5;
  EXPECT_THROW((PointSet<double>(m, {3, 3})), std::invalid_argument);
  const PointSet<double> ps(m, {7, 3});
  EXPECT_EQ(ps.index_of(3).value(), 1);
  EXPECT_FALSE(ps.index_of(4).has_value());
  EXPECT_DOUBLE_EQ(ps.max_norm(), 1.0);
}

TEST(BruteForce, Examples) {
  Mat m(2, 3);
  m << 1.0, 0.0, 0.5,
       0.0, 1.0, 0.0;
  const PointSet<double> ps(m);
  const auto hit = brute_force_mips(ps, Vec::Unit(2, 0));
  EXPECT_EQ(hit.id, 0u);
  EXPECT_DOUBLE_EQ(hit.value, 1.0);
  const auto zero = brute_force_mips(ps, Vec::Zero(2));
  EXPECT_EQ(zero.id, 0u);
  EXPECT_DOUBLE_EQ(zero.value, 0.0);
  // Tie-break follows ids, not columns.
  const PointSet<double> relabeled(m, {9, 4, 2});
  EXPECT_EQ(brute_force_mips(relabeled, Vec::Zero(2)).id, 2u);
  EXPECT_THROW(brute_force_mips(PointSet<double>(Mat(2, 0)), Vec::Zero(2)), std::invalid_argument);
}

TEST(BruteForce, MatchesIndependentScan) {
  std::mt19937_64 rng(23);
  Mat m(8, 100);
  for (int i = 0; i < 100; ++i) m.col(i) = random_ball(8, 1.0, rng);
  const PointSet<double> ps(m);
  for (int k = 0; k < 50; ++k) {
    const Vec q = random_ball(8, 2.0, rng);
    int best = 0;
    double best_v = -1e300;
    for (int i = 0; i < 100; ++i) {
      double v = 0.0;
      for (int j = 0; j < 8; ++j) v += m(j, i) * q(j);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    const auto hit = brute_force_mips(ps, q);
    EXPECT_EQ(hit.index, best);
    EXPECT_NEAR(hit.value, best_v, 1e-12);
  }
}

}  // namespace
}  // namespace mipsbandit
