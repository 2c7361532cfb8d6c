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

// Staged OFUL whose arm choice is a MIPS query.
//
// The uncertainty beta^2 ||x||^2_{V^-1} equals <vec(x x^T), vec(beta^2 V^-1)>,
// so an index over vectorized outer products can find a high-uncertainty arm
// without scanning. Stage s looks for an arm whose width exceeds roughly 2^-s;
// when none is found the active set is pruned by a confidence-interval test,
// the index is rebuilt on the survivors and the stage advances. At the last
// stage every active arm is near-optimal and one is picked at random.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mipsbandit/adaptive_mips.hpp"
#include "mipsbandit/mips.hpp"
#include "mipsbandit/ridge.hpp"
#include "mipsbandit/types.hpp"

namespace mipsbandit {

/// beta = 1 + sqrt(2 ln(1/delta) + d ln(1 + T/d)).
inline double confidence_radius(Index dim, std::int64_t horizon, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("confidence_radius: delta must lie in (0, 1)");
  if (horizon < 1) throw std::invalid_argument("confidence_radius: horizon must be >= 1");
  const double d = static_cast<double>(dim);
  return 1.0 + std::sqrt(2.0 * std::log(1.0 / delta) +
                         d * std::log1p(static_cast<double>(horizon) / d));
}

/// ceil(log2(1 / eta)), at least 1.
inline int oful_max_stage(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("oful_max_stage: eta must lie in (0, 1)");
  const double s = std::ceil(std::log2(1.0 / eta) - 1e-12);
  return std::max(1, static_cast<int>(s));
}

/// (c, r, eps, q_bar) = (1/4, 1 - eta^2, eta^2, d beta^2 / eta^2).
inline MipsSpec oful_mips_spec(Index dim, double beta, double eta, double delta) {
  MipsSpec s;
  s.c = 0.25;
  s.r = 1.0 - eta * eta;
  s.eps = eta * eta;
  s.q_bar = static_cast<double>(dim) * beta * beta / (eta * eta);
  s.delta = delta;
  return s;
}

/// 16 beta sqrt(T d ln(1 + T/d)) + 40 eta T.
inline double oful_regret_bound(Index dim, std::int64_t horizon, double beta, double eta) {
  const double d = static_cast<double>(dim);
  const double t = static_cast<double>(horizon);
  return 16.0 * beta * std::sqrt(t * d * std::log1p(t / d)) + 40.0 * eta * t;
}

/// Exact UCB argmax over the columns of `arms`; ties go to the smallest id.
template <typename Scalar>
Index oful_baseline_select(const RidgeState<Scalar>& ridge, const PointSet<Scalar>& arms,
                           Scalar beta) {
  if (arms.empty()) throw std::invalid_argument("oful_baseline_select: empty arm set");
  const Vector<Scalar> mean = arms.points().transpose() * ridge.theta_hat();
  const Vector<Scalar> width = mahalanobis_inv_columns(ridge, arms.points());
  Index best = 0;
  Scalar best_v = mean(0) + beta * width(0);
  for (Index i = 1; i < arms.size(); ++i) {
    const Scalar v = mean(i) + beta * width(i);
    if (v > best_v || (v == best_v && arms.id(i) < arms.id(best))) {
      best = i;
      best_v = v;
    }
  }
  return best;
}

/// Columns vec(x_a x_a^T) for the given arm columns, tagged with those columns as ids.
template <typename Scalar>
PointSet<Scalar> outer_product_points(const PointSet<Scalar>& arms, const std::vector<Index>& active) {
  const Index d = arms.dim();
  Matrix<Scalar> out(d * d, static_cast<Index>(active.size()));
  std::vector<ArmId> ids(active.size());
  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto x = arms.point(active[j]);
    Eigen::Map<Matrix<Scalar>>(out.col(static_cast<Index>(j)).data(), d, d).noalias() =
        x * x.transpose();
    ids[j] = static_cast<ArmId>(active[j]);
  }
  return PointSet<Scalar>(std::move(out), std::move(ids));
}

struct OfulOptions {
  std::int64_t horizon = 1;
  double delta = 0.05;
  double eta = 0.1;
  std::uint64_t seed = 0;  // random picks at the last stage
  AdaptiveOptions mips;
};

template <typename Scalar>
struct OfulSelection {
  Index arm = 0;  // column in the arm set
  int stage = 1;
  bool random_pick = false;
  AdaptiveQueryStats stats;
  std::optional<Scalar> certificate;  // returned inner product, if any
};

template <typename Scalar>
class AcceleratedOful {
 public:
  AcceleratedOful(std::shared_ptr<const PointSet<Scalar>> arms, const OfulOptions& options)
      : arms_(std::move(arms)), options_(options), ridge_(arms_ ? arms_->dim() : 1),
        rng_(derive_seed(options.seed, 0x0f)) {
    if (!arms_ || arms_->empty()) throw std::invalid_argument("AcceleratedOful: empty arm set");
    if (!(options_.eta > 0.0 && options_.eta < 1.0)) {
      throw std::invalid_argument("AcceleratedOful: eta must lie in (0, 1)");
    }
    delta_prime_ = options_.delta / 2.0;
    beta_ = confidence_radius(arms_->dim(), options_.horizon, delta_prime_);
    max_stage_ = oful_max_stage(options_.eta);
    spec_ = oful_mips_spec(arms_->dim(), beta_, options_.eta, delta_prime_);
    active_.resize(static_cast<std::size_t>(arms_->size()));
    for (std::size_t i = 0; i < active_.size(); ++i) active_[i] = static_cast<Index>(i);
    if (stage_ < max_stage_) build_index();
  }

  int stage() const { return stage_; }
  int max_stage() const { return max_stage_; }
  int rebuilds() const { return rebuilds_; }
  double beta() const { return beta_; }
  double delta_prime() const { return delta_prime_; }
  const MipsSpec& spec() const { return spec_; }
  const RidgeState<Scalar>& ridge() const { return ridge_; }
  const PointSet<Scalar>& arms() const { return *arms_; }
  const std::vector<Index>& active() const { return active_; }
  const AdaptiveMipsIndex<Scalar>* index() const { return index_ ? &*index_ : nullptr; }

  /// vec(beta^2 4^s V^-1) for the current stage.
  Vector<Scalar> stage_query() const {
    const Scalar scale = static_cast<Scalar>(beta_ * beta_ * std::ldexp(1.0, 2 * stage_));
    const Matrix<Scalar>& vinv = ridge_.gram_inv();
    return Eigen::Map<const Vector<Scalar>>(vinv.data(), vinv.size()) * scale;
  }

  OfulSelection<Scalar> select() {
    OfulSelection<Scalar> sel;
    while (stage_ < max_stage_) {
      const Vector<Scalar> q = stage_query();
      const Scalar qn = q.norm();
      if (qn > static_cast<Scalar>(spec_.q_bar) * (Scalar(1) + Scalar(1e-9))) {
        std::ostringstream os;
        os << "OFUL query norm " << qn << " exceeds q_bar " << spec_.q_bar << " at stage " << stage_;
        throw InvariantViolation(os.str());
      }
      AdaptiveQueryStats st;
      const auto hit = index_->query(q, &st);
      sel.stats += st;
      if (hit) {
        sel.arm = static_cast<Index>(hit->id);
        sel.stage = stage_;
        sel.certificate = hit->value;
        return sel;
      }
      eliminate_and_advance();
    }
    std::uniform_int_distribution<std::size_t> pick(0, active_.size() - 1);
    sel.arm = active_[pick(rng_)];
    sel.stage = stage_;
    sel.random_pick = true;
    return sel;
  }

  void observe(Index arm, Scalar reward) { ridge_.update(arms_->point(arm), reward); }

  /// Keeps arms whose UCB reaches the best LCB, advances the stage and
  /// re-indexes the survivors.
  void eliminate_and_advance() {
    if (stage_ >= max_stage_) throw std::logic_error("eliminate_and_advance: already at the last stage");
    const Scalar beta = static_cast<Scalar>(beta_);
    const Vector<Scalar> theta = ridge_.theta_hat();
    std::vector<Scalar> ucb(active_.size());
    Scalar lower = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t j = 0; j < active_.size(); ++j) {
      const auto x = arms_->point(active_[j]);
      const Scalar mean = x.dot(theta);
      const Scalar width = beta * mahalanobis_inv(ridge_, x);
      ucb[j] = mean + width;
      lower = std::max(lower, mean - width);
    }
    std::vector<Index> keep;
    for (std::size_t j = 0; j < active_.size(); ++j) {
      if (ucb[j] >= lower) keep.push_back(active_[j]);
    }
    if (keep.empty()) throw InvariantViolation("arm elimination removed every arm");
    active_ = std::move(keep);
    ++stage_;
    if (stage_ < max_stage_) {
      build_index();
      ++rebuilds_;
      if (rebuilds_ > max_stage_) throw InvariantViolation("OFUL rebuild count exceeds the stage ceiling");
    }
  }

 private:
  void build_index() {
    auto pts = std::make_shared<const PointSet<Scalar>>(outer_product_points(*arms_, active_));
    AdaptiveOptions mo = options_.mips;
    mo.seed = derive_seed(options_.mips.seed, static_cast<std::uint64_t>(stage_));
    index_.emplace(build_adaptive(std::move(pts), spec_, mo));
  }

  std::shared_ptr<const PointSet<Scalar>> arms_;
  OfulOptions options_;
  RidgeState<Scalar> ridge_;
  std::mt19937_64 rng_;
  double delta_prime_ = 0.0;
  double beta_ = 1.0;
  int max_stage_ = 1;
  int stage_ = 1;
  int rebuilds_ = 0;
  MipsSpec spec_;
  std::vector<Index> active_;
  std::optional<AdaptiveMipsIndex<Scalar>> index_;
};

/// Plain OFUL: exact UCB scan over all arms every step.
template <typename Scalar>
class ExactOful {
 public:
  ExactOful(std::shared_ptr<const PointSet<Scalar>> arms, const OfulOptions& options)
      : arms_(std::move(arms)), ridge_(arms_ ? arms_->dim() : 1) {
    if (!arms_ || arms_->empty()) throw std::invalid_argument("ExactOful: empty arm set");
    delta_prime_ = options.delta / 2.0;
    beta_ = confidence_radius(arms_->dim(), options.horizon, delta_prime_);
  }

  double beta() const { return beta_; }
  double delta_prime() const { return delta_prime_; }
  const RidgeState<Scalar>& ridge() const { return ridge_; }
  const PointSet<Scalar>& arms() const { return *arms_; }

  Index select() const { return oful_baseline_select(ridge_, *arms_, static_cast<Scalar>(beta_)); }
  void observe(Index arm, Scalar reward) { ridge_.update(arms_->point(arm), reward); }

 private:
  std::shared_ptr<const PointSet<Scalar>> arms_;
  RidgeState<Scalar> ridge_;
  double delta_prime_ = 0.0;
  double beta_ = 1.0;
};

}  // namespace mipsbandit
