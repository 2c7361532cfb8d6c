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

// Linear Thompson Sampling with leveled MIPS selection.
//
// Level m answers the relaxed problem with r_m = q_bar m eta, so a hit at
// level m certifies <x, theta_tilde> >= (1 - 1/(m+1)) r_m - eta. The largest
// firing level is located by binary search; thresholds grow with m, which
// makes the firing pattern monotone for an exact oracle.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mipsbandit/adaptive_mips.hpp"
#include "mipsbandit/mips.hpp"
#include "mipsbandit/oful.hpp"
#include "mipsbandit/ridge.hpp"
#include "mipsbandit/types.hpp"

namespace mipsbandit {

/// Anti-concentration constant p and concentration constants b, b' of the
/// perturbation law.
struct TsConstants {
  double p = 0.15;
  double b = 4.0;
  double b_prime = 4.0;
};

/// Standard normal perturbations on R^d.
template <typename Scalar>
class TsSampler {
 public:
  TsSampler(Index dim, std::uint64_t seed) : dim_(dim), rng_(seed) {
    if (dim <= 0) throw std::invalid_argument("TsSampler: dim must be positive");
  }

  Index dim() const { return dim_; }

  Vector<Scalar> sample() {
    Vector<Scalar> xi(dim_);
    for (Index i = 0; i < dim_; ++i) xi(i) = static_cast<Scalar>(normal_(rng_));
    return xi;
  }

 private:
  Index dim_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// sqrt(b d ln(b' d / delta)): the norm the perturbation stays under w.p. 1 - delta.
inline double ts_concentration_radius(Index dim, double delta, const TsConstants& k = {}) {
  const double d = static_cast<double>(dim);
  return std::sqrt(k.b * d * std::log(k.b_prime * d / delta));
}

/// gamma = beta sqrt(b d ln(b' d / delta')).
inline double lints_gamma(double beta, Index dim, double delta_prime, const TsConstants& k = {}) {
  return beta * ts_concentration_radius(dim, delta_prime, k);
}

/// Number of levels, ceil(1 / eta).
inline std::int64_t lints_num_levels(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("lints_num_levels: eta must lie in (0, 1)");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(1.0 / eta - 1e-9)));
}

/// (c, r, eps, q_bar) of level m.
inline MipsSpec lints_level_spec(std::int64_t m, double q_bar, double eta, double delta_prime) {
  if (m < 1) throw std::invalid_argument("lints_level_spec: levels start at 1");
  const double md = static_cast<double>(m);
  MipsSpec s;
  s.c = 1.0 - 1.0 / (md + 1.0);
  s.r = q_bar * md * eta;
  s.eps = eta;
  s.q_bar = q_bar;
  s.delta = delta_prime;
  return s;
}

/// Largest loss a within-contract selection may incur, (3 + beta + gamma) eta.
inline double lints_loss_bound(double beta, double gamma, double eta) {
  return (3.0 + beta + gamma) * eta;
}

inline double lints_regret_bound(Index dim, std::int64_t horizon, double delta, double beta,
                                 double gamma, double eta, const TsConstants& k = {}) {
  const double d = static_cast<double>(dim);
  const double t = static_cast<double>(horizon);
  const double ep = std::sqrt(2.0 * t * d * std::log1p(t / d));
  return (4.0 * gamma / k.p) * (ep + std::sqrt(8.0 * t * std::log(4.0 / delta))) +
         (gamma + beta) * ep + (2.0 * (3.0 + gamma + beta) / k.p) * eta * t;
}

/// Exact argmax of <x_a, theta>; ties go to the smallest id.
template <typename Scalar, typename Derived>
Index lints_baseline_select(const PointSet<Scalar>& arms, const Eigen::MatrixBase<Derived>& theta) {
  return brute_force_mips(arms, theta).index;
}

struct LintsOptions {
  std::int64_t horizon = 1;
  double delta = 0.05;
  double eta = 0.1;
  std::uint64_t seed = 0;  // perturbation stream
  bool accelerated = true;
  TsConstants constants;
  AdaptiveOptions mips;
};

template <typename Scalar>
struct LintsSelection {
  Index arm = 0;
  std::int64_t level = 0;  // 0 when the exact scan decided
  bool fallback = false;
  bool concentration_failure = false;  // ||theta_tilde|| > q_bar
  std::int64_t levels_queried = 0;
  AdaptiveQueryStats stats;
  Vector<Scalar> theta_tilde;
};

template <typename Scalar>
class LinTs {
 public:
  LinTs(std::shared_ptr<const PointSet<Scalar>> arms, const LintsOptions& options)
      : arms_(std::move(arms)), options_(options), ridge_(arms_ ? arms_->dim() : 1),
        sampler_(arms_ ? arms_->dim() : 1, derive_seed(options.seed, 0x75)) {
    if (!arms_ || arms_->empty()) throw std::invalid_argument("LinTs: empty arm set");
    if (!(options_.delta > 0.0 && options_.delta < 1.0)) throw std::invalid_argument("LinTs: delta must lie in (0, 1)");
    if (options_.horizon < 1) throw std::invalid_argument("LinTs: horizon must be >= 1");
    delta_prime_ = options_.delta / (4.0 * static_cast<double>(options_.horizon));
    beta_ = confidence_radius(arms_->dim(), options_.horizon, delta_prime_);
    gamma_ = lints_gamma(beta_, arms_->dim(), delta_prime_, options_.constants);
    q_bar_ = 1.0 + beta_ + gamma_;
    if (options_.accelerated) {
      num_levels_ = lints_num_levels(options_.eta);
      corpus_ = std::make_shared<const MipsCorpus<Scalar>>(arms_, options_.mips);
    }
  }

  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  double q_bar() const { return q_bar_; }
  double delta_prime() const { return delta_prime_; }
  std::int64_t num_levels() const { return num_levels_; }
  const RidgeState<Scalar>& ridge() const { return ridge_; }
  const PointSet<Scalar>& arms() const { return *arms_; }
  std::shared_ptr<const MipsCorpus<Scalar>> corpus() const { return corpus_; }

  MipsSpec level_spec(std::int64_t m) const {
    return lints_level_spec(m, q_bar_, options_.eta, delta_prime_);
  }

  /// Index of level m. Levels share the corpus, so this is cheap.
  AdaptiveMipsIndex<Scalar> level(std::int64_t m) const {
    AdaptiveOptions mo = options_.mips;
    return AdaptiveMipsIndex<Scalar>(corpus_, level_spec(m), mo);
  }

  LintsSelection<Scalar> select() {
    LintsSelection<Scalar> sel;
    const Vector<Scalar> xi = sampler_.sample();
    sel.theta_tilde = ridge_.theta_hat() + static_cast<Scalar>(beta_) * (inv_sqrt(ridge_) * xi);
    if (!options_.accelerated) {
      sel.arm = lints_baseline_select(*arms_, sel.theta_tilde);
      sel.stats.probes = arms_->size();
      return sel;
    }
    if (sel.theta_tilde.norm() > static_cast<Scalar>(q_bar_)) {
      sel.concentration_failure = true;
      return exact(std::move(sel));
    }

    // lo always fires (0 is the sentinel), hi never does.
    std::int64_t lo = 0;
    std::int64_t hi = num_levels_ + 1;
    std::optional<MipsHit<Scalar>> best;
    while (hi - lo > 1) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      AdaptiveQueryStats st;
      const auto hit = level(mid).query(sel.theta_tilde, &st);
      sel.stats += st;
      ++sel.levels_queried;
      if (hit) {
        lo = mid;
        best = hit;
      } else {
        hi = mid;
      }
    }
    if (!best) return exact(std::move(sel));
    sel.arm = best->index;
    sel.level = lo;
    return sel;
  }

  void observe(Index arm, Scalar reward) { ridge_.update(arms_->point(arm), reward); }

 private:
  LintsSelection<Scalar> exact(LintsSelection<Scalar> sel) const {
    sel.arm = lints_baseline_select(*arms_, sel.theta_tilde);
    sel.fallback = true;
    sel.level = 0;
    sel.stats.probes += arms_->size();
    return sel;
  }

  std::shared_ptr<const PointSet<Scalar>> arms_;
  LintsOptions options_;
  RidgeState<Scalar> ridge_;
  TsSampler<Scalar> sampler_;
  double delta_prime_ = 0.0;
  double beta_ = 1.0;
  double gamma_ = 0.0;
  double q_bar_ = 1.0;
  std::int64_t num_levels_ = 0;
  std::shared_ptr<const MipsCorpus<Scalar>> corpus_;
};

}  // namespace mipsbandit
