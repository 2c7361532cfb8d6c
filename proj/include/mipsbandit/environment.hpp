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

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mipsbandit/mips.hpp"
#include "mipsbandit/types.hpp"

namespace mipsbandit {

enum class InstanceKind { kSphereUniform, kClustered, kPlantedGap };

inline const char* to_string(InstanceKind k) {
  switch (k) {
    case InstanceKind::kSphereUniform: return "sphere-uniform";
    case InstanceKind::kClustered: return "clustered";
    case InstanceKind::kPlantedGap: return "planted-gap";
  }
  return "?";
}

inline std::optional<InstanceKind> parse_instance_kind(const std::string& s) {
  if (s == "sphere-uniform") return InstanceKind::kSphereUniform;
  if (s == "clustered") return InstanceKind::kClustered;
  if (s == "planted-gap") return InstanceKind::kPlantedGap;
  return std::nullopt;
}

/// Stochastic linear bandit with fixed arms and Gaussian reward noise.
template <typename Scalar>
class Environment {
 public:
  Environment(std::shared_ptr<const PointSet<Scalar>> arms, Vector<Scalar> theta_star,
              double noise_std, std::uint64_t noise_seed)
      : arms_(std::move(arms)), theta_(std::move(theta_star)), noise_std_(noise_std),
        rng_(noise_seed) {
    if (!arms_ || arms_->empty()) throw std::invalid_argument("Environment: empty arm set");
    if (theta_.size() != arms_->dim()) throw std::invalid_argument("Environment: theta dimension mismatch");
    if (!theta_.allFinite() || theta_.norm() > Scalar(1) + norm_tolerance<Scalar>()) {
      throw std::invalid_argument("Environment: ||theta*|| must be at most 1");
    }
    if (!(noise_std >= 0.0 && noise_std <= 1.0)) {
      throw std::invalid_argument("Environment: noise std must lie in [0, 1]");
    }
    means_ = arms_->points().transpose() * theta_;
    best_ = 0;
    for (Index i = 1; i < means_.size(); ++i) {
      if (means_(i) > means_(best_)) best_ = i;
    }
  }

  const PointSet<Scalar>& arms() const { return *arms_; }
  std::shared_ptr<const PointSet<Scalar>> shared_arms() const { return arms_; }
  const Vector<Scalar>& theta_star() const { return theta_; }
  double noise_std() const { return noise_std_; }
  Index best_arm() const { return best_; }
  Scalar best_value() const { return means_(best_); }
  Scalar mean(Index arm) const { return means_(arm); }

  /// Instantaneous regret of pulling `arm`.
  Scalar regret(Index arm) const { return means_(best_) - means_(arm); }

  /// <theta*, x_arm> plus N(0, sigma^2).
  Scalar pull(Index arm) {
    if (arm < 0 || arm >= arms_->size()) throw std::out_of_range("Environment::pull: unknown arm");
    const double noise = noise_std_ > 0.0 ? noise_std_ * normal_(rng_) : 0.0;
    return means_(arm) + static_cast<Scalar>(noise);
  }

  /// pull() by arm id.
  Scalar pull_id(ArmId id) {
    const auto idx = arms_->index_of(id);
    if (!idx) throw std::out_of_range("Environment::pull_id: unknown arm id " + std::to_string(id));
    return pull(*idx);
  }

 private:
  std::shared_ptr<const PointSet<Scalar>> arms_;
  Vector<Scalar> theta_;
  double noise_std_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vector<Scalar> means_;
  Index best_ = 0;
};

struct InstanceOptions {
  InstanceKind kind = InstanceKind::kSphereUniform;
  Index num_arms = 2;
  Index dim = 1;
  std::uint64_t seed = 0;
  double noise_std = 0.1;
  double gap = 0.3;        // planted-gap only
  int clusters = 8;        // clustered only
  double spread = 0.15;    // clustered only
};

namespace detail {

template <typename Scalar>
Vector<Scalar> random_unit(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<Scalar> v(dim);
  Scalar n = 0;
  do {
    for (Index i = 0; i < dim; ++i) v(i) = static_cast<Scalar>(normal(rng));
    n = v.norm();
  } while (!(n > Scalar(1e-12)));
  return v / n;
}

}  // namespace detail

/// Synthetic instance. Arm geometry comes from one stream, reward noise from
/// another, so instances are identical across algorithms for a fixed seed.
template <typename Scalar>
Environment<Scalar> make_instance(const InstanceOptions& o) {
  if (o.num_arms < 2) throw std::invalid_argument("make_instance: need K >= 2");
  if (o.dim < 1) throw std::invalid_argument("make_instance: need d >= 1");
  std::mt19937_64 rng(derive_seed(o.seed, 1));
  const Vector<Scalar> theta = detail::random_unit<Scalar>(o.dim, rng);
  Matrix<Scalar> pts(o.dim, o.num_arms);

  switch (o.kind) {
    case InstanceKind::kSphereUniform:
      for (Index i = 0; i < o.num_arms; ++i) pts.col(i) = detail::random_unit<Scalar>(o.dim, rng);
      break;
    case InstanceKind::kClustered: {
      if (o.clusters < 1) throw std::invalid_argument("make_instance: clusters must be >= 1");
      std::vector<Vector<Scalar>> centers;
      for (int c = 0; c < o.clusters; ++c) centers.push_back(detail::random_unit<Scalar>(o.dim, rng));
      std::uniform_int_distribution<int> which(0, o.clusters - 1);
      std::normal_distribution<double> normal(0.0, o.spread);
      for (Index i = 0; i < o.num_arms; ++i) {
        Vector<Scalar> v = centers[static_cast<std::size_t>(which(rng))];
        for (Index j = 0; j < o.dim; ++j) v(j) += static_cast<Scalar>(normal(rng));
        const Scalar n = v.norm();
        pts.col(i) = n > Scalar(1e-12) ? Vector<Scalar>(v / n) : detail::random_unit<Scalar>(o.dim, rng);
      }
      break;
    }
    case InstanceKind::kPlantedGap: {
      if (!(o.gap > 0.0 && o.gap <= 1.0)) throw std::invalid_argument("make_instance: gap must lie in (0, 1]");
      if (o.dim < 2) throw std::invalid_argument("make_instance: planted-gap needs d >= 2");
      std::uniform_int_distribution<Index> slot(0, o.num_arms - 1);
      const Index planted = slot(rng);
      const Scalar cap = static_cast<Scalar>(1.0 - o.gap);
      for (Index i = 0; i < o.num_arms; ++i) {
        if (i == planted) {
          pts.col(i) = theta;
          continue;
        }
        Vector<Scalar> v = detail::random_unit<Scalar>(o.dim, rng);
        const Scalar along = v.dot(theta);
        if (along > cap) {
          Vector<Scalar> perp = v - along * theta;
          const Scalar pn = perp.norm();
          const Scalar keep = std::sqrt(std::max(Scalar(0), Scalar(1) - cap * cap));
          perp = pn > Scalar(1e-12) ? Vector<Scalar>(perp * (keep / pn)) : Vector<Scalar>::Zero(o.dim);
          v = perp + cap * theta;
        }
        pts.col(i) = v;
      }
      break;
    }
  }
  auto arms = std::make_shared<const PointSet<Scalar>>(std::move(pts));
  return Environment<Scalar>(std::move(arms), theta, o.noise_std, derive_seed(o.seed, 2));
}

}  // namespace mipsbandit
