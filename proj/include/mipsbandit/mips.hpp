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
#include <optional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mipsbandit/types.hpp"

namespace mipsbandit {

/// Parameters of a relaxed MIPS contract: whenever some point has
/// <q, p*> >= r + eps, return a point with <q, p> >= c r - eps. Queries are
/// bounded by ||q|| <= q_bar; delta is the failure budget for a whole
/// (possibly adaptive) query sequence.
struct MipsSpec {
  double c = 1.0;
  double r = 0.0;
  double eps = 0.0;
  double q_bar = 1.0;
  double delta = 0.1;

  /// No query can have a qualifying point, so every null answer is correct.
  bool vacuous() const { return r + eps > q_bar; }

  /// Threshold every returned point must clear against the original query.
  double sanity_threshold() const { return c * r - eps; }

  void validate() const {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("MipsSpec: c must lie in (0, 1]");
    if (!(eps >= 0.0)) throw std::invalid_argument("MipsSpec: eps must be nonnegative");
    if (!(q_bar > 0.0) || !std::isfinite(q_bar)) {
      throw std::invalid_argument("MipsSpec: q_bar must be positive and finite");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("MipsSpec: delta must lie in (0, 1)");
    if (!std::isfinite(r)) throw std::invalid_argument("MipsSpec: r must be finite");
  }
};

/// (c', r')-approximate near neighbor parameters on lifted unit vectors.
struct AnnSpec {
  double c_prime = 1.0;
  double r_prime = 0.0;
  double rho_q = 1.0;
};

/// c' = sqrt((q_bar - c r) / (q_bar - r)), r' = sqrt(2 - 2 r / q_bar),
/// rho_q = (2 c'^2 - 1) / c'^4.
inline AnnSpec ann_params(const MipsSpec& spec) {
  if (!(spec.r < spec.q_bar)) {
    throw std::invalid_argument("ann_params: requires r < q_bar");
  }
  if (!(spec.c * spec.r < spec.q_bar)) {
    throw std::invalid_argument("ann_params: requires c * r < q_bar");
  }
  AnnSpec ann;
  const double c2 = (spec.q_bar - spec.c * spec.r) / (spec.q_bar - spec.r);
  ann.c_prime = std::sqrt(c2);
  ann.r_prime = std::sqrt(std::max(0.0, 2.0 - 2.0 * spec.r / spec.q_bar));
  ann.rho_q = (2.0 * c2 - 1.0) / (c2 * c2);
  return ann;
}

/// Fixed set of K points with ||p|| <= 1, stored column-wise (d x K), each
/// tagged with a stable id.
template <typename Scalar>
class PointSet {
 public:
  using MatrixType = Matrix<Scalar>;

  PointSet() = default;

  /// Ids default to 0..K-1.
  explicit PointSet(MatrixType points) : points_(std::move(points)) {
    ids_.resize(static_cast<std::size_t>(points_.cols()));
    for (std::size_t i = 0; i < ids_.size(); ++i) ids_[i] = static_cast<ArmId>(i);
    init();
  }

  PointSet(MatrixType points, std::vector<ArmId> ids)
      : points_(std::move(points)), ids_(std::move(ids)) {
    if (static_cast<Index>(ids_.size()) != points_.cols()) {
      throw std::invalid_argument("PointSet: id count does not match point count");
    }
    init();
  }

  Index dim() const { return points_.rows(); }
  Index size() const { return points_.cols(); }
  bool empty() const { return points_.cols() == 0; }

  const MatrixType& points() const { return points_; }
  auto point(Index i) const { return points_.col(i); }
  ArmId id(Index i) const { return ids_[static_cast<std::size_t>(i)]; }
  const std::vector<ArmId>& ids() const { return ids_; }
  Scalar max_norm() const { return max_norm_; }

  /// Column index of `id`, or nullopt.
  std::optional<Index> index_of(ArmId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  void init() {
    if (!points_.allFinite()) throw std::invalid_argument("PointSet: non-finite coordinates");
    max_norm_ = Scalar(0);
    index_.reserve(ids_.size());
    for (Index i = 0; i < points_.cols(); ++i) {
      const Scalar n = points_.col(i).norm();
      if (n > Scalar(1) + norm_tolerance<Scalar>()) {
        std::ostringstream os;
        os << "PointSet: point " << i << " has norm " << n << " > 1";
        throw std::invalid_argument(os.str());
      }
      max_norm_ = std::max(max_norm_, n);
      if (!index_.emplace(ids_[static_cast<std::size_t>(i)], i).second) {
        std::ostringstream os;
        os << "PointSet: duplicate id " << ids_[static_cast<std::size_t>(i)];
        throw std::invalid_argument(os.str());
      }
    }
  }

  MatrixType points_;
  std::vector<ArmId> ids_;
  std::unordered_map<ArmId, Index> index_;
  Scalar max_norm_ = Scalar(0);
};

/// [p; sqrt(1 - ||p||^2); 0]
template <typename Derived>
Vector<typename Derived::Scalar> lift_point(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  const Scalar sq = p.squaredNorm();
  if (std::sqrt(sq) > Scalar(1) + norm_tolerance<Scalar>()) {
    throw std::invalid_argument("lift_point: ||p|| > 1");
  }
  const Index d = p.size();
  Vector<Scalar> out(d + 2);
  out.head(d) = p;
  out(d) = std::sqrt(std::max(Scalar(0), Scalar(1) - sq));
  out(d + 1) = Scalar(0);
  return out;
}

/// [q / q_bar; 0; sqrt(1 - ||q / q_bar||^2)]
template <typename Derived>
Vector<typename Derived::Scalar> lift_query(const Eigen::MatrixBase<Derived>& q,
                                            double q_bar) {
  using Scalar = typename Derived::Scalar;
  if (!(q_bar > 0.0)) throw std::invalid_argument("lift_query: q_bar must be positive");
  const Scalar scale = Scalar(1) / static_cast<Scalar>(q_bar);
  const Scalar sq = q.squaredNorm() * scale * scale;
  if (std::sqrt(sq) > Scalar(1) + norm_tolerance<Scalar>()) {
    throw std::invalid_argument("lift_query: ||q|| > q_bar");
  }
  const Index d = q.size();
  Vector<Scalar> out(d + 2);
  out.head(d) = q * scale;
  out(d) = Scalar(0);
  out(d + 1) = std::sqrt(std::max(Scalar(0), Scalar(1) - sq));
  return out;
}

/// Lifts every point of `ps` into a (d+2) x K matrix of unit columns.
template <typename Scalar>
Matrix<Scalar> lift_points(const PointSet<Scalar>& ps) {
  Matrix<Scalar> out(ps.dim() + 2, ps.size());
  for (Index i = 0; i < ps.size(); ++i) out.col(i) = lift_point(ps.point(i));
  return out;
}

template <typename Scalar>
struct MipsHit {
  ArmId id = 0;
  Index index = 0;  // column in the PointSet
  Scalar value = Scalar(0);
};

/// Exact argmax_p <q, p>; ties go to the smallest id.
template <typename Scalar, typename Derived>
MipsHit<Scalar> brute_force_mips(const PointSet<Scalar>& ps,
                                 const Eigen::MatrixBase<Derived>& q) {
  if (ps.empty()) throw std::invalid_argument("brute_force_mips: empty point set");
  if (q.size() != ps.dim()) throw std::invalid_argument("brute_force_mips: dimension mismatch");
  const Vector<Scalar> values = ps.points().transpose() * q;
  MipsHit<Scalar> best{ps.id(0), 0, values(0)};
  for (Index i = 1; i < ps.size(); ++i) {
    const Scalar v = values(i);
    if (v > best.value || (v == best.value && ps.id(i) < best.id)) {
      best = {ps.id(i), i, v};
    }
  }
  return best;
}

}  // namespace mipsbandit
