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
#include <stdexcept>

#include <Eigen/Dense>

#include "mipsbandit/types.hpp"

namespace mipsbandit {

/// Regularized least-squares state shared by the UCB and TS learners.
///
///   gram      V_t = I + sum_s x_s x_s^T
///   gram_inv  V_t^{-1}, maintained by rank-1 (Sherman-Morrison) updates
///   xty       sum_s r_s x_s
///   theta_hat V_t^{-1} xty
///
/// The inverse is re-factorized from `gram` every kRefactorPeriod updates so
/// accumulated round-off stays bounded over long horizons.
template <typename Scalar>
class RidgeState {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  static constexpr std::int64_t kRefactorPeriod = 1024;

  explicit RidgeState(Index dim)
      : gram_(MatrixType::Identity(dim, dim)),
        gram_inv_(MatrixType::Identity(dim, dim)),
        xty_(VectorType::Zero(dim)),
        theta_hat_(VectorType::Zero(dim)) {
    if (dim <= 0) throw std::invalid_argument("RidgeState: dim must be positive");
  }

  Index dim() const { return gram_.rows(); }
  std::int64_t step() const { return step_; }
  const MatrixType& gram() const { return gram_; }
  const MatrixType& gram_inv() const { return gram_inv_; }
  const VectorType& xty() const { return xty_; }
  const VectorType& theta_hat() const { return theta_hat_; }

  /// Adds the observation (x, reward).
  void update(const Eigen::Ref<const VectorType>& x, Scalar reward) {
    if (x.size() != dim()) {
      throw std::invalid_argument("RidgeState::update: dimension mismatch");
    }
    if (!x.allFinite() || !std::isfinite(reward)) {
      throw std::invalid_argument("RidgeState::update: non-finite feature or reward");
    }
    gram_.noalias() += x * x.transpose();
    xty_.noalias() += reward * x;
    ++step_;

    if (step_ % kRefactorPeriod == 0) {
      refactor();
    } else {
      const VectorType vx = gram_inv_ * x;
      const Scalar denom = Scalar(1) + x.dot(vx);
      gram_inv_.noalias() -= (vx * vx.transpose()) / denom;
      // Keep the stored inverse exactly symmetric.
      gram_inv_ = (Scalar(0.5) * (gram_inv_ + gram_inv_.transpose())).eval();
    }
    theta_hat_.noalias() = gram_inv_ * xty_;
  }

  /// Recomputes gram_inv from gram by Cholesky.
  void refactor() {
    Eigen::LLT<MatrixType> llt(gram_);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("RidgeState::refactor: gram matrix lost positive definiteness");
    }
    gram_inv_ = llt.solve(MatrixType::Identity(dim(), dim()));
    gram_inv_ = (Scalar(0.5) * (gram_inv_ + gram_inv_.transpose())).eval();
  }

 private:
  MatrixType gram_;
  MatrixType gram_inv_;
  VectorType xty_;
  VectorType theta_hat_;
  std::int64_t step_ = 0;
};

/// Unique symmetric S with S * S = V^{-1}, via eigendecomposition of V.
template <typename Scalar>
Matrix<Scalar> inv_sqrt(const RidgeState<Scalar>& state) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(state.gram());
  if (es.info() != Eigen::Success || !es.eigenvalues().allFinite()) {
    throw std::runtime_error("inv_sqrt: eigendecomposition failed");
  }
  const Vector<Scalar> scale = es.eigenvalues().array().rsqrt().matrix();
  const auto& u = es.eigenvectors();
  Matrix<Scalar> s = u * scale.asDiagonal() * u.transpose();
  return Scalar(0.5) * (s + s.transpose());
}

/// ||x||_{V^{-1}} = sqrt(x^T V^{-1} x).
template <typename Scalar, typename Derived>
Scalar mahalanobis_inv(const RidgeState<Scalar>& state,
                       const Eigen::MatrixBase<Derived>& x) {
  if (!x.allFinite()) throw std::invalid_argument("mahalanobis_inv: non-finite input");
  const Scalar q = x.dot(state.gram_inv() * x);
  return std::sqrt(std::max(q, Scalar(0)));
}

/// Column-wise ||x_a||_{V^{-1}} for a d x K block of features.
template <typename Scalar, typename Derived>
Vector<Scalar> mahalanobis_inv_columns(const RidgeState<Scalar>& state,
                                       const Eigen::MatrixBase<Derived>& xs) {
  const Matrix<Scalar> vx = state.gram_inv() * xs;
  return (xs.cwiseProduct(vx)).colwise().sum().transpose().cwiseMax(Scalar(0)).cwiseSqrt();
}

/// Upper bound 2 d log(1 + T/d) on sum_t ||x_t||^2_{V_t^{-1}}.
inline double elliptical_potential_bound(Index dim, std::int64_t horizon) {
  const double d = static_cast<double>(dim);
  return 2.0 * d * std::log1p(static_cast<double>(horizon) / d);
}

}  // namespace mipsbandit
