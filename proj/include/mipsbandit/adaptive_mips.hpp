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

// Relaxed MIPS that stays correct over an adaptive query sequence.
//
// Queries are snapped to a lattice of spacing eps / d before reaching the
// oracles, so only finitely many distinct oracle inputs exist. kappa
// independent constant-success oracles are consulted in order; a returned
// point is only accepted if <q, p> >= c r - eps against the unrounded query,
// so any answer is proof of success and the first one wins.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mipsbandit/lsh.hpp"
#include "mipsbandit/mips.hpp"
#include "mipsbandit/types.hpp"

namespace mipsbandit {

enum class OracleBackend { kBruteForce, kLsh };

inline const char* to_string(OracleBackend b) {
  return b == OracleBackend::kLsh ? "lsh" : "brute";
}

struct AdaptiveOptions {
  OracleBackend backend = OracleBackend::kBruteForce;
  double oracle_fail = 0.5;  // failure probability of one oracle copy
  std::uint64_t seed = 0;
  std::size_t max_table_entries = kDefaultMaxTableEntries;
};

/// kappa = ceil(d ln(K d q_bar / (eps delta)) / ln(1 / oracle_fail)), at least 1.
inline std::int64_t adaptive_kappa(Index dim, Index num_points, const MipsSpec& spec,
                                   double oracle_fail) {
  if (!(spec.eps > 0.0)) throw std::invalid_argument("adaptive_kappa: eps must be positive");
  if (!(oracle_fail > 0.0 && oracle_fail < 1.0)) {
    throw std::invalid_argument("adaptive_kappa: oracle failure probability must lie in (0, 1)");
  }
  const double d = static_cast<double>(dim);
  const double k = static_cast<double>(std::max<Index>(num_points, 1));
  const double num = d * std::log(k * d * spec.q_bar / (spec.eps * spec.delta));
  const double kappa = std::ceil(num / std::log(1.0 / oracle_fail));
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(kappa));
}

/// Rounds each coordinate to the nearest multiple of `step`, ties toward +inf.
template <typename Derived>
Vector<typename Derived::Scalar> round_to_lattice(const Eigen::MatrixBase<Derived>& q,
                                                  typename Derived::Scalar step) {
  using Scalar = typename Derived::Scalar;
  if (!(step > Scalar(0))) throw std::invalid_argument("round_to_lattice: step must be positive");
  return q.unaryExpr([step](Scalar v) { return step * std::floor(v / step + Scalar(0.5)); });
}

/// Point data shared by every adaptive index over the same points (e.g. the
/// levels of the TS learner). For the LSH backend it owns the hyperplane
/// table pool; oracle copies are disjoint table ranges of it.
template <typename Scalar>
class MipsCorpus {
 public:
  MipsCorpus(std::shared_ptr<const PointSet<Scalar>> points, const AdaptiveOptions& options)
      : points_(std::move(points)), backend_(options.backend) {
    if (!points_ || points_->empty()) throw std::invalid_argument("MipsCorpus: empty point set");
    if (backend_ == OracleBackend::kLsh) {
      auto lifted = std::make_shared<const Matrix<Scalar>>(lift_points(*points_));
      const int k = lsh_params(points_->size(), AnnSpec{2.0, 1.0, 0.0}, 0.5).hashes_per_table;
      pool_ = std::make_shared<const HyperplaneTablePool<Scalar>>(
          std::move(lifted), k, derive_seed(options.seed, 0x1a5b), options.max_table_entries);
    }
  }

  const PointSet<Scalar>& points() const { return *points_; }
  std::shared_ptr<const PointSet<Scalar>> shared_points() const { return points_; }
  OracleBackend backend() const { return backend_; }
  std::shared_ptr<const HyperplaneTablePool<Scalar>> pool() const { return pool_; }

 private:
  std::shared_ptr<const PointSet<Scalar>> points_;
  OracleBackend backend_;
  std::shared_ptr<const HyperplaneTablePool<Scalar>> pool_;
};

struct AdaptiveQueryStats {
  std::int64_t oracle_queries = 0;
  std::int64_t probes = 0;
  std::int64_t tables_probed = 0;
  bool skipped = false;  // vacuous by norm, no oracle consulted

  AdaptiveQueryStats& operator+=(const AdaptiveQueryStats& o) {
    oracle_queries += o.oracle_queries;
    probes += o.probes;
    tables_probed += o.tables_probed;
    return *this;
  }
};

template <typename Scalar>
class AdaptiveMipsIndex {
 public:
  AdaptiveMipsIndex(std::shared_ptr<const MipsCorpus<Scalar>> corpus, const MipsSpec& spec,
                    const AdaptiveOptions& options)
      : corpus_(std::move(corpus)), spec_(spec), options_(options) {
    if (!corpus_) throw std::invalid_argument("AdaptiveMipsIndex: null corpus");
    spec_.validate();
    if (!(spec_.eps > 0.0)) throw std::invalid_argument("AdaptiveMipsIndex: eps = 0 leaves the lattice undefined");
    if (!(options_.oracle_fail > 0.0 && options_.oracle_fail < 1.0)) {
      throw std::invalid_argument("AdaptiveMipsIndex: oracle failure probability must lie in (0, 1)");
    }
    if (options_.backend != corpus_->backend()) {
      throw std::invalid_argument("AdaptiveMipsIndex: backend differs from corpus backend");
    }
    const PointSet<Scalar>& ps = corpus_->points();
    kappa_ = adaptive_kappa(ps.dim(), ps.size(), spec_, options_.oracle_fail);
    lattice_step_ = static_cast<Scalar>(spec_.eps / static_cast<double>(ps.dim()));

    if (options_.backend == OracleBackend::kLsh && spec_.r < spec_.q_bar) {
      ann_ = ann_params(spec_);
      if (!(ann_->c_prime > 1.0)) {
        throw std::invalid_argument("AdaptiveMipsIndex: c' <= 1, LSH backend has no sublinear regime");
      }
      tables_per_oracle_ = lsh_params(ps.size(), *ann_, options_.oracle_fail).tables;
    }
  }

  const MipsSpec& spec() const { return spec_; }
  std::int64_t kappa() const { return kappa_; }
  Scalar lattice_step() const { return lattice_step_; }
  OracleBackend backend() const { return options_.backend; }
  const std::optional<AnnSpec>& ann() const { return ann_; }
  std::int64_t tables_per_oracle() const { return tables_per_oracle_; }
  const MipsCorpus<Scalar>& corpus() const { return *corpus_; }

  /// Oracle copy i of the LSH backend.
  LshIndex<Scalar> oracle(std::int64_t i) const {
    if (!ann_) throw std::logic_error("AdaptiveMipsIndex::oracle: no LSH oracles for this index");
    return LshIndex<Scalar>(corpus_->pool(),
                            static_cast<std::size_t>(i) * static_cast<std::size_t>(tables_per_oracle_),
                            tables_per_oracle_, *ann_);
  }

  /// Returns a point with <q, p> >= c r - eps, or nullopt.
  template <typename Derived>
  std::optional<MipsHit<Scalar>> query(const Eigen::MatrixBase<Derived>& q,
                                       AdaptiveQueryStats* stats = nullptr) const {
    AdaptiveQueryStats local;
    AdaptiveQueryStats& st = stats ? *stats : local;
    const PointSet<Scalar>& ps = corpus_->points();
    if (q.size() != ps.dim()) throw std::invalid_argument("AdaptiveMipsIndex::query: dimension mismatch");
    if (!q.allFinite()) throw std::invalid_argument("AdaptiveMipsIndex::query: non-finite query");
    const Scalar q_bar = static_cast<Scalar>(spec_.q_bar);
    const Scalar qnorm = q.norm();
    if (qnorm > q_bar * (Scalar(1) + Scalar(1e-9))) {
      throw std::domain_error("AdaptiveMipsIndex::query: ||q|| = " + std::to_string(qnorm) +
                              " exceeds q_bar = " + std::to_string(spec_.q_bar));
    }

    Vector<Scalar> snapped = round_to_lattice(q, lattice_step_);
    const Scalar snorm = snapped.norm();
    if (snorm > q_bar) snapped *= q_bar / snorm;

    const Scalar threshold = static_cast<Scalar>(spec_.sanity_threshold());
    auto accept = [&](Index idx) -> std::optional<MipsHit<Scalar>> {
      const Scalar v = ps.point(idx).dot(q);
      if (v >= threshold) return MipsHit<Scalar>{ps.id(idx), idx, v};
      return std::nullopt;
    };

    if (options_.backend == OracleBackend::kBruteForce) {
      // All kappa exact copies give the same answer, so one evaluation suffices.
      ++st.oracle_queries;
      st.probes += ps.size();
      const MipsHit<Scalar> best = brute_force_mips(ps, snapped);
      if (best.value >= static_cast<Scalar>(spec_.c * spec_.r) - Scalar(1e-12) * q_bar) {
        return accept(best.index);
      }
      return std::nullopt;
    }

    // No point can reach r + eps, so null is a correct answer.
    if (!ann_ || qnorm * ps.max_norm() < static_cast<Scalar>(spec_.r + spec_.eps)) {
      st.skipped = true;
      return std::nullopt;
    }
    const Vector<Scalar> lifted = lift_query(snapped, spec_.q_bar);
    for (std::int64_t i = 0; i < kappa_; ++i) {
      const LshQueryResult<Scalar> r = oracle(i).query(lifted);
      ++st.oracle_queries;
      st.probes += r.probes;
      st.tables_probed += r.tables_probed;
      if (r.index) {
        if (auto hit = accept(*r.index)) return hit;
      }
    }
    return std::nullopt;
  }

 private:
  std::shared_ptr<const MipsCorpus<Scalar>> corpus_;
  MipsSpec spec_;
  AdaptiveOptions options_;
  std::int64_t kappa_ = 1;
  Scalar lattice_step_ = Scalar(0);
  std::optional<AnnSpec> ann_;
  std::int64_t tables_per_oracle_ = 0;
};

/// Builds an index with its own corpus.
template <typename Scalar>
AdaptiveMipsIndex<Scalar> build_adaptive(std::shared_ptr<const PointSet<Scalar>> points,
                                         const MipsSpec& spec, const AdaptiveOptions& options) {
  auto corpus = std::make_shared<const MipsCorpus<Scalar>>(std::move(points), options);
  return AdaptiveMipsIndex<Scalar>(std::move(corpus), spec, options);
}

}  // namespace mipsbandit
