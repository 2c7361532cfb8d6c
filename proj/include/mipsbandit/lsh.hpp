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

// Random-hyperplane (SimHash) LSH over lifted unit vectors.
//
// A table hashes a vector to k sign bits sign(<g_i, x>), g_i ~ N(0, I). Two
// unit vectors at angle theta collide on one bit with probability
// 1 - theta / pi. An index with L tables answers a query by collecting the
// union of the query's L buckets and verifying every candidate by exact
// distance, so it never returns a point farther than c' r'.
//
// Tables live in a HyperplaneTablePool and are materialized on first use.
// Table t is generated from its own derived seed, so materialization order
// never changes the result.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mipsbandit/mips.hpp"
#include "mipsbandit/types.hpp"

namespace mipsbandit {

/// Default cap on (tables x points) entries a pool may hold (~2 GiB).
inline constexpr std::size_t kDefaultMaxTableEntries = std::size_t{1} << 28;

struct LshParams {
  int hashes_per_table = 1;  // k
  std::int64_t tables = 1;   // L
  double p_near = 1.0;       // per-bit collision probability at distance r'
};

/// Collision probability of one hyperplane bit for unit vectors at
/// Euclidean distance `dist` (angle 2 asin(dist / 2)).
inline double hyperplane_collision_probability(double dist) {
  const double half = std::clamp(dist / 2.0, 0.0, 1.0);
  return 1.0 - 2.0 * std::asin(half) / std::numbers::pi;
}

/// k = ceil(log2 K); L = smallest integer with (1 - P1^k)^L <= fail.
inline LshParams lsh_params(Index num_points, const AnnSpec& ann, double fail) {
  if (!(fail > 0.0 && fail < 1.0)) throw std::invalid_argument("lsh_params: fail must lie in (0, 1)");
  LshParams p;
  const double k = std::ceil(std::log2(static_cast<double>(std::max<Index>(num_points, 2))));
  p.hashes_per_table = static_cast<int>(std::clamp(k, 1.0, 32.0));
  p.p_near = hyperplane_collision_probability(ann.r_prime);
  const double hit = std::pow(p.p_near, p.hashes_per_table);
  if (hit >= 1.0) {
    p.tables = 1;
  } else if (hit <= 0.0) {
    throw std::invalid_argument("lsh_params: near collision probability underflows");
  } else {
    const double l = std::ceil(std::log(fail) / std::log1p(-hit) - 1e-9);
    if (!(l < 9.0e15)) throw std::length_error("lsh_params: table count overflows");
    p.tables = std::max<std::int64_t>(1, static_cast<std::int64_t>(l));
  }
  return p;
}

template <typename Scalar>
class HyperplaneTablePool {
 public:
  struct Table {
    Matrix<Scalar> planes;              // k x D
    std::vector<std::uint32_t> codes;   // sorted ascending
    std::vector<std::uint32_t> points;  // column of each entry, parallel to codes

    std::pair<std::size_t, std::size_t> bucket(std::uint32_t code) const {
      auto [lo, hi] = std::equal_range(codes.begin(), codes.end(), code);
      return {static_cast<std::size_t>(lo - codes.begin()),
              static_cast<std::size_t>(hi - codes.begin())};
    }
  };

  /// `lifted` holds D x K unit columns.
  HyperplaneTablePool(std::shared_ptr<const Matrix<Scalar>> lifted, int hashes_per_table,
                      std::uint64_t seed, std::size_t max_entries = kDefaultMaxTableEntries)
      : lifted_(std::move(lifted)), k_(hashes_per_table), seed_(seed), max_entries_(max_entries) {
    if (!lifted_) throw std::invalid_argument("HyperplaneTablePool: null point matrix");
    if (k_ < 1 || k_ > 32) throw std::invalid_argument("HyperplaneTablePool: k must lie in [1, 32]");
    if (lifted_->cols() > std::numeric_limits<std::uint32_t>::max()) {
      throw std::invalid_argument("HyperplaneTablePool: too many points");
    }
  }

  HyperplaneTablePool(const HyperplaneTablePool&) = delete;
  HyperplaneTablePool& operator=(const HyperplaneTablePool&) = delete;

  int hashes_per_table() const { return k_; }
  Index num_points() const { return lifted_->cols(); }
  Index dim() const { return lifted_->rows(); }
  const Matrix<Scalar>& lifted() const { return *lifted_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t materialized() const {
    std::lock_guard<std::mutex> lock(mu_);
    return storage_.size();
  }

  /// Pointers to tables [first, first + count), materializing any missing.
  /// Throws std::length_error if that would exceed the entry budget.
  std::vector<const Table*> acquire(std::size_t first, std::size_t count) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (slots_.size() < first + count) slots_.resize(first + count, nullptr);
    std::size_t missing = 0;
    for (std::size_t t = first; t < first + count; ++t) missing += slots_[t] == nullptr;
    const std::size_t k_points = static_cast<std::size_t>(num_points());
    if (missing > 0 && (storage_.size() + missing) * std::max<std::size_t>(k_points, 1) > max_entries_) {
      std::ostringstream os;
      os << "hyperplane table pool: materializing " << missing << " more tables over "
         << k_points << " points exceeds the budget of " << max_entries_ << " entries";
      throw std::length_error(os.str());
    }
    std::vector<std::size_t> todo;
    for (std::size_t t = first; t < first + count; ++t) {
      if (slots_[t] == nullptr) todo.push_back(t);
    }
    constexpr std::size_t kBatch = 32;
    for (std::size_t b = 0; b < todo.size(); b += kBatch) {
      build_batch(todo.data() + b, std::min(kBatch, todo.size() - b));
    }
    std::vector<const Table*> out(slots_.begin() + static_cast<std::ptrdiff_t>(first),
                                  slots_.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
  }

  template <typename Derived>
  std::uint32_t hash(const Table& table, const Eigen::MatrixBase<Derived>& x) const {
    const Vector<Scalar> proj = table.planes * x;
    std::uint32_t code = 0;
    for (int i = 0; i < k_; ++i) code |= static_cast<std::uint32_t>(proj(i) >= Scalar(0)) << i;
    return code;
  }

  /// bucket size -> number of buckets, over all materialized tables.
  std::map<std::size_t, std::size_t> occupancy_histogram() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::map<std::size_t, std::size_t> hist;
    for (const Table& t : storage_) {
      std::size_t i = 0;
      while (i < t.codes.size()) {
        std::size_t j = i;
        while (j < t.codes.size() && t.codes[j] == t.codes[i]) ++j;
        ++hist[j - i];
        i = j;
      }
    }
    return hist;
  }

 private:
  Matrix<Scalar> draw_planes(std::size_t table_index) const {
    std::mt19937_64 rng(derive_seed(seed_, table_index));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix<Scalar> planes(k_, dim());
    for (Index j = 0; j < planes.cols(); ++j) {
      for (Index i = 0; i < planes.rows(); ++i) planes(i, j) = static_cast<Scalar>(normal(rng));
    }
    return planes;
  }

  void build_batch(const std::size_t* indices, std::size_t n) const {
    Matrix<Scalar> stacked(static_cast<Index>(n) * k_, dim());
    std::vector<Matrix<Scalar>> planes(n);
    for (std::size_t b = 0; b < n; ++b) {
      planes[b] = draw_planes(indices[b]);
      stacked.middleRows(static_cast<Index>(b) * k_, k_) = planes[b];
    }
    const Matrix<Scalar> proj = stacked * (*lifted_);
    const std::size_t npts = static_cast<std::size_t>(num_points());
    std::vector<std::uint64_t> keyed(npts);
    for (std::size_t b = 0; b < n; ++b) {
      const Index row0 = static_cast<Index>(b) * k_;
      for (std::size_t j = 0; j < npts; ++j) {
        std::uint32_t code = 0;
        for (int i = 0; i < k_; ++i) {
          code |= static_cast<std::uint32_t>(proj(row0 + i, static_cast<Index>(j)) >= Scalar(0)) << i;
        }
        keyed[j] = (static_cast<std::uint64_t>(code) << 32) | j;
      }
      std::sort(keyed.begin(), keyed.end());
      Table& t = storage_.emplace_back();
      t.planes = std::move(planes[b]);
      t.codes.resize(npts);
      t.points.resize(npts);
      for (std::size_t j = 0; j < npts; ++j) {
        t.codes[j] = static_cast<std::uint32_t>(keyed[j] >> 32);
        t.points[j] = static_cast<std::uint32_t>(keyed[j] & 0xffffffffu);
      }
      slots_[indices[b]] = &t;
    }
  }

  std::shared_ptr<const Matrix<Scalar>> lifted_;
  int k_;
  std::uint64_t seed_;
  std::size_t max_entries_;
  mutable std::mutex mu_;
  mutable std::deque<Table> storage_;
  mutable std::vector<const Table*> slots_;
};

template <typename Scalar>
struct LshQueryResult {
  std::optional<Index> index;  // column of the returned point
  Scalar distance = std::numeric_limits<Scalar>::infinity();
  std::int64_t probes = 0;         // distinct candidates verified
  std::int64_t tables_probed = 0;
  std::int64_t bucket_entries = 0;  // candidates before de-duplication
};

/// One (c', r')-ANN oracle: tables [first, first + L) of a pool.
template <typename Scalar>
class LshIndex {
 public:
  using Pool = HyperplaneTablePool<Scalar>;

  LshIndex(std::shared_ptr<const Pool> pool, std::size_t first_table, std::int64_t tables,
           AnnSpec ann)
      : pool_(std::move(pool)), first_(first_table), tables_(tables), ann_(ann) {
    if (!pool_) throw std::invalid_argument("LshIndex: null pool");
    if (tables_ < 1) throw std::invalid_argument("LshIndex: need at least one table");
    const double radius = ann_.c_prime * ann_.r_prime;
    accept_sq_ = static_cast<Scalar>(radius * radius + 1e-12);
  }

  int hashes_per_table() const { return pool_->hashes_per_table(); }
  std::int64_t tables() const { return tables_; }
  std::size_t first_table() const { return first_; }
  const AnnSpec& ann() const { return ann_; }
  const Pool& pool() const { return *pool_; }

  /// Materializes every table of this index.
  void materialize() const { pool_->acquire(first_, static_cast<std::size_t>(tables_)); }

  /// Nearest verified candidate within c' r' of `q_lifted`, or none.
  template <typename Derived>
  LshQueryResult<Scalar> query(const Eigen::MatrixBase<Derived>& q_lifted) const {
    if (q_lifted.size() != pool_->dim()) throw std::invalid_argument("LshIndex::query: dimension mismatch");
    if (std::abs(q_lifted.norm() - Scalar(1)) > Scalar(1e-8)) {
      throw std::invalid_argument("LshIndex::query: query must be unit norm");
    }
    LshQueryResult<Scalar> res;
    const auto tables = pool_->acquire(first_, static_cast<std::size_t>(tables_));
    std::vector<std::uint32_t> cand;
    for (const auto* table : tables) {
      ++res.tables_probed;
      auto [lo, hi] = table->bucket(pool_->hash(*table, q_lifted));
      cand.insert(cand.end(), table->points.begin() + static_cast<std::ptrdiff_t>(lo),
                  table->points.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    res.bucket_entries = static_cast<std::int64_t>(cand.size());
    if (cand.empty()) return res;
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    res.probes = static_cast<std::int64_t>(cand.size());

    const Matrix<Scalar>& pts = pool_->lifted();
    Scalar best_sq = std::numeric_limits<Scalar>::infinity();
    for (std::uint32_t c : cand) {
      const Scalar sq = (pts.col(c) - q_lifted).squaredNorm();
      if (sq <= accept_sq_ && sq < best_sq) {
        best_sq = sq;
        res.index = static_cast<Index>(c);
      }
    }
    if (res.index) res.distance = std::sqrt(best_sq);
    return res;
  }

 private:
  std::shared_ptr<const Pool> pool_;
  std::size_t first_;
  std::int64_t tables_;
  AnnSpec ann_;
  Scalar accept_sq_;
};

/// Builds a standalone index over lifted unit columns with parameters from
/// lsh_params(K, ann, fail). All L tables are materialized eagerly.
template <typename Scalar>
LshIndex<Scalar> build_lsh(std::shared_ptr<const Matrix<Scalar>> lifted, const AnnSpec& ann,
                           double fail, std::uint64_t seed,
                           std::size_t max_entries = kDefaultMaxTableEntries) {
  if (!lifted) throw std::invalid_argument("build_lsh: null point matrix");
  if (!(ann.c_prime > 1.0)) throw std::invalid_argument("build_lsh: c' must exceed 1");
  for (Index i = 0; i < lifted->cols(); ++i) {
    if (std::abs(lifted->col(i).norm() - Scalar(1)) > Scalar(1e-8)) {
      throw std::invalid_argument("build_lsh: lifted points must be unit norm");
    }
  }
  const LshParams params = lsh_params(lifted->cols(), ann, fail);
  auto pool = std::make_shared<const HyperplaneTablePool<Scalar>>(std::move(lifted),
                                                                  params.hashes_per_table, seed,
                                                                  max_entries);
  LshIndex<Scalar> index(std::move(pool), 0, params.tables, ann);
  index.materialize();
  return index;
}

}  // namespace mipsbandit
