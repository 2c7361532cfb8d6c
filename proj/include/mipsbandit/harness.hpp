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

// Experiment runner: one bandit loop per repetition, with the invariant
// checks that turn a run into a pass/fail signal, and the CSV/JSON writers.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mipsbandit/adaptive_mips.hpp"
#include "mipsbandit/environment.hpp"
#include "mipsbandit/mips.hpp"

namespace mipsbandit {

enum class Algorithm { kOful, kOfulExact, kLints, kLintsExact };

const char* to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(const std::string& s);
std::optional<OracleBackend> parse_backend(const std::string& s);

inline bool is_accelerated(Algorithm a) { return a == Algorithm::kOful || a == Algorithm::kLints; }
inline bool is_oful(Algorithm a) { return a == Algorithm::kOful || a == Algorithm::kOfulExact; }

struct RunConfig {
  Algorithm algo = Algorithm::kOful;
  Index num_arms = 1000;
  Index dim = 8;
  std::int64_t horizon = 1000;
  double eta = 0.1;
  double delta = 0.05;
  OracleBackend oracle = OracleBackend::kBruteForce;
  InstanceKind instance = InstanceKind::kSphereUniform;
  std::uint64_t seed = 1;
  int reps = 1;
  std::string out;  // output directory, empty for none
  double noise_std = 0.1;
  double gap = 0.3;
  double oracle_fail = 0.5;
  std::size_t max_table_entries = kDefaultMaxTableEntries;
  bool deterministic = false;  // zero the timing column
  int jobs = 1;
  std::string instance_file;  // load arms and theta* instead of generating

  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;
};

struct StepRecord {
  std::int64_t t = 0;
  ArmId arm = 0;
  double regret = 0.0;
  double cum_regret = 0.0;
  std::int64_t probes = 0;
  std::int64_t stage_or_level = 0;
  double select_micros = 0.0;
  bool fallback = false;
};

struct RunSummary {
  int rep = 0;
  std::uint64_t seed = 0;
  Index num_arms = 0;
  Index dim = 0;
  double final_regret = 0.0;
  double bound = 0.0;
  double mean_probes = 0.0;
  double mean_probes_over_k = 0.0;
  int rebuilds = 0;
  std::int64_t final_stage = 0;
  std::int64_t max_stage = 0;
  std::int64_t fallbacks = 0;
  std::int64_t concentration_failures = 0;
  std::int64_t loss_checks = 0;       // steps where the approximation loss was measured
  std::int64_t loss_violations = 0;   // of those, steps above the loss bound
  double max_loss = 0.0;
  double potential = 0.0;             // sum_t ||x_t||^2_{V_t^-1}
  double potential_bound = 0.0;
  std::int64_t soundness_checks = 0;
  double select_micros_median = 0.0;
  double select_micros_p99 = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct RunResult {
  RunSummary summary;
  std::vector<StepRecord> steps;
  nlohmann::json index_stats;
};

struct BoundReport {
  double bound = 0.0;
  double regret = 0.0;
  double ratio = 0.0;
  bool within = true;
};

/// Environment for repetition `rep` (seed + rep), generated or loaded.
Environment<double> make_environment(const RunConfig& cfg, int rep);

/// One repetition. Throws InvariantViolation on a broken invariant and
/// std::length_error when an LSH pool exceeds its entry budget.
RunResult run_single(const RunConfig& cfg, int rep);

/// All repetitions, in rep order (run on cfg.jobs threads).
std::vector<RunResult> run_experiment(const RunConfig& cfg);

/// Closed-form regret bound for the run's parameters versus its regret.
BoundReport compare_bound(const RunResult& result, const RunConfig& cfg);

/// Regret bound for `cfg`; exact variants get eta = 0.
double regret_bound(const RunConfig& cfg);

void write_steps_csv(std::ostream& os, const std::vector<StepRecord>& steps, bool deterministic);
void write_summary_csv(std::ostream& os, const RunConfig& cfg, const std::vector<RunResult>& results);

/// Writes steps_rep<r>.csv, summary.csv and index_stats.json under cfg.out.
void write_outputs(const RunConfig& cfg, const std::vector<RunResult>& results);

// Point sets as CSV (one row per point) and instances as a JSON header next to it.
void write_points_csv(std::ostream& os, const PointSet<double>& ps);
PointSet<double> read_points_csv(std::istream& is);
void save_instance(const std::string& header_path, const std::string& points_path,
                   const Environment<double>& env, std::uint64_t seed);
Environment<double> load_instance(const std::string& header_path, std::uint64_t noise_seed);

}  // namespace mipsbandit
