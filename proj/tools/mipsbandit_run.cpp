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

// Runs bandit experiments and writes per-step, summary and index reports.
//
//   mipsbandit_run --algo lints --oracle brute --K 1000 --d 8 --T 1000 \
//       --eta 0.03 --seed 1 --reps 10 --out runs/lints
//
// Exit status: 0 ok, 1 bad arguments or config, 2 invariant violated,
// 3 LSH table budget exceeded, 4 other runtime error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"

#include "mipsbandit/harness.hpp"
#include "mipsbandit/types.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitInvariant = 2;
constexpr int kExitBudget = 3;
constexpr int kExitRuntime = 4;

}  // namespace

int main(int argc, char** argv) {
  using namespace mipsbandit;
  CLI::App app{"Sublinear-time arm selection for linear bandits via approximate MIPS"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");

  RunConfig cfg;
  std::string algo = "oful";
  std::string oracle = "brute";
  std::string instance = "sphere-uniform";
  std::string save_instance_prefix;
  long long k = cfg.num_arms;
  long long d = cfg.dim;
  long long t = cfg.horizon;
  unsigned long long max_entries = cfg.max_table_entries;

  app.add_option("--algo", algo, "oful | oful-exact | lints | lints-exact")
      ->check(CLI::IsMember({"oful", "oful-exact", "lints", "lints-exact"}));
  app.add_option("--K", k, "number of arms")->check(CLI::PositiveNumber);
  app.add_option("--d", d, "feature dimension")->check(CLI::PositiveNumber);
  app.add_option("--T", t, "horizon")->check(CLI::PositiveNumber);
  app.add_option("--eta", cfg.eta, "accuracy parameter in (0, 1)");
  app.add_option("--delta", cfg.delta, "failure probability in (0, 1)");
  app.add_option("--oracle", oracle, "MIPS oracle backend")->check(CLI::IsMember({"lsh", "brute"}));
  app.add_option("--instance", instance, "instance generator")
      ->check(CLI::IsMember({"sphere-uniform", "clustered", "planted-gap"}));
  app.add_option("--instance-file", cfg.instance_file, "JSON instance header (overrides --instance/--K/--d)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", cfg.seed, "master seed; repetition r uses seed + r");
  app.add_option("--reps", cfg.reps, "repetitions")->check(CLI::PositiveNumber);
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--sigma", cfg.noise_std, "reward noise std in [0, 1]");
  app.add_option("--gap", cfg.gap, "planted-gap margin");
  app.add_option("--oracle-fail", cfg.oracle_fail, "failure probability of one oracle copy");
  app.add_option("--max-table-entries", max_entries, "LSH memory budget in (table, point) entries");
  app.add_option("--jobs", cfg.jobs, "repetitions run concurrently")->check(CLI::PositiveNumber);
  app.add_option("--save-instance", save_instance_prefix,
                 "write <prefix>.json and <prefix>.csv for repetition 0 and continue");
  app.add_flag("--deterministic", cfg.deterministic, "zero timing columns for byte-stable output");

  CLI11_PARSE(app, argc, argv);

  cfg.algo = *parse_algorithm(algo);
  cfg.oracle = *parse_backend(oracle);
  cfg.instance = *parse_instance_kind(instance);
  cfg.num_arms = static_cast<Index>(k);
  cfg.dim = static_cast<Index>(d);
  cfg.horizon = t;
  cfg.max_table_entries = static_cast<std::size_t>(max_entries);

  try {
    cfg.validate();
    if (!save_instance_prefix.empty()) {
      save_instance(save_instance_prefix + ".json", save_instance_prefix + ".csv",
                    make_environment(cfg, 0), cfg.seed);
    }
    const auto results = run_experiment(cfg);
    write_outputs(cfg, results);

    int within = 0;
    for (const auto& r : results) within += compare_bound(r, cfg).within ? 1 : 0;
    double regret = 0.0;
    double probes = 0.0;
    for (const auto& r : results) {
      regret += r.summary.final_regret;
      probes += r.summary.mean_probes_over_k;
    }
    const double n = static_cast<double>(results.size());
    std::printf("%s/%s: reps=%d mean_regret=%.4f bound=%.4f within_bound=%d/%d mean_probes_over_K=%.4f\n",
                to_string(cfg.algo), to_string(cfg.oracle), cfg.reps, regret / n,
                results.front().summary.bound, within, cfg.reps, probes / n);
  } catch (const InvariantViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::length_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
