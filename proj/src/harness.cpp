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

#include "mipsbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mipsbandit/lints.hpp"
#include "mipsbandit/oful.hpp"
#include "mipsbandit/ridge.hpp"

namespace mipsbandit {

namespace {

// Relative slack on checks that hold exactly in real arithmetic.
constexpr double kCheckSlack = 1e-8;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, i == 0 ? 0 : i - 1)];
}

nlohmann::json ann_json(const MipsSpec& spec, const AdaptiveMipsIndex<double>& idx) {
  nlohmann::json j;
  j["c"] = spec.c;
  j["r"] = spec.r;
  j["eps"] = spec.eps;
  j["q_bar"] = spec.q_bar;
  j["delta"] = spec.delta;
  j["vacuous"] = spec.vacuous();
  j["kappa"] = idx.kappa();
  j["lattice_step"] = idx.lattice_step();
  if (idx.ann()) {
    j["c_prime"] = idx.ann()->c_prime;
    j["r_prime"] = idx.ann()->r_prime;
    j["rho_q"] = idx.ann()->rho_q;
    j["tables_per_oracle"] = idx.tables_per_oracle();
  }
  return j;
}

nlohmann::json pool_json(const MipsCorpus<double>& corpus) {
  nlohmann::json j;
  j["points"] = corpus.points().size();
  j["dim"] = corpus.points().dim();
  if (auto pool = corpus.pool()) {
    j["hashes_per_table"] = pool->hashes_per_table();
    j["tables_materialized"] = pool->materialized();
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [size, count] : pool->occupancy_histogram()) hist[std::to_string(size)] = count;
    j["bucket_occupancy"] = hist;
  }
  return j;
}

struct Choice {
  Index arm = 0;
  std::int64_t probes = 0;
  std::int64_t stage_or_level = 0;
  bool fallback = false;
};

// Shared bandit loop. `select` picks an arm (timed), `audit` checks the
// choice (untimed), `observe` feeds the reward back, `ridge` exposes the
// learner's design state for the potential check.
template <typename Select, typename Audit, typename Observe>
void bandit_loop(const RunConfig& cfg, Environment<double>& env, const RidgeState<double>& ridge,
                 Select&& select, Audit&& audit, Observe&& observe, RunResult& out) {
  RunSummary& s = out.summary;
  out.steps.reserve(static_cast<std::size_t>(cfg.horizon));
  std::vector<double> micros;
  micros.reserve(static_cast<std::size_t>(cfg.horizon));
  double cum = 0.0;
  double potential = 0.0;
  double probes = 0.0;
  const Index d = env.arms().dim();
  for (std::int64_t t = 1; t <= cfg.horizon; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const Choice c = select();
    const auto t1 = std::chrono::steady_clock::now();
    const double us = std::chrono::duration<double, std::micro>(t1 - t0).count();
    audit();

    const auto x = env.arms().point(c.arm);
    const double w = mahalanobis_inv(ridge, x);
    potential += w * w;
    const double pb = elliptical_potential_bound(d, t);
    if (potential > pb + kCheckSlack * std::max(1.0, pb)) {
      std::ostringstream os;
      os << "elliptical potential " << potential << " > " << pb << " at t=" << t;
      throw InvariantViolation(os.str());
    }

    const double reward = env.pull(c.arm);
    observe(c.arm, reward);
    const double regret = env.regret(c.arm);
    if (regret < -kCheckSlack) throw InvariantViolation("negative instantaneous regret");
    cum += regret;
    probes += static_cast<double>(c.probes);
    micros.push_back(us);

    StepRecord r;
    r.t = t;
    r.arm = env.arms().id(c.arm);
    r.regret = regret;
    r.cum_regret = cum;
    r.probes = c.probes;
    r.stage_or_level = c.stage_or_level;
    r.select_micros = cfg.deterministic ? 0.0 : us;
    r.fallback = c.fallback;
    out.steps.push_back(r);
    if (c.fallback) ++s.fallbacks;
  }
  s.final_regret = cum;
  s.potential = potential;
  s.potential_bound = elliptical_potential_bound(d, cfg.horizon);
  s.mean_probes = probes / static_cast<double>(cfg.horizon);
  s.mean_probes_over_k = s.mean_probes / static_cast<double>(env.arms().size());
  if (!cfg.deterministic) {
    s.select_micros_median = quantile(micros, 0.5);
    s.select_micros_p99 = quantile(micros, 0.99);
  }
}

AdaptiveOptions mips_options(const RunConfig& cfg, std::uint64_t run_seed) {
  AdaptiveOptions o;
  o.backend = cfg.oracle;
  o.oracle_fail = cfg.oracle_fail;
  o.seed = derive_seed(run_seed, 4);
  o.max_table_entries = cfg.max_table_entries;
  return o;
}

void run_oful(const RunConfig& cfg, Environment<double>& env, std::uint64_t seed, RunResult& out) {
  OfulOptions o;
  o.horizon = cfg.horizon;
  o.delta = cfg.delta;
  o.eta = cfg.eta;
  o.seed = derive_seed(seed, 3);
  o.mips = mips_options(cfg, seed);
  RunSummary& s = out.summary;

  if (cfg.algo == Algorithm::kOfulExact) {
    ExactOful<double> learner(env.shared_arms(), o);
    s.beta = learner.beta();
    bandit_loop(
        cfg, env, learner.ridge(),
        [&] { return Choice{learner.select(), env.arms().size(), 0, false}; }, [] {},
        [&](Index a, double r) { learner.observe(a, r); }, out);
    out.index_stats = {{"algo", "oful-exact"}, {"beta", learner.beta()}};
    return;
  }

  AcceleratedOful<double> learner(env.shared_arms(), o);
  s.beta = learner.beta();
  s.max_stage = learner.max_stage();
  const double eta = cfg.eta;
  const MipsSpec spec = learner.spec();
  nlohmann::json stages = nlohmann::json::array();
  auto snapshot = [&] {
    nlohmann::json j;
    j["stage"] = learner.stage();
    j["active_arms"] = learner.active().size();
    if (const auto* idx = learner.index()) {
      j["index"] = ann_json(spec, *idx);
      j["pool"] = pool_json(idx->corpus());
    }
    stages.push_back(j);
  };
  snapshot();

  int before = 0;
  OfulSelection<double> sel;
  bandit_loop(
      cfg, env, learner.ridge(),
      [&] {
        before = learner.stage();
        sel = learner.select();
        return Choice{sel.arm, sel.stats.probes, sel.stage, false};
      },
      [&] {
        if (learner.stage() != before) snapshot();
        if (learner.stage() > learner.max_stage()) throw InvariantViolation("OFUL stage above ceiling");
        if (sel.certificate) {
          ++s.soundness_checks;
          // Recompute the certified quantity from scratch.
          const double w = mahalanobis_inv(learner.ridge(), env.arms().point(sel.arm));
          const double scaled = learner.beta() * learner.beta() * std::ldexp(1.0, 2 * sel.stage) * w * w;
          if (scaled < spec.sanity_threshold() - kCheckSlack * spec.q_bar) {
            std::ostringstream os;
            os << "OFUL answer below c r - eps: " << scaled << " < " << spec.sanity_threshold();
            throw InvariantViolation(os.str());
          }
          const double floor = std::ldexp(1.0, -sel.stage - 1) - 2.0 * eta;
          if (learner.beta() * w < floor - kCheckSlack) {
            throw InvariantViolation("OFUL selected width below 2^-s-1 - 2 eta");
          }
        }
      },
      [&](Index a, double r) { learner.observe(a, r); }, out);
  s.rebuilds = learner.rebuilds();
  s.final_stage = learner.stage();
  if (s.rebuilds > learner.max_stage()) throw InvariantViolation("OFUL rebuilds above stage ceiling");
  out.index_stats = {{"algo", "oful"},
                     {"backend", to_string(cfg.oracle)},
                     {"beta", learner.beta()},
                     {"max_stage", learner.max_stage()},
                     {"rebuilds", learner.rebuilds()},
                     {"stages", stages}};
}

void run_lints(const RunConfig& cfg, Environment<double>& env, std::uint64_t seed, RunResult& out) {
  LintsOptions o;
  o.horizon = cfg.horizon;
  o.delta = cfg.delta;
  o.eta = cfg.eta;
  o.seed = derive_seed(seed, 3);
  o.accelerated = cfg.algo == Algorithm::kLints;
  o.mips = mips_options(cfg, seed);
  RunSummary& s = out.summary;

  LinTs<double> learner(env.shared_arms(), o);
  s.beta = learner.beta();
  s.gamma = learner.gamma();
  s.max_stage = learner.num_levels();
  const double loss_bound = lints_loss_bound(learner.beta(), learner.gamma(), cfg.eta);
  const bool exact_backend = cfg.oracle == OracleBackend::kBruteForce;

  LintsSelection<double> sel;
  bandit_loop(
      cfg, env, learner.ridge(),
      [&] {
        sel = learner.select();
        return Choice{sel.arm, sel.stats.probes, sel.level, sel.fallback};
      },
      [&] {
        if (sel.concentration_failure) ++s.concentration_failures;
        if (o.accelerated && sel.level > 0) {
          ++s.soundness_checks;
          const MipsSpec spec = learner.level_spec(sel.level);
          const double v = env.arms().point(sel.arm).dot(sel.theta_tilde);
          if (v < spec.sanity_threshold() - kCheckSlack * spec.q_bar) {
            std::ostringstream os;
            os << "level " << sel.level << " answer below c r - eps: " << v << " < "
               << spec.sanity_threshold();
            throw InvariantViolation(os.str());
          }
          // Approximation loss against the exact maximizer (audit only, not counted as probes).
          const double j = brute_force_mips(env.arms(), sel.theta_tilde).value;
          const double loss = j - v;
          ++s.loss_checks;
          s.max_loss = std::max(s.max_loss, loss);
          if (loss > loss_bound + kCheckSlack * std::max(1.0, loss_bound)) {
            ++s.loss_violations;
            if (exact_backend) {
              std::ostringstream os;
              os << "approximation loss " << loss << " > " << loss_bound << " at level " << sel.level;
              throw InvariantViolation(os.str());
            }
          }
        }
      },
      [&](Index a, double r) { learner.observe(a, r); }, out);

  nlohmann::json stats = {{"algo", to_string(cfg.algo)},
                          {"beta", learner.beta()},
                          {"gamma", learner.gamma()},
                          {"q_bar", learner.q_bar()},
                          {"delta_prime", learner.delta_prime()},
                          {"concentration_failures", s.concentration_failures},
                          {"fallbacks", s.fallbacks}};
  if (o.accelerated) {
    stats["backend"] = to_string(cfg.oracle);
    stats["levels"] = learner.num_levels();
    nlohmann::json levels = nlohmann::json::array();
    const std::int64_t shown = std::min<std::int64_t>(learner.num_levels(), 8);
    for (std::int64_t m = 1; m <= shown; ++m) {
      nlohmann::json j = ann_json(learner.level_spec(m), learner.level(m));
      j["level"] = m;
      levels.push_back(j);
    }
    stats["first_levels"] = levels;
    stats["pool"] = pool_json(*learner.corpus());
  }
  out.index_stats = stats;
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kOful: return "oful";
    case Algorithm::kOfulExact: return "oful-exact";
    case Algorithm::kLints: return "lints";
    case Algorithm::kLintsExact: return "lints-exact";
  }
  return "?";
}

std::optional<Algorithm> parse_algorithm(const std::string& s) {
  if (s == "oful") return Algorithm::kOful;
  if (s == "oful-exact") return Algorithm::kOfulExact;
  if (s == "lints") return Algorithm::kLints;
  if (s == "lints-exact") return Algorithm::kLintsExact;
  return std::nullopt;
}

std::optional<OracleBackend> parse_backend(const std::string& s) {
  if (s == "lsh") return OracleBackend::kLsh;
  if (s == "brute") return OracleBackend::kBruteForce;
  return std::nullopt;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (horizon < 1) fail("T must be >= 1");
  if (instance_file.empty()) {
    if (num_arms < 2) fail("K must be >= 2");
    if (dim < 1) fail("d must be >= 1");
    if (instance == InstanceKind::kPlantedGap && dim < 2) fail("planted-gap needs d >= 2");
    if (instance == InstanceKind::kPlantedGap && !(gap > 0.0 && gap <= 1.0)) fail("gap must lie in (0, 1]");
  }
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
  if (is_accelerated(algo) && !(eta > 0.0 && eta < 1.0)) fail("eta must lie in (0, 1)");
  if (!(noise_std >= 0.0 && noise_std <= 1.0)) fail("noise std must lie in [0, 1]");
  if (!(oracle_fail > 0.0 && oracle_fail < 1.0)) fail("oracle failure probability must lie in (0, 1)");
  if (reps < 1) fail("reps must be >= 1");
  if (jobs < 1) fail("jobs must be >= 1");
}

Environment<double> make_environment(const RunConfig& cfg, int rep) {
  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
  if (!cfg.instance_file.empty()) return load_instance(cfg.instance_file, derive_seed(seed, 2));
  InstanceOptions io;
  io.kind = cfg.instance;
  io.num_arms = cfg.num_arms;
  io.dim = cfg.dim;
  io.seed = seed;
  io.noise_std = cfg.noise_std;
  io.gap = cfg.gap;
  return make_instance<double>(io);
}

RunResult run_single(const RunConfig& cfg, int rep) {
  cfg.validate();
  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
  Environment<double> env = make_environment(cfg, rep);
  RunConfig eff = cfg;
  eff.num_arms = env.arms().size();
  eff.dim = env.arms().dim();
  RunResult out;
  out.summary.rep = rep;
  out.summary.seed = seed;
  out.summary.num_arms = eff.num_arms;
  out.summary.dim = eff.dim;
  if (is_oful(eff.algo)) {
    run_oful(eff, env, seed, out);
  } else {
    run_lints(eff, env, seed, out);
  }
  out.summary.bound = regret_bound(eff);
  return out;
}

std::vector<RunResult> run_experiment(const RunConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> results(static_cast<std::size_t>(cfg.reps));
  std::vector<std::exception_ptr> errors(results.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < cfg.reps; r = next++) {
      try {
        results[static_cast<std::size_t>(r)] = run_single(cfg, r);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  const int jobs = std::min(cfg.jobs, cfg.reps);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

double regret_bound(const RunConfig& cfg) {
  const double eta = is_accelerated(cfg.algo) ? cfg.eta : 0.0;
  if (is_oful(cfg.algo)) {
    const double beta = confidence_radius(cfg.dim, cfg.horizon, cfg.delta / 2.0);
    return oful_regret_bound(cfg.dim, cfg.horizon, beta, eta);
  }
  const double dp = cfg.delta / (4.0 * static_cast<double>(cfg.horizon));
  const double beta = confidence_radius(cfg.dim, cfg.horizon, dp);
  const double gamma = lints_gamma(beta, cfg.dim, dp);
  return lints_regret_bound(cfg.dim, cfg.horizon, cfg.delta, beta, gamma, eta);
}

BoundReport compare_bound(const RunResult& result, const RunConfig& cfg) {
  RunConfig eff = cfg;
  if (result.summary.dim > 0) eff.dim = result.summary.dim;
  BoundReport r;
  r.bound = regret_bound(eff);
  r.regret = result.summary.final_regret;
  r.ratio = r.bound > 0.0 ? r.regret / r.bound : std::numeric_limits<double>::infinity();
  r.within = r.regret <= r.bound;
  return r;
}

void write_steps_csv(std::ostream& os, const std::vector<StepRecord>& steps, bool deterministic) {
  os << "t,arm,regret,cum_regret,probes,stage_or_level,select_micros,fallback\n";
  for (const StepRecord& s : steps) {
    os << s.t << ',' << s.arm << ',' << fmt(s.regret) << ',' << fmt(s.cum_regret) << ',' << s.probes
       << ',' << s.stage_or_level << ',' << (deterministic ? std::string("0") : fmt(s.select_micros))
       << ',' << (s.fallback ? 1 : 0) << '\n';
  }
}

void write_summary_csv(std::ostream& os, const RunConfig& cfg, const std::vector<RunResult>& results) {
  os << "rep,seed,algo,oracle,instance,K,d,T,eta,delta,final_regret,bound,regret_over_bound,"
        "mean_probes,mean_probes_over_K,rebuilds,final_stage,max_stage_or_levels,fallbacks,"
        "concentration_failures,loss_checks,loss_violations,max_loss,potential,potential_bound,"
        "select_micros_median,select_micros_p99\n";
  for (const RunResult& r : results) {
    const RunSummary& s = r.summary;
    os << s.rep << ',' << s.seed << ',' << to_string(cfg.algo) << ',' << to_string(cfg.oracle) << ','
       << (cfg.instance_file.empty() ? to_string(cfg.instance) : "file") << ',' << s.num_arms << ','
       << s.dim << ',' << cfg.horizon << ',' << fmt(cfg.eta) << ',' << fmt(cfg.delta) << ','
       << fmt(s.final_regret) << ',' << fmt(s.bound) << ','
       << fmt(s.bound > 0 ? s.final_regret / s.bound : 0.0) << ',' << fmt(s.mean_probes) << ','
       << fmt(s.mean_probes_over_k) << ',' << s.rebuilds << ',' << s.final_stage << ',' << s.max_stage
       << ',' << s.fallbacks << ',' << s.concentration_failures << ',' << s.loss_checks << ','
       << s.loss_violations << ',' << fmt(s.max_loss) << ',' << fmt(s.potential) << ','
       << fmt(s.potential_bound) << ',' << fmt(s.select_micros_median) << ','
       << fmt(s.select_micros_p99) << '\n';
  }
}

void write_outputs(const RunConfig& cfg, const std::vector<RunResult>& results) {
  namespace fs = std::filesystem;
  if (cfg.out.empty()) return;
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  for (const RunResult& r : results) {
    std::ofstream f(dir / ("steps_rep" + std::to_string(r.summary.rep) + ".csv"));
    write_steps_csv(f, r.steps, cfg.deterministic);
    if (!f) throw std::runtime_error("failed writing per-step CSV under " + cfg.out);
  }
  {
    std::ofstream f(dir / "summary.csv");
    write_summary_csv(f, cfg, results);
    if (!f) throw std::runtime_error("failed writing summary CSV under " + cfg.out);
  }
  nlohmann::json stats = nlohmann::json::array();
  for (const RunResult& r : results) {
    nlohmann::json j = r.index_stats;
    j["rep"] = r.summary.rep;
    j["mean_probes"] = r.summary.mean_probes;
    j["mean_probes_over_K"] = r.summary.mean_probes_over_k;
    stats.push_back(j);
  }
  std::ofstream f(dir / "index_stats.json");
  f << stats.dump(2) << '\n';
  if (!f) throw std::runtime_error("failed writing index statistics under " + cfg.out);
}

void write_points_csv(std::ostream& os, const PointSet<double>& ps) {
  char buf[40];
  for (Index i = 0; i < ps.size(); ++i) {
    for (Index j = 0; j < ps.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ps.points()(j, i));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

PointSet<double> read_points_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::invalid_argument("points CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument("points CSV line " + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("points CSV: no points");
  Matrix<double> m(static_cast<Index>(rows.front().size()), static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(j), static_cast<Index>(i)) = rows[i][j];
  }
  return PointSet<double>(std::move(m));
}

void save_instance(const std::string& header_path, const std::string& points_path,
                   const Environment<double>& env, std::uint64_t seed) {
  {
    std::ofstream f(points_path);
    write_points_csv(f, env.arms());
    if (!f) throw std::runtime_error("cannot write " + points_path);
  }
  const auto& th = env.theta_star();
  nlohmann::json h;
  h["theta_star"] = std::vector<double>(th.data(), th.data() + th.size());
  h["noise_std"] = env.noise_std();
  h["seed"] = seed;
  h["points"] = std::filesystem::path(points_path).filename().string();
  std::ofstream f(header_path);
  f << h.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + header_path);
}

Environment<double> load_instance(const std::string& header_path, std::uint64_t noise_seed) {
  std::ifstream hf(header_path);
  if (!hf) throw std::invalid_argument("cannot open instance header " + header_path);
  nlohmann::json h;
  try {
    hf >> h;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("instance header " + header_path + ": " + e.what());
  }
  const auto theta = h.at("theta_star").get<std::vector<double>>();
  const double sigma = h.value("noise_std", 0.1);
  std::filesystem::path pts(h.at("points").get<std::string>());
  if (pts.is_relative()) pts = std::filesystem::path(header_path).parent_path() / pts;
  std::ifstream pf(pts);
  if (!pf) throw std::invalid_argument("cannot open points file " + pts.string());
  auto arms = std::make_shared<const PointSet<double>>(read_points_csv(pf));
  Vector<double> th = Eigen::Map<const Vector<double>>(theta.data(), static_cast<Index>(theta.size()));
  return Environment<double>(std::move(arms), std::move(th), sigma, noise_seed);
}

}  // namespace mipsbandit
