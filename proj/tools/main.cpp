#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mirror_em/baseline.hpp"
#include "mirror_em/errors.hpp"
#include "mirror_em/laplace.hpp"
#include "mirror_em/models.hpp"
#include "mirror_em/solver.hpp"
#include "mirror_em/synthetic.hpp"
#include "mirror_em/tolerances.hpp"
#include "mirror_em/trace.hpp"
#include "mirror_em/variants.hpp"
#include "mirror_em/verify.hpp"
#include "nlohmann/json.hpp"

namespace {

using namespace mirror_em;
using nlohmann::json;

// Exit codes: 0 success, 1 configuration, 2 numerical failure, 3 a checked
// bound failed. Numerical failures outrank bound failures when seeds mix.
constexpr int kOk = 0;
constexpr int kConfigExit = 1;
constexpr int kNumericalExit = 2;
constexpr int kBoundExit = 3;

// Everything a run needs, serializable in both directions so that any trace
// header can be replayed with --config.
struct ExperimentConfig {
  std::string mode = "fit";
  std::string model = "gmm";  // gmm | gmm_fixed_var | bmm | gaussian | laplace
  int k = 2;
  double fixed_variance = 1.0;

  std::string data_path;  // empty means synthetic
  std::string synth_kind = "gmm";
  int synth_n = 200;
  int synth_dim = 1;
  double separation = 3.0;
  std::uint64_t data_seed = 1;
  bool standardize = false;

  std::string init = "random";  // random | kmeans
  int iters = 50;
  std::uint64_t seed = 1;
  int seeds = 1;
  std::string out = ".";

  bool record_decrement = false;
  bool record_missing_info = false;
  bool record_params = false;

  // compare
  double grid_min = 1e-6;
  double grid_max = 1.0;
  int grid_points = 13;

  // online
  std::string schedule = "one_over_t";  // one_over_t | constant
  double offset = 1.0;
  double gamma = 0.5;

  // map
  double prior_strength = 1.0;

  // gem
  std::string gem_mode = "multiplicative";  // multiplicative | additive
  double epsilon_c = 1.0;
  int gem_bound_seeds = 50;

  // smoothness
  int pairs = 300;
  double inflate = 0.0;
};

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["mode"] = c.mode;
  j["model"] = c.model;
  j["k"] = c.k;
  j["fixed_variance"] = c.fixed_variance;
  j["data"] = c.data_path;
  j["synth_kind"] = c.synth_kind;
  j["synth_n"] = c.synth_n;
  j["synth_dim"] = c.synth_dim;
  j["separation"] = c.separation;
  j["data_seed"] = c.data_seed;
  j["standardize"] = c.standardize;
  j["init"] = c.init;
  j["iters"] = c.iters;
  j["seed"] = c.seed;
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  j["record_decrement"] = c.record_decrement;
  j["record_missing_info"] = c.record_missing_info;
  j["record_params"] = c.record_params;
  j["grid_min"] = c.grid_min;
  j["grid_max"] = c.grid_max;
  j["grid_points"] = c.grid_points;
  j["schedule"] = c.schedule;
  j["offset"] = c.offset;
  j["gamma"] = c.gamma;
  j["prior_strength"] = c.prior_strength;
  j["gem_mode"] = c.gem_mode;
  j["epsilon_c"] = c.epsilon_c;
  j["gem_bound_seeds"] = c.gem_bound_seeds;
  j["pairs"] = c.pairs;
  j["inflate"] = c.inflate;
  return j;
}

void config_from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  c.mode = j.value("mode", c.mode);
  c.model = j.value("model", c.model);
  c.k = j.value("k", c.k);
  c.fixed_variance = j.value("fixed_variance", c.fixed_variance);
  c.data_path = j.value("data", c.data_path);
  c.synth_kind = j.value("synth_kind", c.synth_kind);
  c.synth_n = j.value("synth_n", c.synth_n);
  c.synth_dim = j.value("synth_dim", c.synth_dim);
  c.separation = j.value("separation", c.separation);
  c.data_seed = j.value("data_seed", c.data_seed);
  c.standardize = j.value("standardize", c.standardize);
  c.init = j.value("init", c.init);
  c.iters = j.value("iters", c.iters);
  c.seed = j.value("seed", c.seed);
  c.seeds = j.value("seeds", c.seeds);
  c.out = j.value("out", c.out);
  c.record_decrement = j.value("record_decrement", c.record_decrement);
  c.record_missing_info = j.value("record_missing_info", c.record_missing_info);
  c.record_params = j.value("record_params", c.record_params);
  c.grid_min = j.value("grid_min", c.grid_min);
  c.grid_max = j.value("grid_max", c.grid_max);
  c.grid_points = j.value("grid_points", c.grid_points);
  c.schedule = j.value("schedule", c.schedule);
  c.offset = j.value("offset", c.offset);
  c.gamma = j.value("gamma", c.gamma);
  c.prior_strength = j.value("prior_strength", c.prior_strength);
  c.gem_mode = j.value("gem_mode", c.gem_mode);
  c.epsilon_c = j.value("epsilon_c", c.epsilon_c);
  c.gem_bound_seeds = j.value("gem_bound_seeds", c.gem_bound_seeds);
  c.pairs = j.value("pairs", c.pairs);
  c.inflate = j.value("inflate", c.inflate);
}

std::string dataset_label(const ExperimentConfig& c) {
  if (!c.data_path.empty()) return c.data_path;
  std::ostringstream os;
  os << "synthetic:" << c.synth_kind << " k=" << c.k << " dim=" << c.synth_dim
     << " n=" << c.synth_n << " sep=" << c.separation << " seed=" << c.data_seed;
  return os.str();
}

Dataset build_dataset(const ExperimentConfig& c) {
  Dataset data = [&] {
    if (!c.data_path.empty()) return load_csv(c.data_path);
    SyntheticSpec spec;
    spec.kind = c.synth_kind;
    spec.k = c.k;
    spec.dim = c.synth_dim;
    spec.n = c.synth_n;
    spec.separation = c.separation;
    spec.seed = c.data_seed;
    return generate_synthetic(spec).data;
  }();
  if (c.standardize) data = standardize(data);
  return data;
}

ModelPtr build_model(const ExperimentConfig& c, const Dataset& data) {
  if (c.model == "gmm") {
    if (c.k < 2) throw ConfigError("gmm needs k >= 2; use --model gaussian for k = 1");
    return make_gaussian_mixture(data, c.k);
  }
  if (c.model == "gmm_fixed_var")
    return make_fixed_variance_gaussian_mixture(data, c.k, c.fixed_variance);
  if (c.model == "bmm") return make_bernoulli_mixture(data, c.k);
  if (c.model == "gaussian") return make_single_gaussian(data);
  if (c.model == "laplace") {
    throw ConfigError("the laplace model runs under the estep subcommand");
  }
  throw ConfigError("unknown model: " + c.model +
                    " (expected gmm, gmm_fixed_var, bmm, or gaussian)");
}

InitMethod parse_init(const std::string& name) {
  if (name == "random") return InitMethod::kRandomRows;
  if (name == "kmeans") return InitMethod::kKmeans;
  throw ConfigError("unknown init: " + name + " (expected random or kmeans)");
}

OnlineSchedule parse_schedule(const ExperimentConfig& c) {
  if (c.schedule == "one_over_t") return OnlineSchedule::one_over_t(c.offset);
  if (c.schedule == "constant") return OnlineSchedule::constant(c.gamma);
  throw ConfigError("unknown schedule: " + c.schedule +
                    " (expected one_over_t or constant)");
}

std::vector<double> step_grid(const ExperimentConfig& c) {
  if (c.grid_points < 1) throw ConfigError("grid needs at least one point");
  if (!(c.grid_min > 0.0) || !(c.grid_max >= c.grid_min)) {
    throw ConfigError("grid range must satisfy 0 < grid_min <= grid_max");
  }
  if (c.grid_points == 1) return {c.grid_max};
  std::vector<double> grid(static_cast<std::size_t>(c.grid_points));
  const double hi = std::log10(c.grid_max);
  const double lo = std::log10(c.grid_min);
  for (int i = 0; i < c.grid_points; ++i) {
    grid[static_cast<std::size_t>(i)] =
        std::pow(10.0, hi - (hi - lo) * i / (c.grid_points - 1));
  }
  return grid;
}

// Stamps the replayable header: the echoed config names this specific run,
// so its seed is the run's seed and the sweep width collapses to one.
void stamp(EmTrace& trace, const ExperimentConfig& c, std::uint64_t seed) {
  ExperimentConfig echo = c;
  echo.seed = seed;
  echo.seeds = 1;
  trace.meta["config"] = config_to_json(echo).dump();
  trace.meta["seed"] = std::to_string(seed);
  trace.meta["dataset"] = dataset_label(c);
}

std::string out_base(const ExperimentConfig& c, const std::string& prefix,
                     std::uint64_t seed) {
  return c.out + "/" + prefix + "_seed" + std::to_string(seed);
}

void write_stamped(EmTrace& trace, const ExperimentConfig& c, const std::string& prefix,
                   std::uint64_t seed) {
  stamp(trace, c, seed);
  const std::string base = out_base(c, prefix, seed);
  write_trace(trace, base + ".jsonl", base + ".csv");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

double min_stationarity(const EmTrace& trace) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : trace.records) {
    if (rec.bregman_stat && std::isfinite(*rec.bregman_stat)) {
      best = std::min(best, *rec.bregman_stat);
    }
  }
  return best;
}

std::string fmt(double value) {
  std::ostringstream os;
  os.precision(6);
  os << value;
  return os.str();
}

int pool_size(int jobs) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MIRROR_EM_THREADS")) {
    try {
      cap = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("MIRROR_EM_THREADS must be an integer");
    }
  }
  return std::max(1, std::min(cap, jobs));
}

int classify(const std::exception& err) {
  if (dynamic_cast<const std::invalid_argument*>(&err)) return kConfigExit;
  if (dynamic_cast<const std::logic_error*>(&err)) return kConfigExit;
  return kNumericalExit;
}

// Runs one task per seed on a worker pool capped by MIRROR_EM_THREADS.
// Summaries print in seed order afterwards, so the pool width never changes
// what the user sees.
int sweep_seeds(const ExperimentConfig& c,
                const std::function<int(std::uint64_t, std::string&)>& task) {
  if (c.seeds < 1) throw ConfigError("--seeds must be at least one");
  const int jobs = c.seeds;
  std::vector<std::string> summaries(static_cast<std::size_t>(jobs));
  std::vector<int> codes(static_cast<std::size_t>(jobs), kOk);
  std::atomic<int> next{0};

  const auto worker = [&] {
    for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
      auto& summary = summaries[static_cast<std::size_t>(i)];
      try {
        codes[static_cast<std::size_t>(i)] = task(seed, summary);
      } catch (const std::exception& err) {
        codes[static_cast<std::size_t>(i)] = classify(err);
        summary = "[" + c.mode + " seed=" + std::to_string(seed) + "] error: " + err.what();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 1; w < pool_size(jobs); ++w) pool.emplace_back(worker);
  worker();
  for (auto& thread : pool) thread.join();

  for (const auto& line : summaries) std::cerr << line << '\n';
  int exit = kOk;
  for (int code : codes) {
    if (code == kNumericalExit) return kNumericalExit;
    if (code != kOk) exit = code;
  }
  return exit;
}

// ----- subcommand bodies -----

int cmd_fit(const ExperimentConfig& c) {
  const Dataset data = build_dataset(c);
  const ModelPtr model = build_model(c, data);
  return sweep_seeds(c, [&](std::uint64_t seed, std::string& summary) {
    Rng rng(seed);
    const NaturalParams init = initialize(*model, parse_init(c.init), rng);
    EmOptions options;
    options.record_decrement = c.record_decrement;
    options.record_missing_info = c.record_missing_info;
    options.record_params = c.record_params;
    EmTrace trace = run_em(*model, init, c.iters, options);
    write_stamped(trace, c, "em", seed);

    const RateBoundReport bounds = check_rate_bounds(trace);
    write_text(out_base(c, "em", seed) + "_report.json", report_to_json(bounds));

    std::ostringstream os;
    os << "[fit seed=" << seed << "] steps=" << trace.steps()
       << " final_nll=" << fmt(trace.final_nll())
       << " min_stat=" << fmt(min_stationarity(trace))
       << " rate_bounds=" << (bounds.passed ? "pass" : "FAIL " + bounds.detail);
    if (trace.failure) os << " failure=\"" << *trace.failure << "\"";
    summary = os.str();
    if (trace.failure) return kNumericalExit;
    return bounds.passed ? kOk : kBoundExit;
  });
}

int cmd_compare(const ExperimentConfig& c) {
  const Dataset data = build_dataset(c);
  const ModelPtr model = build_model(c, data);
  const std::vector<double> grid = step_grid(c);
  return sweep_seeds(c, [&](std::uint64_t seed, std::string& summary) {
    Rng rng(seed);
    const NaturalParams init = initialize(*model, parse_init(c.init), rng);

    EmTrace em = run_em(*model, init, c.iters);
    write_stamped(em, c, "em", seed);
    if (em.failure) {
      summary = "[compare seed=" + std::to_string(seed) + "] em failure: " + *em.failure;
      return kNumericalExit;
    }

    GridSearchResult gd = grid_search_gd(*model, init, c.iters, grid);
    write_stamped(gd.best.base, c, "gd", seed);
    const double gd_final = gd.best.base.final_nll();

    // First EM iterate at least as good as the best GD finish.
    int em_steps_to_match = -1;
    for (const auto& rec : em.records) {
      if (rec.nll <= gd_final + 1e-12) {
        em_steps_to_match = rec.t;
        break;
      }
    }

    json report;
    report["em_final_nll"] = em.final_nll();
    report["gd_final_nll"] = gd_final;
    report["gd_best_step"] = gd.best_step;
    report["em_steps_to_gd_final"] = em_steps_to_match;
    report["iters"] = c.iters;
    json attempts = json::array();
    for (const auto& [step, nll] : gd.attempts) {
      attempts.push_back({step, std::isfinite(nll) ? json(nll) : json(nullptr)});
    }
    report["gd_attempts"] = attempts;
    write_text(out_base(c, "compare", seed) + "_report.json", report.dump(2) + "\n");

    std::ostringstream os;
    os << "[compare seed=" << seed << "] em_final=" << fmt(em.final_nll())
       << " gd_final=" << fmt(gd_final) << " gd_best_step=" << fmt(gd.best_step)
       << " em_steps_to_gd_final=" << em_steps_to_match;
    summary = os.str();
    return kOk;
  });
}

int cmd_online(const ExperimentConfig& c) {
  const Dataset data = build_dataset(c);
  const ModelPtr model = build_model(c, data);
  const OnlineSchedule schedule = parse_schedule(c);
  return sweep_seeds(c, [&](std::uint64_t seed, std::string& summary) {
    Rng rng(seed);
    const NaturalParams init = initialize(*model, parse_init(c.init), rng);
    OnlineTrace trace = run_online_em(*model, init, c.iters, schedule, seed);
    write_stamped(trace.base, c, "online", seed);

    std::ostringstream os;
    os << "[online seed=" << seed << "] updates=" << trace.sample_indices.size()
       << " final_nll=" << fmt(trace.base.final_nll());
    summary = os.str();
    return kOk;
  });
}

int cmd_map(const ExperimentConfig& c) {
  const Dataset data = build_dataset(c);
  const ModelPtr model = build_model(c, data);
  return sweep_seeds(c, [&](std::uint64_t seed, std::string& summary) {
    Rng rng(seed);
    const NaturalParams init = initialize(*model, parse_init(c.init), rng);
    // The prior sits at the initializer's own expected statistics: strictly
    // interior by construction and replayable from the config.
    Prior prior;
    prior.pseudo_stats = mean_map(init).values();
    prior.strength = c.prior_strength;
    validate_prior(*model, prior);

    EmOptions options;
    options.record_decrement = c.record_decrement;
    options.record_params = c.record_params;
    EmTrace trace = run_map_em(*model, init, c.iters, prior, options);
    write_stamped(trace, c, "map", seed);

    const RateBoundReport bounds = check_rate_bounds(trace);
    write_text(out_base(c, "map", seed) + "_report.json", report_to_json(bounds));

    std::ostringstream os;
    os << "[map seed=" << seed << "] steps=" << trace.steps()
       << " final_objective=" << fmt(trace.final_nll());
    if (trace.final_record().nll_unpenalized) {
      os << " final_nll=" << fmt(*trace.final_record().nll_unpenalized);
    }
    os << " min_stat=" << fmt(min_stationarity(trace))
       << " rate_bounds=" << (bounds.passed ? "pass" : "FAIL " + bounds.detail);
    summary = os.str();
    if (trace.failure) return kNumericalExit;
    return bounds.passed ? kOk : kBoundExit;
  });
}

int cmd_gem(const ExperimentConfig& c) {
  const Dataset data = build_dataset(c);
  const ModelPtr model = build_model(c, data);
  GemPolicy policy;
  if (c.gem_mode == "multiplicative") {
    policy.mode = GemPolicy::Mode::kMultiplicative;
  } else if (c.gem_mode == "additive") {
    policy.mode = GemPolicy::Mode::kAdditive;
    const double scale = c.epsilon_c;
    policy.epsilon = [scale](int t) {
      return scale / (static_cast<double>(t) * static_cast<double>(t));
    };
  } else {
    throw ConfigError("unknown gem mode: " + c.gem_mode);
  }

  const int swept = sweep_seeds(c, [&](std::uint64_t seed, std::string& summary) {
    Rng rng(seed);
    const NaturalParams init = initialize(*model, parse_init(c.init), rng);
    EmTrace trace = run_generalized_em(*model, init, c.iters, policy, seed);
    write_stamped(trace, c, "gem", seed);

    std::ostringstream os;
    os << "[gem seed=" << seed << "] mode=" << c.gem_mode << " steps=" << trace.steps()
       << " final_nll=" << fmt(trace.final_nll())
       << " min_stat=" << fmt(min_stationarity(trace));
    int code = kOk;
    if (policy.mode == GemPolicy::Mode::kAdditive) {
      const GemAdditiveReport bound = check_additive_gem_bound(trace, policy);
      write_text(out_base(c, "gem", seed) + "_report.json", report_to_json(bound));
      os << " additive_bound=" << (bound.passed ? "pass" : "FAIL");
      if (!bound.passed) code = kBoundExit;
    }
    summary = os.str();
    return code;
  });
  if (swept == kNumericalExit) return swept;

  int exit = swept;
  if (policy.mode == GemPolicy::Mode::kMultiplicative) {
    // The expected-descent guarantee is a statement about the seed average,
    // so it gets one sweep of its own rather than a per-run verdict.
    Rng rng(c.seed);
    const NaturalParams init = initialize(*model, parse_init(c.init), rng);
    const GemSweepReport bound = check_multiplicative_gem_bound(
        *model, init, c.iters, c.gem_bound_seeds, c.seed);
    write_text(c.out + "/gem_sweep_report.json", report_to_json(bound));
    std::cerr << "[gem sweep] seeds=" << bound.seeds
              << " mean_min_stat=" << fmt(bound.mean_min_stationarity)
              << " mean_bound=" << fmt(bound.mean_bound)
              << " bound=" << (bound.passed ? "pass" : "FAIL") << '\n';
    if (!bound.passed) exit = kBoundExit;
  }
  return exit;
}

int cmd_estep(const ExperimentConfig& c) {
  if (c.model != "laplace") {
    throw ConfigError("estep analyzes the laplace model; pass --model laplace");
  }
  const Dataset data = build_dataset(c);
  auto model = make_laplace_mixture(data, c.k);
  return sweep_seeds(c, [&](std::uint64_t seed, std::string& summary) {
    Rng rng(seed);
    const LaplaceParams init = initialize_laplace(*model, rng);
    EstepAnalysis analysis = run_estep_analysis(*model, init, c.iters);
    write_stamped(analysis.trace, c, "estep", seed);

    const RateBoundReport bounds = check_rate_bounds(analysis.trace);
    write_text(out_base(c, "estep", seed) + "_report.json", report_to_json(bounds));

    std::ostringstream os;
    os << "[estep seed=" << seed << "] steps=" << analysis.trace.steps()
       << " final_nll=" << fmt(analysis.trace.final_nll())
       << " rate_bounds=" << (bounds.passed ? "pass" : "FAIL " + bounds.detail);
    summary = os.str();
    return bounds.passed ? kOk : kBoundExit;
  });
}

int cmd_smoothness(const ExperimentConfig& c) {
  const Dataset data = build_dataset(c);
  const ModelPtr model = build_model(c, data);
  return sweep_seeds(c, [&](std::uint64_t seed, std::string& summary) {
    Rng rng(seed);
    const NaturalParams init = initialize(*model, parse_init(c.init), rng);
    const EmTrace trace = run_em(*model, init, c.iters);
    if (trace.failure) {
      summary = "[smoothness seed=" + std::to_string(seed) +
                "] em failure: " + *trace.failure;
      return kNumericalExit;
    }
    const SmoothnessRegion region =
        region_between(init.values(), trace.final_params, c.inflate);
    Rng pair_rng(seed + 1);
    const double estimate = empirical_smoothness(*model, region, c.pairs, pair_rng);

    json report;
    report["estimate"] = estimate;
    report["pairs"] = c.pairs;
    report["inflate"] = c.inflate;
    report["lo"] = std::vector<double>(region.lo.begin(), region.lo.end());
    report["hi"] = std::vector<double>(region.hi.begin(), region.hi.end());
    write_text(out_base(c, "smoothness", seed) + "_report.json", report.dump(2) + "\n");

    summary = "[smoothness seed=" + std::to_string(seed) + "] estimate=" + fmt(estimate) +
              " pairs=" + std::to_string(c.pairs);
    return kOk;
  });
}

// ----- the oracle suite behind `verify` -----

struct OracleEntry {
  std::string name;
  int samples = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::string tolerance_name;
  double tolerance = 0.0;
  bool pass = false;
};

json entry_to_json(const OracleEntry& e) {
  json j;
  j["name"] = e.name;
  j["samples"] = e.samples;
  j["max_abs_err"] = e.max_abs_err;
  j["max_rel_err"] = e.max_rel_err;
  j["tolerance"] = {{"name", e.tolerance_name}, {"value", e.tolerance}};
  j["pass"] = e.pass;
  return j;
}

NaturalParams gaussian_point(double mean, double variance) {
  Vec values(2);
  values << mean / variance, -0.5 / variance;
  return NaturalParams(make_gaussian(), values);
}

OracleEntry oracle_gaussian_quadrature() {
  OracleEntry e{.name = "gaussian_quadrature_kl",
                .tolerance_name = "quadrature_kl",
                .tolerance = Tolerances::quadrature_kl};
  Rng rng(101);
  for (int s = 0; s < 20; ++s) {
    const double m1 = rng.uniform(-2.0, 2.0), v1 = rng.uniform(0.3, 3.0);
    const double m2 = rng.uniform(-2.0, 2.0), v2 = rng.uniform(0.3, 3.0);
    const double closed =
        0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
    const double numeric = numeric_kl(gaussian_point(m1, v1), gaussian_point(m2, v2));
    const double abs_err = std::abs(numeric - closed);
    e.max_abs_err = std::max(e.max_abs_err, abs_err);
    e.max_rel_err = std::max(e.max_rel_err, abs_err / std::max(1e-12, closed));
    ++e.samples;
  }
  e.pass = e.max_abs_err < e.tolerance;
  return e;
}

OracleEntry oracle_discrete_kl() {
  OracleEntry e{.name = "discrete_kl_vs_bregman",
                .tolerance_name = "identity",
                .tolerance = Tolerances::identity};
  Rng rng(103);
  const auto push = [&](const NaturalParams& from, const NaturalParams& to) {
    const double numeric = numeric_kl(from, to);
    const double bregman = bregman_divergence(to, from);
    const double abs_err = std::abs(numeric - bregman);
    e.max_abs_err = std::max(e.max_abs_err, abs_err);
    e.max_rel_err = std::max(e.max_rel_err, abs_err / std::max(1e-12, bregman));
    ++e.samples;
  };
  auto bernoulli = make_bernoulli();
  auto categorical = make_categorical(4);
  for (int s = 0; s < 20; ++s) {
    Vec a(1), b(1);
    a << rng.uniform(-2.0, 2.0);
    b << rng.uniform(-2.0, 2.0);
    push(NaturalParams(bernoulli, a), NaturalParams(bernoulli, b));
    Vec la(3), lb(3);
    for (Eigen::Index i = 0; i < 3; ++i) {
      la[i] = rng.uniform(-2.0, 2.0);
      lb[i] = rng.uniform(-2.0, 2.0);
    }
    push(NaturalParams(categorical, la), NaturalParams(categorical, lb));
  }
  e.pass = e.max_abs_err < e.tolerance;
  return e;
}

OracleEntry oracle_family_gradients() {
  OracleEntry e{.name = "family_log_partition_gradient",
                .tolerance_name = "fd_gradient_rel",
                .tolerance = Tolerances::fd_gradient_rel};
  Rng rng(107);
  const auto push = [&](const FamilyPtr& family, const Vec& point) {
    const auto f = [&](const Vec& theta) { return family->log_partition(theta); };
    const Vec fd = finite_diff_gradient(f, point);
    const Vec analytic = family->mean_map(point);
    const double abs_err = (fd - analytic).cwiseAbs().maxCoeff();
    e.max_abs_err = std::max(e.max_abs_err, abs_err);
    e.max_rel_err =
        std::max(e.max_rel_err, (fd - analytic).norm() / std::max(1e-12, analytic.norm()));
    ++e.samples;
  };
  for (int s = 0; s < 5; ++s) {
    Vec g(2);
    g << rng.uniform(-2.0, 2.0), rng.uniform(-3.0, -0.2);
    push(make_gaussian(), g);
    Vec b(1);
    b << rng.uniform(-2.0, 2.0);
    push(make_bernoulli(), b);
    Vec cat(2);
    cat << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    push(make_categorical(3), cat);
    Vec fixed(1);
    fixed << rng.uniform(-2.0, 2.0);
    push(make_fixed_variance_gaussian(0.7), fixed);
  }
  e.pass = e.max_rel_err < e.tolerance;
  return e;
}

NaturalParams random_mixture_point(const ExpFamilyMixtureModel& model, Rng& rng) {
  const Eigen::Index k = model.components();
  Vec weights(k);
  for (Eigen::Index j = 0; j < k; ++j) weights[j] = rng.uniform(0.5, 2.0);
  weights /= weights.sum();
  std::vector<Vec> blocks;
  for (Eigen::Index j = 0; j < k; ++j) {
    Vec block(2);
    const double mean = rng.uniform(-2.0, 2.0);
    const double variance = rng.uniform(0.4, 3.0);
    block << mean / variance, -0.5 / variance;
    blocks.push_back(block);
  }
  return NaturalParams(model.complete_family(),
                       model.mixture().natural_from_parts(weights, blocks));
}

OracleEntry oracle_model_gradient() {
  // Looser than the family check: the mixture NLL needs a full E-step per
  // probe, so more rounding accumulates in each difference.
  OracleEntry e{.name = "mixture_nll_gradient",
                .tolerance_name = "fd_nll_gradient_rel",
                .tolerance = 1e-5};
  const SyntheticDraw draw = generate_synthetic({"gmm", 2, 1, 60, 3.0, 109});
  auto model = make_gaussian_mixture(draw.data, 2);
  Rng rng(109);
  for (int s = 0; s < 5; ++s) {
    const NaturalParams point = random_mixture_point(*model, rng);
    const auto f = [&](const Vec& values) {
      return nll(*model, NaturalParams(model->complete_family(), values));
    };
    const Vec fd = finite_diff_gradient(f, point.values());
    const Vec analytic = nll_gradient(*model, point);
    const double abs_err = (fd - analytic).cwiseAbs().maxCoeff();
    e.max_abs_err = std::max(e.max_abs_err, abs_err);
    e.max_rel_err =
        std::max(e.max_rel_err, (fd - analytic).norm() / std::max(1e-12, analytic.norm()));
    ++e.samples;
  }
  e.pass = e.max_rel_err < e.tolerance;
  return e;
}

OracleEntry oracle_enumeration() {
  OracleEntry e{.name = "posterior_enumeration",
                .tolerance_name = "enumeration",
                .tolerance = Tolerances::enumeration};
  Rng rng(113);
  for (const Eigen::Index n : {1, 4, 6}) {
    for (const Eigen::Index k : {2, 3}) {
      Mat rows(n, 1);
      for (Eigen::Index i = 0; i < n; ++i) rows(i, 0) = rng.uniform(-2.0, 2.0);
      auto model = make_gaussian_mixture(make_dataset(rows, {"x"}), k);
      const NaturalParams point = random_mixture_point(*model, rng);
      const Vec brute = enumerate_posterior_stats(*model, point);
      const Vec estep = expected_stats(*model, point).values();
      e.max_abs_err = std::max(e.max_abs_err, (brute - estep).cwiseAbs().maxCoeff());
      ++e.samples;
    }
  }
  e.max_rel_err = e.max_abs_err;
  e.pass = e.max_abs_err < e.tolerance;
  return e;
}

OracleEntry oracle_smd() {
  OracleEntry e{.name = "online_smd_equivalence",
                .tolerance_name = "smd_deviation",
                .tolerance = 1e-10};
  {
    Mat rows(6, 1);
    Rng rng(127);
    for (Eigen::Index i = 0; i < 6; ++i) rows(i, 0) = rng.uniform(-2.0, 2.0);
    auto model = make_fixed_variance_gaussian_mixture(make_dataset(rows, {"x"}), 2, 1.0);
    Rng init_rng(128);
    const NaturalParams init = initialize(*model, InitMethod::kRandomRows, init_rng);
    const SmdReport unit =
        smd_equivalence(*model, init, 1, OnlineSchedule::constant(1.0), 5);
    e.max_abs_err = std::max(e.max_abs_err, unit.max_deviation);
    ++e.samples;
  }
  {
    Rng rng(131);
    Mat rows(30, 2);
    for (Eigen::Index i = 0; i < 30; ++i) {
      const double base = (i % 2 == 0) ? 0.8 : 0.2;
      for (Eigen::Index j = 0; j < 2; ++j) {
        rows(i, j) = rng.uniform(0.0, 1.0) < base ? 1.0 : 0.0;
      }
    }
    auto model = make_bernoulli_mixture(make_dataset(rows), 2);
    Rng init_rng(132);
    const NaturalParams init = initialize(*model, InitMethod::kRandomRows, init_rng);
    const SmdReport decay =
        smd_equivalence(*model, init, 500, OnlineSchedule::one_over_t(1.0), 6);
    e.max_abs_err = std::max(e.max_abs_err, decay.max_deviation);
    ++e.samples;
  }
  e.max_rel_err = e.max_abs_err;
  e.pass = e.max_abs_err < e.tolerance;
  return e;
}

OracleEntry oracle_reparam_em(const ReparamReport& report) {
  OracleEntry e{.name = "reparam_em_invariance",
                .samples = 1,
                .max_abs_err = report.em_max_kl,
                .max_rel_err = report.decrement_max_rel_diff,
                .tolerance_name = "reparam_em_kl",
                .tolerance = 1e-10};
  e.pass = report.em_max_kl < e.tolerance && report.decrement_max_rel_diff < 1e-8;
  return e;
}

OracleEntry oracle_reparam_gd(const ReparamReport& report) {
  // A negative control: gradient descent must feel the coordinates, so the
  // paired iterates have to drift at least this far apart.
  OracleEntry e{.name = "reparam_gd_control",
                .samples = 1,
                .max_abs_err = report.gd_kl,
                .max_rel_err = report.gd_kl,
                .tolerance_name = "gd_divergence_floor",
                .tolerance = 1e-3};
  e.pass = report.gd_kl > e.tolerance;
  return e;
}

int cmd_verify(const ExperimentConfig& c) {
  std::vector<OracleEntry> entries;
  entries.push_back(oracle_gaussian_quadrature());
  entries.push_back(oracle_discrete_kl());
  entries.push_back(oracle_family_gradients());
  entries.push_back(oracle_model_gradient());
  entries.push_back(oracle_enumeration());
  entries.push_back(oracle_smd());

  const SyntheticDraw draw = generate_synthetic({"gmm", 2, 1, 80, 3.0, 137});
  auto model = make_gaussian_mixture(draw.data, 2);
  Rng rng(138);
  const NaturalParams init = initialize(*model, InitMethod::kRandomRows, rng);
  const ReparamReport reparam = reparam_invariance(*model, init, 50, 0.02);
  entries.push_back(oracle_reparam_em(reparam));
  entries.push_back(oracle_reparam_gd(reparam));

  bool all_pass = true;
  json report;
  report["reports"] = json::array();
  for (const auto& entry : entries) {
    report["reports"].push_back(entry_to_json(entry));
    all_pass = all_pass && entry.pass;
    std::cerr << "[verify] " << entry.name << ": " << (entry.pass ? "pass" : "FAIL")
              << " (max_abs_err=" << fmt(entry.max_abs_err) << ", samples=" << entry.samples
              << ")\n";
  }
  report["passed"] = all_pass;
  write_text(c.out + "/verify_report.json", report.dump(2) + "\n");
  std::cerr << "[verify] suite " << (all_pass ? "passed" : "FAILED") << '\n';
  return all_pass ? kOk : kBoundExit;
}

// Flags override the config file, so the file is folded in before CLI11
// assigns anything: options not present on the command line keep the file's
// values. Returns whether the file pinned `standardize` explicitly.
bool preload_config(int argc, char** argv, ExperimentConfig& c) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) path = argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) path = arg.substr(9);
  }
  if (path.empty()) return false;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  config_from_json(j, c);
  return j.contains("standardize");
}

void add_common_options(CLI::App* cmd, ExperimentConfig& c) {
  cmd->add_option("--config", "JSON config file; explicit flags override it")
      ->check(CLI::ExistingFile);
  cmd->add_option("--model", c.model, "gmm | gmm_fixed_var | bmm | gaussian | laplace");
  cmd->add_option("--k", c.k, "number of mixture components");
  cmd->add_option("--fixed-variance", c.fixed_variance,
                  "component variance for gmm_fixed_var");
  cmd->add_option("--data", c.data_path, "CSV file with a header row");
  cmd->add_option("--synth-kind", c.synth_kind,
                  "synthetic generator when --data is absent: gmm | gmm_fixed_var | bmm");
  cmd->add_option("--n", c.synth_n, "synthetic sample count");
  cmd->add_option("--dim", c.synth_dim, "synthetic data dimension");
  cmd->add_option("--separation", c.separation,
                  "synthetic component separation in component scales");
  cmd->add_option("--data-seed", c.data_seed, "synthetic draw seed");
  cmd->add_flag("--standardize,!--no-standardize", c.standardize,
                "z-score each column before fitting");
  cmd->add_option("--init", c.init, "random | kmeans");
  cmd->add_option("--iters", c.iters, "iteration budget per run");
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--seeds", c.seeds, "number of consecutive seeds to sweep");
  cmd->add_option("--out", c.out, "output directory for traces and reports");
  cmd->add_flag("--decrement", c.record_decrement, "record the natural decrement per step");
  cmd->add_flag("--missing-info", c.record_missing_info,
                "record the top missing-information eigenvalue per step (slow)");
  cmd->add_flag("--params", c.record_params, "record natural parameters per step");
}

}  // namespace

int main(int argc, char** argv) {
  ExperimentConfig config;

  CLI::App app{"Expectation-maximization as mirror descent: experiment runner"};
  app.require_subcommand(1);

  CLI::App* fit = app.add_subcommand("fit", "exact EM with descent certificates");
  CLI::App* compare =
      app.add_subcommand("compare", "EM against grid-searched gradient descent");
  CLI::App* online = app.add_subcommand("online", "stochastic mean-space EM");
  CLI::App* map = app.add_subcommand("map", "EM on the posterior with a conjugate prior");
  CLI::App* gem = app.add_subcommand("gem", "generalized EM with inexact M-steps");
  CLI::App* estep =
      app.add_subcommand("estep", "responsibility-space analysis of a laplace mixture");
  CLI::App* verify = app.add_subcommand("verify", "run the numerical oracle suite");
  CLI::App* smoothness =
      app.add_subcommand("smoothness", "empirical gradient smoothness over the EM path");

  for (CLI::App* cmd : {fit, compare, online, map, gem, estep, smoothness}) {
    add_common_options(cmd, config);
  }
  verify->add_option("--out", config.out, "output directory for the report");

  compare->add_option("--grid-min", config.grid_min, "smallest GD step size");
  compare->add_option("--grid-max", config.grid_max, "largest GD step size");
  compare->add_option("--grid-points", config.grid_points, "log-spaced grid size");

  online->add_option("--schedule", config.schedule, "one_over_t | constant");
  online->add_option("--offset", config.offset, "gamma_t = 1/(t + offset)");
  online->add_option("--gamma", config.gamma, "constant schedule value");

  map->add_option("--prior-strength", config.prior_strength,
                  "pseudo-observation count of the conjugate prior");

  gem->add_option("--gem-mode", config.gem_mode, "multiplicative | additive");
  gem->add_option("--epsilon-c", config.epsilon_c,
                  "additive gap schedule epsilon_t = c / t^2; 0 means exact");
  gem->add_option("--gem-bound-seeds", config.gem_bound_seeds,
                  "seeds for the multiplicative expected-descent check");

  smoothness->add_option("--pairs", config.pairs, "gradient pairs to sample");
  smoothness->add_option("--inflate", config.inflate, "relative box inflation");

  try {
    const bool standardize_pinned = preload_config(argc, argv, config);
    app.parse(argc, argv);
    CLI::App* active = app.get_subcommands().front();
    config.mode = active->get_name();
    // Comparisons standardize by default so both optimizers see the scaling
    // the step grid was chosen for; an explicit flag or config entry wins.
    // Both spellings of the flag land on one option, so one count covers it.
    if (config.mode == "compare" && !standardize_pinned &&
        active->count("--standardize") == 0) {
      config.standardize = true;
    }

    std::filesystem::create_directories(config.out);
    if (config.mode == "fit") return cmd_fit(config);
    if (config.mode == "compare") return cmd_compare(config);
    if (config.mode == "online") return cmd_online(config);
    if (config.mode == "map") return cmd_map(config);
    if (config.mode == "gem") return cmd_gem(config);
    if (config.mode == "estep") return cmd_estep(config);
    if (config.mode == "verify") return cmd_verify(config);
    if (config.mode == "smoothness") return cmd_smoothness(config);
    throw ConfigError("unknown mode: " + config.mode);
  } catch (const CLI::ParseError& err) {
    // CLI11 prints help itself; route everything through stderr and map
    // help requests to success.
    const int code = app.exit(err, std::cerr, std::cerr);
    return code == 0 ? kOk : kConfigExit;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return classify(err);
  }
}
