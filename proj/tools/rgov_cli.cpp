#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgov/bounds.hpp"
#include "rgov/errors.hpp"
#include "rgov/scenario.hpp"
#include "rgov/sim.hpp"

namespace {

using nlohmann::json;
using namespace rgov;

// Process exit codes.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitFailure = 2;
constexpr int kExitHorizon = 3;
constexpr int kExitViolation = 4;

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string csv;
  std::vector<std::string> overrides;
  std::string method = "both";
  std::optional<int> trials;
  double bound_scale = 1.0;
  int verbosity = 0;
};

Scenario load(const Options& opt) {
  Scenario scn = load_scenario(opt.scenario, opt.overrides);
  if (opt.seed) set_seed(scn, *opt.seed);
  return scn;
}

void emit(const json& report, const std::string& out) {
  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw ConfigError("cannot write " + out);
  f << report.dump(2) << "\n";
}

bool wants(const std::string& method, const char* which) {
  return method == "both" || method == which;
}

struct Timed {
  PeakBound bound;
  double seconds;
};

template <class F>
Timed timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  PeakBound b = f();
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return {std::move(b), dt.count()};
}

int cmd_bound(const Options& opt) {
  const Scenario scn = load(opt);
  const auto sys = scenario_system(scn);
  const Eigen::VectorXd z0 = scenario_z0(scn, sys);
  json report = {{"scenario", scn.name}, {"alpha_bar", sys.alpha_bar()}};
  report["z0"] = std::vector<double>(z0.data(), z0.data() + z0.size());
  if (wants(opt.method, "lyap")) {
    const auto r = timed([&] { return peak_bound_lyap(sys, z0); });
    report["delta_lyap"] = r.bound.delta;
    report["alpha_star_lyap"] = r.bound.alpha_star;
    report["wall_time_lyap_s"] = r.seconds;
  }
  if (wants(opt.method, "sdp")) {
    const auto r = timed([&] { return peak_bound_sdp(sys, z0); });
    report["delta_sdp"] = r.bound.delta;
    report["alpha_star_sdp"] = r.bound.alpha_star;
    report["wall_time_sdp_s"] = r.seconds;
  }
  emit(report, opt.out);
  return kExitOk;
}

int cmd_montecarlo(const Options& opt) {
  const Scenario scn = load(opt);
  const auto sys = scenario_system(scn);
  const Eigen::VectorXd z0 = scenario_z0(scn, sys);

  MonteCarloOptions mc;
  mc.trials = opt.trials.value_or(scn.montecarlo.trials);
  if (mc.trials < 1) throw ConfigError("--trials must be >= 1");
  mc.horizon_s = scn.montecarlo.horizon_s;
  mc.dt_s = scn.montecarlo.dt_s;
  mc.model.kind = scn.montecarlo.kind;
  mc.model.hold_s = scn.montecarlo.hold_s;
  mc.seed = scn.seed;

  json report = {{"scenario", scn.name}, {"trials", mc.trials}, {"seed", scn.seed},
                 {"horizon_s", mc.horizon_s}, {"dt_s", mc.dt_s}};
  std::vector<double> limits;
  if (wants(opt.method, "lyap")) {
    const double d = peak_bound_lyap(sys, z0).delta;
    report["delta_lyap"] = d;
    limits.push_back(d);
  }
  if (wants(opt.method, "sdp")) {
    const double d = peak_bound_sdp(sys, z0).delta;
    report["delta_sdp"] = d;
    limits.push_back(d);
  }
  if (opt.bound_scale != 1.0) report["bound_scale"] = opt.bound_scale;

  const auto result = monte_carlo_peak(sys, z0, mc);
  // A trial violates when its sampled peak exceeds any reported bound by
  // more than the integration tolerance.
  int violations = 0;
  for (const double peak : result.trial_peaks) {
    for (const double limit : limits) {
      if (peak > opt.bound_scale * limit + 1e-6) {
        ++violations;
        break;
      }
    }
  }
  report["sampled_peak"] = result.sampled_peak;
  report["violations"] = violations;
  emit(report, opt.out);
  return violations == 0 ? kExitOk : kExitViolation;
}

json record_json(const TraceRecord& r) {
  return {{"t", r.t},
          {"y", {r.y(0), r.y(1)}},
          {"g", {r.g(0), r.g(1)}},
          {"bound", r.bound},
          {"dist_sq_obstacles", r.dist_sq_obstacles},
          {"dist_sq_output", r.dist_sq_output},
          {"delta_e", r.delta_e}};
}

int cmd_simulate(const Options& opt) {
  const Scenario scn = load(opt);
  const RunResult run = run_closed_loop(scn);
  const auto& trace = run.trace;

  if (!opt.out.empty()) {
    std::ofstream f(opt.out);
    if (!f) throw ConfigError("cannot write " + opt.out);
    write_ndjson(trace, f);
  }
  if (!opt.csv.empty()) {
    std::ofstream f(opt.csv);
    if (!f) throw ConfigError("cannot write " + opt.csv);
    write_csv(trace, f);
  }

  const auto chain = chain_violations(trace);
  std::size_t stalled = 0, envelope = 0, clamped = 0;
  for (const auto& r : trace.records) {
    stalled += r.flags.stalled;
    envelope += r.flags.envelope_violation;
    clamped += r.flags.singular_clamp;
  }
  const json summary = {
      {"scenario", scn.name},
      {"seed", scn.seed},
      {"outcome", std::string(to_string(run.outcome))},
      {"final_time_s", run.final_time},
      {"records", trace.records.size()},
      {"chain_violations", chain.size()},
      {"replans", run.replans},
      {"planning_failures", run.planning_failures},
      {"ultimate_bound", trace.ultimate_bound},
      {"goal_eps", trace.goal_eps},
      {"stalled_steps", stalled},
      {"envelope_violation_steps", envelope},
      {"singular_clamp_steps", clamped},
      {"message", run.message},
  };
  std::cout << summary.dump(2) << "\n";

  if (run.outcome == Outcome::kCollision) {
    std::cerr << "safety violation: " << run.message << "\n";
    if (!trace.records.empty()) std::cerr << record_json(trace.records.back()).dump() << "\n";
    return kExitViolation;
  }
  if (!chain.empty()) {
    std::cerr << "safety chain violated at record " << chain.front() << ": "
              << record_json(trace.records[chain.front()]).dump() << "\n";
    return kExitViolation;
  }
  if (run.outcome == Outcome::kDiverged) {
    std::cerr << "diverged: " << run.message << "\n";
    return kExitFailure;
  }
  return run.outcome == Outcome::kGoalReached ? kExitOk : kExitHorizon;
}

int cmd_validate(const Options& opt) {
  const Scenario scn = load(opt);
  const json report = {{"scenario", scn.name}, {"valid", true}, {"navigation", scn.navigable()}};
  std::cout << report.dump() << "\n";
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidArgument:
      return kExitConfig;
    case ErrorKind::kPoseInObstacle:
      return kExitViolation;
    default:
      return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-governor bounds and safe-navigation simulator"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opt.scenario, "Scenario JSON file")->required();
    sub->add_option("--set", opt.overrides, "Override a scenario field: dotted.key=value");
    sub->add_flag("-v,--verbose", opt.verbosity, "Print progress details");
  };

  auto* bound = app.add_subcommand("bound", "Compute the peak output bounds of a scenario");
  add_common(bound);
  bound->add_option("--method", opt.method, "sdp, lyap or both")
      ->check(CLI::IsMember({"sdp", "lyap", "both"}));
  bound->add_option("--out", opt.out, "Write the JSON report here instead of stdout");

  auto* simulate = app.add_subcommand("simulate", "Run one closed-loop navigation simulation");
  add_common(simulate);
  simulate->add_option("--seed", opt.seed, "Disturbance seed");
  simulate->add_option("--out", opt.out, "Trace output (newline-delimited JSON)");
  simulate->add_option("--csv", opt.csv, "Trace output (CSV)");

  auto* mc = app.add_subcommand("montecarlo", "Check the bounds against sampled trajectories");
  add_common(mc);
  mc->add_option("--seed", opt.seed, "Sampling seed");
  mc->add_option("--trials", opt.trials, "Number of trajectories");
  mc->add_option("--method", opt.method, "sdp, lyap or both")
      ->check(CLI::IsMember({"sdp", "lyap", "both"}));
  mc->add_option("--out", opt.out, "Write the JSON report here instead of stdout");
  mc->add_option("--bound-scale", opt.bound_scale)->group("");  // test hook

  auto* validate = app.add_subcommand("validate", "Parse and check a scenario");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (bound->parsed()) return cmd_bound(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (mc->parsed()) return cmd_montecarlo(opt);
    return cmd_validate(opt);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
