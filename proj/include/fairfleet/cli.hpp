#pragma once

// Command implementations behind the fairfleet executable.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fairfleet/errors.hpp"
#include "fairfleet/scenario.hpp"
#include "fairfleet/sim.hpp"

namespace fairfleet::cli {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<double> lambda_ko;
};

struct RunConfig {
  std::string scenario;
  std::string out_dir;
  Overrides overrides;
  bool timings = false;
  std::size_t node_limit = 0;
  // Sweep mode only.
  std::vector<int> vehicle_counts;
  std::vector<int> request_counts;
  int reps = 10;
};

inline void apply(Scenario& sc, const Overrides& o) {
  if (o.seed) {
    sc.fleet.seed = *o.seed;
    if (sc.generator) sc.generator->seed = *o.seed;
  }
  if (o.lambda) sc.params.lambda = *o.lambda;
  if (o.alpha) sc.params.alpha = *o.alpha;
  if (o.lambda_ko) sc.params.lambda_ko = *o.lambda_ko;
  if (sc.params.lambda < 0 || sc.params.lambda > 1) throw ConfigError("lambda must be in [0, 1]");
  if (sc.params.alpha < 0) throw ConfigError("alpha must be >= 0");
  if (sc.params.lambda_ko < 0) throw ConfigError("lambda_ko must be >= 0");
}

/// Writes every file only after all contents are ready.
inline void write_outputs(const std::string& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : files) {
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path.string() + ": cannot write");
    out << body;
  }
}

inline int cmd_run(const RunConfig& cfg, std::ostream& log) {
  Scenario sc = load_scenario(cfg.scenario);
  apply(sc, cfg.overrides);
  const auto trace = run(sc, SimOptions{cfg.node_limit, true});
  std::ostringstream trace_csv, req_csv, summary;
  write_trace_csv(trace_csv, trace);
  write_requests_csv(req_csv, trace);
  write_summary_csv(summary, trace, cfg.timings);
  write_outputs(cfg.out_dir, {{"trace.csv", trace_csv.str()}, {"requests.csv", req_csv.str()}, {"summary.csv", summary.str()}});
  log << summary.str();
  for (const auto& v : trace.violations) log << "violation: " << v << '\n';
  return kOk;
}

struct ArmResult {
  std::string axis;
  int point;
  int rep;
  std::uint64_t seed;
  std::string arm;
  std::uint64_t hash;
  double vacancy;
  Deviation dev;
  double cost;
  int unassigned;
  std::size_t violations;
};

inline std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

/// Paired fair/baseline runs. Both arms of a repetition share the seed and
/// therefore the request stream; the baseline drops envy rows and the
/// history correction.
inline std::vector<ArmResult> ab_sweep(const Scenario& base, const RunConfig& cfg) {
  std::string axis = "none";
  std::vector<int> points{0};
  if (!cfg.vehicle_counts.empty()) {
    axis = "vehicles";
    points = cfg.vehicle_counts;
  } else if (!cfg.request_counts.empty()) {
    axis = "requests";
    points = cfg.request_counts;
    if (!base.generator) throw ConfigError(base.source + ": a request sweep needs a generator");
  }
  const std::uint64_t master = cfg.overrides.seed.value_or(base.fleet.seed);
  std::vector<ArmResult> rows;
  for (int point : points) {
    for (int rep = 0; rep < cfg.reps; ++rep) {
      Scenario sc = base;
      if (axis == "vehicles") {
        sc.fleet.count = point;
        sc.fleet.positions.clear();
      } else if (axis == "requests") {
        sc.generator->count = point;
        sc.generator->rate.reset();
      }
      Overrides o = cfg.overrides;
      o.seed = master + static_cast<std::uint64_t>(rep);
      apply(sc, o);
      for (const char* arm : {"fair", "baseline"}) {
        Scenario s = sc;
        if (std::string(arm) == "baseline") {
          s.params.lambda = 0;
          s.params.alpha = 0;
        }
        const auto t = run(s, SimOptions{cfg.node_limit, true});
        rows.push_back({axis, point, rep, *o.seed, arm, t.stream_hash, vacancy_rate(t), utility_deviation(t),
                        total_cost(t), unassigned_count(t), t.violations.size()});
      }
    }
  }
  return rows;
}

inline void write_ab_runs(std::ostream& out, const std::vector<ArmResult>& rows) {
  out << std::setprecision(10);
  out << "axis,point,rep,seed,arm,stream_hash,vacancy_rate,utility_stddev,utility_range,J,unassigned,violations\n";
  for (const auto& r : rows)
    out << r.axis << ',' << r.point << ',' << r.rep << ',' << r.seed << ',' << r.arm << ',' << hex(r.hash) << ','
        << r.vacancy << ',' << r.dev.stddev << ',' << r.dev.range << ',' << r.cost << ',' << r.unassigned << ','
        << r.violations << '\n';
}

inline void write_ab_means(std::ostream& out, const std::vector<ArmResult>& rows) {
  struct Acc {
    int n = 0;
    double vac = 0, sd = 0, range = 0, cost = 0, un = 0;
  };
  std::vector<std::pair<std::pair<int, std::string>, Acc>> acc;
  for (const auto& r : rows) {
    auto key = std::pair{r.point, r.arm};
    auto it = std::find_if(acc.begin(), acc.end(), [&](const auto& a) { return a.first == key; });
    if (it == acc.end()) it = acc.insert(acc.end(), {key, Acc{}});
    auto& a = it->second;
    ++a.n;
    a.vac += r.vacancy;
    a.sd += r.dev.stddev;
    a.range += r.dev.range;
    a.cost += r.cost;
    a.un += r.unassigned;
  }
  out << std::setprecision(10);
  out << "axis,point,arm,reps,vacancy_rate,utility_stddev,utility_range,J,unassigned\n";
  const std::string axis = rows.empty() ? "none" : rows.front().axis;
  for (const auto& [key, a] : acc)
    out << axis << ',' << key.first << ',' << key.second << ',' << a.n << ',' << a.vac / a.n << ',' << a.sd / a.n
        << ',' << a.range / a.n << ',' << a.cost / a.n << ',' << a.un / a.n << '\n';
}

inline int cmd_ab(const RunConfig& cfg, std::ostream& log) {
  if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
  Scenario base = load_scenario(cfg.scenario);
  apply(base, {std::nullopt, cfg.overrides.lambda, cfg.overrides.alpha, cfg.overrides.lambda_ko});
  const auto rows = ab_sweep(base, cfg);
  std::ostringstream runs, means;
  write_ab_runs(runs, rows);
  write_ab_means(means, rows);
  write_outputs(cfg.out_dir, {{"ab_runs.csv", runs.str()}, {"ab_means.csv", means.str()}});
  log << means.str();
  return kOk;
}

inline int cmd_check_formula(const std::string& text, std::ostream& out) {
  const Formula f = parse_formula(text);
  const Dfa d = to_dfa(f);
  std::size_t accepting = 0;
  for (Dfa::State q = 0; q < d.state_count(); ++q) accepting += d.is_accepting(q);
  out << "formula: " << f.to_string() << "\naccepting: " << accepting << '\n';
  out << export_dfa(d);
  return kOk;
}

}  // namespace fairfleet::cli
