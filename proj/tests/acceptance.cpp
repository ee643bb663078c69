// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fairfleet/assign.hpp"
#include "fairfleet/cli.hpp"
#include "fairfleet/routing.hpp"
#include "fairfleet/scenario.hpp"
#include "fairfleet/sim.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fairfleet;
using namespace fairfleet::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// Simulation runs from the fairness and runtime criteria, kept for the
// invariant criterion.
struct RunLog {
  int runs = 0;
  std::size_t violations = 0;
  int nondeterministic = 0;
  std::vector<std::string> first_violations;
};

RunLog run_log;

MetricsTrace checked_run(const Scenario& sc, double* wall = nullptr) {
  const auto t0 = Clock::now();
  MetricsTrace a = run(sc);
  if (wall) *wall = seconds_since(t0);
  const MetricsTrace b = run(sc);
  ++run_log.runs;
  run_log.violations += a.violations.size();
  for (const auto& v : a.violations)
    if (run_log.first_violations.size() < 3) run_log.first_violations.push_back(sc.name + " " + v);
  if (!same_outcome(a, b)) ++run_log.nondeterministic;
  return a;
}

std::vector<std::string> route_names(const RoadNetwork& net, const RoutePlan& p) {
  std::vector<std::string> out;
  for (const auto& w : p.route) out.push_back(net.name(w.state));
  return out;
}

void six_state_plan(Verdict& v) {
  const auto t0 = Clock::now();
  const auto net = six_network();
  const auto r1 = make_request(net, six_r1());
  const auto r2 = make_request(net, six_r2());
  const auto veh = empty_vehicle(net, "A");
  const auto p = plan_trip(net, veh, {r1, r2}, 0);
  const double wall = seconds_since(t0);
  v.require(p.has_value(), "plan found");
  if (!p) return;
  const auto* e1 = p->event_for("r1");
  const auto* e2 = p->event_for("r2");
  v.require(e1 && e2, "both requests served");
  if (!e1 || !e2) return;
  v.require(e1->pickup == 2 && e2->pickup == 8, "pickups 2, 8");
  v.require(e1->drop == 17 && e2->drop == 13, "drops 17, 13");
  v.require(e1->delay == 8 && e2->delay == 8, "delays 8, 8");
  v.require(r1->t_star == 9 && r2->t_star == 5, "optimal satisfaction times 9, 5");
  const std::vector<std::string> want{"A", "C", "D", "B", "D", "F", "E"};
  v.require(route_names(net, *p) == want, "route A C D B D F E");
  v.require(wall < 1.0, "under 1 s");
  v.detail << "pickups " << e1->pickup << "," << e2->pickup << " drops " << e1->drop << "," << e2->drop
           << " delays " << e1->delay << "," << e2->delay << " t* " << *r1->t_star << "," << *r2->t_star
           << " (" << wall << " s)";
}

// Enumerates every word of length <= max_len by prepending symbols. The
// oracle table and the set of DFA states accepting the current suffix are
// both extended one symbol at a time; a word is accepted iff the initial
// state accepts it. Returns the number of disagreeing words.
std::size_t count_disagreements(const Dfa& d, const std::vector<Dfa::Symbol>& sym_of, const TableEvaluator& oracle,
                                std::size_t max_len, std::size_t& words) {
  const std::size_t nodes = oracle.size(), states = d.state_count();
  std::vector<std::vector<char>> truth(max_len + 1, std::vector<char>(nodes, 0));
  std::vector<std::vector<char>> good(max_len + 1, std::vector<char>(states, 0));
  for (Dfa::State q = 0; q < states; ++q) good[0][q] = d.is_accepting(q);
  std::size_t bad = 0;
  std::function<void(std::size_t)> walk = [&](std::size_t len) {
    ++words;
    if (static_cast<bool>(good[len][d.initial()]) != (len > 0 && truth[len].back())) ++bad;
    if (len == max_len) return;
    for (std::uint32_t m = 0; m < sym_of.size(); ++m) {
      oracle.step(truth[len].data(), m, truth[len + 1].data());
      for (Dfa::State q = 0; q < states; ++q) good[len + 1][q] = good[len][d.next(q, sym_of[m])];
      walk(len + 1);
    }
  };
  walk(0);
  return bad;
}

void template_automata(Verdict& v) {
  const auto t0 = Clock::now();
  int instances = 0, per_kind[4] = {0, 0, 0, 0};
  std::size_t words = 0, bad = 0, max_atoms = 0;
  std::mt19937_64 rng(2024);
  for (std::uint64_t seed = 1; instances < 60 && seed < 500; ++seed) {
    GridSpec g;
    g.rows = 5;
    g.cols = 5;
    g.landmarks = 4;
    g.label_density = 0.5;
    g.seed = seed;
    const auto net = RoadNetwork::build(generate_grid(g));
    const int kind = static_cast<int>(seed % 4) + 1;
    const auto inst = draw_template(net, kind, rng);
    if (!inst) continue;
    const Formula f = Formula::eventually(Formula::conj(Formula::atom(inst->pick), parse_formula(inst->body)));
    const auto atoms = f.atoms();
    max_atoms = std::max(max_atoms, atoms.size());
    if (atoms.size() > 4) {
      v.require(false, "template with more than 4 atoms: " + f.to_string());
      continue;
    }
    const Dfa d = to_dfa(f);
    std::vector<Dfa::Symbol> sym_of(std::size_t{1} << atoms.size());
    for (std::uint32_t m = 0; m < sym_of.size(); ++m) {
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < atoms.size(); ++i)
        if (m >> i & 1u) labels.push_back(atoms[i]);
      sym_of[m] = d.symbol_for(labels);
    }
    bad += count_disagreements(d, sym_of, TableEvaluator(f, atoms), 6, words);
    ++instances;
    ++per_kind[kind - 1];
  }
  const double wall = seconds_since(t0);
  v.require(instances >= 50, "at least 50 instances");
  v.require(std::all_of(std::begin(per_kind), std::end(per_kind), [](int c) { return c > 0; }), "every template");
  v.require(bad == 0, "full agreement");
  v.require(wall < 60.0, "under 60 s");
  v.detail << instances << " instances (" << per_kind[0] << "/" << per_kind[1] << "/" << per_kind[2] << "/"
           << per_kind[3] << " per template, <= " << max_atoms << " atoms), " << words << " words, " << bad
           << " disagreements (" << wall << " s)";
}

void routing_equivalence(Verdict& v) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  const std::vector<std::string> bodies{"F a",       "F (a & F b)", "a U b",  "F (a | b)", "F (b & !a)",
                                        "F ((c | a) & b)", "F (a & (b | c))", "X F c"};
  int trials = 0, feasible = 0, mismatches = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto net = RoadNetwork::build(random_small_map(rng, 3 + trial % 6, {"a", "b", "c"}));
    const DistanceTable dist(net);
    std::uniform_int_distribution<int> st(0, static_cast<int>(net.size()) - 1);
    std::uniform_int_distribution<std::size_t> body(0, bodies.size() - 1);
    std::uniform_int_distribution<Tick> tol(0, 6);
    std::vector<RequestPtr> reqs;
    std::vector<OracleRequest> oracle_reqs;
    const int m = 1 + trial % 2;
    for (int k = 0; k < m; ++k) {
      auto r = make_request(net, {"q" + std::to_string(k), "s" + std::to_string(st(rng)), bodies[body(rng)], 0, 1,
                                  tol(rng), tol(rng), {}, {}});
      oracle_reqs.push_back({r->pick_state, r->full, r->t_req, r->max_wait, r->max_delay, r->t_star});
      reqs.push_back(std::move(r));
    }
    const VehicleState veh{"v", 2, static_cast<StateIndex>(st(rng)), 0, {}, 0};
    const auto want = brute_force_plan(net, veh.position, 0, oracle_reqs);
    ++trials;
    for (const PlannerOptions& opt : {PlannerOptions{}, PlannerOptions{&dist, nullptr}}) {
      const auto got = plan_trip(net, veh, reqs, 0, opt);
      if (got.has_value() != want.has_value() || (got && got->completion != want->completion)) ++mismatches;
    }
    feasible += want.has_value();
  }
  const double wall = seconds_since(t0);
  v.require(trials >= 100, "at least 100 maps");
  v.require(mismatches == 0, "exact agreement");
  v.require(feasible > 0 && feasible < trials, "both verdicts exercised");
  v.require(wall < 300.0, "under 5 min");
  v.detail << trials << " maps, " << feasible << " feasible, " << mismatches << " mismatches (" << wall << " s)";
}

void ilp_exactness(Verdict& v) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31);
  const double lambdas[] = {0.0, 0.5, 1.0};
  int trials = 0, mismatches = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const RtvGraph g = random_rtv(rng, 4, 5, 12);
    const double lambda = lambdas[trial % 3];
    const double ko = trial % 2 ? 30.0 : 8.0;
    const auto m = formulate(g, ko, lambda);
    const auto warm = greedy_warm_start(g, m);
    const auto a = solve(m, &warm);
    const auto want = brute_force_assignment(g, ko, lambda);
    ++trials;
    if (a.objective != want.objective || !m.feasible(a.as_vector(m))) ++mismatches;
  }
  const double wall = seconds_since(t0);
  v.require(trials >= 100, "at least 100 instances");
  v.require(mismatches == 0, "objectives equal");
  v.require(wall < 300.0, "under 5 min");
  v.detail << trials << " instances, " << mismatches << " mismatches (" << wall << " s)";
}

std::vector<std::string> assigned_pairs(const RtvGraph& g, const Assignment& a) {
  std::vector<std::string> out;
  for (auto e : a.edges) out.push_back(g.vehicles[g.edges[e].vehicle].id + ":" + g.trips[g.edges[e].trip].id);
  std::sort(out.begin(), out.end());
  return out;
}

void envy_example(Verdict& v) {
  constexpr double ko = 1e5;
  RtvGraph g = empty_rtv(2, {"r1", "r2"});
  add_edge(g, {0}, 0, 5, 4);
  add_edge(g, {1}, 0, 5, 2);
  add_edge(g, {0}, 1, 5, 3);
  const auto strict = solve(formulate(g, ko, 1.0));
  const auto relaxed = solve(formulate(g, ko, 0.5));
  v.require(strict.edges.size() == 1 && strict.unassigned.size() == 1, "strict: one pair, one unassigned");
  v.require(strict.objective == brute_force_assignment(g, ko, 1.0).objective, "strict optimum");
  const std::vector<std::string> both{"v1:r2", "v2:r1"};
  v.require(assigned_pairs(g, relaxed) == both && relaxed.unassigned.empty(), "relaxed: both pairs");
  auto show = [&](const Assignment& a) {
    std::string s;
    for (const auto& p : assigned_pairs(g, a)) s += (s.empty() ? "" : " ") + p;
    return "{" + s + "}";
  };
  v.detail << "lambda 1 " << show(strict) << " unassigned " << strict.unassigned.size() << "; lambda 0.5 "
           << show(relaxed);
}

Scenario grid_scenario() { return load_scenario(source_path("scenarios/grid12.json")); }

Scenario with_seed(Scenario sc, std::uint64_t seed) {
  cli::Overrides o;
  o.seed = seed;
  cli::apply(sc, o);
  return sc;
}

double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

void fairness_direction(Verdict& v) {
  const auto t0 = Clock::now();
  const Scenario base = grid_scenario();
  std::vector<double> sd_fair, sd_base, vac_fair, vac_base;
  int pairs_lower = 0;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    Scenario fair = with_seed(base, base.fleet.seed + rep);
    fair.params.lambda = 0.5;
    fair.params.alpha = 1.0;
    Scenario plain = fair;
    plain.params.lambda = 0;
    plain.params.alpha = 0;
    const auto tf = checked_run(fair);
    const auto tb = checked_run(plain);
    sd_fair.push_back(utility_deviation(tf).stddev);
    sd_base.push_back(utility_deviation(tb).stddev);
    vac_fair.push_back(vacancy_rate(tf));
    vac_base.push_back(vacancy_rate(tb));
    pairs_lower += sd_fair.back() < sd_base.back();
  }
  const double wall = seconds_since(t0);
  v.require(base.fleet.count == 20 && base.generator && base.generator->count == 40, "20 vehicles, 40 requests");
  v.require(mean(sd_fair) < mean(sd_base), "mean utility stddev lower");
  v.require(pairs_lower >= 8, "lower in >= 8/10 pairs");
  v.require(mean(vac_fair) < mean(vac_base), "mean vacancy lower");
  v.require(wall < 600.0, "under 10 min");
  v.detail << "utility stddev " << mean(sd_fair) << " vs " << mean(sd_base) << " (lower in " << pairs_lower
           << "/10), vacancy " << mean(vac_fair) << " vs " << mean(vac_base) << " (" << wall << " s)";
}

void runtime_shape(Verdict& v) {
  const auto t0 = Clock::now();
  const Scenario base = grid_scenario();
  constexpr int kSeeds = 3;
  auto timed_mean = [&](int vehicles, int requests) {
    double total = 0;
    for (int s = 0; s < kSeeds; ++s) {
      Scenario sc = with_seed(base, base.fleet.seed + static_cast<std::uint64_t>(s));
      sc.fleet.count = vehicles;
      sc.fleet.positions.clear();
      sc.generator->count = requests;
      sc.generator->rate.reset();
      double wall = 0;
      checked_run(sc, &wall);
      total += wall;
    }
    return total / kSeeds;
  };
  std::vector<double> by_vehicles, by_requests;
  for (int n : {25, 50, 75}) by_vehicles.push_back(timed_mean(n, 100));
  for (int n : {50, 100, 150}) by_requests.push_back(timed_mean(50, n));
  const auto [lo, hi] = std::minmax_element(by_vehicles.begin(), by_vehicles.end());
  const double ratio = *hi / *lo;
  const bool monotone = std::is_sorted(by_requests.begin(), by_requests.end());
  const double wall = seconds_since(t0);
  v.require(ratio < 2.0, "vehicle sweep within 2x");
  v.require(monotone, "request sweep non-decreasing");
  v.require(wall < 900.0, "under 15 min");
  v.detail.precision(3);
  v.detail << "vehicles 25/50/75: " << by_vehicles[0] << "/" << by_vehicles[1] << "/" << by_vehicles[2]
           << " s (ratio " << ratio << "); requests 50/100/150: " << by_requests[0] << "/" << by_requests[1] << "/"
           << by_requests[2] << " s (" << wall << " s incl. reruns)";
}

void simulation_invariants(Verdict& v) {
  v.require(run_log.runs > 0, "runs recorded");
  v.require(run_log.violations == 0, "zero violations");
  v.require(run_log.nondeterministic == 0, "reruns identical");
  v.detail << run_log.runs << " runs, " << run_log.violations << " violations, " << run_log.nondeterministic
           << " non-deterministic";
  for (const auto& s : run_log.first_violations) v.detail << "; " << s;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<void(Verdict&)>>> criteria{
      {1, six_state_plan}, {2, template_automata}, {3, routing_equivalence}, {4, ilp_exactness},
      {5, envy_example},   {6, fairness_direction}, {7, runtime_shape},      {8, simulation_invariants}};
  int failed = 0;
  for (const auto& [n, check] : criteria) {
    Verdict v;
    try {
      check(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
