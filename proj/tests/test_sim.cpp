#include <gtest/gtest.h>

#include <sstream>

#include "fairfleet/sim.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fairfleet;
using namespace fairfleet::testing;

namespace {

Scenario six_scenario() { return load_scenario(source_path("scenarios/six.json")); }

Scenario small_grid(int vehicles, int requests, std::uint64_t seed) {
  auto sc = load_scenario(source_path("scenarios/grid12.json"));
  sc.fleet.count = vehicles;
  sc.fleet.seed = seed;
  sc.generator->count = requests;
  sc.generator->seed = seed;
  return sc;
}

const RequestRecord& record(const MetricsTrace& t, const std::string& id) {
  for (const auto& r : t.requests)
    if (r.request->id == id) return r;
  throw std::out_of_range(id);
}

Scenario parse(const std::string& text) {
  return parse_scenario(nlohmann::json::parse(text), "inline.json", source_path("scenarios"));
}

}  // namespace

TEST(Sim, SixRun) {
  auto t = run(six_scenario());
  EXPECT_TRUE(t.violations.empty());
  EXPECT_DOUBLE_EQ(total_cost(t), 16);
  EXPECT_EQ(unassigned_count(t), 0);
  EXPECT_EQ(record(t, "r1").pickup, 2);
  EXPECT_EQ(record(t, "r1").drop, 17);
  EXPECT_EQ(record(t, "r2").pickup, 8);
  EXPECT_EQ(record(t, "r2").drop, 13);
  EXPECT_DOUBLE_EQ(vacancy_rate(t), 0.15);
  EXPECT_EQ(t.utility, (std::vector<Tick>{20}));
  EXPECT_EQ(t.ticks.back().completed, 2);
  EXPECT_EQ(t.batches.size(), 1u);
}

TEST(Sim, ZeroRequests) {
  auto sc = six_scenario();
  sc.requests.clear();
  sc.fleet.count = 3;
  sc.fleet.positions = {"A", "B", "C"};
  auto t = run(sc);
  EXPECT_DOUBLE_EQ(total_cost(t), 0);
  EXPECT_DOUBLE_EQ(vacancy_rate(t), 1.0);
  auto d = utility_deviation(t);
  EXPECT_DOUBLE_EQ(d.stddev, 0);
  EXPECT_DOUBLE_EQ(d.range, 0);
  EXPECT_TRUE(t.batches.empty());
}

TEST(Sim, DeviationArithmetic) {
  auto a = utility_deviation(std::vector<Tick>{0, 10});
  EXPECT_DOUBLE_EQ(a.stddev, 5);
  EXPECT_DOUBLE_EQ(a.range, 10);
  auto b = utility_deviation(std::vector<Tick>{2, 4, 6});
  EXPECT_NEAR(b.stddev, 1.632993, 1e-6);
  EXPECT_DOUBLE_EQ(b.range, 4);
  auto c = utility_deviation(std::vector<Tick>{7, 7, 7});
  EXPECT_DOUBLE_EQ(c.stddev, 0);
}

TEST(Sim, HalfBusyVacancy) {
  MetricsTrace t;
  t.vehicle_ids = {"v1"};
  for (Tick i = 0; i < 10; ++i) t.ticks.push_back(TickRecord{i, 0, 0, 0, 0, 0, i < 5 ? 1 : 0, false});
  EXPECT_DOUBLE_EQ(vacancy_rate(t), 0.5);
}

TEST(Sim, WeightCorrectionSteersSecondRequest) {
  // Round trip A -> C -> A; both vehicles end where they started.
  auto sc = six_scenario();
  sc.horizon = 30;
  sc.fleet.count = 2;
  sc.fleet.positions = {"A", "A"};
  sc.requests = {{"first", "C", "F A", 0, 1, 100, 100, {}, {}}, {"second", "C", "F A", 10, 1, 100, 100, {}, {}}};
  sc.params.alpha = 1.0;
  auto fair = run(sc);
  EXPECT_TRUE(fair.violations.empty());
  EXPECT_EQ(record(fair, "first").vehicle, "v1");
  EXPECT_EQ(record(fair, "second").vehicle, "v2");
  EXPECT_EQ(fair.utility, (std::vector<Tick>{2, 2}));
  sc.params.alpha = 0.0;
  auto plain = run(sc);
  EXPECT_EQ(record(plain, "second").vehicle, "v1");
  EXPECT_EQ(plain.utility, (std::vector<Tick>{4, 0}));
}

TEST(Sim, UnreachableRequestExpires) {
  auto sc = six_scenario();
  sc.requests = {{"far", "E", "F D", 0, 1, 0, 100, {}, {}}};
  auto t = run(sc);
  EXPECT_EQ(record(t, "far").status, RequestStatus::Expired);
  EXPECT_EQ(unassigned_count(t), 1);
  EXPECT_DOUBLE_EQ(total_cost(t), sc.params.lambda_ko);
  EXPECT_EQ(t.ticks[0].active, 1);
  EXPECT_EQ(t.ticks[1].expired, 1);
  EXPECT_TRUE(t.violations.empty());
}

TEST(Sim, ArrivalWhileMovingIsPlannedFromRoadEnd) {
  auto sc = six_scenario();
  sc.requests[1].t_req = 1;  // vehicle is on A -> C, arriving at 2
  auto t = run(sc);
  EXPECT_TRUE(t.violations.empty());
  EXPECT_EQ(t.batches.size(), 2u);
  EXPECT_EQ(record(t, "r1").status, RequestStatus::Completed);
  EXPECT_EQ(record(t, "r2").status, RequestStatus::Completed);
  EXPECT_EQ(record(t, "r1").pickup, 2);
  EXPECT_EQ(record(t, "r2").vehicle, "v1");
}

TEST(Sim, PickupAtVehiclePositionHappensOnCommit) {
  auto sc = six_scenario();
  sc.fleet.count = 2;
  sc.fleet.positions = {"A", "D"};
  sc.horizon = 40;
  sc.requests = {{"a", "C", "F D", 0, 1, 100, 100, {}, {}}, {"b", "A", "F C", 0, 1, 100, 100, {}, {}}};
  auto t = run(sc);
  EXPECT_TRUE(t.violations.empty());
  EXPECT_EQ(record(t, "a").status, RequestStatus::Completed);
  EXPECT_EQ(record(t, "b").status, RequestStatus::Completed);
  EXPECT_EQ(record(t, "b").pickup, 0);
}

TEST(Sim, SplitRequestCountsOnce) {
  auto sc = six_scenario();
  sc.fleet.count = 2;
  sc.fleet.capacity = 1;
  sc.fleet.positions = {"A", "A"};
  sc.requests = {{"big", "C", "F D", 0, 2, 100, 100, {"F D", "F B"}, {}}};
  auto t = run(sc);
  EXPECT_TRUE(t.violations.empty());
  ASSERT_EQ(t.requests.size(), 2u);
  EXPECT_EQ(record(t, "big#1").status, RequestStatus::Completed);
  EXPECT_EQ(record(t, "big#2").status, RequestStatus::Completed);
  EXPECT_NE(record(t, "big#1").vehicle, record(t, "big#2").vehicle);
  EXPECT_DOUBLE_EQ(total_cost(t), std::max(record(t, "big#1").delay, record(t, "big#2").delay));
  EXPECT_EQ(unassigned_count(t), 0);
}

TEST(Sim, GridRunIsDeterministicAndClean) {
  auto sc = small_grid(10, 30, 3);
  auto a = run(sc);
  auto b = run(sc);
  EXPECT_TRUE(a.violations.empty()) << a.violations.front();
  EXPECT_TRUE(same_outcome(a, b));
  std::ostringstream sa, sb;
  write_summary_csv(sa, a);
  write_summary_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.ticks.back().arrived, 30);
  int done = 0;
  for (const auto& r : a.requests) {
    if (r.status != RequestStatus::Completed) continue;
    ++done;
    EXPECT_LE(r.delay, r.request->max_delay);
    EXPECT_LE(r.pickup, r.request->pickup_deadline());
    EXPECT_GE(r.delay, 0);
  }
  EXPECT_GT(done, 0);
}

TEST(Sim, PlanCacheDoesNotChangeOutcomes) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto sc = small_grid(12, 40, seed);
    SimOptions plain;
    plain.plan_cache = false;
    EXPECT_TRUE(same_outcome(run(sc), run(sc, plain))) << "seed " << seed;
  }
}

TEST(Sim, TraceCsvShape) {
  auto t = run(six_scenario());
  std::ostringstream out;
  write_trace_csv(out, t);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tick,arrived,active,onboard,completed,expired,busy,batch,seats_v1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 20);
  std::ostringstream s;
  write_summary_csv(s, t);
  EXPECT_NE(s.str().find("J,16\n"), std::string::npos);
  EXPECT_EQ(s.str().find("rtv_seconds"), std::string::npos);
  std::ostringstream timed;
  write_summary_csv(timed, t, true);
  EXPECT_NE(timed.str().find("rtv_seconds"), std::string::npos);
}

TEST(Generator, RateZeroIsEmpty) {
  auto net = RoadNetwork::build(generate_grid({}));
  GeneratorSpec g;
  g.rate = 0.0;
  EXPECT_TRUE(generate_requests(net, g, 1200, 60, {}).empty());
}

TEST(Generator, SeededAndSorted) {
  auto net = RoadNetwork::build(generate_grid({}));
  GeneratorSpec g;
  g.rate = 2.0;
  g.seed = 5;
  auto a = generate_requests(net, g, 100 * 60, 60, {});
  auto b = generate_requests(net, g, 100 * 60, 60, {});
  EXPECT_EQ(stream_hash(a), stream_hash(b));
  EXPECT_NEAR(static_cast<double>(a.size()), 200.0, 45.0);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LE(a[i - 1].t_req, a[i].t_req);
  for (const auto& r : a) EXPECT_NO_THROW(make_request(net, r)) << r.formula;
  g.seed = 6;
  EXPECT_NE(stream_hash(generate_requests(net, g, 100 * 60, 60, {})), stream_hash(a));
}

TEST(Generator, CountModeHonoursCountAndMix) {
  auto net = RoadNetwork::build(generate_grid({}));
  GeneratorSpec g;
  g.count = 40;
  g.weights = {0, 0, 0, 1};
  auto reqs = generate_requests(net, g, 1200, 60, {});
  ASSERT_EQ(reqs.size(), 40u);
  for (const auto& r : reqs) {
    EXPECT_NE(r.formula.find('!'), std::string::npos) << r.formula;
    EXPECT_LT(r.t_req, 1200);
  }
}

TEST(Generator, TemplatesHaveWitnesses) {
  auto net = RoadNetwork::build(generate_grid({}));
  std::mt19937_64 rng(11);
  for (int kind = 1; kind <= 4; ++kind)
    for (int i = 0; i < 10; ++i) {
      auto inst = draw_template(net, kind, rng);
      ASSERT_TRUE(inst);
      auto r = make_request(net, {"x", inst->pick, inst->body, 0, 1, 0, 0, {}, {}});
      EXPECT_LE(r->full.atoms().size(), 4u);
      EXPECT_TRUE(r->t_star.has_value()) << inst->body;
    }
}

TEST(Generator, SecondTemplateAcceptsWitnessWord) {
  auto f = parse_formula("F (p & F ((s1 | s2) & s3))");
  auto dfa = to_dfa(f);
  EXPECT_TRUE(accepts(dfa, {{}, {"p"}, {}, {"s1", "s3"}}));
  EXPECT_FALSE(accepts(dfa, {{"p"}, {"s1"}, {"s3"}}));
}

TEST(Scenario, RejectsBadDocuments) {
  const std::string base =
      R"({"network": "six.net", "horizon": 20, "ticks_per_minute": 1, "fleet": {"count": 1, "positions": ["A"]})";
  EXPECT_NO_THROW(parse(base + "}"));
  EXPECT_THROW(parse(base + R"(, "colour": 1})"), ConfigError);
  EXPECT_THROW(parse(R"({"network": "six.net", "horizon": 20, "fleet": {"count": 1}, "params": {"lambda": 2}})"),
               ConfigError);
  EXPECT_THROW(parse(R"({"network": "six.net", "horizon": 0, "fleet": {"count": 1}})"), ConfigError);
  EXPECT_THROW(parse(base + R"(, "requests": [{"id": "x", "pickup": "nowhere", "formula": "F D"}]})"), ConfigError);
  EXPECT_THROW(parse(base + R"(, "requests": [{"id": "x", "pickup": "C", "formula": "F (D &"}]})"), ConfigError);
  EXPECT_THROW(parse(base + R"(, "generator": {"count": 3, "rate": 1}})"), ConfigError);
  EXPECT_THROW(parse(R"({"network": "missing.net", "horizon": 20, "fleet": {"count": 1}})"), Error);
  EXPECT_THROW(load_scenario(source_path("scenarios/does-not-exist.json")), ConfigError);
}

TEST(Scenario, DefaultsConvertMinutes) {
  auto sc = parse(R"({"network": {"grid": {"rows": 3, "cols": 3}}, "horizon": 5, "fleet": {"count": 2}})");
  EXPECT_EQ(sc.ticks_per_minute, 60);
  EXPECT_EQ(sc.horizon, 300);
  EXPECT_EQ(sc.params.max_wait, 120);
  EXPECT_EQ(sc.params.max_delay, 240);
  EXPECT_DOUBLE_EQ(sc.params.lambda, 0.5);
  EXPECT_DOUBLE_EQ(sc.params.alpha, 1.0);
  EXPECT_EQ(sc.fleet.capacity, 2);
}
