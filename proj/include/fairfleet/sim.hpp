#pragma once

// Tick-driven fleet simulation with event-triggered batch re-optimization.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairfleet/assign.hpp"
#include "fairfleet/matching.hpp"
#include "fairfleet/routing.hpp"
#include "fairfleet/scenario.hpp"

namespace fairfleet {

enum class RequestStatus { Pending, Active, Assigned, Onboard, Completed, Expired };

inline const char* to_string(RequestStatus s) {
  switch (s) {
    case RequestStatus::Pending: return "pending";
    case RequestStatus::Active: return "active";
    case RequestStatus::Assigned: return "assigned";
    case RequestStatus::Onboard: return "onboard";
    case RequestStatus::Completed: return "completed";
    case RequestStatus::Expired: return "expired";
  }
  return "?";
}

struct RequestRecord {
  RequestPtr request;
  RequestStatus status = RequestStatus::Pending;
  std::string vehicle;  // holder once assigned; fixed after pick-up
  Tick pickup = -1;
  Tick drop = -1;
  Tick delay = 0;
  bool operator==(const RequestRecord& o) const {
    return request->id == o.request->id && status == o.status && vehicle == o.vehicle && pickup == o.pickup &&
           drop == o.drop && delay == o.delay;
  }
};

struct TickRecord {
  Tick tick = 0;
  int arrived = 0;
  int active = 0;  // arrived, not yet picked up, not expired
  int onboard = 0;
  int completed = 0;
  int expired = 0;
  int busy = 0;
  bool batch = false;
  friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

struct BatchRecord {
  Tick tick = 0;
  std::size_t requests = 0;
  std::size_t vehicles = 0;
  std::size_t trips = 0;
  std::size_t edges = 0;
  std::size_t envy_rows = 0;
  std::size_t assigned = 0;
  double objective = 0;
  bool proven_optimal = true;
  std::size_t nodes = 0;  // branch-and-bound nodes
  double rtv_seconds = 0;
  double ilp_seconds = 0;
};

struct MetricsTrace {
  Tick horizon = 0;
  double lambda_ko = 0;
  std::uint64_t stream_hash = 0;
  std::vector<std::string> vehicle_ids;
  std::vector<int> capacities;
  std::vector<TickRecord> ticks;
  std::vector<int> occupancy;  // seats in use, row-major [tick][vehicle]
  std::vector<Tick> utility;   // per-vehicle accumulated seat-ticks
  std::vector<RequestRecord> requests;
  std::vector<BatchRecord> batches;
  std::vector<std::string> violations;

  int seats(std::size_t tick, std::size_t vehicle) const { return occupancy[tick * vehicle_ids.size() + vehicle]; }
  double rtv_seconds() const {
    double s = 0;
    for (const auto& b : batches) s += b.rtv_seconds;
    return s;
  }
  double ilp_seconds() const {
    double s = 0;
    for (const auto& b : batches) s += b.ilp_seconds;
    return s;
  }
};

/// Original requests (groups) that ended in the unassigned set.
inline int unassigned_count(const MetricsTrace& t) {
  std::map<std::string, bool> lost;
  for (const auto& r : t.requests) lost[r.request->group] |= r.status == RequestStatus::Expired;
  int n = 0;
  for (const auto& [g, l] : lost) n += l;
  return n;
}

/// J: delays of completed requests plus lambda_ko per unassigned request.
/// A split request counts once, with the largest delay of its parts.
inline double total_cost(const MetricsTrace& t) {
  struct Acc {
    bool lost = false;
    bool done = true;
    Tick delay = 0;
  };
  std::map<std::string, Acc> groups;
  for (const auto& r : t.requests) {
    auto& g = groups[r.request->group];
    g.lost |= r.status == RequestStatus::Expired;
    g.done &= r.status == RequestStatus::Completed;
    g.delay = std::max(g.delay, r.delay);
  }
  double j = 0;
  for (const auto& [id, g] : groups) {
    if (g.lost) j += t.lambda_ko;
    else if (g.done) j += static_cast<double>(g.delay);
  }
  return j;
}

/// Fraction of vehicle-ticks with no passengers and no plan in execution.
inline double vacancy_rate(const MetricsTrace& t) {
  const double slots = static_cast<double>(t.ticks.size() * t.vehicle_ids.size());
  if (slots == 0) return 1.0;
  double busy = 0;
  for (const auto& r : t.ticks) busy += r.busy;
  return 1.0 - busy / slots;
}

struct Deviation {
  double stddev = 0;
  double range = 0;
};

inline Deviation utility_deviation(const std::vector<Tick>& u) {
  if (u.empty()) return {};
  double mean = 0;
  for (auto x : u) mean += static_cast<double>(x);
  mean /= static_cast<double>(u.size());
  double var = 0;
  for (auto x : u) var += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
  var /= static_cast<double>(u.size());
  const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
  return {std::sqrt(var), static_cast<double>(*hi - *lo)};
}

inline Deviation utility_deviation(const MetricsTrace& t) { return utility_deviation(t.utility); }

/// Everything but wall-clock timings.
inline bool same_outcome(const MetricsTrace& a, const MetricsTrace& b) {
  return a.stream_hash == b.stream_hash && a.vehicle_ids == b.vehicle_ids && a.ticks == b.ticks &&
         a.occupancy == b.occupancy && a.utility == b.utility && a.requests == b.requests &&
         a.violations == b.violations;
}

struct SimOptions {
  std::size_t node_limit = 0;  // per-batch branch-and-bound cap; 0 = exact
  bool check_invariants = true;
  bool plan_cache = true;  // reuse empty-vehicle plans across batches
};

class Simulator {
 public:
  explicit Simulator(const Scenario& sc, SimOptions options = {})
      : sc_(sc), net_(*sc.network), options_(options), dist_(net_) {
    planner_.distances = &dist_;
    if (options_.plan_cache) planner_.cache = &cache_;
  }

  MetricsTrace run() {
    init();
    for (Tick t = 0; t < sc_.horizon; ++t) step(t);
    finish();
    return std::move(trace_);
  }

 private:
  struct Vehicle {
    VehicleState state;  // position = last state reached
    std::vector<Waypoint> route;
    std::size_t next = 0;  // first waypoint not yet reached
    std::vector<std::size_t> pending;  // assigned, not yet picked up
    Tick utility = 0;

    bool executing() const { return next < route.size(); }
  };

  struct Anchor {
    StateIndex state;
    Tick time;
    bool moving;
  };

  void init() {
    const auto specs = request_stream(sc_);
    trace_ = {};
    trace_.horizon = sc_.horizon;
    trace_.lambda_ko = sc_.params.lambda_ko;
    trace_.stream_hash = stream_hash(specs);
    for (const auto& spec : specs)
      for (const auto& part : split_subrequests(spec, sc_.fleet.capacity)) {
        RequestRecord rec;
        rec.request = make_request(net_, part);
        index_[rec.request->id] = trace_.requests.size();
        trace_.requests.push_back(std::move(rec));
      }
    std::mt19937_64 rng(sc_.fleet.seed);
    std::uniform_int_distribution<std::size_t> any(0, net_.size() - 1);
    const int width = static_cast<int>(std::to_string(sc_.fleet.count).size());
    fleet_.clear();
    for (int i = 0; i < sc_.fleet.count; ++i) {
      std::ostringstream id;
      id << 'v' << std::setw(width) << std::setfill('0') << i + 1;
      Vehicle v;
      v.state.id = id.str();
      v.state.capacity = sc_.fleet.capacity;
      v.state.position = sc_.fleet.positions.empty() ? static_cast<StateIndex>(any(rng))
                                                     : net_.index_of(sc_.fleet.positions[i]);
      fleet_.push_back(std::move(v));
      trace_.vehicle_ids.push_back(fleet_.back().state.id);
      trace_.capacities.push_back(sc_.fleet.capacity);
    }
    trace_.utility.assign(fleet_.size(), 0);
    next_arrival_ = 0;
    arrived_ = 0;
  }

  void step(Tick t) {
    bool event = false;
    for (auto& v : fleet_) {
      while (v.executing() && v.route[v.next].time <= t) {
        if (v.route[v.next].time < t) violation(t, "vehicle " + v.state.id + " skipped a waypoint");
        event |= reach(v, v.route[v.next].state, t);
        ++v.next;
        event |= !v.executing();
      }
    }
    auto& reqs = trace_.requests;
    while (next_arrival_ < reqs.size() && reqs[next_arrival_].request->t_req <= t) {
      reqs[next_arrival_++].status = RequestStatus::Active;
      ++arrived_;
      event = true;
    }
    for (std::size_t i = 0; i < next_arrival_; ++i) {
      auto& r = reqs[i];
      if (t <= r.request->pickup_deadline()) continue;
      if (r.status == RequestStatus::Active) r.status = RequestStatus::Expired;
      else if (r.status == RequestStatus::Assigned) violation(t, "request " + r.request->id + " missed its pick-up");
    }
    bool batched = false;
    if (event && std::any_of(reqs.begin(), reqs.begin() + static_cast<std::ptrdiff_t>(next_arrival_), [](const auto& r) {
          return r.status == RequestStatus::Active || r.status == RequestStatus::Assigned;
        })) {
      batch(t);
      batched = true;
    }
    record(t, batched);
  }

  // Arrival at `s`: advance onboard automata, drop satisfied requests, then
  // pick up pending requests located here. Returns true on a drop.
  bool reach(Vehicle& v, StateIndex s, Tick t) {
    v.state.position = s;
    bool dropped = false;
    auto& on = v.state.onboard;
    for (auto& o : on) o.dfa_state = o.request->dfa->next(o.dfa_state, o.request->symbols[s]);
    for (auto it = on.begin(); it != on.end();) {
      if (it->request->dfa->is_accepting(it->dfa_state)) {
        complete(v, *it, t);
        it = on.erase(it);
        dropped = true;
      } else {
        ++it;
      }
    }
    dropped |= pick_up_at(v, s, t);
    return dropped;
  }

  bool pick_up_at(Vehicle& v, StateIndex s, Tick t) {
    bool dropped = false;
    for (auto it = v.pending.begin(); it != v.pending.end();) {
      auto& rec = trace_.requests[*it];
      if (rec.request->pick_state != s) {
        ++it;
        continue;
      }
      rec.status = RequestStatus::Onboard;
      rec.pickup = t;
      if (t > rec.request->pickup_deadline()) violation(t, "request " + rec.request->id + " picked up late");
      OnboardRequest o{rec.request, rec.request->seeded_state(), t};
      if (rec.request->dfa->is_accepting(o.dfa_state)) {
        complete(v, o, t);
        dropped = true;
      } else {
        v.state.onboard.push_back(std::move(o));
      }
      it = v.pending.erase(it);
    }
    return dropped;
  }

  void complete(const Vehicle& v, const OnboardRequest& o, Tick t) {
    auto& rec = trace_.requests[index_.at(o.request->id)];
    if (rec.vehicle != v.state.id) violation(t, "request " + rec.request->id + " changed vehicle while onboard");
    rec.status = RequestStatus::Completed;
    rec.drop = t;
    const auto& r = *o.request;
    rec.delay = t - r.t_req - r.t_star.value_or(0);
    if (!r.t_star || rec.delay > r.max_delay) violation(t, "request " + r.id + " exceeded its delay tolerance");
  }

  Anchor anchor(const Vehicle& v, Tick t) const {
    if (v.executing() && !(v.next > 0 && v.route[v.next - 1].time == t))
      return {v.route[v.next].state, v.route[v.next].time, true};
    return {v.state.position, t, false};
  }

  // Vehicle state as seen by the planner: a moving vehicle is planned from
  // the end of its current road, with onboard automata advanced there.
  VehicleState planning_state(const Vehicle& v, const Anchor& a) const {
    VehicleState s = v.state;
    s.position = a.state;
    s.available_at = a.time;
    s.utility_history = static_cast<double>(v.utility);
    if (a.moving) {
      s.onboard.clear();
      for (auto o : v.state.onboard) {
        o.dfa_state = o.request->dfa->next(o.dfa_state, o.request->symbols[a.state]);
        if (!o.request->dfa->is_accepting(o.dfa_state)) s.onboard.push_back(o);
      }
    }
    return s;
  }

  void batch(Tick t) {
    using clock = std::chrono::steady_clock;
    BatchRecord br;
    br.tick = t;
    auto& reqs = trace_.requests;
    std::vector<RequestPtr> active;
    for (std::size_t i = 0; i < next_arrival_; ++i)
      if (reqs[i].status == RequestStatus::Active || reqs[i].status == RequestStatus::Assigned)
        active.push_back(reqs[i].request);
    std::vector<VehicleState> avail, all;
    std::vector<Anchor> anchors(fleet_.size());
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t k = 0; k < fleet_.size(); ++k) {
      anchors[k] = anchor(fleet_[k], t);
      auto ps = planning_state(fleet_[k], anchors[k]);
      slot[ps.id] = k;
      if (ps.available_capacity() > 0) avail.push_back(ps);
      all.push_back(std::move(ps));
    }
    const auto t0 = clock::now();
    auto rv = build_rv_graph(net_, active, avail, t, planner_);
    auto trips = enumerate_trips(rv);
    auto rtv = build_rtv_graph(net_, rv, std::move(trips), t, planner_);
    apply_weight_correction(rtv, all, sc_.params.alpha);
    const auto t1 = clock::now();
    const auto model = formulate(rtv, sc_.params.lambda_ko, sc_.params.lambda);
    const auto warm = greedy_warm_start(rtv, model);
    const auto best = solve(model, &warm, SolveOptions{options_.node_limit});
    const auto t2 = clock::now();
    br.rtv_seconds = std::chrono::duration<double>(t1 - t0).count();
    br.ilp_seconds = std::chrono::duration<double>(t2 - t1).count();
    br.requests = active.size();
    br.vehicles = avail.size();
    br.trips = rtv.trips.size();
    br.edges = rtv.edges.size();
    br.envy_rows = model.count(RowKind::Envy);
    br.nodes = best.nodes;
    br.objective = best.objective;
    br.proven_optimal = best.proven_optimal;
    br.assigned = best.edges.size();

    // Release every unpicked assignment held by an available vehicle.
    std::vector<bool> released(fleet_.size(), false);
    for (const auto& vs : avail) {
      auto& v = fleet_[slot.at(vs.id)];
      for (auto i : v.pending) {
        reqs[i].status = RequestStatus::Active;
        reqs[i].vehicle.clear();
      }
      released[slot.at(vs.id)] = !v.pending.empty();
      v.pending.clear();
    }
    std::vector<bool> assigned(fleet_.size(), false);
    for (auto e : best.edges) {
      const auto& edge = rtv.edges[e];
      const std::size_t k = slot.at(rtv.vehicles[edge.vehicle].id);
      std::vector<std::size_t> members;
      for (auto m : rtv.trips[edge.trip].members) members.push_back(index_.at(rtv.requests[m]->id));
      commit(k, anchors[k], edge.plan, members, t);
      assigned[k] = true;
    }
    for (std::size_t k = 0; k < fleet_.size(); ++k) {
      if (!released[k] || assigned[k]) continue;
      auto plan = plan_trip(net_, all[k], std::span<const RequestPtr>{}, t, planner_);
      if (!plan) {
        violation(t, "vehicle " + fleet_[k].state.id + " cannot finish its onboard requests");
        continue;
      }
      commit(k, anchors[k], *plan, {}, t);
    }
    trace_.batches.push_back(br);
  }

  void commit(std::size_t k, const Anchor& a, const RoutePlan& plan, const std::vector<std::size_t>& members, Tick t) {
    auto& v = fleet_[k];
    v.route = plan.route;
    v.pending = members;
    for (auto i : members) {
      trace_.requests[i].status = RequestStatus::Assigned;
      trace_.requests[i].vehicle = v.state.id;
    }
    if (a.moving) {
      v.next = 0;
    } else {
      v.next = 1;
      pick_up_at(v, a.state, t);
    }
  }

  void record(Tick t, bool batched) {
    TickRecord r;
    r.tick = t;
    r.batch = batched;
    r.arrived = arrived_;
    for (std::size_t i = 0; i < next_arrival_; ++i) {
      switch (trace_.requests[i].status) {
        case RequestStatus::Active:
        case RequestStatus::Assigned: ++r.active; break;
        case RequestStatus::Onboard: ++r.onboard; break;
        case RequestStatus::Completed: ++r.completed; break;
        case RequestStatus::Expired: ++r.expired; break;
        case RequestStatus::Pending: violation(t, "arrived request still pending"); break;
      }
    }
    for (std::size_t k = 0; k < fleet_.size(); ++k) {
      auto& v = fleet_[k];
      const int seats = v.state.seats_in_use();
      trace_.occupancy.push_back(seats);
      v.utility += seats;
      if (seats > 0 || v.executing()) ++r.busy;
      if (options_.check_invariants && (seats < 0 || seats > v.state.capacity))
        violation(t, "vehicle " + v.state.id + " over capacity");
    }
    if (options_.check_invariants) {
      if (r.arrived != r.active + r.onboard + r.completed + r.expired) violation(t, "request conservation broken");
      if (r.completed > r.arrived) violation(t, "more completions than arrivals");
    }
    trace_.ticks.push_back(r);
  }

  void finish() {
    for (std::size_t k = 0; k < fleet_.size(); ++k) trace_.utility[k] = fleet_[k].utility;
    if (!options_.check_invariants) return;
    // Seat-ticks recomputed from request records must match the per-tick log.
    std::vector<Tick> from_requests(fleet_.size(), 0);
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t k = 0; k < fleet_.size(); ++k) slot[fleet_[k].state.id] = k;
    for (const auto& r : trace_.requests) {
      if (r.status == RequestStatus::Expired && r.pickup >= 0)
        violation(sc_.horizon, "expired request " + r.request->id + " was picked up");
      if (r.pickup < 0) continue;
      const Tick end = r.drop >= 0 ? r.drop : sc_.horizon;
      from_requests[slot.at(r.vehicle)] += r.request->seats * (end - r.pickup);
    }
    if (from_requests != trace_.utility) violation(sc_.horizon, "utility accounting mismatch");
  }

  void violation(Tick t, std::string what) {
    trace_.violations.push_back("t=" + std::to_string(t) + ": " + std::move(what));
  }

  const Scenario& sc_;
  const RoadNetwork& net_;
  SimOptions options_;
  DistanceTable dist_;
  PlanCache cache_;
  PlannerOptions planner_;
  MetricsTrace trace_;
  std::vector<Vehicle> fleet_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t next_arrival_ = 0;
  int arrived_ = 0;
};

inline MetricsTrace run(const Scenario& sc, SimOptions options = {}) { return Simulator(sc, options).run(); }

// ---------------------------------------------------------------------------
// Export

inline void write_trace_csv(std::ostream& out, const MetricsTrace& t) {
  out << "tick,arrived,active,onboard,completed,expired,busy,batch";
  for (const auto& id : t.vehicle_ids) out << ",seats_" << id;
  out << '\n';
  for (std::size_t i = 0; i < t.ticks.size(); ++i) {
    const auto& r = t.ticks[i];
    out << r.tick << ',' << r.arrived << ',' << r.active << ',' << r.onboard << ',' << r.completed << ','
        << r.expired << ',' << r.busy << ',' << (r.batch ? 1 : 0);
    for (std::size_t v = 0; v < t.vehicle_ids.size(); ++v) out << ',' << t.seats(i, v);
    out << '\n';
  }
}

inline void write_requests_csv(std::ostream& out, const MetricsTrace& t) {
  out << "request,group,t_req,t_star,status,vehicle,pickup,drop,delay\n";
  for (const auto& r : t.requests) {
    out << r.request->id << ',' << r.request->group << ',' << r.request->t_req << ',';
    if (r.request->t_star) out << *r.request->t_star;
    out << ',' << to_string(r.status) << ',' << r.vehicle << ',';
    if (r.pickup >= 0) out << r.pickup;
    out << ',';
    if (r.drop >= 0) out << r.drop;
    out << ',' << (r.status == RequestStatus::Completed ? std::to_string(r.delay) : std::string()) << '\n';
  }
}

/// Two-column key,value summary. Timings are wall-clock and therefore left
/// out unless asked for.
inline void write_summary_csv(std::ostream& out, const MetricsTrace& t, bool timings = false) {
  const auto dev = utility_deviation(t);
  int completed = 0;
  for (const auto& r : t.requests) completed += r.status == RequestStatus::Completed;
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << t.stream_hash;
  out << std::setprecision(10);
  out << "key,value\n";
  out << "horizon," << t.horizon << '\n';
  out << "vehicles," << t.vehicle_ids.size() << '\n';
  out << "requests," << t.requests.size() << '\n';
  out << "completed," << completed << '\n';
  out << "unassigned," << unassigned_count(t) << '\n';
  out << "J," << total_cost(t) << '\n';
  out << "vacancy_rate," << vacancy_rate(t) << '\n';
  out << "utility_stddev," << dev.stddev << '\n';
  out << "utility_range," << dev.range << '\n';
  out << "batches," << t.batches.size() << '\n';
  out << "violations," << t.violations.size() << '\n';
  out << "stream_hash," << hash.str() << '\n';
  if (timings) {
    out << "rtv_seconds," << t.rtv_seconds() << '\n';
    out << "ilp_seconds," << t.ilp_seconds() << '\n';
  }
}

}  // namespace fairfleet
