#pragma once

// Route planning on the product of a vehicle's road network with one DFA
// per request, subject to pick-up and delay deadlines.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairfleet/errors.hpp"
#include "fairfleet/network.hpp"
#include "fairfleet/scltl.hpp"

namespace fairfleet {

/// Scenario-level description of a request. Formulas are kept as text.
struct RequestSpec {
  std::string id;
  std::string pick_prop;
  std::string formula;  // body; the request is F(pick & body)
  Tick t_req = 0;
  int seats = 1;
  Tick max_wait = 0;
  Tick max_delay = 0;
  std::vector<std::string> sub_formulas;  // decomposition for multi-vehicle service
  std::string group;                      // set on sub-requests; empty otherwise
};

struct Request {
  std::string id;
  std::string group;  // shared by sub-requests of one original request
  std::string pick_prop;
  StateIndex pick_state;
  Formula body;
  Formula full;
  std::shared_ptr<const Dfa> dfa;     // automaton of `full`
  std::vector<Dfa::Symbol> symbols;   // dfa symbol of each network state
  Tick t_req;
  int seats;
  Tick max_wait;
  Tick max_delay;
  std::optional<Tick> t_star;  // empty when no run satisfies the request
  std::vector<Tick> remaining;  // [node * |Q| + q]: least time to acceptance

  Tick time_to_accept(StateIndex node, Dfa::State q) const { return remaining[node * dfa->state_count() + q]; }

  Tick pickup_deadline() const { return t_req + max_wait; }
  std::optional<Tick> drop_deadline() const {
    if (!t_star) return std::nullopt;
    return t_req + *t_star + max_delay;
  }
  /// DFA state after picking up at the pick-up state.
  Dfa::State seeded_state() const { return dfa->next(dfa->initial(), symbols[pick_state]); }
};

using RequestPtr = std::shared_ptr<const Request>;

/// Minimal duration of a run that starts at the pick-up state at t_req and
/// drives the request automaton to acceptance. Empty if no such run exists.
inline std::optional<Duration> optimal_satisfaction_time(const RoadNetwork& net, const Request& r) {
  const Dfa& dfa = *r.dfa;
  const std::size_t nq = dfa.state_count();
  std::vector<Tick> dist(net.size() * nq, kUnreachable);
  using Item = std::pair<Tick, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const Dfa::State q0 = r.seeded_state();
  if (dfa.is_accepting(q0)) return Duration(0);
  if (!dfa.can_accept(q0)) return std::nullopt;
  dist[r.pick_state * nq + q0] = 0;
  pq.push({0, r.pick_state * nq + q0});
  while (!pq.empty()) {
    auto [d, key] = pq.top();
    pq.pop();
    if (d != dist[key]) continue;
    const auto s = static_cast<StateIndex>(key / nq);
    const auto q = static_cast<Dfa::State>(key % nq);
    if (dfa.is_accepting(q)) return Duration(d);
    for (const auto& road : net.successors(s)) {
      const Dfa::State q2 = dfa.next(q, r.symbols[road.to]);
      if (!dfa.can_accept(q2)) continue;
      const std::size_t k2 = road.to * nq + q2;
      if (d + road.weight < dist[k2]) {
        dist[k2] = d + road.weight;
        pq.push({dist[k2], k2});
      }
    }
  }
  return std::nullopt;
}

namespace detail {

// Backward search over (node, automaton state) from every accepting pair.
// The automaton state is the one reached after reading the node's label.
inline std::vector<Tick> times_to_accept(const RoadNetwork& net, const Dfa& dfa,
                                         const std::vector<Dfa::Symbol>& symbols) {
  const std::size_t nq = dfa.state_count();
  std::vector<Tick> dist(net.size() * nq, kUnreachable);
  using Item = std::pair<Tick, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (StateIndex s = 0; s < net.size(); ++s)
    for (Dfa::State q = 0; q < nq; ++q)
      if (dfa.is_accepting(q)) {
        dist[s * nq + q] = 0;
        pq.push({0, s * nq + q});
      }
  while (!pq.empty()) {
    auto [d, key] = pq.top();
    pq.pop();
    if (d != dist[key]) continue;
    const auto to = static_cast<StateIndex>(key / nq);
    const auto q2 = static_cast<Dfa::State>(key % nq);
    for (const auto& road : net.predecessors(to)) {
      for (Dfa::State q = 0; q < nq; ++q) {
        if (dfa.next(q, symbols[to]) != q2) continue;
        const std::size_t k = road.to * nq + q;
        if (d + road.weight < dist[k]) {
          dist[k] = d + road.weight;
          pq.push({dist[k], k});
        }
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Resolves the pick-up state, compiles the DFA of F(pick & body), and
/// computes t*.
inline RequestPtr make_request(const RoadNetwork& net, const RequestSpec& spec) {
  if (spec.seats < 1) throw ValidationError("request " + spec.id + ": seats must be >= 1");
  if (spec.max_wait < 0 || spec.max_delay < 0)
    throw ValidationError("request " + spec.id + ": waiting and delay tolerances must be non-negative");
  const auto carriers = net.states_with(spec.pick_prop);
  if (carriers.size() != 1)
    throw ValidationError("request " + spec.id + ": pick-up proposition '" + spec.pick_prop + "' labels " +
                          std::to_string(carriers.size()) + " states, expected exactly one");
  Formula body = parse_formula(spec.formula);
  for (const auto& a : body.atoms())
    if (!std::binary_search(net.propositions().begin(), net.propositions().end(), a))
      throw ValidationError("request " + spec.id + ": proposition '" + a + "' does not occur in the network");
  Formula full = Formula::eventually(Formula::conj(Formula::atom(spec.pick_prop), body));
  auto dfa = std::make_shared<const Dfa>(to_dfa(full));
  std::vector<Dfa::Symbol> symbols(net.size());
  for (StateIndex s = 0; s < net.size(); ++s) symbols[s] = dfa->symbol_for(net.label(s));
  Request r{spec.id,
            spec.group.empty() ? spec.id : spec.group,
            spec.pick_prop,
            carriers.front(),
            std::move(body),
            std::move(full),
            std::move(dfa),
            std::move(symbols),
            spec.t_req,
            spec.seats,
            spec.max_wait,
            spec.max_delay,
            std::nullopt,
            {}};
  if (auto t = optimal_satisfaction_time(net, r)) r.t_star = t->ticks();
  r.remaining = detail::times_to_accept(net, *r.dfa, r.symbols);
  return std::make_shared<const Request>(std::move(r));
}

struct OnboardRequest {
  RequestPtr request;
  Dfa::State dfa_state;  // after reading the label of the vehicle position
  Tick pickup_time;
};

struct VehicleState {
  std::string id;
  int capacity = 2;
  StateIndex position = 0;
  Tick available_at = 0;
  std::vector<OnboardRequest> onboard;
  double utility_history = 0;

  int seats_in_use() const {
    int n = 0;
    for (const auto& o : onboard) n += o.request->seats;
    return n;
  }
  int available_capacity() const { return capacity - seats_in_use(); }
};

struct Waypoint {
  StateIndex state;
  Tick time;
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

struct RequestEvent {
  std::string request_id;
  Tick pickup;
  Tick drop;
  Tick delay;
  int seats;
  bool onboard_at_start;
};

struct RoutePlan {
  std::vector<Waypoint> route;  // starts at the vehicle position
  std::vector<RequestEvent> events;
  Tick start = 0;
  Tick completion = 0;
  Tick trip_cost = 0;     // sum of delays of the newly assigned requests
  Tick trip_utility = 0;  // occupied seat-ticks over [start, completion)

  Tick duration() const { return completion - start; }
  const RequestEvent* event_for(std::string_view id) const {
    for (const auto& e : events)
      if (e.request_id == id) return &e;
    return nullptr;
  }
};

struct SearchStats {
  std::size_t labels_pushed = 0;
  std::size_t labels_settled = 0;
  std::size_t max_frontier = 0;
};

/// Plans of empty vehicles keyed by start state and request list. Every
/// constraint is an absolute deadline, so a plan found at t0 shifted to a
/// later start stays optimal while it still meets the deadlines, and an
/// infeasible verdict stays infeasible.
class PlanCache {
 public:
  std::size_t hits = 0, misses = 0;

  static std::string key(StateIndex start, std::span<const RequestPtr> reqs) {
    std::string k = std::to_string(start);
    for (const auto& r : reqs) (k += '|') += r->id;
    return k;
  }

  // Hit: the cached verdict moved to start t0. Miss: nullopt.
  std::optional<std::optional<RoutePlan>> lookup(const std::string& k, Tick t0,
                                                 std::span<const RequestPtr> reqs) {
    const auto it = entries_.find(k);
    if (it == entries_.end() || t0 < it->second.t0) return std::nullopt;
    const Entry& e = it->second;
    if (!e.plan) {
      ++hits;
      return std::optional<RoutePlan>{};
    }
    const Tick d = t0 - e.t0;
    RoutePlan p = *e.plan;
    for (auto& w : p.route) w.time += d;
    p.start += d;
    p.completion += d;
    for (std::size_t i = 0; i < p.events.size(); ++i) {
      auto& ev = p.events[i];
      ev.pickup += d;
      ev.drop += d;
      ev.delay += d;
      p.trip_cost += d;
      if (ev.pickup > reqs[i]->pickup_deadline() || ev.drop > *reqs[i]->drop_deadline()) return std::nullopt;
    }
    ++hits;
    return std::optional<RoutePlan>{std::move(p)};
  }

  void store(std::string k, Tick t0, const std::optional<RoutePlan>& plan) {
    ++misses;
    entries_[std::move(k)] = {t0, plan};
  }

 private:
  struct Entry {
    Tick t0;
    std::optional<RoutePlan> plan;
  };
  std::unordered_map<std::string, Entry> entries_;
};

struct PlannerOptions {
  const DistanceTable* distances = nullptr;  // enables pick-up reachability pruning
  SearchStats* stats = nullptr;
  PlanCache* cache = nullptr;  // reuse plans of empty vehicles across batches
};

inline constexpr std::size_t kMaxTripRequests = 8;

namespace detail {

struct Tracked {
  const Request* request;
  bool onboard;
  Dfa::State onboard_state;
  Tick pickup_time;  // onboard only
  Tick drop_deadline;
};

struct ProductState {
  StateIndex node;
  std::array<Dfa::State, kMaxTripRequests> q{};
  std::uint32_t picked = 0;
};

// Open-addressing map from product-state key to label index. Keys stay
// below 2^62, so all-ones marks an empty slot.
class LabelIndex {
 public:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

  std::uint32_t* find(std::uint64_t key) {
    if (keys_.empty()) return nullptr;
    for (std::size_t i = slot(key);; i = (i + 1) & mask_) {
      if (keys_[i] == key) return &vals_[i];
      if (keys_[i] == kEmpty) return nullptr;
    }
  }

  void put(std::uint64_t key, std::uint32_t val) {
    if (2 * (size_ + 1) > keys_.size()) grow();
    for (std::size_t i = slot(key);; i = (i + 1) & mask_) {
      if (keys_[i] == kEmpty) {
        keys_[i] = key;
        vals_[i] = val;
        ++size_;
        return;
      }
      if (keys_[i] == key) {
        vals_[i] = val;
        return;
      }
    }
  }

 private:
  std::size_t slot(std::uint64_t key) const {
    return static_cast<std::size_t>((key * 0x9E3779B97F4A7C15ull) >> shift_) & mask_;
  }

  void grow() {
    std::vector<std::uint64_t> old_keys = std::move(keys_);
    std::vector<std::uint32_t> old_vals = std::move(vals_);
    const std::size_t cap = old_keys.empty() ? 64 : old_keys.size() * 2;
    keys_.assign(cap, kEmpty);
    vals_.assign(cap, 0);
    mask_ = cap - 1;
    shift_ = 64 - static_cast<unsigned>(std::countr_zero(cap));
    size_ = 0;
    for (std::size_t i = 0; i < old_keys.size(); ++i)
      if (old_keys[i] != kEmpty) put(old_keys[i], old_vals[i]);
  }

  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> vals_;
  std::size_t mask_ = 0, size_ = 0;
  unsigned shift_ = 64;
};

class ProductSearch {
 public:
  ProductSearch(const RoadNetwork& net, std::vector<Tracked> tracked, const PlannerOptions& opt)
      : net_(net), tracked_(std::move(tracked)), opt_(opt) {
    radix_.resize(tracked_.size());
    unsigned __int128 span = net_.size();
    for (std::size_t i = 0; i < tracked_.size(); ++i) {
      radix_[i] = tracked_[i].request->dfa->state_count();
      span *= radix_[i];
    }
    span <<= tracked_.size();
    if (span > (static_cast<unsigned __int128>(1) << 62)) throw Error("product automaton too large to index");
  }

  std::optional<RoutePlan> run(StateIndex start, Tick t0) {
    ProductState init{start, {}, 0};
    for (std::size_t i = 0; i < tracked_.size(); ++i) {
      const auto& tr = tracked_[i];
      if (tr.onboard) {
        init.q[i] = tr.onboard_state;
        init.picked |= 1u << i;
      } else {
        init.q[i] = tr.request->dfa->initial();
      }
    }
    Tick h = 0;
    if (!enter(init, start, t0, /*read_onboard=*/false, h)) return std::nullopt;
    push(init, t0, h, kNoParent);
    while (!heap_.empty()) {
      if (opt_.stats) opt_.stats->max_frontier = std::max(opt_.stats->max_frontier, heap_.size());
      const std::uint32_t li = heap_.top();
      heap_.pop();
      const Label& lab = labels_[li];
      if (*best_.find(lab.key) != li) continue;
      if (opt_.stats) ++opt_.stats->labels_settled;
      if (done(lab.state)) return reconstruct(li);
      const ProductState cur = lab.state;
      const Tick t = lab.time;
      for (const auto& road : net_.successors(cur.node)) {
        ProductState nxt = cur;
        nxt.node = road.to;
        if (!enter(nxt, road.to, t + road.weight, /*read_onboard=*/true, h)) continue;
        push(nxt, t + road.weight, h, li);
      }
    }
    return std::nullopt;
  }

 private:
  static constexpr std::uint32_t kNoParent = 0xffffffffu;

  struct Label {
    ProductState state;
    Tick time;
    Tick bound;  // time plus a consistent lower bound on the remaining time
    std::uint32_t parent;
    std::uint64_t key;
  };

  bool done(const ProductState& s) const {
    for (std::size_t i = 0; i < tracked_.size(); ++i)
      if (!(s.picked >> i & 1u) || !tracked_[i].request->dfa->is_accepting(s.q[i])) return false;
    return true;
  }

  // Applies the arrival at `node` at time `t`: advances picked automata,
  // performs mandatory pick-ups, and checks every deadline. `read_onboard`
  // is false only for the planning start, whose label onboard automata
  // have already consumed. `h` receives the largest per-request lower
  // bound on the time still needed (zero without a distance table).
  bool enter(ProductState& s, StateIndex node, Tick t, bool read_onboard, Tick& h) const {
    h = 0;
    for (std::size_t i = 0; i < tracked_.size(); ++i) {
      const auto& tr = tracked_[i];
      const Request& r = *tr.request;
      const Dfa& dfa = *r.dfa;
      const bool picked = s.picked >> i & 1u;
      if (picked) {
        if (dfa.is_accepting(s.q[i])) continue;
        if (read_onboard) s.q[i] = dfa.next(s.q[i], r.symbols[node]);
      } else if (node == r.pick_state) {
        if (t > r.pickup_deadline()) return false;
        s.picked |= 1u << i;
        s.q[i] = dfa.next(dfa.initial(), r.symbols[node]);
      } else {
        if (!opt_.distances) continue;
        const Tick reach = (*opt_.distances)(node, r.pick_state);
        if (reach == kUnreachable || t + reach > r.pickup_deadline()) return false;
        const Tick rest = r.time_to_accept(r.pick_state, r.seeded_state());
        if (rest == kUnreachable || t + reach + rest > tr.drop_deadline) return false;
        h = std::max(h, reach + rest);
        continue;
      }
      if (t > tr.drop_deadline) return false;
      if (!dfa.is_accepting(s.q[i]) && !dfa.can_accept(s.q[i])) return false;
      if (opt_.distances) {
        const Tick rest = r.time_to_accept(node, s.q[i]);
        if (rest == kUnreachable || t + rest > tr.drop_deadline) return false;
        h = std::max(h, rest);
      }
    }
    return true;
  }

  std::uint64_t encode(const ProductState& s) const {
    std::uint64_t k = 0;
    for (std::size_t i = tracked_.size(); i-- > 0;) k = k * radix_[i] + s.q[i];
    k = (k << tracked_.size()) | s.picked;
    return k * net_.size() + s.node;
  }

  void route_of(std::uint32_t li, std::vector<StateIndex>& out) const {
    out.clear();
    for (std::uint32_t i = li; i != kNoParent; i = labels_[i].parent) out.push_back(labels_[i].state.node);
    std::reverse(out.begin(), out.end());
  }

  // Strict "a is better than b": smaller bound, then lexicographically
  // smaller route. Labels sharing a key share the heuristic, so for them
  // this is earlier time first.
  bool better(std::uint32_t a, std::uint32_t b) const {
    if (labels_[a].bound != labels_[b].bound) return labels_[a].bound < labels_[b].bound;
    route_of(a, scratch_a_);
    route_of(b, scratch_b_);
    return scratch_a_ < scratch_b_;
  }

  void push(const ProductState& s, Tick t, Tick h, std::uint32_t parent) {
    const std::uint64_t key = encode(s);
    const auto li = static_cast<std::uint32_t>(labels_.size());
    labels_.push_back({s, t, t + h, parent, key});
    if (std::uint32_t* prev = best_.find(key)) {
      if (!better(li, *prev)) {
        labels_.pop_back();
        return;
      }
      *prev = li;
    } else {
      best_.put(key, li);
    }
    heap_.push(li);
    if (opt_.stats) ++opt_.stats->labels_pushed;
  }

  RoutePlan reconstruct(std::uint32_t goal) const {
    std::vector<std::uint32_t> chain;
    for (std::uint32_t i = goal; i != kNoParent; i = labels_[i].parent) chain.push_back(i);
    std::reverse(chain.begin(), chain.end());
    RoutePlan plan;
    for (auto li : chain) plan.route.push_back({labels_[li].state.node, labels_[li].time});
    plan.start = plan.route.front().time;
    plan.completion = plan.route.back().time;

    const std::size_t m = tracked_.size();
    std::vector<Tick> pick(m, -1), drop(m, -1);
    std::vector<Dfa::State> q(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& tr = tracked_[i];
      if (tr.onboard) {
        pick[i] = tr.pickup_time;
        q[i] = tr.onboard_state;
        if (tr.request->dfa->is_accepting(q[i])) drop[i] = plan.start;
      }
    }
    for (std::size_t w = 0; w < plan.route.size(); ++w) {
      const auto [node, t] = plan.route[w];
      for (std::size_t i = 0; i < m; ++i) {
        const Request& r = *tracked_[i].request;
        if (drop[i] >= 0) continue;
        if (pick[i] >= 0) {
          if (w > 0) q[i] = r.dfa->next(q[i], r.symbols[node]);
        } else if (node == r.pick_state) {
          pick[i] = t;
          q[i] = r.dfa->next(r.dfa->initial(), r.symbols[node]);
        } else {
          continue;
        }
        if (r.dfa->is_accepting(q[i])) drop[i] = t;
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      const Request& r = *tracked_[i].request;
      RequestEvent ev{r.id, pick[i], drop[i], drop[i] - r.t_req - *r.t_star, r.seats, tracked_[i].onboard};
      if (!tracked_[i].onboard) plan.trip_cost += ev.delay;
      plan.trip_utility += static_cast<Tick>(r.seats) * (drop[i] - std::max(pick[i], plan.start));
      plan.events.push_back(std::move(ev));
    }
    return plan;
  }

  const RoadNetwork& net_;
  std::vector<Tracked> tracked_;
  PlannerOptions opt_;
  std::vector<std::uint64_t> radix_;
  std::vector<Label> labels_;
  LabelIndex best_;
  mutable std::vector<StateIndex> scratch_a_, scratch_b_;
  struct Worse {
    const ProductSearch* self;
    bool operator()(std::uint32_t a, std::uint32_t b) const { return self->better(b, a); }
  };
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, Worse> heap_{Worse{this}};
};

}  // namespace detail

/// Minimum-completion-time route that serves the vehicle's onboard requests
/// and picks up every request in `new_requests`. Each pick-up happens on the
/// first visit to the pick-up state after planning starts, at
/// max(now, vehicle.available_at). Ties go to the lexicographically smallest
/// route.
inline std::optional<RoutePlan> plan_trip(const RoadNetwork& net, const VehicleState& vehicle,
                                          std::span<const RequestPtr> new_requests, Tick now,
                                          const PlannerOptions& options = {}) {
  int seats = vehicle.seats_in_use();
  for (const auto& r : new_requests) seats += r->seats;
  if (seats > vehicle.capacity)
    throw CapacityExceeded("vehicle " + vehicle.id + ": " + std::to_string(seats) + " seats requested, capacity " +
                           std::to_string(vehicle.capacity));
  std::vector<detail::Tracked> tracked;
  for (const auto& o : vehicle.onboard) {
    const Request& r = *o.request;
    if (r.dfa->is_accepting(o.dfa_state)) continue;
    if (!r.t_star) return std::nullopt;
    tracked.push_back({&r, true, o.dfa_state, o.pickup_time, *r.drop_deadline()});
  }
  for (const auto& rp : new_requests) {
    if (!rp->t_star) return std::nullopt;
    tracked.push_back({rp.get(), false, 0, 0, *rp->drop_deadline()});
  }
  if (tracked.size() > kMaxTripRequests) throw Error("too many requests in one trip");
  const Tick t0 = std::max(now, vehicle.available_at);
  for (const auto& rp : new_requests)
    if (rp->t_req > t0) throw ValidationError("request " + rp->id + " arrives after planning time " + std::to_string(t0));
  const bool cacheable = options.cache && vehicle.onboard.empty();
  std::string key;
  if (cacheable) {
    key = PlanCache::key(vehicle.position, new_requests);
    if (auto hit = options.cache->lookup(key, t0, new_requests)) return std::move(*hit);
  }
  auto plan = detail::ProductSearch(net, std::move(tracked), options).run(vehicle.position, t0);
  if (cacheable) options.cache->store(std::move(key), t0, plan);
  return plan;
}

inline std::optional<RoutePlan> plan_trip(const RoadNetwork& net, const VehicleState& vehicle,
                                          std::initializer_list<RequestPtr> new_requests, Tick now,
                                          const PlannerOptions& options = {}) {
  return plan_trip(net, vehicle, std::span<const RequestPtr>(new_requests.begin(), new_requests.size()), now,
                   options);
}

/// Whether one virtual empty vehicle, starting at either pick-up state at
/// `now`, can serve both requests within their deadlines.
inline bool check_share(const RoadNetwork& net, const RequestPtr& a, const RequestPtr& b, Tick now,
                        const PlannerOptions& options = {}) {
  const std::array<RequestPtr, 2> pair{a, b};
  for (StateIndex start : {a->pick_state, b->pick_state}) {
    VehicleState virt{"virtual", a->seats + b->seats, start, now, {}, 0};
    if (plan_trip(net, virt, pair, now, options)) return true;
  }
  return false;
}

inline std::optional<RoutePlan> check_vehicle_request(const RoadNetwork& net, const VehicleState& v,
                                                      const RequestPtr& r, Tick now,
                                                      const PlannerOptions& options = {}) {
  if (v.available_capacity() <= 0)
    throw CapacityExceeded("vehicle " + v.id + " has no available capacity");
  if (r->seats > v.available_capacity())
    throw CapacityExceeded("request " + r->id + " needs " + std::to_string(r->seats) + " seats, vehicle " + v.id +
                           " has " + std::to_string(v.available_capacity()));
  const std::array<RequestPtr, 1> one{r};
  return plan_trip(net, v, one, now, options);
}

}  // namespace fairfleet
