#pragma once

// Request-vehicle and request-trip-vehicle graphs for one batch.

#include <algorithm>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fairfleet/routing.hpp"

namespace fairfleet {

struct ServeEdge {
  std::size_t request;
  std::size_t vehicle;
  RoutePlan plan;
};

struct RvGraph {
  std::vector<RequestPtr> requests;     // sorted by id
  std::vector<VehicleState> vehicles;   // available vehicles, sorted by id
  std::vector<std::pair<std::size_t, std::size_t>> shares;  // i < j
  std::vector<ServeEdge> serves;                            // sorted by (request, vehicle)

  bool can_share(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(shares.begin(), shares.end(), std::pair{i, j});
  }
  const ServeEdge* serve(std::size_t request, std::size_t vehicle) const {
    auto it = std::lower_bound(serves.begin(), serves.end(), std::pair{request, vehicle},
                               [](const ServeEdge& e, const std::pair<std::size_t, std::size_t>& k) {
                                 return std::pair{e.request, e.vehicle} < k;
                               });
    if (it == serves.end() || it->request != request || it->vehicle != vehicle) return nullptr;
    return &*it;
  }
};

struct Trip {
  std::string id;                    // member request ids joined by '+'
  std::vector<std::size_t> members;  // indices into the graph's requests, ascending
  int seats = 0;
};

struct RtvEdge {
  std::size_t trip;
  std::size_t vehicle;
  RoutePlan plan;
  double sigma = 0;    // delay sum of the trip
  Tick utility = 0;    // occupied seat-ticks of the plan
  double cost = 0;     // sigma after weight correction
};

struct RtvGraph {
  std::vector<RequestPtr> requests;
  std::vector<VehicleState> vehicles;
  std::vector<Trip> trips;
  std::vector<RtvEdge> edges;  // sorted by (vehicle id, trip id)
};

namespace detail {

inline std::vector<RequestPtr> sorted_by_id(std::span<const RequestPtr> in) {
  std::vector<RequestPtr> out(in.begin(), in.end());
  std::sort(out.begin(), out.end(), [](const RequestPtr& a, const RequestPtr& b) { return a->id < b->id; });
  return out;
}

inline std::vector<VehicleState> sorted_by_id(std::span<const VehicleState> in) {
  std::vector<VehicleState> out(in.begin(), in.end());
  std::sort(out.begin(), out.end(), [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
  return out;
}

}  // namespace detail

/// Share edges between request pairs a virtual vehicle could serve
/// together, and serve edges for every (request, vehicle) pair with a
/// feasible single-request plan.
inline RvGraph build_rv_graph(const RoadNetwork& net, std::span<const RequestPtr> active,
                              std::span<const VehicleState> avail, Tick now, const PlannerOptions& options = {}) {
  RvGraph g;
  g.requests = detail::sorted_by_id(active);
  g.vehicles = detail::sorted_by_id(avail);
  for (std::size_t i = 0; i < g.requests.size(); ++i)
    for (std::size_t j = i + 1; j < g.requests.size(); ++j)
      if (check_share(net, g.requests[i], g.requests[j], now, options)) g.shares.emplace_back(i, j);
  for (std::size_t i = 0; i < g.requests.size(); ++i)
    for (std::size_t v = 0; v < g.vehicles.size(); ++v) {
      if (g.requests[i]->seats > g.vehicles[v].available_capacity()) continue;
      if (auto plan = check_vehicle_request(net, g.vehicles[v], g.requests[i], now, options))
        g.serves.push_back({i, v, std::move(*plan)});
    }
  return g;
}

/// Singletons with a serve edge, plus share-connected pairs that some
/// vehicle serves individually and has room for.
inline std::vector<Trip> enumerate_trips(const RvGraph& rv) {
  std::vector<Trip> trips;
  std::vector<bool> served(rv.requests.size(), false);
  for (const auto& e : rv.serves) served[e.request] = true;
  for (std::size_t i = 0; i < rv.requests.size(); ++i)
    if (served[i]) trips.push_back({rv.requests[i]->id, {i}, rv.requests[i]->seats});
  for (const auto& [i, j] : rv.shares) {
    const int seats = rv.requests[i]->seats + rv.requests[j]->seats;
    for (std::size_t v = 0; v < rv.vehicles.size(); ++v) {
      if (rv.vehicles[v].available_capacity() < seats) continue;
      if (rv.serve(i, v) && rv.serve(j, v)) {
        trips.push_back({rv.requests[i]->id + "+" + rv.requests[j]->id, {i, j}, seats});
        break;
      }
    }
  }
  std::sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) { return a.id < b.id; });
  return trips;
}

/// One edge per (trip, vehicle) with a feasible plan. Pairs are attempted
/// only for vehicles holding serve edges to both members.
inline RtvGraph build_rtv_graph(const RoadNetwork& net, const RvGraph& rv, std::vector<Trip> trips, Tick now,
                                const PlannerOptions& options = {}) {
  RtvGraph g;
  g.requests = rv.requests;
  g.vehicles = rv.vehicles;
  g.trips = std::move(trips);
  for (std::size_t t = 0; t < g.trips.size(); ++t) {
    const Trip& trip = g.trips[t];
    for (std::size_t v = 0; v < g.vehicles.size(); ++v) {
      const VehicleState& veh = g.vehicles[v];
      if (veh.available_capacity() < trip.seats) continue;
      std::optional<RoutePlan> plan;
      if (trip.members.size() == 1) {
        if (const auto* e = rv.serve(trip.members[0], v)) plan = e->plan;
      } else {
        bool all = true;
        for (auto m : trip.members) all = all && rv.serve(m, v);
        if (!all) continue;
        std::vector<RequestPtr> reqs;
        for (auto m : trip.members) reqs.push_back(g.requests[m]);
        plan = plan_trip(net, veh, reqs, now, options);
      }
      if (!plan) continue;
      RtvEdge e{t, v, std::move(*plan), 0, 0, 0};
      e.sigma = static_cast<double>(e.plan.trip_cost);
      e.utility = e.plan.trip_utility;
      e.cost = e.sigma;
      g.edges.push_back(std::move(e));
    }
  }
  std::sort(g.edges.begin(), g.edges.end(), [&](const RtvEdge& a, const RtvEdge& b) {
    const auto& va = g.vehicles[a.vehicle].id;
    const auto& vb = g.vehicles[b.vehicle].id;
    if (va != vb) return va < vb;
    return g.trips[a.trip].id < g.trips[b.trip].id;
  });
  return g;
}

inline double mean_utility(std::span<const VehicleState> fleet) {
  if (fleet.empty()) return 0;
  double sum = 0;
  for (const auto& v : fleet) sum += v.utility_history;
  return sum / static_cast<double>(fleet.size());
}

/// cost = sigma + alpha * (U_v - U_avg), with U_avg over the whole fleet.
inline void apply_weight_correction(RtvGraph& rtv, std::span<const VehicleState> fleet, double alpha) {
  const double avg = mean_utility(fleet);
  for (auto& e : rtv.edges) e.cost = e.sigma + alpha * (rtv.vehicles[e.vehicle].utility_history - avg);
}

inline void write_rtv(std::ostream& out, const RtvGraph& g) {
  out << "requests:";
  for (const auto& r : g.requests) out << ' ' << r->id;
  out << "\nvehicles:";
  for (const auto& v : g.vehicles) out << ' ' << v.id;
  out << "\ntrips:";
  for (const auto& t : g.trips) out << ' ' << t.id;
  out << '\n';
  for (const auto& e : g.edges) {
    out << g.trips[e.trip].id << " -- " << g.vehicles[e.vehicle].id << " sigma=" << e.sigma << " U=" << e.utility
        << " cost=" << e.cost << " done=" << e.plan.completion << '\n';
  }
}

}  // namespace fairfleet
