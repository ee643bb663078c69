#pragma once

#include <random>
#include <set>
#include <string>

#include "fairfleet/matching.hpp"
#include "fairfleet/network.hpp"
#include "fairfleet/routing.hpp"

namespace fairfleet::testing {

inline std::string source_path(const std::string& rel) { return std::string(FAIRFLEET_SOURCE_DIR) + "/" + rel; }

/// The six-intersection example map, weights chosen so the worked
/// two-request example reproduces exactly.
inline RoadNetwork six_network() { return load_network_file(source_path("scenarios/six.net")); }

inline RequestSpec six_r1(Tick max_wait = 100, Tick max_delay = 100) {
  return {"r1", "C", "F (D & F E)", 0, 1, max_wait, max_delay, {}, {}};
}
inline RequestSpec six_r2(Tick max_wait = 100, Tick max_delay = 100) {
  return {"r2", "B", "F (D & F F)", 0, 1, max_wait, max_delay, {}, {}};
}

inline VehicleState empty_vehicle(const RoadNetwork& net, const std::string& at, int cap = 2,
                                  const std::string& id = "v1") {
  return VehicleState{id, cap, net.index_of(at), 0, {}, 0};
}


/// A bare request carrying only the fields the assignment layer reads.
inline RequestPtr bare_request(const std::string& id, const std::string& group = {}) {
  Request r{id, group.empty() ? id : group, "", 0, Formula::atom("p"), Formula::atom("p"), nullptr, {}, 0, 1, 0, 0, 0, {}};
  return std::make_shared<const Request>(std::move(r));
}

/// Adds an edge for `members` (request indices) on vehicle `v`, creating
/// the trip if needed.
inline void add_edge(RtvGraph& g, const std::vector<std::size_t>& members, std::size_t v, double cost, Tick utility) {
  std::string id;
  for (auto m : members) id += (id.empty() ? "" : "+") + g.requests[m]->id;
  std::size_t t = 0;
  while (t < g.trips.size() && g.trips[t].id != id) ++t;
  if (t == g.trips.size()) g.trips.push_back({id, members, static_cast<int>(members.size())});
  RtvEdge e{t, v, {}, cost, utility, cost};
  g.edges.push_back(std::move(e));
}

inline RtvGraph empty_rtv(int vehicles, const std::vector<std::string>& request_ids) {
  RtvGraph g;
  for (const auto& r : request_ids) g.requests.push_back(bare_request(r));
  for (int v = 0; v < vehicles; ++v) g.vehicles.push_back(VehicleState{"v" + std::to_string(v + 1), 2, 0, 0, {}, 0});
  return g;
}

/// Random assignment instance within the given size limits. Some requests
/// are bundled into two-member groups.
inline RtvGraph random_rtv(std::mt19937_64& rng, int max_vehicles, int max_requests, int max_edges) {
  std::uniform_int_distribution<int> nv(1, max_vehicles), nr(1, max_requests), ne(0, max_edges);
  const int v_count = nv(rng), r_count = nr(rng);
  RtvGraph g;
  const bool grouped = r_count >= 3 && rng() % 3 == 0;
  for (int r = 0; r < r_count; ++r) {
    const std::string id = "q" + std::to_string(r);
    g.requests.push_back(bare_request(id, grouped && r < 2 ? "grp" : ""));
  }
  for (int v = 0; v < v_count; ++v) g.vehicles.push_back(VehicleState{"v" + std::to_string(v), 2, 0, 0, {}, 0});
  std::uniform_int_distribution<int> cost(-4, 20), util(0, 15), pick_r(0, r_count - 1), pick_v(0, v_count - 1);
  const int e_count = ne(rng);
  std::set<std::pair<std::string, std::size_t>> seen;
  for (int k = 0; k < e_count; ++k) {
    std::vector<std::size_t> members{static_cast<std::size_t>(pick_r(rng))};
    if (r_count > 1 && rng() % 2 == 0) {
      auto other = static_cast<std::size_t>(pick_r(rng));
      if (other != members[0]) members.push_back(other);
      std::sort(members.begin(), members.end());
    }
    const auto v = static_cast<std::size_t>(pick_v(rng));
    std::string id;
    for (auto m : members) id += (id.empty() ? "" : "+") + g.requests[m]->id;
    if (!seen.insert({id, v}).second) continue;
    add_edge(g, members, v, cost(rng), util(rng));
  }
  return g;
}

}  // namespace fairfleet::testing
