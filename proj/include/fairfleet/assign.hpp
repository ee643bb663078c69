#pragma once

// Batch assignment as a 0-1 program with approximate envy-freeness, solved
// exactly by depth-first branch-and-bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "fairfleet/errors.hpp"
#include "fairfleet/matching.hpp"
#include "fairfleet/routing.hpp"

namespace fairfleet {

/// Requests needing more seats than one vehicle offers are split into
/// single-seat sub-requests "id#k" that share the group id.
inline std::vector<RequestSpec> split_subrequests(const RequestSpec& r, int cap) {
  if (r.seats < 1) throw ValidationError("request " + r.id + ": seats must be >= 1");
  if (r.seats <= cap) return {r};
  if (r.sub_formulas.size() != static_cast<std::size_t>(r.seats))
    throw MissingDecomposition("request " + r.id + " needs " + std::to_string(r.seats) + " seats but vehicles hold " +
                               std::to_string(cap) + "; provide " + std::to_string(r.seats) + " sub-formulas");
  std::vector<RequestSpec> out;
  for (int k = 0; k < r.seats; ++k) {
    RequestSpec s = r;
    s.id = r.id + "#" + std::to_string(k + 1);
    s.group = r.id;
    s.seats = 1;
    s.formula = r.sub_formulas[static_cast<std::size_t>(k)];
    s.sub_formulas.clear();
    out.push_back(std::move(s));
  }
  return out;
}

enum class RowKind { Coverage, Vehicle, Envy };
enum class Sense { Eq, Le, Ge };

struct IlpRow {
  RowKind kind;
  std::string name;
  std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
  Sense sense;
  double rhs;
};

/// big_m * x_a + big_m * x_b <= rhs, kept apart from the general rows.
struct EnvyRow {
  std::size_t a, b;
  double rhs;
};

/// Variables 0..E-1 are the edge selectors, E.. the per-group drop flags.
struct IlpModel {
  std::size_t edge_vars = 0;
  std::vector<std::string> var_names;
  std::vector<double> cost;
  std::vector<IlpRow> rows;  // coverage and vehicle rows
  std::vector<EnvyRow> envy;
  double big_m = 1;
  double lambda = 0;
  double lambda_ko = 0;

  std::vector<std::string> request_ids;
  std::vector<std::size_t> request_group;        // group variable offset (0-based among groups)
  std::vector<std::vector<std::size_t>> group_members;
  std::vector<std::vector<std::size_t>> edge_requests;
  std::vector<std::size_t> edge_vehicle;
  std::vector<double> edge_utility;
  std::size_t vehicle_count = 0;

  std::size_t var_count() const { return cost.size(); }
  std::size_t group_var(std::size_t g) const { return edge_vars + g; }

  std::size_t count(RowKind k) const {
    if (k == RowKind::Envy) return envy.size();
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const IlpRow& r) { return r.kind == k; }));
  }

  /// True iff `x` satisfies every row; `objective` receives c·x.
  bool feasible(const std::vector<int>& x, double* objective = nullptr) const {
    for (const auto& row : rows) {
      double lhs = 0;
      for (auto [v, c] : row.terms) lhs += c * x[v];
      constexpr double eps = 1e-9;
      if (row.sense == Sense::Eq && std::abs(lhs - row.rhs) > eps) return false;
      if (row.sense == Sense::Le && lhs > row.rhs + eps) return false;
      if (row.sense == Sense::Ge && lhs < row.rhs - eps) return false;
    }
    for (const auto& row : envy)
      if (big_m * (x[row.a] + x[row.b]) > row.rhs + 1e-9) return false;
    if (objective) {
      double z = 0;
      for (std::size_t v = 0; v < x.size(); ++v) z += cost[v] * x[v];
      *objective = z;
    }
    return true;
  }
};

/// Builds the model for the active requests of `rtv`. Envy rows are only
/// emitted where they can bind, i.e. U_a - lambda * U_b < 0.
inline IlpModel formulate(const RtvGraph& rtv, double lambda_ko, double lambda_envy) {
  IlpModel m;
  m.lambda = lambda_envy;
  m.lambda_ko = lambda_ko;
  m.edge_vars = rtv.edges.size();
  m.vehicle_count = rtv.vehicles.size();
  std::map<std::string, std::size_t> group_index;
  for (const auto& r : rtv.requests) {
    m.request_ids.push_back(r->id);
    auto [it, fresh] = group_index.emplace(r->group, group_index.size());
    if (fresh) m.group_members.emplace_back();
    m.request_group.push_back(it->second);
    m.group_members[it->second].push_back(m.request_ids.size() - 1);
  }
  std::vector<std::string> group_names(group_index.size());
  for (const auto& [name, g] : group_index) group_names[g] = name;

  double max_u = 0;
  for (std::size_t e = 0; e < rtv.edges.size(); ++e) {
    const auto& edge = rtv.edges[e];
    m.var_names.push_back("e" + std::to_string(e));
    m.cost.push_back(edge.cost);
    m.edge_requests.push_back(rtv.trips[edge.trip].members);
    m.edge_vehicle.push_back(edge.vehicle);
    m.edge_utility.push_back(static_cast<double>(edge.utility));
    max_u = std::max(max_u, static_cast<double>(edge.utility));
  }
  for (std::size_t g = 0; g < group_names.size(); ++g) {
    m.var_names.push_back("x" + std::to_string(g));
    m.cost.push_back(lambda_ko);
  }
  m.big_m = 1 + max_u + lambda_envy * max_u;

  for (std::size_t r = 0; r < m.request_ids.size(); ++r) {
    IlpRow row{RowKind::Coverage, "cover_" + std::to_string(r), {}, Sense::Eq, 1};
    for (std::size_t e = 0; e < m.edge_vars; ++e)
      if (std::find(m.edge_requests[e].begin(), m.edge_requests[e].end(), r) != m.edge_requests[e].end())
        row.terms.emplace_back(e, 1);
    row.terms.emplace_back(m.group_var(m.request_group[r]), 1);
    m.rows.push_back(std::move(row));
  }
  for (std::size_t v = 0; v < m.vehicle_count; ++v) {
    IlpRow row{RowKind::Vehicle, "veh_" + std::to_string(v), {}, Sense::Le, 1};
    for (std::size_t e = 0; e < m.edge_vars; ++e)
      if (m.edge_vehicle[e] == v) row.terms.emplace_back(e, 1);
    if (!row.terms.empty()) m.rows.push_back(std::move(row));
  }
  // U_a - lambda U_b >= M (x_a + x_b - 2)  <=>  M x_a + M x_b <= 2M + U_a - lambda U_b
  auto binds = [&](std::size_t a, std::size_t b) {
    return m.edge_vehicle[a] != m.edge_vehicle[b] && m.edge_utility[a] - lambda_envy * m.edge_utility[b] < 0;
  };
  std::size_t envy = 0;
  for (std::size_t a = 0; a < m.edge_vars; ++a)
    for (std::size_t b = 0; b < m.edge_vars; ++b) envy += binds(a, b);
  m.envy.reserve(envy);
  for (std::size_t a = 0; a < m.edge_vars; ++a)
    for (std::size_t b = 0; b < m.edge_vars; ++b)
      if (binds(a, b)) m.envy.push_back({a, b, 2 * m.big_m + m.edge_utility[a] - lambda_envy * m.edge_utility[b]});
  return m;
}

struct Assignment {
  std::vector<std::size_t> edges;            // selected RTV edges, ascending
  std::vector<std::string> unassigned;       // request ids, sorted
  double objective = 0;
  bool proven_optimal = false;
  std::size_t nodes = 0;

  std::vector<int> as_vector(const IlpModel& m) const {
    std::vector<int> x(m.var_count(), 0);
    for (auto e : edges) x[e] = 1;
    std::vector<bool> covered(m.request_ids.size(), false);
    for (auto e : edges)
      for (auto r : m.edge_requests[e]) covered[r] = true;
    for (std::size_t g = 0; g < m.group_members.size(); ++g)
      if (!covered[m.group_members[g].front()]) x[m.group_var(g)] = 1;
    return x;
  }
};

namespace detail {

inline Assignment finish_assignment(const IlpModel& m, std::vector<std::size_t> edges) {
  Assignment a;
  std::sort(edges.begin(), edges.end());
  a.edges = std::move(edges);
  std::vector<bool> covered(m.request_ids.size(), false);
  for (auto e : a.edges)
    for (auto r : m.edge_requests[e]) covered[r] = true;
  for (std::size_t r = 0; r < m.request_ids.size(); ++r)
    if (!covered[r]) a.unassigned.push_back(m.request_ids[r]);
  std::sort(a.unassigned.begin(), a.unassigned.end());
  m.feasible(a.as_vector(m), &a.objective);
  return a;
}

}  // namespace detail

/// Greedy seed: edges by (trip size desc, corrected cost asc, vehicle id,
/// trip id), taken when the vehicle is free and no member is covered.
/// Groups left partially covered are released. Envy rows are ignored.
inline Assignment greedy_warm_start(const RtvGraph& rtv, const IlpModel& m) {
  std::vector<std::size_t> order(rtv.edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = rtv.edges[a];
    const auto& eb = rtv.edges[b];
    const auto sa = rtv.trips[ea.trip].members.size(), sb = rtv.trips[eb.trip].members.size();
    if (sa != sb) return sa > sb;
    if (ea.cost != eb.cost) return ea.cost < eb.cost;
    if (rtv.vehicles[ea.vehicle].id != rtv.vehicles[eb.vehicle].id)
      return rtv.vehicles[ea.vehicle].id < rtv.vehicles[eb.vehicle].id;
    return rtv.trips[ea.trip].id < rtv.trips[eb.trip].id;
  });
  std::vector<bool> vehicle_used(rtv.vehicles.size(), false), covered(rtv.requests.size(), false);
  std::vector<std::size_t> chosen;
  for (auto e : order) {
    const auto& edge = rtv.edges[e];
    if (vehicle_used[edge.vehicle]) continue;
    const auto& members = rtv.trips[edge.trip].members;
    if (std::any_of(members.begin(), members.end(), [&](std::size_t r) { return covered[r]; })) continue;
    vehicle_used[edge.vehicle] = true;
    for (auto r : members) covered[r] = true;
    chosen.push_back(e);
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& members : m.group_members) {
      const auto n = std::count_if(members.begin(), members.end(), [&](std::size_t r) { return covered[r]; });
      if (n == 0 || n == static_cast<std::ptrdiff_t>(members.size())) continue;
      std::set<std::size_t> drop(members.begin(), members.end());
      std::vector<std::size_t> kept;
      for (auto e : chosen) {
        const auto& em = m.edge_requests[e];
        if (std::any_of(em.begin(), em.end(), [&](std::size_t r) { return drop.count(r) > 0; })) {
          for (auto r : em) covered[r] = false;
          changed = true;
        } else {
          kept.push_back(e);
        }
      }
      chosen = std::move(kept);
    }
  }
  return detail::finish_assignment(m, std::move(chosen));
}

struct SolveOptions {
  std::size_t node_limit = 0;  // 0 means unlimited
};

namespace detail {

class BranchAndBound {
 public:
  BranchAndBound(const IlpModel& m, const SolveOptions& opt) : m_(m), opt_(opt) {
    const std::size_t n_req = m.request_ids.size();
    by_request_.resize(n_req);
    for (std::size_t e = 0; e < m.edge_vars; ++e)
      for (auto r : m.edge_requests[e]) by_request_[r].push_back(e);
    for (auto& list : by_request_)
      std::stable_sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) { return m.cost[a] < m.cost[b]; });
    by_utility_ = utility_rows(m);
    if (!by_utility_) {
      conflicts_.resize(m.edge_vars);
      for (const auto& row : m.envy) {
        conflicts_[row.a].push_back(row.b);
        conflicts_[row.b].push_back(row.a);
      }
    }
    by_vehicle_.resize(m.vehicle_count);
    for (std::size_t e = 0; e < m.edge_vars; ++e) by_vehicle_[m.edge_vehicle[e]].push_back(e);
    covered_.assign(n_req, false);
    group_state_.assign(m.group_members.size(), kOpen);
    selected_.assign(m.edge_vars, false);
    bad_.assign(m.edge_vars, 0);
    live_.resize(m.edge_vars);
    live_pos_.resize(m.edge_vars);
    for (std::size_t e = 0; e < m.edge_vars; ++e) live_[e] = live_pos_[e] = e;
    floor_.assign(m.vehicle_count, 0.0);
  }

  Assignment run(const Assignment* warm) {
    best_obj_ = std::numeric_limits<double>::infinity();
    if (warm && m_.feasible(warm->as_vector(m_), nullptr)) {
      best_obj_ = warm->objective;
      best_edges_ = warm->edges;
      have_best_ = true;
    }
    if (m_.var_count() > 0) seed_incumbent();
    aborted_ = false;
    if (opt_.node_limit == 0 && windows_ok()) {
      lows_.assign(m_.edge_utility.begin(), m_.edge_utility.end());
      std::sort(lows_.begin(), lows_.end());
      lows_.erase(std::unique(lows_.begin(), lows_.end()), lows_.end());
      const double incumbent = best_obj_;
      const double value = window_optimum();
      if (value < incumbent) descend(value + kEps);
    } else {
      dfs(0, 0.0);
    }
    if (!have_best_) best_edges_.clear();
    Assignment a = finish_assignment(m_, best_edges_);
    a.proven_optimal = !aborted_;
    a.nodes = nodes_;
    return a;
  }

 private:
  enum : int { kOpen = 0, kTaken = 1, kDropped = 2 };
  static constexpr double kEps = 1e-9;

  // bad_[e] counts the reasons edge e cannot be taken: its vehicle is
  // busy, a member is covered or dropped, or a selected edge conflicts.
  bool usable(std::size_t e) const { return bad_[e] == 0 && (!envy_ || !by_utility_ || fits(e)); }

  // True iff the envy rows are exactly the pairs on different vehicles
  // with U_a - lambda U_b < 0, so conflicts follow from the extreme
  // utilities of the selection alone.
  static bool utility_rows(const IlpModel& m) {
    std::size_t binding = 0;
    for (std::size_t a = 0; a < m.edge_vars; ++a)
      for (std::size_t b = 0; b < m.edge_vars; ++b)
        binding += m.edge_vehicle[a] != m.edge_vehicle[b] && m.edge_utility[a] - m.lambda * m.edge_utility[b] < 0;
    if (binding != m.envy.size()) return false;
    return std::all_of(m.envy.begin(), m.envy.end(), [&](const EnvyRow& r) {
      return m.edge_vehicle[r.a] != m.edge_vehicle[r.b] && m.edge_utility[r.a] - m.lambda * m.edge_utility[r.b] < 0;
    });
  }

  bool fits(std::size_t e) const {
    if (lowest_.empty()) return true;
    const double u = m_.edge_utility[e];
    return !(u - m_.lambda * highest_.back() < 0) && !(lowest_.back() - m_.lambda * u < 0);
  }

  // live_ holds the edges with bad_ == 0, in no particular order.
  void adjust(std::size_t e, int d) {
    if (d > 0 && bad_[e]++ == 0) {
      const std::size_t last = live_.back();
      live_[live_pos_[e]] = last;
      live_pos_[last] = live_pos_[e];
      live_.pop_back();
    } else if (d < 0 && --bad_[e] == 0) {
      live_pos_[e] = live_.size();
      live_.push_back(e);
    }
  }

  void touch_request(std::size_t r, int d) {
    for (auto e : by_request_[r]) adjust(e, d);
  }

  void set_dropped(std::size_t g, bool on) {
    group_state_[g] = on ? kDropped : kOpen;
    for (auto r : m_.group_members[g]) touch_request(r, on ? 1 : -1);
  }

  bool decided(std::size_t r) const { return covered_[r] || group_state_[m_.request_group[r]] == kDropped; }

  // Each future edge covers at least one undecided request, so at most k
  // more vehicles are used. Costs split into a per-vehicle floor (taken for
  // the k most negative floors) plus per-member shares of the remainder.
  double bound(double cost_so_far, double limit) {
    std::fill(floor_.begin(), floor_.end(), 0.0);
    for (auto e : live_)
      if (usable(e)) floor_[m_.edge_vehicle[e]] = std::min(floor_[m_.edge_vehicle[e]], m_.cost[e]);
    std::size_t k = 0;
    for (std::size_t r = 0; r < covered_.size(); ++r) k += !decided(r);
    negative_.clear();
    for (double f : floor_)
      if (f < 0) negative_.push_back(f);
    if (negative_.size() > k) {
      std::nth_element(negative_.begin(), negative_.begin() + static_cast<std::ptrdiff_t>(k), negative_.end());
      negative_.resize(k);
    }
    double lb = cost_so_far;
    for (double f : negative_) lb += f;
    for (std::size_t r = 0; r < covered_.size() && lb < limit; ++r) {
      if (decided(r)) continue;
      const std::size_t g = m_.request_group[r];
      double best = std::numeric_limits<double>::infinity();
      if (group_state_[g] == kOpen) best = m_.lambda_ko / static_cast<double>(m_.group_members[g].size());
      for (auto e : by_request_[r]) {
        if (!usable(e)) continue;
        const double share = (m_.cost[e] - floor_[m_.edge_vehicle[e]]) / static_cast<double>(m_.edge_requests[e].size());
        best = std::min(best, share);
      }
      lb += best;
    }
    return lb;
  }

  // Greedy pass that respects every row, used as the first incumbent.
  void seed_incumbent() {
    std::vector<std::size_t> order(m_.edge_vars);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (m_.edge_requests[a].size() != m_.edge_requests[b].size())
        return m_.edge_requests[a].size() > m_.edge_requests[b].size();
      return m_.cost[a] < m_.cost[b];
    });
    std::vector<std::size_t> chosen;
    for (auto e : order) {
      if (!usable(e)) continue;
      select(e, true);
      chosen.push_back(e);
    }
    std::vector<int> x(m_.var_count(), 0);
    for (auto e : chosen) x[e] = 1;
    bool whole = true;
    for (std::size_t g = 0; g < m_.group_members.size(); ++g) {
      std::size_t n = 0;
      for (auto r : m_.group_members[g]) n += covered_[r];
      if (n == 0) x[m_.group_var(g)] = 1;
      whole = whole && (n == 0 || n == m_.group_members[g].size());
    }
    for (auto it = chosen.rbegin(); it != chosen.rend(); ++it) select(*it, false);
    double obj = 0;
    if (whole && m_.feasible(x, &obj) && obj < best_obj_ - kEps) {
      best_obj_ = obj;
      best_edges_ = chosen;
      have_best_ = true;
    }
  }

  // Selected edges sit on distinct vehicles, so with non-negative
  // utilities a selection is envy-free iff every utility lies in
  // [u, u / lambda] for its minimum u. Inside such a window no conflict can
  // bind and the plain bound is tight.
  bool windows_ok() const {
    if (!by_utility_ || m_.envy.empty() || m_.lambda < 0 || m_.lambda > 1) return false;
    return std::all_of(m_.edge_utility.begin(), m_.edge_utility.end(), [](double u) { return u >= 0; });
  }

  // Searches window u without envy checks from the current node; with
  // `first` it stops at the first leaf beating the incumbent.
  void window_dfs(double u, double cost, bool first) {
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < m_.edge_vars; ++e)
      if (m_.edge_utility[e] < u || m_.lambda * m_.edge_utility[e] > u) out.push_back(e);
    for (auto e : out) adjust(e, 1);
    envy_ = false;
    stop_at_leaf_ = first;
    dfs(0, cost);
    stop_at_leaf_ = false;
    aborted_ = false;
    envy_ = true;
    for (auto e : out) adjust(e, -1);
  }

  // Optimal value over every window, pruned by the incumbent; the
  // incumbent itself is left in place.
  double window_optimum() {
    const double incumbent = best_obj_;
    const auto incumbent_edges = best_edges_;
    const bool had = have_best_;
    for (double u : lows_) window_dfs(u, 0.0, false);
    const double value = best_obj_;
    best_obj_ = incumbent;
    best_edges_ = incumbent_edges;
    have_best_ = had;
    return value;
  }

  // True iff some leaf below the current node costs less than `target`.
  bool completes(double cost, double target) {
    const double lo = lowest_.empty() ? std::numeric_limits<double>::infinity() : lowest_.back();
    const double hi = highest_.empty() ? 0.0 : highest_.back();
    for (double u : lows_) {
      if (u > lo || m_.lambda * hi > u) continue;
      best_obj_ = target + kEps;
      have_best_ = false;
      window_dfs(u, cost, true);
      if (have_best_) return true;
    }
    return false;
  }

  // Walks the branching order of dfs() and keeps the first child under
  // which a leaf cheaper than `target` exists, so the result is the leaf
  // the exhaustive search settles on.
  void descend(double target) {
    struct Step {
      std::size_t edge;  // or npos for a drop
      std::size_t group;
      std::vector<std::pair<std::size_t, int>> saved;
    };
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<Step> steps;
    double cost = 0;
    for (std::size_t r = 0;; ++r) {
      while (r < covered_.size() && decided(r)) ++r;
      if (r == covered_.size()) break;
      const std::size_t g = m_.request_group[r];
      const int before = group_state_[g];
      bool taken = false;
      for (auto e : by_request_[r]) {
        if (!usable(e)) continue;
        Step st{e, g, {}};
        for (auto q : m_.edge_requests[e]) {
          const std::size_t gq = m_.request_group[q];
          st.saved.emplace_back(gq, group_state_[gq]);
          group_state_[gq] = kTaken;
        }
        select(e, true);
        if (completes(cost + m_.cost[e], target)) {
          cost += m_.cost[e];
          steps.push_back(std::move(st));
          taken = true;
          break;
        }
        select(e, false);
        for (auto it = st.saved.rbegin(); it != st.saved.rend(); ++it) group_state_[it->first] = it->second;
      }
      if (!taken && before == kOpen) {
        set_dropped(g, true);
        cost += m_.lambda_ko;
        steps.push_back({npos, g, {}});
      }
    }
    best_obj_ = cost;
    best_edges_.clear();
    for (std::size_t e = 0; e < m_.edge_vars; ++e)
      if (selected_[e]) best_edges_.push_back(e);
    have_best_ = true;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
      if (it->edge == npos) {
        set_dropped(it->group, false);
        continue;
      }
      select(it->edge, false);
      for (auto s = it->saved.rbegin(); s != it->saved.rend(); ++s) group_state_[s->first] = s->second;
    }
  }

  void select(std::size_t e, bool on) {
    const int d = on ? 1 : -1;
    selected_[e] = on;
    for (auto o : by_vehicle_[m_.edge_vehicle[e]]) adjust(o, d);
    for (auto r : m_.edge_requests[e]) {
      covered_[r] = on;
      touch_request(r, d);
    }
    if (!envy_) return;
    if (!by_utility_) {
      for (auto o : conflicts_[e]) adjust(o, d);
    } else if (on) {
      const double u = m_.edge_utility[e];
      lowest_.push_back(lowest_.empty() ? u : std::min(lowest_.back(), u));
      highest_.push_back(highest_.empty() ? u : std::max(highest_.back(), u));
    } else {
      lowest_.pop_back();
      highest_.pop_back();
    }
  }

  void dfs(std::size_t r, double cost) {
    if (aborted_) return;
    ++nodes_;
    if (opt_.node_limit && nodes_ > opt_.node_limit) {
      aborted_ = true;
      return;
    }
    while (r < covered_.size() && decided(r)) ++r;
    if (r == covered_.size()) {
      if (cost < best_obj_ - kEps) {
        best_obj_ = cost;
        best_edges_.clear();
        for (std::size_t e = 0; e < m_.edge_vars; ++e)
          if (selected_[e]) best_edges_.push_back(e);
        have_best_ = true;
        aborted_ = stop_at_leaf_;
      }
      return;
    }
    if (bound(cost, best_obj_ - kEps) >= best_obj_ - kEps) return;
    const std::size_t g = m_.request_group[r];
    const int before = group_state_[g];
    for (auto e : by_request_[r]) {
      if (!usable(e)) continue;
      // Every member's group must be open to assigning.
      std::vector<std::pair<std::size_t, int>> saved;
      for (auto q : m_.edge_requests[e]) {
        const std::size_t gq = m_.request_group[q];
        saved.emplace_back(gq, group_state_[gq]);
        group_state_[gq] = kTaken;
      }
      select(e, true);
      dfs(r + 1, cost + m_.cost[e]);
      select(e, false);
      for (auto it = saved.rbegin(); it != saved.rend(); ++it) group_state_[it->first] = it->second;
    }
    if (before == kOpen) {
      set_dropped(g, true);
      dfs(r + 1, cost + m_.lambda_ko);
      set_dropped(g, false);
    }
  }

  const IlpModel& m_;
  SolveOptions opt_;
  std::vector<std::vector<std::size_t>> by_request_;
  std::vector<std::vector<std::size_t>> conflicts_;
  std::vector<double> floor_, negative_, lowest_, highest_;
  bool by_utility_ = false;
  std::vector<std::vector<std::size_t>> by_vehicle_;
  std::vector<bool> covered_, selected_;
  std::vector<int> group_state_, bad_;
  std::vector<std::size_t> live_, live_pos_;
  double best_obj_ = 0;
  std::vector<std::size_t> best_edges_;
  bool have_best_ = false;
  bool aborted_ = false;
  bool envy_ = true;
  bool stop_at_leaf_ = false;
  std::vector<double> lows_;
  std::size_t nodes_ = 0;
};

}  // namespace detail

/// Global optimum over all rows of `m`. The warm start seeds the incumbent
/// when it satisfies every row.
inline Assignment solve(const IlpModel& m, const Assignment* warm = nullptr, const SolveOptions& options = {}) {
  return detail::BranchAndBound(m, options).run(warm);
}

/// CPLEX LP text format.
inline void write_lp(std::ostream& out, const IlpModel& m) {
  auto term = [&](double c, const std::string& v, bool first) {
    if (c < 0)
      out << (first ? "- " : " - ") << -c << ' ' << v;
    else
      out << (first ? "" : " + ") << c << ' ' << v;
  };
  out << "Minimize\n obj:";
  if (m.var_count() == 0) out << " 0";
  for (std::size_t v = 0; v < m.var_count(); ++v) {
    out << (v == 0 ? " " : "");
    term(m.cost[v], m.var_names[v], v == 0);
  }
  out << "\nSubject To\n";
  for (const auto& row : m.rows) {
    out << ' ' << row.name << ": ";
    for (std::size_t i = 0; i < row.terms.size(); ++i) term(row.terms[i].second, m.var_names[row.terms[i].first], i == 0);
    out << (row.sense == Sense::Eq ? " = " : row.sense == Sense::Le ? " <= " : " >= ") << row.rhs << '\n';
  }
  for (const auto& row : m.envy) {
    out << " envy_" << row.a << '_' << row.b << ": ";
    term(m.big_m, m.var_names[row.a], true);
    term(m.big_m, m.var_names[row.b], false);
    out << " <= " << row.rhs << '\n';
  }
  out << "Binaries\n";
  for (const auto& n : m.var_names) out << ' ' << n << '\n';
  out << "End\n";
}

}  // namespace fairfleet
