#pragma once

// Road environment as a weighted transition system: intersections carry
// proposition labels, directed roads carry positive integer durations.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fairfleet/errors.hpp"

namespace fairfleet {

using Tick = std::int64_t;
using StateIndex = std::uint32_t;

inline constexpr Tick kUnreachable = std::numeric_limits<Tick>::max();

/// Non-negative span of ticks. Addition throws instead of wrapping.
class Duration {
 public:
  constexpr Duration() = default;
  constexpr explicit Duration(Tick ticks) : ticks_(ticks) {
    if (ticks < 0) throw std::invalid_argument("negative duration");
  }
  constexpr Tick ticks() const noexcept { return ticks_; }

  friend Duration operator+(Duration a, Duration b) {
    if (a.ticks_ > std::numeric_limits<Tick>::max() - b.ticks_)
      throw std::overflow_error("duration overflow");
    return Duration(a.ticks_ + b.ticks_);
  }
  friend constexpr auto operator<=>(Duration, Duration) = default;

 private:
  Tick ticks_ = 0;
};

struct StateRecord {
  std::string id;
  std::vector<std::string> labels;
  std::size_t line = 0;
};

struct RoadRecord {
  std::string from;
  std::string to;
  Tick weight = 0;
  bool bidirectional = false;
  std::size_t line = 0;
};

struct NetworkDescription {
  std::vector<StateRecord> states;
  std::vector<RoadRecord> roads;
  std::string source = "<memory>";
};

class RoadNetwork {
 public:
  struct Road {
    StateIndex to;
    Tick weight;
  };

  RoadNetwork() = default;

  /// Validates `desc` and builds the network. State indices follow the
  /// lexicographic order of state identifiers.
  static RoadNetwork build(const NetworkDescription& desc);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t road_count() const noexcept { return road_count_; }

  const std::string& name(StateIndex s) const { return names_.at(s); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<StateIndex> find(std::string_view id) const {
    auto it = std::lower_bound(names_.begin(), names_.end(), id);
    if (it == names_.end() || *it != id) return std::nullopt;
    return static_cast<StateIndex>(it - names_.begin());
  }
  StateIndex index_of(std::string_view id) const {
    if (auto s = find(id)) return *s;
    throw UnknownState(std::string(id));
  }

  std::span<const Road> successors(StateIndex s) const {
    return {out_.data() + out_begin_.at(s), out_begin_.at(s + 1) - out_begin_.at(s)};
  }
  std::span<const Road> predecessors(StateIndex s) const {
    return {in_.data() + in_begin_.at(s), in_begin_.at(s + 1) - in_begin_.at(s)};
  }
  std::optional<Tick> weight(StateIndex from, StateIndex to) const {
    for (const Road& r : successors(from))
      if (r.to == to) return r.weight;
    return std::nullopt;
  }

  /// Sorted propositions that hold at `s`.
  const std::vector<std::string>& label(StateIndex s) const { return labels_.at(s); }
  bool has_label(StateIndex s, std::string_view prop) const {
    const auto& l = labels_.at(s);
    return std::binary_search(l.begin(), l.end(), prop);
  }
  /// Sorted proposition universe (union of all labels).
  const std::vector<std::string>& propositions() const noexcept { return universe_; }
  std::vector<StateIndex> states_with(std::string_view prop) const {
    std::vector<StateIndex> out;
    for (StateIndex s = 0; s < size(); ++s)
      if (has_label(s, prop)) out.push_back(s);
    return out;
  }

  NetworkDescription describe() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> labels_;
  std::vector<std::string> universe_;
  std::vector<std::size_t> out_begin_, in_begin_;
  std::vector<Road> out_, in_;
  std::size_t road_count_ = 0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline std::string where(const std::string& source, std::size_t line) {
  if (line == 0) return source;
  return source + ":" + std::to_string(line);
}

inline bool valid_identifier(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

}  // namespace detail

inline RoadNetwork RoadNetwork::build(const NetworkDescription& desc) {
  RoadNetwork net;
  std::map<std::string, const StateRecord*> by_id;
  for (const auto& st : desc.states) {
    if (!detail::valid_identifier(st.id))
      throw ValidationError(detail::where(desc.source, st.line) + ": invalid state id '" + st.id + "'");
    if (!by_id.emplace(st.id, &st).second)
      throw ValidationError(detail::where(desc.source, st.line) + ": duplicate state '" + st.id + "'");
  }
  std::set<std::string> universe;
  for (const auto& [id, rec] : by_id) {
    net.names_.push_back(id);
    std::vector<std::string> l;
    for (const auto& p : rec->labels) {
      if (!detail::valid_identifier(p))
        throw ValidationError(detail::where(desc.source, rec->line) + ": invalid proposition '" + p + "'");
      l.push_back(p);
      universe.insert(p);
    }
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
    net.labels_.push_back(std::move(l));
  }
  net.universe_.assign(universe.begin(), universe.end());

  std::set<std::pair<StateIndex, StateIndex>> seen;
  std::vector<std::pair<std::pair<StateIndex, StateIndex>, Tick>> edges;
  auto add = [&](StateIndex a, StateIndex b, Tick w, const RoadRecord& r) {
    if (!seen.insert({a, b}).second)
      throw ValidationError(detail::where(desc.source, r.line) + ": duplicate road " +
                            net.names_[a] + " -> " + net.names_[b]);
    edges.push_back({{a, b}, w});
  };
  for (const auto& r : desc.roads) {
    auto from = net.find(r.from), to = net.find(r.to);
    if (!from)
      throw ValidationError(detail::where(desc.source, r.line) + ": road endpoint '" + r.from + "' is not a declared state");
    if (!to)
      throw ValidationError(detail::where(desc.source, r.line) + ": road endpoint '" + r.to + "' is not a declared state");
    if (r.weight < 1)
      throw ValidationError(detail::where(desc.source, r.line) + ": road " + r.from + " -> " + r.to +
                            " has non-positive weight " + std::to_string(r.weight));
    add(*from, *to, r.weight, r);
    if (r.bidirectional) add(*to, *from, r.weight, r);
  }
  std::sort(edges.begin(), edges.end());

  const std::size_t n = net.names_.size();
  net.road_count_ = edges.size();
  net.out_begin_.assign(n + 1, 0);
  net.in_begin_.assign(n + 1, 0);
  for (const auto& [e, w] : edges) {
    ++net.out_begin_[e.first + 1];
    ++net.in_begin_[e.second + 1];
  }
  for (std::size_t i = 0; i < n; ++i) {
    net.out_begin_[i + 1] += net.out_begin_[i];
    net.in_begin_[i + 1] += net.in_begin_[i];
  }
  net.out_.resize(edges.size());
  net.in_.resize(edges.size());
  auto out_pos = net.out_begin_, in_pos = net.in_begin_;
  for (const auto& [e, w] : edges) {
    net.out_[out_pos[e.first]++] = {e.second, w};
    net.in_[in_pos[e.second]++] = {e.first, w};
  }
  return net;
}

inline NetworkDescription RoadNetwork::describe() const {
  NetworkDescription d;
  for (StateIndex s = 0; s < size(); ++s) d.states.push_back({names_[s], labels_[s], 0});
  for (StateIndex s = 0; s < size(); ++s)
    for (const Road& r : successors(s)) d.roads.push_back({names_[s], names_[r.to], r.weight, false, 0});
  return d;
}

// ---------------------------------------------------------------------------
// Text format
//
//   # comment
//   [states]
//   A  A,shop          <id> [comma-separated labels]
//   [roads]
//   A -> C 2           directed
//   B <-> D 2          expands to two directed roads

inline NetworkDescription parse_network(std::istream& in, const std::string& source = "<input>") {
  NetworkDescription d;
  d.source = source;
  enum class Section { None, States, Roads } section = Section::None;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line == "[states]") {
      section = Section::States;
      continue;
    }
    if (line == "[roads]") {
      section = Section::Roads;
      continue;
    }
    std::istringstream ls(line);
    const auto at = detail::where(source, line_no);
    if (section == Section::States) {
      StateRecord rec;
      rec.line = line_no;
      std::string labels, extra;
      ls >> rec.id >> labels;
      if (ls >> extra) throw ParseError(at + ": unexpected token '" + extra + "' in state record");
      std::stringstream ss(labels);
      std::string p;
      while (std::getline(ss, p, ','))
        if (auto t = detail::trim(p); !t.empty()) rec.labels.push_back(t);
      d.states.push_back(std::move(rec));
    } else if (section == Section::Roads) {
      RoadRecord rec;
      rec.line = line_no;
      std::string arrow, weight, extra;
      if (!(ls >> rec.from >> arrow >> rec.to >> weight))
        throw ParseError(at + ": road record must read '<from> -> <to> <weight>'");
      if (ls >> extra) throw ParseError(at + ": unexpected token '" + extra + "' in road record");
      if (arrow == "<->")
        rec.bidirectional = true;
      else if (arrow != "->")
        throw ParseError(at + ": expected '->' or '<->', got '" + arrow + "'");
      try {
        std::size_t used = 0;
        rec.weight = std::stoll(weight, &used);
        if (used != weight.size()) throw std::invalid_argument(weight);
      } catch (const std::exception&) {
        throw ParseError(at + ": weight '" + weight + "' is not an integer");
      }
      d.roads.push_back(std::move(rec));
    } else {
      throw ParseError(at + ": record outside of a [states] or [roads] section");
    }
  }
  return d;
}

inline RoadNetwork load_network(std::istream& in, const std::string& source = "<input>") {
  return RoadNetwork::build(parse_network(in, source));
}

inline RoadNetwork load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open network file");
  return load_network(in, path);
}

inline void write_network(std::ostream& out, const RoadNetwork& net) {
  out << "[states]\n";
  for (StateIndex s = 0; s < net.size(); ++s) {
    out << net.name(s);
    const auto& l = net.label(s);
    for (std::size_t i = 0; i < l.size(); ++i) out << (i == 0 ? " " : ",") << l[i];
    out << '\n';
  }
  out << "[roads]\n";
  for (StateIndex s = 0; s < net.size(); ++s)
    for (const auto& r : net.successors(s))
      out << net.name(s) << " -> " << net.name(r.to) << ' ' << r.weight << '\n';
}

// ---------------------------------------------------------------------------
// Shortest travel times

/// Dijkstra from `source`; entry i is the travel time to state i or
/// kUnreachable.
inline std::vector<Tick> travel_times_from(const RoadNetwork& net, StateIndex source) {
  std::vector<Tick> dist(net.size(), kUnreachable);
  using Item = std::pair<Tick, StateIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist.at(source) = 0;
  pq.push({0, source});
  while (!pq.empty()) {
    auto [d, s] = pq.top();
    pq.pop();
    if (d != dist[s]) continue;
    for (const auto& r : net.successors(s)) {
      if (d + r.weight < dist[r.to]) {
        dist[r.to] = d + r.weight;
        pq.push({dist[r.to], r.to});
      }
    }
  }
  return dist;
}

/// Travel time from every state to `target`.
inline std::vector<Tick> travel_times_to(const RoadNetwork& net, StateIndex target) {
  std::vector<Tick> dist(net.size(), kUnreachable);
  using Item = std::pair<Tick, StateIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist.at(target) = 0;
  pq.push({0, target});
  while (!pq.empty()) {
    auto [d, s] = pq.top();
    pq.pop();
    if (d != dist[s]) continue;
    for (const auto& r : net.predecessors(s)) {
      if (d + r.weight < dist[r.to]) {
        dist[r.to] = d + r.weight;
        pq.push({dist[r.to], r.to});
      }
    }
  }
  return dist;
}

inline std::optional<Duration> shortest_travel_time(const RoadNetwork& net, StateIndex from, StateIndex to) {
  if (from >= net.size()) throw UnknownState("#" + std::to_string(from));
  if (to >= net.size()) throw UnknownState("#" + std::to_string(to));
  const Tick d = travel_times_from(net, from)[to];
  if (d == kUnreachable) return std::nullopt;
  return Duration(d);
}

inline std::optional<Duration> shortest_travel_time(const RoadNetwork& net, std::string_view from,
                                                    std::string_view to) {
  return shortest_travel_time(net, net.index_of(from), net.index_of(to));
}

/// Minimum-duration path; among equal-duration paths the lexicographically
/// smallest state sequence.
inline std::optional<std::vector<StateIndex>> shortest_path(const RoadNetwork& net, StateIndex from,
                                                            StateIndex to) {
  const auto to_target = travel_times_to(net, to);
  if (to_target.at(from) == kUnreachable) return std::nullopt;
  std::vector<StateIndex> path{from};
  StateIndex cur = from;
  while (cur != to) {
    // Successors are sorted by index, so the first tight edge is the
    // lexicographically smallest continuation.
    for (const auto& r : net.successors(cur)) {
      if (to_target[r.to] != kUnreachable && r.weight + to_target[r.to] == to_target[cur]) {
        cur = r.to;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

/// All-pairs travel times, computed once and shared read-only.
class DistanceTable {
 public:
  DistanceTable() = default;
  explicit DistanceTable(const RoadNetwork& net) : n_(net.size()), d_(n_ * n_) {
    for (StateIndex s = 0; s < n_; ++s) {
      auto row = travel_times_from(net, s);
      std::copy(row.begin(), row.end(), d_.begin() + static_cast<std::ptrdiff_t>(s * n_));
    }
  }
  Tick operator()(StateIndex from, StateIndex to) const { return d_[from * n_ + to]; }
  std::size_t size() const noexcept { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<Tick> d_;
};

// ---------------------------------------------------------------------------
// Synthetic grid maps

struct GridSpec {
  int rows = 12;
  int cols = 12;
  Tick min_weight = 10;
  Tick max_weight = 40;
  double label_density = 0.3;  // fraction of states carrying landmark labels
  int landmarks = 6;           // landmark propositions L0..L{n-1}
  std::uint64_t seed = 1;
};

inline std::string grid_state_id(int r, int c) {
  std::ostringstream s;
  s << 'r' << std::setw(2) << std::setfill('0') << r << 'c' << std::setw(2) << std::setfill('0') << c;
  return s.str();
}

/// 4-neighbour grid with two-way roads of equal duration. Every state is
/// labelled with its own id; a `label_density` fraction also carry one or
/// two landmark propositions, and every landmark appears at least once.
inline NetworkDescription generate_grid(const GridSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) throw ConfigError("grid needs at least one row and column");
  if (spec.min_weight < 1 || spec.max_weight < spec.min_weight)
    throw ConfigError("grid weight range must satisfy 1 <= min <= max");
  if (spec.label_density < 0 || spec.label_density > 1) throw ConfigError("label density must be in [0, 1]");
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<Tick> weight(spec.min_weight, spec.max_weight);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  NetworkDescription d;
  d.source = "<grid>";
  const int n = spec.rows * spec.cols;
  std::vector<std::set<std::string>> marks(static_cast<std::size_t>(n));
  if (spec.landmarks > 0) {
    std::uniform_int_distribution<int> pick(0, spec.landmarks - 1);
    for (int i = 0; i < n; ++i) {
      if (unit(rng) >= spec.label_density) continue;
      marks[i].insert("L" + std::to_string(pick(rng)));
      if (unit(rng) < 0.5) marks[i].insert("L" + std::to_string(pick(rng)));
    }
    std::uniform_int_distribution<int> any_state(0, n - 1);
    for (int k = 0; k < spec.landmarks; ++k) {
      const std::string p = "L" + std::to_string(k);
      bool used = std::any_of(marks.begin(), marks.end(), [&](const auto& m) { return m.count(p) > 0; });
      if (!used) marks[any_state(rng)].insert(p);
    }
  }
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      StateRecord st;
      st.id = grid_state_id(r, c);
      st.labels.push_back(st.id);
      for (const auto& m : marks[r * spec.cols + c]) st.labels.push_back(m);
      d.states.push_back(std::move(st));
    }
  }
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      if (c + 1 < spec.cols) d.roads.push_back({grid_state_id(r, c), grid_state_id(r, c + 1), weight(rng), true, 0});
      if (r + 1 < spec.rows) d.roads.push_back({grid_state_id(r, c), grid_state_id(r + 1, c), weight(rng), true, 0});
    }
  }
  return d;
}

}  // namespace fairfleet
