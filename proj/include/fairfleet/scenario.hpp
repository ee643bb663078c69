#pragma once

// Scenario documents (JSON) and the templated request generator.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fairfleet/assign.hpp"
#include "fairfleet/errors.hpp"
#include "fairfleet/network.hpp"
#include "fairfleet/routing.hpp"

namespace fairfleet {

struct SimParams {
  Tick max_wait = 120;
  Tick max_delay = 240;
  double lambda_ko = 1e5;
  double lambda = 0.5;
  double alpha = 1.0;
};

struct FleetSpec {
  int count = 1;
  int capacity = 2;
  std::vector<std::string> positions;  // explicit start states; random when empty
  std::uint64_t seed = 1;
};

inline constexpr std::size_t kTemplateCount = 4;

struct GeneratorSpec {
  std::optional<int> count;            // uniform arrivals over [0, H)
  std::optional<double> rate;          // Poisson arrivals per minute
  std::array<double, kTemplateCount> weights{1, 1, 1, 1};
  std::uint64_t seed = 1;
};

struct Scenario {
  std::string name;
  std::string source;
  std::shared_ptr<const RoadNetwork> network;
  int ticks_per_minute = 60;
  Tick horizon = 0;
  FleetSpec fleet;
  SimParams params;
  std::vector<RequestSpec> requests;
  std::optional<GeneratorSpec> generator;
};

// ---------------------------------------------------------------------------
// Request templates

/// Pick-up proposition and body of one templated request.
struct TemplateInstance {
  int kind;  // 1..4
  std::string pick;
  std::string body;
};

namespace detail {

inline std::vector<std::string> unique_props(const RoadNetwork& net) {
  std::vector<std::string> out;
  for (const auto& p : net.propositions())
    if (net.states_with(p).size() == 1) out.push_back(p);
  return out;
}

template <class T>
const T& draw(std::mt19937_64& rng, const std::vector<T>& v) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

inline bool distinct(std::initializer_list<std::string> xs) {
  std::set<std::string> s(xs.begin(), xs.end());
  return s.size() == xs.size();
}

}  // namespace detail

/// Draws one instance of template `kind`:
///   1: F(p & F(s1 & F s2))
///   2: F(p & F((s1 | s2) & s3))
///   3: F(p & F(s1 & (s2 | s3)))
///   4: F(p & F(s1 & !s2 [& !s3]))
/// Conjunctive targets are taken from the labels of one witness state so
/// every instance is satisfiable. Returns nullopt if the map cannot host it.
inline std::optional<TemplateInstance> draw_template(const RoadNetwork& net, int kind, std::mt19937_64& rng) {
  const auto uniq = detail::unique_props(net);
  if (uniq.empty()) return std::nullopt;
  std::vector<StateIndex> rich;
  for (StateIndex s = 0; s < net.size(); ++s)
    if (net.label(s).size() >= 2) rich.push_back(s);
  const auto& all = net.propositions();
  for (int attempt = 0; attempt < 64; ++attempt) {
    const std::string p = detail::draw(rng, uniq);
    switch (kind) {
      case 1: {
        const auto s1 = detail::draw(rng, uniq), s2 = detail::draw(rng, uniq);
        if (!detail::distinct({p, s1, s2})) continue;
        return TemplateInstance{1, p, "F (" + s1 + " & F " + s2 + ")"};
      }
      case 2:
      case 3: {
        if (rich.empty()) return std::nullopt;
        const auto& lab = net.label(detail::draw(rng, rich));
        const auto a = detail::draw(rng, lab), b = detail::draw(rng, lab), c = detail::draw(rng, all);
        if (!detail::distinct({p, a, b, c})) continue;
        if (kind == 2) return TemplateInstance{2, p, "F ((" + c + " | " + a + ") & " + b + ")"};
        return TemplateInstance{3, p, "F (" + a + " & (" + b + " | " + c + "))"};
      }
      case 4: {
        const StateIndex w = static_cast<StateIndex>(std::uniform_int_distribution<std::size_t>(0, net.size() - 1)(rng));
        const auto& lab = net.label(w);
        if (lab.empty()) continue;
        // Prefer a shared target so avoidance actually restricts the choice.
        std::vector<std::string> shared;
        for (const auto& l : lab)
          if (net.states_with(l).size() > 1) shared.push_back(l);
        const auto s1 = detail::draw(rng, shared.empty() ? lab : shared);
        const int avoid = std::uniform_int_distribution<int>(1, 2)(rng);
        std::vector<std::string> outside;
        for (const auto& q : all)
          if (!net.has_label(w, q) && q != p) outside.push_back(q);
        if (outside.empty() || s1 == p) continue;
        std::string body = "F (" + s1;
        std::set<std::string> used{p, s1};
        for (int k = 0; k < avoid; ++k) {
          const auto n = detail::draw(rng, outside);
          if (!used.insert(n).second) continue;
          body += " & !" + n;
        }
        return TemplateInstance{4, p, body + ")"};
      }
      default: throw ConfigError("unknown request template " + std::to_string(kind));
    }
  }
  return std::nullopt;
}

inline Tick minutes_to_ticks(double minutes, int ticks_per_minute) {
  return static_cast<Tick>(std::llround(minutes * ticks_per_minute));
}

/// Seeded request stream, sorted by arrival.
inline std::vector<RequestSpec> generate_requests(const RoadNetwork& net, const GeneratorSpec& gen, Tick horizon,
                                                  int ticks_per_minute, const SimParams& params) {
  std::mt19937_64 rng(gen.seed);
  std::vector<Tick> arrivals;
  if (gen.count) {
    std::uniform_int_distribution<Tick> at(0, std::max<Tick>(horizon - 1, 0));
    for (int i = 0; i < *gen.count; ++i) arrivals.push_back(at(rng));
  } else if (gen.rate && *gen.rate > 0) {
    std::exponential_distribution<double> gap(*gen.rate / ticks_per_minute);
    for (double t = gap(rng); t < static_cast<double>(horizon); t += gap(rng)) arrivals.push_back(static_cast<Tick>(t));
  }
  std::sort(arrivals.begin(), arrivals.end());
  std::discrete_distribution<int> which(gen.weights.begin(), gen.weights.end());
  std::vector<RequestSpec> out;
  const int width = static_cast<int>(std::to_string(arrivals.size()).size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    std::optional<TemplateInstance> inst;
    const int first = which(rng) + 1;
    for (int k = 0; k < static_cast<int>(kTemplateCount) && !inst; ++k)
      inst = draw_template(net, (first - 1 + k) % static_cast<int>(kTemplateCount) + 1, rng);
    if (!inst) throw ConfigError("network cannot host any request template (no uniquely labelled states)");
    std::ostringstream id;
    id << 'q' << std::setw(width) << std::setfill('0') << i;
    out.push_back({id.str(), inst->pick, inst->body, arrivals[i], 1, params.max_wait, params.max_delay, {}, {}});
  }
  return out;
}

/// FNV-1a over the canonical text of a request list.
inline std::uint64_t stream_hash(const std::vector<RequestSpec>& reqs) {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (const auto& r : reqs) {
    feed(r.id);
    feed(r.pick_prop);
    feed(r.formula);
    feed(std::to_string(r.t_req));
    feed(std::to_string(r.seats));
    feed(std::to_string(r.max_wait));
    feed(std::to_string(r.max_delay));
    for (const auto& s : r.sub_formulas) feed(s);
    feed(r.group);
  }
  return h;
}

/// The request list a run consumes: the explicit list plus any generated
/// stream, sorted by arrival then id.
inline std::vector<RequestSpec> request_stream(const Scenario& sc) {
  std::vector<RequestSpec> out = sc.requests;
  if (sc.generator) {
    auto gen = generate_requests(*sc.network, *sc.generator, sc.horizon, sc.ticks_per_minute, sc.params);
    out.insert(out.end(), gen.begin(), gen.end());
  }
  std::stable_sort(out.begin(), out.end(), [](const RequestSpec& a, const RequestSpec& b) {
    return a.t_req != b.t_req ? a.t_req < b.t_req : a.id < b.id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// JSON loading

namespace detail {

using nlohmann::json;

class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  template <class T>
  T get(const char* key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  T require(const char* key) {
    if (!has(key)) throw ConfigError(where_ + ": missing field '" + key + "'");
    return as<T>(key);
  }

  const json& at(const char* key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown field '" + k + "'");
  }

  const std::string& where() const { return where_; }

 private:
  template <class T>
  T as(const char* key) {
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + ": field '" + key + "' has the wrong type");
    }
  }

  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

inline std::shared_ptr<const RoadNetwork> load_network_field(const json& j, const std::filesystem::path& base,
                                                             const std::string& where) {
  if (j.is_string()) {
    auto path = base / j.get<std::string>();
    return std::make_shared<const RoadNetwork>(load_network_file(path.string()));
  }
  Fields f(j, where);
  std::shared_ptr<const RoadNetwork> net;
  if (f.has("grid")) {
    Fields g(f.at("grid"), where + ".grid");
    GridSpec spec;
    spec.rows = g.get("rows", spec.rows);
    spec.cols = g.get("cols", spec.cols);
    spec.min_weight = g.get("min_weight", spec.min_weight);
    spec.max_weight = g.get("max_weight", spec.max_weight);
    spec.label_density = g.get("label_density", spec.label_density);
    spec.landmarks = g.get("landmarks", spec.landmarks);
    spec.seed = g.get("seed", spec.seed);
    g.finish();
    net = std::make_shared<const RoadNetwork>(RoadNetwork::build(generate_grid(spec)));
  } else if (f.has("inline")) {
    std::istringstream in(f.require<std::string>("inline"));
    net = std::make_shared<const RoadNetwork>(load_network(in, where + ".inline"));
  } else if (f.has("file")) {
    auto path = base / f.require<std::string>("file");
    net = std::make_shared<const RoadNetwork>(load_network_file(path.string()));
  } else {
    throw ConfigError(where + ": expected a file name or one of 'file', 'grid', 'inline'");
  }
  f.finish();
  return net;
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& doc, const std::string& source,
                               const std::filesystem::path& base_dir) {
  detail::Fields top(doc, source);
  Scenario sc;
  sc.source = source;
  sc.name = top.get<std::string>("name", std::filesystem::path(source).stem().string());
  sc.ticks_per_minute = top.get("ticks_per_minute", sc.ticks_per_minute);
  if (sc.ticks_per_minute < 1) throw ConfigError(source + ": ticks_per_minute must be >= 1");
  const int tpm = sc.ticks_per_minute;
  if (!top.has("network")) throw ConfigError(source + ": missing field 'network'");
  sc.network = detail::load_network_field(top.at("network"), base_dir, source + ".network");
  sc.horizon = minutes_to_ticks(top.require<double>("horizon"), tpm);
  if (sc.horizon <= 0) throw ConfigError(source + ": horizon must be positive");

  if (top.has("params")) {
    detail::Fields p(top.at("params"), source + ".params");
    if (p.has("max_wait")) sc.params.max_wait = minutes_to_ticks(p.require<double>("max_wait"), tpm);
    else sc.params.max_wait = minutes_to_ticks(2, tpm);
    if (p.has("max_delay")) sc.params.max_delay = minutes_to_ticks(p.require<double>("max_delay"), tpm);
    else sc.params.max_delay = minutes_to_ticks(4, tpm);
    sc.params.lambda_ko = p.get("lambda_ko", sc.params.lambda_ko);
    sc.params.lambda = p.get("lambda", sc.params.lambda);
    sc.params.alpha = p.get("alpha", sc.params.alpha);
    p.finish();
  } else {
    sc.params.max_wait = minutes_to_ticks(2, tpm);
    sc.params.max_delay = minutes_to_ticks(4, tpm);
  }
  if (sc.params.max_wait < 0 || sc.params.max_delay < 0) throw ConfigError(source + ".params: tolerances must be >= 0");
  if (sc.params.lambda < 0 || sc.params.lambda > 1) throw ConfigError(source + ".params: lambda must be in [0, 1]");
  if (sc.params.alpha < 0) throw ConfigError(source + ".params: alpha must be >= 0");
  if (sc.params.lambda_ko < 0) throw ConfigError(source + ".params: lambda_ko must be >= 0");

  {
    if (!top.has("fleet")) throw ConfigError(source + ": missing field 'fleet'");
    detail::Fields f(top.at("fleet"), source + ".fleet");
    sc.fleet.count = f.require<int>("count");
    sc.fleet.capacity = f.get("capacity", sc.fleet.capacity);
    sc.fleet.positions = f.get("positions", sc.fleet.positions);
    sc.fleet.seed = f.get("seed", sc.fleet.seed);
    f.finish();
    if (sc.fleet.count < 0) throw ConfigError(source + ".fleet: count must be >= 0");
    if (sc.fleet.capacity < 1) throw ConfigError(source + ".fleet: capacity must be >= 1");
    if (!sc.fleet.positions.empty() && static_cast<int>(sc.fleet.positions.size()) != sc.fleet.count)
      throw ConfigError(source + ".fleet: positions must list one state per vehicle");
    for (const auto& p : sc.fleet.positions)
      if (!sc.network->find(p)) throw ConfigError(source + ".fleet: unknown start state '" + p + "'");
  }

  if (top.has("requests")) {
    const auto& list = top.at("requests");
    if (!list.is_array()) throw ConfigError(source + ".requests: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      detail::Fields r(list[i], source + ".requests[" + std::to_string(i) + "]");
      RequestSpec spec;
      spec.id = r.require<std::string>("id");
      spec.pick_prop = r.require<std::string>("pickup");
      spec.formula = r.require<std::string>("formula");
      spec.t_req = minutes_to_ticks(r.get("time", 0.0), tpm);
      spec.seats = r.get("seats", 1);
      spec.max_wait = r.has("max_wait") ? minutes_to_ticks(r.require<double>("max_wait"), tpm) : sc.params.max_wait;
      spec.max_delay = r.has("max_delay") ? minutes_to_ticks(r.require<double>("max_delay"), tpm) : sc.params.max_delay;
      spec.sub_formulas = r.get("sub_formulas", spec.sub_formulas);
      r.finish();
      if (spec.t_req < 0) throw ConfigError(r.where() + ": time must be >= 0");
      try {
        for (const auto& s : split_subrequests(spec, sc.fleet.capacity)) make_request(*sc.network, s);
      } catch (const Error& e) {
        throw ConfigError(r.where() + ": " + e.what());
      }
      sc.requests.push_back(std::move(spec));
    }
    std::set<std::string> ids;
    for (const auto& r : sc.requests)
      if (!ids.insert(r.id).second) throw ConfigError(source + ".requests: duplicate id '" + r.id + "'");
  }

  if (top.has("generator")) {
    detail::Fields g(top.at("generator"), source + ".generator");
    GeneratorSpec gen;
    if (g.has("count")) gen.count = g.require<int>("count");
    if (g.has("rate")) gen.rate = g.require<double>("rate");
    if (gen.count.has_value() == gen.rate.has_value())
      throw ConfigError(g.where() + ": set exactly one of 'count' and 'rate'");
    if ((gen.count && *gen.count < 0) || (gen.rate && *gen.rate < 0))
      throw ConfigError(g.where() + ": count and rate must be >= 0");
    if (g.has("templates")) {
      auto w = g.require<std::vector<double>>("templates");
      if (w.size() != kTemplateCount) throw ConfigError(g.where() + ": templates needs four weights");
      double sum = 0;
      for (std::size_t i = 0; i < kTemplateCount; ++i) {
        if (w[i] < 0) throw ConfigError(g.where() + ": template weights must be >= 0");
        gen.weights[i] = w[i];
        sum += w[i];
      }
      if (sum <= 0) throw ConfigError(g.where() + ": at least one template weight must be positive");
    }
    gen.seed = g.get("seed", gen.seed);
    g.finish();
    std::mt19937_64 probe(gen.seed);
    for (int k = 1; k <= static_cast<int>(kTemplateCount); ++k)
      if (gen.weights[k - 1] > 0 && !draw_template(*sc.network, k, probe))
        throw ConfigError(g.where() + ": template " + std::to_string(k) + " cannot be placed on this network");
    sc.generator = gen;
  }
  top.finish();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return parse_scenario(doc, path, std::filesystem::path(path).parent_path());
}

}  // namespace fairfleet
