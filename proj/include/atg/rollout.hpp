#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "atg/core_model.hpp"
#include "atg/geometry.hpp"
#include "atg/json_io.hpp"

namespace atg {

struct RolloutConfig {
  /// Steps after spawn (inclusive) during which an aircraft must not interact.
  int grace_steps = 1;
  double head_on_min_deg = 135.0;
  double catch_up_max_deg = 45.0;
};

/// Index into the aircraft's route at time t, or nullopt before spawn and
/// after exit. Slow movers advance on even offsets from their own spawn time.
inline std::optional<std::size_t> position_at(const Aircraft& a, int t, std::size_t route_length) noexcept {
  if (t < a.spawn_time) return std::nullopt;
  const auto index = static_cast<std::size_t>((t - a.spawn_time) / steps_per_node(a.speed));
  if (index >= route_length) return std::nullopt;
  return index;
}

/// Aircraft present at each node for t in [0, duration).
struct OccupancyTable {
  std::vector<std::map<NodeId, std::set<AircraftId, NaturalLess>, NaturalLess>> steps;

  int duration() const noexcept { return static_cast<int>(steps.size()); }
};

inline OccupancyTable simulate(const Scenario& s, const SectorGraph& g) {
  OccupancyTable table;
  table.steps.resize(static_cast<std::size_t>(std::max(0, s.duration)));
  for (const auto& a : s.aircraft) {
    const auto& route = g.routes.find(a.route);
    if (route == g.routes.end()) throw Error(ErrorCode::unknown_route, a.id + ":" + a.route);
    const auto& seq = route->second;
    for (int t = std::max(0, a.spawn_time); t < s.duration; ++t) {
      auto idx = position_at(a, t, seq.size());
      if (!idx) break;
      table.steps[static_cast<std::size_t>(t)][seq[*idx]].insert(a.id);
    }
  }
  return table;
}

namespace detail {

struct Track {
  const Aircraft* aircraft = nullptr;
  const std::vector<NodeId>* route = nullptr;
  std::vector<int> node_at;  // dense node index per step, -1 when absent
};

inline std::vector<Track> build_tracks(const Scenario& s, const SectorGraph& g,
                                       std::unordered_map<NodeId, int>& node_index) {
  std::vector<Track> tracks;
  tracks.reserve(s.aircraft.size());
  for (const auto& a : s.aircraft) {
    auto it = g.routes.find(a.route);
    if (it == g.routes.end()) throw Error(ErrorCode::unknown_route, a.id + ":" + a.route);
    Track tr{&a, &it->second, std::vector<int>(static_cast<std::size_t>(std::max(0, s.duration)), -1)};
    for (int t = 0; t < s.duration; ++t) {
      if (auto idx = position_at(a, t, it->second.size())) {
        const NodeId& n = it->second[*idx];
        auto [ni, _] = node_index.emplace(n, static_cast<int>(node_index.size()));
        tr.node_at[static_cast<std::size_t>(t)] = ni->second;
      }
    }
    tracks.push_back(std::move(tr));
  }
  return tracks;
}

inline const Aircraft& find_aircraft(const Scenario& s, const AircraftId& id) {
  for (const auto& a : s.aircraft) {
    if (a.id == id) return a;
  }
  throw Error(ErrorCode::invalid_input, "no aircraft " + id);
}

}  // namespace detail

/// Interaction class of a detected event. Swaps are head-on. For same-node
/// events the headings (previous route node to current node, or current to
/// next for an aircraft still at its entry node) decide: >= 135 deg head-on;
/// <= 45 deg on a common local path (same predecessor or successor) catch-up;
/// anything else cross-path.
inline InteractionClass classify(const InteractionEvent& ev, const Scenario& s, const SectorGraph& g,
                                 const RolloutConfig& cfg = {}) {
  if (ev.mechanism == Mechanism::swap) return InteractionClass::head_on;
  const Aircraft& a = detail::find_aircraft(s, ev.pair.first);
  const Aircraft& b = detail::find_aircraft(s, ev.pair.second);
  const auto& ra = g.route(a.route);
  const auto& rb = g.route(b.route);
  const auto ia = position_at(a, ev.time, ra.size());
  const auto ib = position_at(b, ev.time, rb.size());
  if (!ia || !ib) throw Error(ErrorCode::invalid_input, "event aircraft not airborne at t=" + std::to_string(ev.time));

  auto heading = [&g](const std::vector<NodeId>& r, std::size_t i) {
    if (i > 0) return geom::operator-(g.position(r[i]), g.position(r[i - 1]));
    return geom::operator-(g.position(r[1]), g.position(r[0]));
  };
  const double theta = geom::angle_deg(heading(ra, *ia), heading(rb, *ib));
  if (theta >= cfg.head_on_min_deg) return InteractionClass::head_on;
  if (theta <= cfg.catch_up_max_deg) {
    auto pred = [](const std::vector<NodeId>& r, std::size_t i) -> std::optional<NodeId> {
      if (i == 0) return std::nullopt;
      return r[i - 1];
    };
    auto succ = [](const std::vector<NodeId>& r, std::size_t i) -> std::optional<NodeId> {
      if (i + 1 >= r.size()) return std::nullopt;
      return r[i + 1];
    };
    const auto pa = pred(ra, *ia), pb = pred(rb, *ib);
    const auto sa = succ(ra, *ia), sb = succ(rb, *ib);
    const bool shared_path = (pa && pb && *pa == *pb) || (sa && sb && *sa == *sb);
    if (shared_path) return InteractionClass::catch_up;
  }
  return InteractionClass::cross_path;
}

/// All pairwise interactions for t in [0, duration): same node at the same
/// step, or an exchange of nodes across one step with both aircraft moving.
/// Only pairs with overlapping flight-level ranges are considered. Sorted by
/// (time, pair).
inline std::vector<InteractionEvent> detect_interactions(const Scenario& s, const SectorGraph& g,
                                                         const RolloutConfig& cfg = {}) {
  std::unordered_map<NodeId, int> node_index;
  const auto tracks = detail::build_tracks(s, g, node_index);
  std::vector<NodeId> node_name(node_index.size());
  for (const auto& [name, idx] : node_index) node_name[static_cast<std::size_t>(idx)] = name;

  std::vector<InteractionEvent> events;
  auto emit = [&](int t, std::size_t i, std::size_t j, Mechanism m, std::vector<NodeId> nodes) {
    const Aircraft& a = *tracks[i].aircraft;
    const Aircraft& b = *tracks[j].aircraft;
    if (!fl_overlap(a, b)) return;
    InteractionEvent ev;
    ev.time = t;
    ev.pair = AircraftPair::of(a.id, b.id);
    ev.mechanism = m;
    ev.nodes = std::move(nodes);
    if (m == Mechanism::swap && ev.pair.first != a.id) std::swap(ev.nodes[0], ev.nodes[1]);
    events.push_back(std::move(ev));
  };

  for (int t = 0; t < s.duration; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    std::unordered_map<int, std::vector<std::size_t>> at_node;
    std::map<std::pair<int, int>, std::vector<std::size_t>> moves;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const int now = tracks[i].node_at[ts];
      if (now < 0) continue;
      at_node[now].push_back(i);
      if (t > 0) {
        const int before = tracks[i].node_at[ts - 1];
        if (before >= 0 && before != now) moves[{before, now}].push_back(i);
      }
    }
    for (const auto& [node, group] : at_node) {
      for (std::size_t x = 0; x < group.size(); ++x) {
        for (std::size_t y = x + 1; y < group.size(); ++y) {
          emit(t, group[x], group[y], Mechanism::same_node, {node_name[static_cast<std::size_t>(node)]});
        }
      }
    }
    for (const auto& [edge, group] : moves) {
      if (edge.first > edge.second) continue;  // each opposing pair handled once
      auto reverse = moves.find({edge.second, edge.first});
      if (reverse == moves.end()) continue;
      for (std::size_t i : group) {
        for (std::size_t j : reverse->second) {
          // nodes recorded as i's (from, to); emit() reorders for pair.first
          emit(t, i, j, Mechanism::swap,
               {node_name[static_cast<std::size_t>(edge.first)], node_name[static_cast<std::size_t>(edge.second)]});
        }
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const InteractionEvent& l, const InteractionEvent& r) {
    if (l.time != r.time) return l.time < r.time;
    if (!(l.pair == r.pair)) return l.pair < r.pair;
    return l.mechanism < r.mechanism;
  });
  for (auto& ev : events) ev.cls = classify(ev, s, g, cfg);
  return events;
}

inline std::set<AircraftPair> unique_pairs(const std::vector<InteractionEvent>& events) {
  std::set<AircraftPair> out;
  for (const auto& ev : events) out.insert(ev.pair);
  return out;
}

struct Violation {
  AircraftId aircraft;
  std::string rule;
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  bool schema_ok = true;
  std::vector<Violation> violations;
  std::vector<InteractionEvent> spawn_grace_violations;

  bool valid() const noexcept { return schema_ok && violations.empty() && spawn_grace_violations.empty(); }
};

namespace detail {

/// Checks that need only the aircraft records. Returns the subset that can be
/// rolled out (known route).
inline Scenario check_records(const Scenario& s, const SectorGraph& g, const std::optional<BenchmarkParams>& params,
                              ValidationReport& report, std::size_t entry_count) {
  if (s.duration < 1) report.violations.push_back({"", "duration", "duration must be >= 1"});
  if (params) {
    if (static_cast<int>(entry_count) != params->aircraft) {
      report.violations.push_back({"", "aircraft-count",
                                   "expected " + std::to_string(params->aircraft) + " aircraft, got " +
                                       std::to_string(entry_count)});
    }
    if (s.duration != params->duration) {
      report.violations.push_back({"", "duration-mismatch",
                                   "expected duration " + std::to_string(params->duration) + ", got " +
                                       std::to_string(s.duration)});
    }
  }
  Scenario runnable;
  runnable.duration = s.duration;
  std::set<AircraftId> ids;
  for (const auto& a : s.aircraft) {
    bool ok = true;
    if (!ids.insert(a.id).second) {
      report.violations.push_back({a.id, "duplicate-id", "aircraft id repeated"});
      ok = false;
    }
    if (!g.has_route(a.route)) {
      report.violations.push_back({a.id, "unknown-route", "route " + a.route + " does not exist"});
      ok = false;
    }
    if (a.spawn_time < 0 || a.spawn_time > s.duration - 1) {
      report.violations.push_back({a.id, "spawn-out-of-range",
                                   "spawn_time " + std::to_string(a.spawn_time) + " outside [0, " +
                                       std::to_string(s.duration - 1) + "]"});
    }
    for (int fl : {a.initial_fl, a.exit_fl}) {
      if (fl < kMinFlightLevel || fl > kMaxFlightLevel) {
        report.violations.push_back({a.id, "fl-out-of-range", "flight level " + std::to_string(fl) +
                                                                  " outside [0, 660]"});
        break;
      }
    }
    if (ok) runnable.aircraft.push_back(a);
  }
  return runnable;
}

inline void check_grace(const Scenario& runnable, const SectorGraph& g, const RolloutConfig& cfg,
                        ValidationReport& report) {
  const auto events = detect_interactions(runnable, g, cfg);
  std::map<AircraftId, int> spawn;
  for (const auto& a : runnable.aircraft) spawn[a.id] = a.spawn_time;
  for (const auto& ev : events) {
    auto in_grace = [&](const AircraftId& id) {
      const int s0 = spawn.at(id);
      return ev.time >= s0 && ev.time <= s0 + cfg.grace_steps;
    };
    if (in_grace(ev.pair.first) || in_grace(ev.pair.second)) report.spawn_grace_violations.push_back(ev);
  }
}

}  // namespace detail

/// Validates a parsed scenario against a sector and (optionally) benchmark
/// parameters. Findings are reported, never thrown.
inline ValidationReport validate_scenario(const Scenario& s, const SectorGraph& g,
                                          const std::optional<BenchmarkParams>& params = std::nullopt,
                                          const RolloutConfig& cfg = {}) {
  ValidationReport report;
  const Scenario runnable = detail::check_records(s, g, params, report, s.aircraft.size());
  detail::check_grace(runnable, g, cfg, report);
  return report;
}

/// Validates raw JSON: schema findings first, then the record and grace
/// checks on every entry that parsed.
inline ValidationReport validate_scenario_json(const json& j, const SectorGraph& g,
                                               const std::optional<BenchmarkParams>& params = std::nullopt,
                                               const RolloutConfig& cfg = {}) {
  const ScenarioParse parsed = parse_scenario(j);
  ValidationReport report;
  for (const auto& issue : parsed.issues) {
    report.violations.push_back({issue.aircraft_id, issue.rule, issue.detail});
    if (issue.rule == "schema") report.schema_ok = false;
  }
  if (parsed.structural) return report;
  const Scenario runnable = detail::check_records(parsed.scenario, g, params, report, j["aircraft"].size());
  detail::check_grace(runnable, g, cfg, report);
  return report;
}

// ------------------------------------------------------------ JSON views

inline ordered_json event_to_json(const InteractionEvent& ev) {
  ordered_json j;
  j["time"] = ev.time;
  j["pair"] = {ev.pair.first, ev.pair.second};
  j["nodes"] = ev.nodes;
  j["mechanism"] = std::string(to_string(ev.mechanism));
  j["class"] = std::string(to_string(ev.cls));
  return j;
}

inline ordered_json report_to_json(const ValidationReport& r) {
  ordered_json j;
  j["valid"] = r.valid();
  j["schema_ok"] = r.schema_ok;
  j["violations"] = ordered_json::array();
  for (const auto& v : r.violations) {
    j["violations"].push_back(ordered_json{{"aircraft", v.aircraft}, {"rule", v.rule}, {"detail", v.detail}});
  }
  j["spawn_grace_violations"] = ordered_json::array();
  for (const auto& ev : r.spawn_grace_violations) j["spawn_grace_violations"].push_back(event_to_json(ev));
  return j;
}

/// `{ "events": [...], "unique_pairs": [...], "validation": {...} }`
inline ordered_json verification_to_json(const std::vector<InteractionEvent>& events, const ValidationReport& report) {
  ordered_json j;
  j["events"] = ordered_json::array();
  for (const auto& ev : events) j["events"].push_back(event_to_json(ev));
  j["unique_pairs"] = ordered_json::array();
  for (const auto& p : unique_pairs(events)) j["unique_pairs"].push_back({p.first, p.second});
  j["validation"] = report_to_json(report);
  return j;
}

}  // namespace atg
