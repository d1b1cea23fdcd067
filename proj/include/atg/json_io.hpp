#pragma once

#include <set>
#include <string>
#include <vector>

#include "atg/core_model.hpp"
#include "atg/io_util.hpp"

namespace atg {

// ---------------------------------------------------------------- sector

inline ordered_json sector_to_json(const SectorGraph& g) {
  ordered_json nodes = ordered_json::object();
  for (const auto& [id, p] : g.nodes) nodes[id] = ordered_json::array({number_json(p.x), number_json(p.y)});
  ordered_json routes = ordered_json::object();
  for (const auto& [id, seq] : g.routes) routes[id] = seq;
  ordered_json out;
  out["spacing_nmi"] = number_json(g.spacing_nmi);
  out["nodes"] = std::move(nodes);
  out["routes"] = std::move(routes);
  return out;
}

inline std::string sector_to_string(const SectorGraph& g) { return sector_to_json(g).dump(2) + "\n"; }

namespace detail {

inline Point point_from_json(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw Error(ErrorCode::schema, what + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

inline std::vector<std::string> string_list(const json& v, const std::string& what) {
  if (!v.is_array()) throw Error(ErrorCode::schema, what + " must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw Error(ErrorCode::schema, what + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace detail

inline SectorGraph sector_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::schema, "sector must be an object");
  SectorGraph g;
  if (j.contains("spacing_nmi")) {
    if (!j["spacing_nmi"].is_number()) throw Error(ErrorCode::schema, "spacing_nmi must be a number");
    g.spacing_nmi = j["spacing_nmi"].get<double>();
  }
  if (!j.contains("nodes") || !j["nodes"].is_object()) throw Error(ErrorCode::schema, "nodes must be an object");
  if (!j.contains("routes") || !j["routes"].is_object()) throw Error(ErrorCode::schema, "routes must be an object");
  for (const auto& [id, v] : j["nodes"].items()) g.nodes[id] = detail::point_from_json(v, "node " + id);
  for (const auto& [id, v] : j["routes"].items()) g.routes[id] = detail::string_list(v, "route " + id);
  g.validate();
  return g;
}

// -------------------------------------------------------------- scenario

inline ordered_json aircraft_to_json(const Aircraft& a) {
  ordered_json j;
  j["id"] = a.id;
  j["spawn_time"] = a.spawn_time;
  j["route"] = a.route;
  j["speed"] = steps_per_node(a.speed);
  j["initial_fl"] = a.initial_fl;
  j["exit_fl"] = a.exit_fl;
  return j;
}

inline ordered_json scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["duration"] = s.duration;
  j["aircraft"] = ordered_json::array();
  for (const auto& a : s.aircraft) j["aircraft"].push_back(aircraft_to_json(a));
  return j;
}

inline std::string scenario_to_string(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

/// A schema finding against one aircraft entry (or the document when
/// `aircraft_id` is empty).
struct SchemaIssue {
  std::string aircraft_id;
  std::string rule;
  std::string detail;
};

/// Lenient parse: collects every schema issue instead of stopping at the
/// first. Entries with an issue are dropped from `scenario`; `structural`
/// is set when the document itself (not a single entry) is malformed.
struct ScenarioParse {
  Scenario scenario;
  std::vector<SchemaIssue> issues;
  bool structural = false;

  bool ok() const noexcept { return issues.empty(); }
};

inline ScenarioParse parse_scenario(const json& j) {
  ScenarioParse out;
  auto fail_doc = [&](std::string rule, std::string detail) {
    out.issues.push_back({"", std::move(rule), std::move(detail)});
    out.structural = true;
  };
  if (!j.is_object()) {
    fail_doc("schema", "scenario must be a JSON object");
    return out;
  }
  if (!j.contains("duration") || !j["duration"].is_number_integer()) {
    fail_doc("schema", "\"duration\" must be an integer");
  } else {
    out.scenario.duration = j["duration"].get<int>();
  }
  if (!j.contains("aircraft") || !j["aircraft"].is_array()) {
    fail_doc("schema", "\"aircraft\" must be an array");
    return out;
  }
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const auto& e : j["aircraft"]) {
    ++index;
    const std::string label = "#" + std::to_string(index);
    if (!e.is_object()) {
      fail_doc("schema", "aircraft " + label + " is not an object");
      continue;
    }
    std::string id = label;
    bool good = true;
    auto issue = [&](std::string rule, std::string detail) {
      out.issues.push_back({id, std::move(rule), std::move(detail)});
      good = false;
    };
    if (e.contains("id") && e["id"].is_string() && !e["id"].get<std::string>().empty()) {
      id = normalize_id(e["id"].get<std::string>());
    } else {
      issue("schema", "missing or non-string \"id\"");
    }
    Aircraft a;
    a.id = id;
    if (!e.contains("spawn_time") || !e["spawn_time"].is_number_integer()) {
      issue("schema", "missing or non-integer \"spawn_time\"");
    } else {
      a.spawn_time = e["spawn_time"].get<int>();
    }
    if (!e.contains("route") || !e["route"].is_string()) {
      issue("schema", "missing or non-string \"route\"");
    } else {
      a.route = e["route"].get<std::string>();
    }
    if (!e.contains("speed") || !e["speed"].is_number_integer()) {
      issue("schema", "missing or non-integer \"speed\"");
    } else if (auto sp = speed_from_int(e["speed"].get<long long>())) {
      a.speed = *sp;
    } else {
      issue("speed", "speed must be 1 or 2, got " + e["speed"].dump());
    }
    for (const char* key : {"initial_fl", "exit_fl"}) {
      if (!e.contains(key)) continue;
      if (!e[key].is_number_integer()) {
        issue("schema", std::string("non-integer \"") + key + "\"");
        continue;
      }
      (std::string_view(key) == "initial_fl" ? a.initial_fl : a.exit_fl) = e[key].get<int>();
    }
    // A missing exit level means level flight at the initial level.
    if (e.contains("initial_fl") && !e.contains("exit_fl")) a.exit_fl = a.initial_fl;
    if (e.contains("exit_fl") && !e.contains("initial_fl")) a.initial_fl = a.exit_fl;
    if (good && !seen.insert(a.id).second) issue("duplicate-id", "aircraft id " + a.id + " repeated");
    if (good) out.scenario.aircraft.push_back(std::move(a));
  }
  return out;
}

/// Strict parse: throws Error(schema) listing every issue.
inline Scenario scenario_from_json(const json& j) {
  ScenarioParse p = parse_scenario(j);
  if (!p.ok()) {
    std::string msg;
    for (const auto& i : p.issues) {
      if (!msg.empty()) msg += "; ";
      msg += (i.aircraft_id.empty() ? "" : i.aircraft_id + ": ") + i.detail;
    }
    throw Error(ErrorCode::schema, msg);
  }
  return std::move(p.scenario);
}

}  // namespace atg
