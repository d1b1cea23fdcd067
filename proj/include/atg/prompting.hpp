#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "atg/core_model.hpp"
#include "atg/error.hpp"
#include "atg/io_util.hpp"
#include "atg/json_io.hpp"
#include "atg/rollout.hpp"

#ifndef ATG_DEFAULT_TEMPLATE_DIR
#define ATG_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace atg {

/// Prompt text lives in *.txt files. `{{name}}` is a variable, `{{> name}}`
/// splices in another template.
class TemplateSet {
 public:
  TemplateSet() = default;

  static TemplateSet load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
      throw Error(ErrorCode::io, "template directory not found: " + dir.string());
    }
    TemplateSet set;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        set.texts_[entry.path().stem().string()] = read_text_file(entry.path());
      }
    }
    return set;
  }

  /// Explicit path, then $ATG_TEMPLATES, then the source-tree default.
  static std::filesystem::path resolve_dir(const std::optional<std::string>& explicit_dir = std::nullopt) {
    if (explicit_dir && !explicit_dir->empty()) return *explicit_dir;
    if (const char* env = std::getenv("ATG_TEMPLATES"); env && *env) return env;
    return ATG_DEFAULT_TEMPLATE_DIR;
  }

  static TemplateSet load_default(const std::optional<std::string>& explicit_dir = std::nullopt) {
    return load(resolve_dir(explicit_dir));
  }

  void set(const std::string& name, std::string text) { texts_[name] = std::move(text); }
  bool has(const std::string& name) const { return texts_.count(name) > 0; }

  const std::string& raw(const std::string& name) const {
    auto it = texts_.find(name);
    if (it == texts_.end()) throw Error(ErrorCode::io, "missing template " + name + ".txt");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : texts_) out.push_back(k);
    return out;
  }

  std::string render(const std::string& name, const std::map<std::string, std::string>& vars) const {
    return render_text(raw(name), vars, 0);
  }

 private:
  std::string render_text(const std::string& text, const std::map<std::string, std::string>& vars,
                          int depth) const {
    if (depth > 8) throw Error(ErrorCode::invalid_input, "template include depth exceeded");
    std::string out;
    std::size_t pos = 0;
    while (true) {
      const auto open = text.find("{{", pos);
      if (open == std::string::npos) break;
      const auto close = text.find("}}", open + 2);
      if (close == std::string::npos) break;
      out.append(text, pos, open - pos);
      std::string key = text.substr(open + 2, close - open - 2);
      if (!key.empty() && key[0] == '>') {
        key.erase(0, key.find_first_not_of(" >"));
        std::string included = render_text(raw(key), vars, depth + 1);
        while (!included.empty() && included.back() == '\n') included.pop_back();
        out += included;
      } else {
        auto it = vars.find(key);
        if (it == vars.end()) throw Error(ErrorCode::invalid_input, "unbound template variable " + key);
        out += it->second;
      }
      pos = close + 2;
    }
    out.append(text, pos, std::string::npos);
    return out;
  }

  std::map<std::string, std::string> texts_;
};

inline std::string render_sector_text(const SectorGraph& g) {
  auto ifmt = [](double v) { return std::to_string(std::lround(v)); };
  std::string out;
  out += "Sector graph: " + std::to_string(g.nodes.size()) + " nodes, " + std::to_string(g.routes.size()) +
         " routes, node spacing " + ifmt(g.spacing_nmi) + " nmi.\n";
  out += "Nodes (id: x, y in nmi):\n";
  for (const auto& [id, p] : g.nodes) out += id + ": " + ifmt(p.x) + ", " + ifmt(p.y) + "\n";
  out += "Routes (flown from the first listed node to the last):\n";
  std::map<NodeId, std::set<RouteId, NaturalLess>, NaturalLess> owners;
  for (const auto& [rid, seq] : g.routes) {
    out += rid + " (" + std::to_string(seq.size()) + " nodes): ";
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out += " -> ";
      out += seq[i];
      owners[seq[i]].insert(rid);
    }
    out += "\n";
  }
  out += "Intersections (nodes shared by two or more routes):\n";
  bool any = false;
  for (const auto& [node, routes] : owners) {
    if (routes.size() < 2) continue;
    any = true;
    out += "- intersection at " + node + ": routes ";
    bool first = true;
    for (const auto& r : routes) {
      out += (first ? "" : ", ") + r;
      first = false;
    }
    out += "\n";
  }
  if (!any) out += "(none)\n";
  return out;
}

namespace detail {

inline std::map<std::string, std::string> common_vars(const SectorGraph& g, int duration, const RolloutConfig& cfg) {
  const std::string grace = std::to_string(cfg.grace_steps) + (cfg.grace_steps == 1 ? " time-step" : " time-steps");
  return {
      {"duration", std::to_string(duration)},
      {"last_step", std::to_string(duration - 1)},
      {"grace_window", grace},
      {"spacing", std::to_string(std::lround(g.spacing_nmi))},
      {"sector", render_sector_text(g)},
      {"example_route", g.routes.empty() ? std::string("R1") : g.routes.begin()->first},
  };
}

}  // namespace detail

inline std::string build_benchmark_prompt(const SectorGraph& g, const BenchmarkParams& params,
                                          const TemplateSet& templates, const RolloutConfig& cfg = {}) {
  if (params.aircraft < 1 || params.duration < 1) throw Error(ErrorCode::invalid_input, "incomplete benchmark params");
  auto vars = detail::common_vars(g, params.duration, cfg);
  vars["aircraft"] = std::to_string(params.aircraft);
  if (params.benchmark == Benchmark::controllability) {
    if (!params.target_pairs) throw Error(ErrorCode::invalid_input, "controllability needs target_pairs");
    vars["target_pairs"] = std::to_string(*params.target_pairs);
    vars["task"] = templates.render("task_target_pairs", vars);
  } else {
    vars["task"] = templates.render("task_non_interacting", vars);
  }
  while (!vars["task"].empty() && vars["task"].back() == '\n') vars["task"].pop_back();
  vars["output"] = templates.render("output_2d", vars);
  return templates.render("benchmark", vars);
}

struct Prompt {
  std::string text;
  std::vector<std::string> warnings;
};

inline bool mentions_flight_levels(const std::string& text) {
  static const std::regex fl(R"((flight[ -]?level|\bFL\s?\d{2,3}\b|\bFLs?\b|altitude))", std::regex::icase);
  return std::regex_search(text, fl);
}

inline Prompt build_controllability_prompt(const SectorGraph& g, const std::string& spec_text, bool mode_3d,
                                           const TemplateSet& templates, int duration = 12,
                                           const std::optional<Scenario>& existing = std::nullopt,
                                           const RolloutConfig& cfg = {}) {
  if (spec_text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::invalid_input, "empty scenario specification");
  }
  Prompt p;
  auto vars = detail::common_vars(g, duration, cfg);
  vars["spec"] = spec_text;
  vars["flight_levels"] = mode_3d ? templates.render("flight_levels_3d", vars) : "";
  vars["output"] = templates.render(mode_3d ? "output_3d" : "output_2d", vars);
  if (existing) {
    std::string sc = scenario_to_json(*existing).dump(2);
    vars["scenario"] = sc;
    vars["existing"] = templates.render("existing_scenario", vars);
  } else {
    vars["existing"] = "";
  }
  p.text = templates.render("controllability", vars);
  if (!mode_3d && mentions_flight_levels(spec_text)) {
    p.warnings.push_back("specification mentions flight levels but 3D mode is off; levels will be ignored");
  }
  return p;
}

struct FeedbackInput {
  std::vector<InteractionEvent> events;  // interactions that break the requirement
  ValidationReport report;
  const Scenario* scenario = nullptr;  // for spawn times in grace findings
  std::string requirement;
  int attempt = 1;
  int grace_steps = 1;
};

inline std::string describe_event(const InteractionEvent& ev) {
  std::string cls(to_string(ev.cls));
  for (auto& c : cls) {
    if (c == '_') c = '-';
  }
  std::string where = ev.mechanism == Mechanism::same_node
                          ? "at node " + ev.nodes.at(0)
                          : "swapping nodes " + ev.nodes.at(0) + " and " + ev.nodes.at(1);
  return ev.pair.first + " and " + ev.pair.second + " interact at t=" + std::to_string(ev.time) + " " + where + " (" +
         (ev.mechanism == Mechanism::same_node ? "same node" : "swap") + ", " + cls + ")";
}

inline std::string build_feedback(const FeedbackInput& in, const TemplateSet& templates) {
  if (in.events.empty() && in.report.valid()) {
    throw Error(ErrorCode::precondition, "feedback needs at least one violation");
  }
  std::string problems;
  for (const auto& ev : in.events) problems += "- " + describe_event(ev) + "\n";
  for (const auto& v : in.report.violations) {
    problems += "- " + (v.aircraft.empty() ? std::string() : v.aircraft + ": ") + v.detail + " [" + v.rule + "]\n";
  }
  for (const auto& ev : in.report.spawn_grace_violations) {
    problems += "- spawn grace broken: " + describe_event(ev) + ".";
    if (in.scenario) {
      for (const auto& a : in.scenario->aircraft) {
        if (a.id == ev.pair.first || a.id == ev.pair.second) {
          if (ev.time >= a.spawn_time && ev.time <= a.spawn_time + in.grace_steps) {
            problems += " " + a.id + " spawned at t=" + std::to_string(a.spawn_time) + ";";
          }
        }
      }
    }
    problems += " no interaction is allowed at the spawn time-step or the " + std::to_string(in.grace_steps) +
                " time-step(s) after it.\n";
  }
  while (!problems.empty() && problems.back() == '\n') problems.pop_back();
  return templates.render("feedback", {{"attempt", std::to_string(in.attempt)},
                                       {"requirement", in.requirement},
                                       {"problems", problems}});
}

/// One-line statement of what a benchmark cell asks for.
inline std::string requirement_text(const BenchmarkParams& p) {
  std::string s = std::to_string(p.aircraft) + " aircraft over " + std::to_string(p.duration) + " time-steps, ";
  if (p.benchmark == Benchmark::controllability) {
    return s + "exactly " + std::to_string(p.target_pairs.value_or(0)) + " unique interacting pairs.";
  }
  return s + "no pair may interact.";
}

}  // namespace atg
