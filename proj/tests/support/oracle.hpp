#pragma once
// Reference rollout written without the library's helpers: positions come
// from walking each aircraft one step at a time, pairs are checked all-pairs.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "atg/core_model.hpp"

namespace atg::testing {

inline std::optional<std::string> naive_node(const SectorGraph& g, const Aircraft& a, int t) {
  if (t < a.spawn_time) return std::nullopt;
  const auto& route = g.routes.at(a.route);
  const int period = a.speed == Speed::fast ? 1 : 2;
  std::size_t idx = 0;
  int dwell = 0;
  for (int s = a.spawn_time; s < t; ++s) {
    if (++dwell == period) {
      ++idx;
      dwell = 0;
    }
  }
  if (idx >= route.size()) return std::nullopt;
  return route[idx];
}

inline bool naive_levels_overlap(const Aircraft& a, const Aircraft& b) {
  const int alo = std::min(a.initial_fl, a.exit_fl), ahi = std::max(a.initial_fl, a.exit_fl);
  const int blo = std::min(b.initial_fl, b.exit_fl), bhi = std::max(b.initial_fl, b.exit_fl);
  return alo <= bhi && blo <= ahi;
}

// (time, first id, second id, mechanism, nodes) with ids in NaturalLess order.
using OracleEvent = std::tuple<int, std::string, std::string, Mechanism, std::vector<std::string>>;

inline std::vector<OracleEvent> naive_events(const Scenario& s, const SectorGraph& g) {
  std::vector<OracleEvent> out;
  const NaturalLess less;
  for (int t = 0; t < s.duration; ++t) {
    for (std::size_t i = 0; i < s.aircraft.size(); ++i) {
      for (std::size_t j = i + 1; j < s.aircraft.size(); ++j) {
        const Aircraft* a = &s.aircraft[i];
        const Aircraft* b = &s.aircraft[j];
        if (less(b->id, a->id)) std::swap(a, b);
        if (!naive_levels_overlap(*a, *b)) continue;
        const auto na = naive_node(g, *a, t), nb = naive_node(g, *b, t);
        if (!na || !nb) continue;
        if (*na == *nb) {
          out.emplace_back(t, a->id, b->id, Mechanism::same_node, std::vector<std::string>{*na});
          continue;
        }
        if (t == 0) continue;
        const auto pa = naive_node(g, *a, t - 1), pb = naive_node(g, *b, t - 1);
        if (pa && pb && *pa == *nb && *pb == *na) {
          out.emplace_back(t, a->id, b->id, Mechanism::swap, std::vector<std::string>{*pa, *na});
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [&](const OracleEvent& l, const OracleEvent& r) {
    if (std::get<0>(l) != std::get<0>(r)) return std::get<0>(l) < std::get<0>(r);
    if (std::get<1>(l) != std::get<1>(r)) return less(std::get<1>(l), std::get<1>(r));
    if (std::get<2>(l) != std::get<2>(r)) return less(std::get<2>(l), std::get<2>(r));
    return std::get<3>(l) < std::get<3>(r);
  });
  return out;
}

inline std::set<std::pair<std::string, std::string>> naive_pairs(const Scenario& s, const SectorGraph& g) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& e : naive_events(s, g)) out.emplace(std::get<1>(e), std::get<2>(e));
  return out;
}

inline std::vector<OracleEvent> as_oracle_events(const std::vector<InteractionEvent>& events) {
  std::vector<OracleEvent> out;
  for (const auto& e : events) out.emplace_back(e.time, e.pair.first, e.pair.second, e.mechanism, e.nodes);
  return out;
}

}  // namespace atg::testing
