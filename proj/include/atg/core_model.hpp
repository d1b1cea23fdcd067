#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atg/error.hpp"

namespace atg {

using NodeId = std::string;
using RouteId = std::string;
using AircraftId = std::string;

inline constexpr double kDefaultSpacingNmi = 20.0;
inline constexpr int kMinFlightLevel = 0;
inline constexpr int kMaxFlightLevel = 660;
inline constexpr int kDefaultFlightLevel = 300;

/// Flight-level ranges are compared as closed intervals: touching ranges
/// (250-280 vs 280-320) overlap. Flip to false for open-interval semantics.
inline constexpr bool kClosedFlightLevelRanges = true;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Orders identifiers so that embedded numbers compare numerically
/// ("N2" < "N10", "AC9" < "AC10"). Falls back to plain comparison on ties.
struct NaturalLess {
  using is_transparent = void;

  bool operator()(std::string_view a, std::string_view b) const noexcept {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
      const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
      const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
      if (da && db) {
        std::size_t ie = i;
        std::size_t je = j;
        while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
        while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
        std::string_view na = a.substr(i, ie - i);
        std::string_view nb = b.substr(j, je - j);
        while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
        while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
        if (na.size() != nb.size()) return na.size() < nb.size();
        if (na != nb) return na < nb;
        i = ie;
        j = je;
        continue;
      }
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
    if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
    return a < b;
  }
};

/// Discrete airspace: node positions in nmi plus directed routes as node
/// sequences.
struct SectorGraph {
  double spacing_nmi = kDefaultSpacingNmi;
  std::map<NodeId, Point, NaturalLess> nodes;
  std::map<RouteId, std::vector<NodeId>, NaturalLess> routes;

  const Point& position(const NodeId& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw Error(ErrorCode::missing_geometry, id);
    return it->second;
  }

  const std::vector<NodeId>& route(const RouteId& id) const {
    auto it = routes.find(id);
    if (it == routes.end()) throw Error(ErrorCode::unknown_route, id);
    return it->second;
  }

  bool has_route(const RouteId& id) const { return routes.find(id) != routes.end(); }

  /// Throws Error(invalid_input) if a structural invariant is broken.
  void validate() const {
    if (!(spacing_nmi > 0.0)) throw Error(ErrorCode::invalid_input, "spacing must be positive");
    for (const auto& [rid, seq] : routes) {
      if (seq.size() < 2) throw Error(ErrorCode::invalid_input, "route " + rid + " has fewer than 2 nodes");
      for (std::size_t i = 0; i < seq.size(); ++i) {
        if (nodes.find(seq[i]) == nodes.end()) {
          throw Error(ErrorCode::invalid_input, "route " + rid + " references unknown node " + seq[i]);
        }
        if (i > 0 && seq[i] == seq[i - 1]) {
          throw Error(ErrorCode::invalid_input, "route " + rid + " repeats node " + seq[i]);
        }
      }
    }
  }
};

enum class Speed : int { fast = 1, slow = 2 };

inline int steps_per_node(Speed s) noexcept { return static_cast<int>(s); }

inline std::optional<Speed> speed_from_int(long long v) noexcept {
  if (v == 1) return Speed::fast;
  if (v == 2) return Speed::slow;
  return std::nullopt;
}

inline std::string normalize_id(std::string_view id) {
  std::string out(id);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

struct Aircraft {
  AircraftId id;
  int spawn_time = 0;
  RouteId route;
  Speed speed = Speed::fast;
  int initial_fl = kDefaultFlightLevel;
  int exit_fl = kDefaultFlightLevel;

  friend bool operator==(const Aircraft&, const Aircraft&) = default;
};

struct FlightLevelRange {
  int lo = 0;
  int hi = 0;

  friend bool operator==(const FlightLevelRange&, const FlightLevelRange&) = default;
};

inline FlightLevelRange fl_range(const Aircraft& a) noexcept {
  return {std::min(a.initial_fl, a.exit_fl), std::max(a.initial_fl, a.exit_fl)};
}

inline bool fl_overlap(const Aircraft& a, const Aircraft& b,
                       bool closed = kClosedFlightLevelRanges) noexcept {
  const FlightLevelRange ra = fl_range(a);
  const FlightLevelRange rb = fl_range(b);
  const int lo = std::max(ra.lo, rb.lo);
  const int hi = std::min(ra.hi, rb.hi);
  if (closed) return lo <= hi;
  if (lo != hi) return lo < hi;
  // Open ranges touching at one level only overlap when a level flight sits
  // inside the other range.
  auto inside = [](int v, FlightLevelRange r) { return r.lo == r.hi ? v == r.lo : (r.lo < v && v < r.hi); };
  if (ra.lo == ra.hi) return inside(ra.lo, rb);
  if (rb.lo == rb.hi) return inside(rb.lo, ra);
  return false;
}

struct Scenario {
  int duration = 0;
  std::vector<Aircraft> aircraft;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

enum class Mechanism { same_node, swap };
enum class InteractionClass { cross_path, head_on, catch_up };

inline std::string_view to_string(Mechanism m) {
  return m == Mechanism::same_node ? "same_node" : "swap";
}

inline std::string_view to_string(InteractionClass c) {
  switch (c) {
    case InteractionClass::cross_path: return "cross_path";
    case InteractionClass::head_on: return "head_on";
    case InteractionClass::catch_up: return "catch_up";
  }
  return "cross_path";
}

/// Unordered aircraft pair stored in NaturalLess order.
struct AircraftPair {
  AircraftId first;
  AircraftId second;

  static AircraftPair of(const AircraftId& a, const AircraftId& b) {
    if (NaturalLess{}(b, a)) return {b, a};
    return {a, b};
  }

  friend bool operator==(const AircraftPair&, const AircraftPair&) = default;
  friend bool operator<(const AircraftPair& l, const AircraftPair& r) {
    const NaturalLess less;
    if (l.first != r.first) return less(l.first, r.first);
    return less(l.second, r.second);
  }
};

struct InteractionEvent {
  int time = 0;
  AircraftPair pair;
  /// One node for same_node; (from, to) of pair.first's move for swap.
  std::vector<NodeId> nodes;
  Mechanism mechanism = Mechanism::same_node;
  InteractionClass cls = InteractionClass::cross_path;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

enum class Benchmark { traffic_volume, scenario_length, sector_complexity, controllability };

inline constexpr Benchmark kAllBenchmarks[] = {Benchmark::traffic_volume, Benchmark::scenario_length,
                                               Benchmark::sector_complexity, Benchmark::controllability};

inline std::string_view to_string(Benchmark b) {
  switch (b) {
    case Benchmark::traffic_volume: return "traffic_volume";
    case Benchmark::scenario_length: return "scenario_length";
    case Benchmark::sector_complexity: return "sector_complexity";
    case Benchmark::controllability: return "controllability";
  }
  return "traffic_volume";
}

inline Benchmark benchmark_from_string(std::string_view s) {
  for (Benchmark b : kAllBenchmarks) {
    if (to_string(b) == s) return b;
  }
  throw Error(ErrorCode::invalid_input, "unknown benchmark " + std::string(s));
}

struct BenchmarkParams {
  Benchmark benchmark = Benchmark::traffic_volume;
  int aircraft = 0;
  int duration = 12;
  int n_routes = 7;
  int n_intersections = 7;
  std::optional<int> target_pairs;

  /// The value this benchmark varies (the table column).
  int parameter() const noexcept {
    switch (benchmark) {
      case Benchmark::traffic_volume: return aircraft;
      case Benchmark::scenario_length: return duration;
      case Benchmark::sector_complexity: return n_intersections;
      case Benchmark::controllability: return target_pairs.value_or(0);
    }
    return 0;
  }

  friend bool operator==(const BenchmarkParams&, const BenchmarkParams&) = default;
};

/// Parameter grid for each benchmark axis.
inline std::vector<BenchmarkParams> benchmark_grid(Benchmark b) {
  std::vector<BenchmarkParams> grid;
  switch (b) {
    case Benchmark::traffic_volume:
      for (int n : {2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 25, 30}) grid.push_back({b, n, 12, 7, 7, {}});
      break;
    case Benchmark::scenario_length:
      for (int t : {12, 15, 18, 21, 24}) grid.push_back({b, 8, t, 7, 7, {}});
      break;
    case Benchmark::sector_complexity:
      for (int k = 4; k <= 14; ++k) grid.push_back({b, 8, 12, 7, k, {}});
      break;
    case Benchmark::controllability:
      for (int k = 1; k <= 5; ++k) grid.push_back({b, 10, 12, 7, 7, k});
      break;
  }
  return grid;
}

/// Route length in nodes for an aircraft, or throws unknown_route.
inline std::size_t route_length(const SectorGraph& g, const Aircraft& a) {
  auto it = g.routes.find(a.route);
  if (it == g.routes.end()) throw Error(ErrorCode::unknown_route, a.id + ":" + a.route);
  return it->second.size();
}

}  // namespace atg
