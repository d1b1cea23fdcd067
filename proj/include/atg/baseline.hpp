#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "atg/core_model.hpp"
#include "atg/rng.hpp"
#include "atg/rollout.hpp"

namespace atg {

/// Uniform draw over the valid scenario space: spawn in [0, T), any route,
/// either speed; level flight at the default level; ids AC1..ACN.
inline Scenario sample_random_scenario(const SectorGraph& g, int aircraft, int duration, CounterRng& rng) {
  if (g.routes.empty()) throw Error(ErrorCode::invalid_input, "sector has no routes");
  if (duration < 1) throw Error(ErrorCode::invalid_input, "duration must be >= 1");
  std::vector<const RouteId*> route_ids;
  for (const auto& [rid, seq] : g.routes) route_ids.push_back(&rid);
  Scenario s;
  s.duration = duration;
  for (int i = 1; i <= aircraft; ++i) {
    Aircraft a;
    a.id = "AC" + std::to_string(i);
    a.spawn_time = static_cast<int>(rng.below(static_cast<std::uint64_t>(duration)));
    a.route = *route_ids[rng.below(route_ids.size())];
    a.speed = rng.coin() ? Speed::slow : Speed::fast;
    s.aircraft.push_back(std::move(a));
  }
  return s;
}

struct BaselineOptions {
  int samples = 500;
  /// When true, `samples` are drawn for every sector instead of split
  /// round-robin across them.
  bool samples_per_sector = false;
  std::uint64_t seed = 0;
};

struct BaselineEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int samples = 0;
  std::vector<int> values;  // per-scenario metric, in sample order
};

namespace detail {

inline BaselineEstimate summarize(std::vector<int> values) {
  BaselineEstimate e;
  e.samples = static_cast<int>(values.size());
  if (values.empty()) return e;
  double sum = 0.0;
  for (int v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (int v : values) ss += (v - e.mean) * (v - e.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    e.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  }
  e.values = std::move(values);
  return e;
}

/// Sample i uses stream i of the master seed and sector i mod n (or every
/// sector in turn when sampling per sector), so any subset can be recomputed
/// independently.
template <typename Metric>
BaselineEstimate run_baseline(std::span<const SectorGraph> sectors, int aircraft, int duration,
                              const BaselineOptions& opt, Metric metric) {
  if (sectors.empty()) throw Error(ErrorCode::invalid_input, "baseline needs at least one sector");
  const std::size_t total =
      static_cast<std::size_t>(opt.samples) * (opt.samples_per_sector ? sectors.size() : std::size_t{1});
  std::vector<int> values;
  values.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const SectorGraph& g = sectors[i % sectors.size()];
    CounterRng rng(opt.seed, i);
    const Scenario s = sample_random_scenario(g, aircraft, duration, rng);
    values.push_back(metric(static_cast<int>(unique_pairs(detect_interactions(s, g)).size())));
  }
  return summarize(std::move(values));
}

}  // namespace detail

inline BaselineEstimate estimate_muip_rand(std::span<const SectorGraph> sectors, int aircraft, int duration,
                                           const BaselineOptions& opt = {}) {
  return detail::run_baseline(sectors, aircraft, duration, opt, [](int pairs) { return pairs; });
}

inline BaselineEstimate estimate_madip_rand(std::span<const SectorGraph> sectors, int aircraft, int duration,
                                            int target_pairs, const BaselineOptions& opt = {}) {
  return detail::run_baseline(sectors, aircraft, duration, opt,
                              [target_pairs](int pairs) { return std::abs(pairs - target_pairs); });
}

/// Baseline for one benchmark parameter point: MADIP for controllability,
/// MUIP otherwise.
inline BaselineEstimate estimate_baseline(std::span<const SectorGraph> sectors, const BenchmarkParams& p,
                                          const BaselineOptions& opt = {}) {
  if (p.benchmark == Benchmark::controllability) {
    return estimate_madip_rand(sectors, p.aircraft, p.duration, p.target_pairs.value_or(0), opt);
  }
  return estimate_muip_rand(sectors, p.aircraft, p.duration, opt);
}

}  // namespace atg
