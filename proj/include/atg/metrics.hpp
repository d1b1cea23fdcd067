#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atg/error.hpp"

namespace atg {

/// Mean number of unique interacting pairs.
inline double muip(std::span<const int> pair_counts) {
  if (pair_counts.empty()) throw Error(ErrorCode::empty_input, "muip of empty list");
  double sum = 0.0;
  for (int c : pair_counts) sum += c;
  return sum / static_cast<double>(pair_counts.size());
}

/// Mean absolute difference between pair counts and the requested count.
inline double madip(std::span<const int> pair_counts, int target) {
  if (pair_counts.empty()) throw Error(ErrorCode::empty_input, "madip of empty list");
  double sum = 0.0;
  for (int c : pair_counts) sum += std::abs(c - target);
  return sum / static_cast<double>(pair_counts.size());
}

/// [1 - value / rand_value]_+ ; 1 is perfect, 0 is no better than random.
inline double normalized_skill(double value, double rand_value) {
  if (!(rand_value > 0.0)) throw Error(ErrorCode::zero_baseline, "random baseline must be positive");
  return std::clamp(1.0 - value / rand_value, 0.0, 1.0);
}

struct SkillScores {
  std::string model;
  std::optional<double> mu1;  // traffic volume
  std::optional<double> mu2;  // scenario length
  std::optional<double> mu3;  // sector complexity
  std::optional<double> mu4;  // controllability
  std::optional<double> cost_usd_per_mtok;

  double skill_sum() const noexcept { return mu1.value_or(0) + mu2.value_or(0) + mu3.value_or(0) + mu4.value_or(0); }
};

struct ParetoPoint {
  std::string label;
  double cost = 0.0;
  double skill = 0.0;

  friend bool operator==(const ParetoPoint&, const ParetoPoint&) = default;
};

/// Points not dominated by a cheaper-or-equal and at-least-as-skilful point
/// (strictly better in one). Output sorted by cost, then label.
inline std::vector<ParetoPoint> pareto_frontier(std::span<const ParetoPoint> points) {
  std::vector<ParetoPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.skill != b.skill) return a.skill > b.skill;
    return a.label < b.label;
  });
  std::vector<ParetoPoint> out;
  double best_skill = -INFINITY;
  double best_cost = INFINITY;
  for (const auto& p : sorted) {
    // Sorted by cost asc, skill desc: p is dominated iff an earlier point has
    // strictly higher skill, or equal skill at strictly lower cost.
    if (p.skill < best_skill) continue;
    if (p.skill == best_skill && best_cost < p.cost) continue;
    out.push_back(p);
    if (p.skill > best_skill) {
      best_skill = p.skill;
      best_cost = p.cost;
    }
  }
  return out;
}

}  // namespace atg
