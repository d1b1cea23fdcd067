#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "atg/core_model.hpp"
#include "atg/rng.hpp"

namespace atg {

struct GridSize {
  int width = 12;
  int height = 12;
};

struct SyntheticSectorParams {
  int n_routes = 7;
  int n_intersections = 7;
  GridSize grid{};
  int max_attempts = 10000;
  double spacing_nmi = kDefaultSpacingNmi;
};

namespace detail {

using Cell = std::pair<int, int>;  // (x, y) lattice coordinates
using LatticePath = std::vector<Cell>;

inline int initial_row_count(int n_routes, int n_intersections) {
  const int crossers_wanted = (n_intersections + 2) / 3;
  int rows = std::max(2, n_routes - crossers_wanted);
  const int cap = n_intersections > 0 ? n_routes - 1 : n_routes;
  return std::clamp(rows, 1, std::max(1, cap));
}

/// Row count for a restart: the initial split first, then alternating
/// neighbours.
inline int row_count_for_restart(int restart, int n_routes, int n_intersections) {
  const int base = initial_row_count(n_routes, n_intersections);
  const int cap = n_intersections > 0 ? n_routes - 1 : n_routes;
  static constexpr int kOffsets[] = {0, -1, 1, -2, 2, -3, 3};
  const int offset = kOffsets[restart % 7];
  return std::clamp(base + offset, 1, std::max(1, cap));
}

inline LatticePath maybe_reversed(LatticePath p, CounterRng& rng) {
  if (rng.coin()) std::reverse(p.begin(), p.end());
  return p;
}

inline LatticePath random_crosser(CounterRng& rng, const GridSize& grid) {
  const int max_span = std::min(grid.height - 1, grid.width - 1);
  const bool diagonal = rng.coin();
  LatticePath path;
  if (!diagonal) {
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width)));
    int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height)));
    int y1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height)));
    while (y1 == y0) y1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height)));
    if (y1 < y0) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y) path.emplace_back(x, y);
  } else {
    const int span = static_cast<int>(rng.between(1, max_span));
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width - span)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height - span)));
    const bool rising = rng.coin();
    for (int k = 0; k <= span; ++k) path.emplace_back(x0 + k, rising ? y0 + k : y0 + span - k);
  }
  return maybe_reversed(std::move(path), rng);
}

/// Rejects layouts that would break planarity or merge tracks: crossers may
/// not share an edge, and opposite diagonals may not cross mid-cell.
inline bool lattice_layout_ok(const std::vector<LatticePath>& paths) {
  std::set<std::pair<Cell, Cell>> edges;
  std::set<Cell> rising_cells, falling_cells;  // lower-left corner of diagonal's unit cell
  for (const auto& p : paths) {
    for (std::size_t i = 1; i < p.size(); ++i) {
      auto e = std::minmax(p[i - 1], p[i]);
      if (!edges.insert({e.first, e.second}).second) return false;
      const int dx = p[i].first - p[i - 1].first;
      const int dy = p[i].second - p[i - 1].second;
      if (dx != 0 && dy != 0) {
        const Cell corner{std::min(p[i].first, p[i - 1].first), std::min(p[i].second, p[i - 1].second)};
        const bool rising = (dx > 0) == (dy > 0);
        if (rising) {
          if (falling_cells.count(corner)) return false;
          rising_cells.insert(corner);
        } else {
          if (rising_cells.count(corner)) return false;
          falling_cells.insert(corner);
        }
      }
    }
  }
  return true;
}

inline int lattice_intersections(const std::vector<LatticePath>& paths) {
  std::map<Cell, std::set<std::size_t>> owners;
  for (std::size_t r = 0; r < paths.size(); ++r) {
    for (const auto& c : paths[r]) owners[c].insert(r);
  }
  return static_cast<int>(
      std::count_if(owners.begin(), owners.end(), [](const auto& kv) { return kv.second.size() >= 2; }));
}

inline SectorGraph lattice_to_graph(const std::vector<LatticePath>& paths, double spacing) {
  std::set<Cell> cells;
  for (const auto& p : paths) cells.insert(p.begin(), p.end());
  std::map<Cell, NodeId> label;
  SectorGraph g;
  g.spacing_nmi = spacing;
  std::size_t k = 0;
  for (const auto& c : cells) {  // (x, y) order
    label[c] = "N" + std::to_string(k++);
    g.nodes[label[c]] = {c.first * spacing, c.second * spacing};
  }
  for (std::size_t r = 0; r < paths.size(); ++r) {
    std::vector<NodeId> seq;
    for (const auto& c : paths[r]) seq.push_back(label.at(c));
    g.routes["R" + std::to_string(r + 1)] = std::move(seq);
  }
  return g;
}

}  // namespace detail

/// Seeded grid sector with exactly `n_intersections` shared nodes.
/// Horizontal row routes span the grid on distinct rows; the remaining
/// "crosser" routes are vertical or 45-degree lattice paths. Each restart
/// picks rows and crossers at random, then re-places one crosser at a time,
/// keeping moves that do not take the count further from the target. Every
/// placement counts against `max_attempts`. One lattice unit is one spacing.
inline SectorGraph generate_sector(std::uint64_t seed, const SyntheticSectorParams& p) {
  if (p.n_routes < 2) throw Error(ErrorCode::invalid_input, "n_routes must be >= 2");
  if (p.n_intersections < 0) throw Error(ErrorCode::invalid_input, "n_intersections must be >= 0");
  if (p.grid.width < 12 || p.grid.height < p.n_routes) {
    throw Error(ErrorCode::invalid_input, "grid must be at least 12 wide and n_routes high");
  }
  constexpr int kMovesPerRestart = 200;
  int attempt = 0;
  for (int restart = 0; attempt < p.max_attempts; ++restart) {
    CounterRng rng(seed, static_cast<std::uint64_t>(attempt++));
    const int rows = detail::row_count_for_restart(restart, p.n_routes, p.n_intersections);
    std::vector<int> ys(static_cast<std::size_t>(p.grid.height));
    std::iota(ys.begin(), ys.end(), 0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows); ++i) {  // partial Fisher-Yates
      const auto j = i + static_cast<std::size_t>(rng.below(ys.size() - i));
      std::swap(ys[i], ys[j]);
    }
    std::vector<detail::LatticePath> paths;
    for (int r = 0; r < rows; ++r) {
      detail::LatticePath row;
      for (int x = 0; x < p.grid.width; ++x) row.emplace_back(x, ys[static_cast<std::size_t>(r)]);
      paths.push_back(detail::maybe_reversed(std::move(row), rng));
    }
    for (int c = rows; c < p.n_routes; ++c) paths.push_back(detail::random_crosser(rng, p.grid));
    if (!detail::lattice_layout_ok(paths)) continue;
    int gap = std::abs(detail::lattice_intersections(paths) - p.n_intersections);
    const int crossers = p.n_routes - rows;
    for (int move = 0; gap != 0 && crossers > 0 && move < kMovesPerRestart && attempt < p.max_attempts; ++move) {
      CounterRng step(seed, static_cast<std::uint64_t>(attempt++));
      const auto which = static_cast<std::size_t>(rows) + static_cast<std::size_t>(step.below(static_cast<std::uint64_t>(crossers)));
      detail::LatticePath old = paths[which];
      paths[which] = detail::random_crosser(step, p.grid);
      const int next =
          detail::lattice_layout_ok(paths) ? std::abs(detail::lattice_intersections(paths) - p.n_intersections) : -1;
      if (next < 0 || next > gap) {
        paths[which] = std::move(old);
      } else {
        gap = next;
      }
    }
    if (gap == 0) return detail::lattice_to_graph(paths, p.spacing_nmi);
  }
  throw Error(ErrorCode::target_unreachable,
              "seed=" + std::to_string(seed) + ",attempts=" + std::to_string(p.max_attempts));
}

/// Per-sector seed: depends on the master seed, the route/intersection
/// targets, and the sector index.
inline std::uint64_t sector_seed(std::uint64_t master, const SyntheticSectorParams& p, std::size_t index) {
  const auto params_key = static_cast<std::uint64_t>(p.n_routes) * 1000u + static_cast<std::uint64_t>(p.n_intersections);
  return derive_seed(derive_seed(master, params_key), index);
}

inline std::vector<SectorGraph> generate_suite(std::uint64_t master, std::size_t n_sectors,
                                               const SyntheticSectorParams& p) {
  std::vector<SectorGraph> out;
  out.reserve(n_sectors);
  for (std::size_t i = 0; i < n_sectors; ++i) out.push_back(generate_sector(sector_seed(master, p, i), p));
  return out;
}

inline SyntheticSectorParams sector_params_for(const BenchmarkParams& b, GridSize grid = {}) {
  SyntheticSectorParams p;
  p.n_routes = b.n_routes;
  p.n_intersections = b.n_intersections;
  p.grid = grid;
  p.grid.height = std::max(p.grid.height, b.n_routes);
  return p;
}

}  // namespace atg
