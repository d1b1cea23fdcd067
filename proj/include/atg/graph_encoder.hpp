#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "atg/core_model.hpp"
#include "atg/geometry.hpp"
#include "atg/io_util.hpp"
#include "atg/json_io.hpp"

namespace atg {

/// Routes as polylines over named fixes, in planar nmi coordinates.
struct ContinuousSector {
  std::map<std::string, Point, NaturalLess> fixes;
  std::map<RouteId, std::vector<std::string>, NaturalLess> routes;

  void validate() const {
    for (const auto& [rid, seq] : routes) {
      if (seq.size() < 2) throw Error(ErrorCode::invalid_input, "route " + rid + " has fewer than 2 fixes");
      for (const auto& f : seq) {
        if (fixes.find(f) == fixes.end()) {
          throw Error(ErrorCode::invalid_input, "route " + rid + " references unknown fix " + f);
        }
      }
    }
  }
};

inline ContinuousSector continuous_sector_from_json(const json& j) {
  if (!j.is_object() || !j.contains("fixes") || !j["fixes"].is_object() || !j.contains("routes") ||
      !j["routes"].is_object()) {
    throw Error(ErrorCode::schema, "expected {\"fixes\": {...}, \"routes\": {...}}");
  }
  ContinuousSector s;
  for (const auto& [name, v] : j["fixes"].items()) s.fixes[name] = detail::point_from_json(v, "fix " + name);
  for (const auto& [id, v] : j["routes"].items()) s.routes[id] = detail::string_list(v, "route " + id);
  s.validate();
  return s;
}

inline ordered_json continuous_sector_to_json(const ContinuousSector& s) {
  ordered_json fixes = ordered_json::object();
  for (const auto& [name, p] : s.fixes) fixes[name] = ordered_json::array({number_json(p.x), number_json(p.y)});
  ordered_json routes = ordered_json::object();
  for (const auto& [id, seq] : s.routes) routes[id] = seq;
  return ordered_json{{"fixes", fixes}, {"routes", routes}};
}

struct EncoderConfig {
  double spacing = kDefaultSpacingNmi;
  double cluster_radius = kDefaultSpacingNmi;
  double kink_tolerance_deg = 15.0;
  /// Perpendicular distance under which two legs are treated as one track.
  double collinear_tolerance = 1.0;
  /// Upper bound on relative polyline shortening from kink removal.
  double max_length_change = 0.05;

  void validate() const {
    if (!(spacing > 0.0)) throw Error(ErrorCode::invalid_input, "spacing must be positive");
    if (!(cluster_radius > 0.0)) throw Error(ErrorCode::invalid_input, "cluster_radius must be positive");
  }
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Unions by smaller root so the representative is the earliest element.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

struct FixClustering {
  std::map<std::string, std::size_t, NaturalLess> cluster_of;
  std::vector<Point> centroids;
  std::vector<std::vector<std::string>> members;
};

/// Single-linkage clustering: fixes closer than cluster_radius end up in the
/// same cluster, transitively. Cluster ids follow the natural order of the
/// first member. Centroids of distinct clusters may lie closer than the
/// radius (chaining).
inline FixClustering cluster_fixes(const ContinuousSector& sector, const EncoderConfig& cfg) {
  std::vector<std::string> names;
  std::vector<Point> pts;
  for (const auto& [name, p] : sector.fixes) {
    names.push_back(name);
    pts.push_back(p);
  }
  detail::DisjointSets sets(names.size());
  constexpr double kEps = 1e-9;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (geom::distance(pts[i], pts[j]) < cfg.cluster_radius - kEps) sets.unite(i, j);
    }
  }
  FixClustering out;
  std::map<std::size_t, std::size_t> id_of_root;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::size_t root = sets.find(i);
    auto [it, inserted] = id_of_root.emplace(root, out.members.size());
    if (inserted) out.members.emplace_back();
    out.members[it->second].push_back(names[i]);
    out.cluster_of[names[i]] = it->second;
  }
  for (const auto& group : out.members) {
    Point c;
    for (const auto& n : group) c = geom::operator+(c, sector.fixes.at(n));
    const double k = static_cast<double>(group.size());
    out.centroids.push_back({c.x / k, c.y / k});
  }
  return out;
}

/// Indices of the points kept by kink removal. Endpoints and pinned points
/// always survive; an interior point is dropped when the turn it makes
/// (measured from the last kept point) is below the kink tolerance and the
/// cumulative shortening stays within max_length_change.
inline std::vector<std::size_t> simplify_route_indices(std::span<const Point> pts, const EncoderConfig& cfg,
                                                       const std::vector<bool>& pinned = {}) {
  std::vector<std::size_t> kept;
  if (pts.empty()) return kept;
  kept.push_back(0);
  if (pts.size() == 1) return kept;
  const double original = geom::polyline_length(pts);
  const double budget = cfg.max_length_change * original;
  double committed = 0.0;      // shortening already locked in by earlier anchors
  double along_anchor = 0.0;   // original length from current anchor to point i
  std::size_t anchor = 0;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    along_anchor += geom::distance(pts[i - 1], pts[i]);
    const bool is_pinned = !pinned.empty() && pinned[i];
    const Point a = pts[anchor];
    const double turn = geom::angle_deg(geom::operator-(pts[i], a), geom::operator-(pts[i + 1], pts[i]));
    const double via = along_anchor + geom::distance(pts[i], pts[i + 1]);
    const double shortening = via - geom::distance(a, pts[i + 1]);
    if (!is_pinned && turn < cfg.kink_tolerance_deg && committed + shortening <= budget) continue;
    committed += along_anchor - geom::distance(a, pts[i]);
    kept.push_back(i);
    anchor = i;
    along_anchor = 0.0;
  }
  kept.push_back(pts.size() - 1);
  return kept;
}

inline std::vector<Point> simplify_route(std::span<const Point> pts, const EncoderConfig& cfg,
                                         const std::vector<bool>& pinned = {}) {
  std::vector<Point> out;
  for (std::size_t i : simplify_route_indices(pts, cfg, pinned)) out.push_back(pts[i]);
  return out;
}

/// Number of nodes shared by two or more distinct routes.
inline std::size_t count_intersections(const SectorGraph& g) {
  std::map<NodeId, std::set<RouteId>> owners;
  for (const auto& [rid, seq] : g.routes) {
    for (const auto& n : seq) owners[n].insert(rid);
  }
  return static_cast<std::size_t>(
      std::count_if(owners.begin(), owners.end(), [](const auto& kv) { return kv.second.size() >= 2; }));
}

/// First pair of routes whose edges meet somewhere other than a shared node,
/// via an O(E^2) scan over distinct edges.
inline std::optional<std::pair<RouteId, RouteId>> find_off_node_crossing(const SectorGraph& g) {
  struct Edge {
    NodeId a, b;
    RouteId route;
  };
  std::vector<Edge> edges;
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& [rid, seq] : g.routes) {
    for (std::size_t i = 1; i < seq.size(); ++i) {
      auto key = std::minmax(seq[i - 1], seq[i]);
      if (seen.insert({key.first, key.second}).second) edges.push_back({seq[i - 1], seq[i], rid});
    }
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const Edge& e = edges[i];
      const Edge& f = edges[j];
      if (geom::crosses_off_node(g.position(e.a), g.position(e.b), g.position(f.a), g.position(f.b))) {
        return std::make_pair(e.route, f.route);
      }
    }
  }
  return std::nullopt;
}

inline bool is_planar(const SectorGraph& g) { return !find_off_node_crossing(g).has_value(); }

namespace detail {

/// Working state for the encoder: a pool of vertex positions and routes as
/// vertex-index sequences.
struct VertexPool {
  std::vector<Point> pos;

  std::size_t add(Point p) {
    pos.push_back(p);
    return pos.size() - 1;
  }

  std::size_t find_or_add(Point p, double tol = 1e-6) {
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (geom::distance(pos[i], p) <= tol) return i;
    }
    return add(p);
  }
};

using RoutePaths = std::map<RouteId, std::vector<std::size_t>, NaturalLess>;

inline void collapse_repeats(std::vector<std::size_t>& seq) {
  seq.erase(std::unique(seq.begin(), seq.end()), seq.end());
}

struct Insertion {
  double t;
  std::size_t vertex;
};

/// One pass of crossing insertion. Returns true if any route changed.
inline bool insert_crossings(VertexPool& pool, RoutePaths& paths, const EncoderConfig& cfg) {
  struct LegRef {
    RouteId route;
    std::size_t leg;
  };
  std::vector<LegRef> legs;
  for (const auto& [rid, seq] : paths) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) legs.push_back({rid, i});
  }
  std::map<std::pair<RouteId, std::size_t>, std::vector<Insertion>> inserts;
  constexpr double kTouch = 1e-6;  // nmi

  for (std::size_t x = 0; x < legs.size(); ++x) {
    for (std::size_t y = x + 1; y < legs.size(); ++y) {
      const LegRef& la = legs[x];
      const LegRef& lb = legs[y];
      if (la.route == lb.route && lb.leg == la.leg + 1) continue;  // consecutive legs share a vertex
      const auto& sa = paths.at(la.route);
      const auto& sb = paths.at(lb.route);
      const std::size_t va0 = sa[la.leg], va1 = sa[la.leg + 1];
      const std::size_t vb0 = sb[lb.leg], vb1 = sb[lb.leg + 1];
      if ((va0 == vb0 && va1 == vb1) || (va0 == vb1 && va1 == vb0)) continue;  // shared leg
      const Point a0 = pool.pos[va0], a1 = pool.pos[va1];
      const Point b0 = pool.pos[vb0], b1 = pool.pos[vb1];
      const double len_a = geom::distance(a0, a1);
      const double len_b = geom::distance(b0, b1);
      if (len_a == 0.0 || len_b == 0.0) continue;

      const bool collinear = geom::line_distance(b0, a0, a1) < cfg.collinear_tolerance &&
                             geom::line_distance(b1, a0, a1) < cfg.collinear_tolerance &&
                             geom::line_distance(a0, b0, b1) < cfg.collinear_tolerance &&
                             geom::line_distance(a1, b0, b1) < cfg.collinear_tolerance;
      if (collinear) {
        // Shared track: pin each leg's endpoints onto the other leg so both
        // routes end up with identical vertex chains along the overlap.
        auto pin = [&](std::size_t v, Point p, const LegRef& onto, Point o0, Point o1, double len) {
          const double t = geom::project_param(p, o0, o1);
          if (t * len > kTouch && (1.0 - t) * len > kTouch) inserts[{onto.route, onto.leg}].push_back({t, v});
        };
        pin(vb0, b0, la, a0, a1, len_a);
        pin(vb1, b1, la, a0, a1, len_a);
        pin(va0, a0, lb, b0, b1, len_b);
        pin(va1, a1, lb, b0, b1, len_b);
        continue;
      }

      auto hit = geom::intersect_segments(a0, a1, b0, b1);
      if (!hit) continue;
      auto end_of = [kTouch](double t, double len, std::size_t v0, std::size_t v1) -> std::optional<std::size_t> {
        if (t * len <= kTouch) return v0;
        if ((1.0 - t) * len <= kTouch) return v1;
        return std::nullopt;
      };
      const auto end_a = end_of(hit->t, len_a, va0, va1);
      const auto end_b = end_of(hit->u, len_b, vb0, vb1);
      if (end_a && end_b) continue;  // meet at vertices; coincident ones merge later
      if (end_a) {
        inserts[{lb.route, lb.leg}].push_back({hit->u, *end_a});
      } else if (end_b) {
        inserts[{la.route, la.leg}].push_back({hit->t, *end_b});
      } else {
        const std::size_t v = pool.find_or_add(hit->point);
        inserts[{la.route, la.leg}].push_back({hit->t, v});
        inserts[{lb.route, lb.leg}].push_back({hit->u, v});
      }
    }
  }
  if (inserts.empty()) return false;

  bool changed = false;
  for (auto& [rid, seq] : paths) {
    std::vector<std::size_t> rebuilt;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (rebuilt.empty() || rebuilt.back() != seq[i]) rebuilt.push_back(seq[i]);
      if (i + 1 == seq.size()) break;
      auto it = inserts.find({rid, i});
      if (it == inserts.end()) continue;
      auto list = it->second;
      std::stable_sort(list.begin(), list.end(), [](const Insertion& l, const Insertion& r) { return l.t < r.t; });
      for (const auto& ins : list) {
        if (ins.vertex == seq[i] || ins.vertex == seq[i + 1]) continue;
        if (rebuilt.back() != ins.vertex) {
          rebuilt.push_back(ins.vertex);
          changed = true;
        }
      }
    }
    seq = std::move(rebuilt);
  }
  return changed;
}

/// Merges vertices closer than `radius` (single linkage, centroid position),
/// restricted to vertices for which `eligible(i, j)` holds. Returns true if
/// anything merged.
template <typename Eligible>
bool merge_close_vertices(VertexPool& pool, RoutePaths& paths, double radius, Eligible eligible) {
  std::set<std::size_t> used;
  for (const auto& [rid, seq] : paths) used.insert(seq.begin(), seq.end());
  const std::vector<std::size_t> ids(used.begin(), used.end());
  DisjointSets sets(pool.pos.size());
  bool any = false;
  for (std::size_t x = 0; x < ids.size(); ++x) {
    for (std::size_t y = x + 1; y < ids.size(); ++y) {
      const std::size_t i = ids[x], j = ids[y];
      if (geom::distance(pool.pos[i], pool.pos[j]) < radius && eligible(i, j)) any |= sets.unite(i, j);
    }
  }
  if (!any) return false;
  std::map<std::size_t, std::pair<Point, std::size_t>> sums;
  for (std::size_t i : ids) {
    auto& [sum, count] = sums[sets.find(i)];
    sum = geom::operator+(sum, pool.pos[i]);
    ++count;
  }
  for (const auto& [root, sc] : sums) {
    const double k = static_cast<double>(sc.second);
    pool.pos[root] = {sc.first.x / k, sc.first.y / k};
  }
  for (auto& [rid, seq] : paths) {
    for (auto& v : seq) v = sets.find(v);
    collapse_repeats(seq);
  }
  return true;
}

}  // namespace detail

/// Projects continuous routes onto a graph with nodes roughly every
/// `cfg.spacing` nmi:
///  1. fixes within cluster_radius collapse to their cluster centroid;
///  2. unimportant kinks are dropped (shared cluster nodes are kept);
///  3. every leg crossing becomes a shared vertex, overlapping collinear
///     legs become a shared vertex chain, and vertices closer than
///     cluster_radius/2 merge;
///  4. each leg of length L is split into max(1, round(L / spacing)) edges;
///  5. interpolated nodes of different routes closer than cluster_radius/2
///     merge unless that pushes an edge out of [spacing/2, 3*spacing/2].
/// Node ids are assigned in (x, y, creation) order as N0, N1, ...
inline SectorGraph encode_sector(const ContinuousSector& sector, const EncoderConfig& cfg = {}) {
  sector.validate();
  cfg.validate();
  const FixClustering clusters = cluster_fixes(sector, cfg);

  detail::VertexPool pool;
  for (const Point& c : clusters.centroids) pool.add(c);

  // Cluster sequences per route.
  detail::RoutePaths paths;
  std::map<std::size_t, std::set<RouteId>> cluster_routes;
  for (const auto& [rid, fixes] : sector.routes) {
    std::vector<std::size_t> seq;
    for (const auto& f : fixes) seq.push_back(clusters.cluster_of.at(f));
    detail::collapse_repeats(seq);
    if (seq.size() < 2) throw Error(ErrorCode::degenerate_route, rid);
    for (std::size_t c : seq) cluster_routes[c].insert(rid);
    paths[rid] = std::move(seq);
  }

  // Kink removal; clusters used by more than one route are pinned.
  for (auto& [rid, seq] : paths) {
    std::vector<Point> pts;
    std::vector<bool> pinned;
    for (std::size_t c : seq) {
      pts.push_back(pool.pos[c]);
      pinned.push_back(cluster_routes[c].size() >= 2);
    }
    std::vector<std::size_t> kept_seq;
    for (std::size_t i : simplify_route_indices(pts, cfg, pinned)) kept_seq.push_back(seq[i]);
    std::vector<Point> kept_pts;
    for (std::size_t v : kept_seq) kept_pts.push_back(pool.pos[v]);
    if (geom::polyline_length(kept_pts) < cfg.spacing) throw Error(ErrorCode::degenerate_route, rid);
    seq = std::move(kept_seq);
  }

  // Planarize until stable.
  const double merge_radius = cfg.cluster_radius / 2.0;
  auto always = [](std::size_t, std::size_t) { return true; };
  for (int pass = 0; pass < 16; ++pass) {
    const bool inserted = detail::insert_crossings(pool, paths, cfg);
    const bool merged = detail::merge_close_vertices(pool, paths, merge_radius, always);
    if (!inserted && !merged) break;
  }
  for (const auto& [rid, seq] : paths) {
    if (seq.size() < 2) throw Error(ErrorCode::degenerate_route, rid);
  }

  // Interpolate. Legs shared by several routes reuse the same interior nodes.
  const std::size_t anchor_count = pool.pos.size();
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> leg_nodes;
  std::vector<std::set<RouteId>> owners(anchor_count);
  detail::RoutePaths dense;
  for (const auto& [rid, seq] : paths) {
    std::vector<std::size_t> out{seq.front()};
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const std::size_t u = seq[i], v = seq[i + 1];
      const auto key = std::minmax(u, v);
      auto it = leg_nodes.find({key.first, key.second});
      if (it == leg_nodes.end()) {
        const Point p0 = pool.pos[key.first], p1 = pool.pos[key.second];
        const double len = geom::distance(p0, p1);
        const long n = std::max(1L, std::lround(len / cfg.spacing));
        std::vector<std::size_t> interior;
        for (long k = 1; k < n; ++k) {
          interior.push_back(pool.add(geom::lerp(p0, p1, static_cast<double>(k) / static_cast<double>(n))));
        }
        it = leg_nodes.emplace(std::make_pair(key.first, key.second), std::move(interior)).first;
      }
      std::vector<std::size_t> interior = it->second;
      if (u != key.first) std::reverse(interior.begin(), interior.end());
      out.insert(out.end(), interior.begin(), interior.end());
      out.push_back(v);
    }
    dense[rid] = std::move(out);
  }
  owners.resize(pool.pos.size());
  for (const auto& [rid, seq] : dense) {
    for (std::size_t v : seq) owners[v].insert(rid);
  }

  // Merge interpolated nodes that belong to different routes. A merge that
  // pushes an edge out of [spacing/2, 3*spacing/2] is undone and its
  // vertices are left alone on the next try.
  auto edge_ok = [&](const detail::VertexPool& vp, std::size_t a, std::size_t b) {
    const double d = geom::distance(vp.pos[a], vp.pos[b]);
    return d >= cfg.spacing / 2 - 1e-9 && d <= 1.5 * cfg.spacing + 1e-9;
  };
  std::set<std::size_t> pinned;
  for (;;) {
    auto interpolated_cross_route = [&](std::size_t i, std::size_t j) {
      if (i < anchor_count || j < anchor_count || pinned.count(i) || pinned.count(j)) return false;
      for (const auto& r : owners[i]) {
        if (owners[j].count(r)) return false;
      }
      return true;
    };
    detail::VertexPool trial_pool = pool;
    detail::RoutePaths trial = dense;
    detail::merge_close_vertices(trial_pool, trial, merge_radius, interpolated_cross_route);
    std::set<std::size_t> bad;
    for (const auto& [rid, seq] : trial) {
      for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        if (!edge_ok(trial_pool, seq[i], seq[i + 1])) {
          bad.insert(seq[i]);
          bad.insert(seq[i + 1]);
        }
      }
    }
    if (bad.empty()) {
      pool = std::move(trial_pool);
      dense = std::move(trial);
      break;
    }
    const std::size_t before = pinned.size();
    pinned.insert(bad.begin(), bad.end());
    if (pinned.size() == before) {
      // Out-of-bounds edges that no merge caused; keep the unmerged graph.
      break;
    }
  }

  // Relabel in (x, y, creation) order.
  std::set<std::size_t> used;
  for (const auto& [rid, seq] : dense) {
    if (seq.size() < 2) throw Error(ErrorCode::degenerate_route, rid);
    used.insert(seq.begin(), seq.end());
  }
  std::vector<std::size_t> order(used.begin(), used.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Point pa = pool.pos[a], pb = pool.pos[b];
    return std::tie(pa.x, pa.y, a) < std::tie(pb.x, pb.y, b);
  });
  std::map<std::size_t, NodeId> label;
  SectorGraph g;
  g.spacing_nmi = cfg.spacing;
  for (std::size_t k = 0; k < order.size(); ++k) {
    label[order[k]] = "N" + std::to_string(k);
    g.nodes[label[order[k]]] = pool.pos[order[k]];
  }
  for (const auto& [rid, seq] : dense) {
    std::vector<NodeId> ids;
    for (std::size_t v : seq) ids.push_back(label.at(v));
    g.routes[rid] = std::move(ids);
  }
  g.validate();
  if (auto bad = find_off_node_crossing(g)) {
    throw Error(ErrorCode::non_planarizable, bad->first + "," + bad->second);
  }
  return g;
}

/// Treats an existing graph as a continuous sector (nodes become fixes).
inline ContinuousSector as_continuous(const SectorGraph& g) {
  ContinuousSector s;
  for (const auto& [id, p] : g.nodes) s.fixes[id] = p;
  for (const auto& [rid, seq] : g.routes) s.routes[rid] = seq;
  return s;
}

}  // namespace atg
