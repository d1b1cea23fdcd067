#include <gtest/gtest.h>

#include <cmath>

#include "atg/geometry.hpp"
#include "atg/graph_encoder.hpp"
#include "atg/rng.hpp"
#include "atg/synthetic_sectors.hpp"

namespace atg {
namespace {

ContinuousSector two_route(std::vector<Point> a, std::vector<Point> b) {
  ContinuousSector s;
  auto add = [&](const std::string& r, const std::vector<Point>& pts) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string f = r + "_" + std::to_string(i);
      s.fixes[f] = pts[i];
      s.routes[r].push_back(f);
    }
  };
  add("A", a);
  add("B", b);
  return s;
}

double max_edge(const SectorGraph& g, bool shortest = false) {
  double best = shortest ? 1e9 : 0;
  for (const auto& [rid, seq] : g.routes) {
    for (std::size_t i = 1; i < seq.size(); ++i) {
      const double d = geom::distance(g.position(seq[i - 1]), g.position(seq[i]));
      best = shortest ? std::min(best, d) : std::max(best, d);
    }
  }
  return best;
}

TEST(Geometry, SegmentIntersection) {
  const auto hit = geom::intersect_segments({0, 0}, {10, 0}, {5, -5}, {5, 5});
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->point.x, 5, 1e-12);
  EXPECT_NEAR(hit->t, 0.5, 1e-12);
  EXPECT_FALSE(geom::intersect_segments({0, 0}, {10, 0}, {0, 1}, {10, 1}).has_value());
  EXPECT_NEAR(geom::angle_deg({1, 0}, {0, 1}), 90, 1e-9);
}

TEST(Clustering, SingleLinkageChains) {
  ContinuousSector s;
  s.fixes = {{"P", {0, 0}}, {"Q", {15, 0}}, {"R", {30, 0}}, {"S", {100, 0}}};
  s.routes["X"] = {"P", "Q", "R", "S"};
  const auto c = cluster_fixes(s, {});
  EXPECT_EQ(c.centroids.size(), 2u);
  EXPECT_EQ(c.cluster_of.at("P"), c.cluster_of.at("R"));
  EXPECT_NE(c.cluster_of.at("P"), c.cluster_of.at("S"));
  EXPECT_NEAR(c.centroids[c.cluster_of.at("Q")].x, 15, 1e-12);
}

TEST(Clustering, RadiusIsExclusive) {
  ContinuousSector s;
  s.fixes = {{"P", {0, 0}}, {"Q", {20, 0}}};
  s.routes["X"] = {"P", "Q"};
  EXPECT_EQ(cluster_fixes(s, {}).centroids.size(), 2u);
}

TEST(Simplify, SmallKinksGoLargeTurnsStay) {
  const std::vector<Point> slight{{0, 0}, {50, 3}, {100, 0}};
  EXPECT_EQ(simplify_route(slight, {}).size(), 2u);
  const std::vector<Point> corner{{0, 0}, {100, 0}, {100, 100}};
  EXPECT_EQ(simplify_route(corner, {}).size(), 3u);
  std::vector<bool> pinned{false, true, false};
  EXPECT_EQ(simplify_route(slight, {}, pinned).size(), 3u);
}

TEST(Encoder, StraightRouteInterpolatesToSpacing) {
  ContinuousSector s;
  s.fixes = {{"P", {0, 0}}, {"Q", {100, 0}}};
  s.routes["R1"] = {"P", "Q"};
  const SectorGraph g = encode_sector(s);
  EXPECT_EQ(g.routes.at("R1").size(), 6u);
  EXPECT_EQ(g.routes.at("R1").front(), "N0");
  EXPECT_NEAR(max_edge(g), 20, 1e-9);
}

TEST(Encoder, LengthNotMultipleOfSpacingRounds) {
  ContinuousSector s;
  s.fixes = {{"P", {0, 0}}, {"Q", {110, 0}}};
  s.routes["R1"] = {"P", "Q"};
  const SectorGraph g = encode_sector(s);
  EXPECT_EQ(g.routes.at("R1").size(), 7u);  // round(5.5) edges of 18.3 nmi
  EXPECT_NEAR(max_edge(g), 110.0 / 6, 1e-9);
}

TEST(Encoder, CrossingBecomesSharedNode) {
  const SectorGraph g = encode_sector(two_route({{0, 0}, {100, 0}}, {{50, -50}, {50, 50}}));
  EXPECT_EQ(count_intersections(g), 1u);
  EXPECT_TRUE(is_planar(g));
}

TEST(Encoder, OffLatticeCrossingStillSnapsToANode) {
  const SectorGraph g = encode_sector(two_route({{0, 0}, {100, 0}}, {{37, -50}, {37, 50}}));
  EXPECT_EQ(count_intersections(g), 1u);
  EXPECT_TRUE(is_planar(g));
  EXPECT_GE(max_edge(g, true), 10.0 - 1e-9);
  EXPECT_LE(max_edge(g), 30.0 + 1e-9);
}

TEST(Encoder, SharedLegReusesNodes) {
  // Both routes fly the same 60 nmi leg before diverging.
  ContinuousSector s;
  s.fixes = {{"P", {0, 0}}, {"Q", {60, 0}}, {"U", {60, 80}}, {"D", {60, -80}}};
  s.routes["A"] = {"P", "Q", "U"};
  s.routes["B"] = {"P", "Q", "D"};
  const SectorGraph g = encode_sector(s);
  EXPECT_EQ(count_intersections(g), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(g.routes.at("A")[i], g.routes.at("B")[i]);
}

TEST(Encoder, ShortRouteIsDegenerate) {
  ContinuousSector s;
  s.fixes = {{"P", {0, 0}}, {"Q", {5, 0}}, {"S", {0, 100}}, {"T", {100, 100}}};
  s.routes["SHORT"] = {"P", "Q"};
  s.routes["LONG"] = {"S", "T"};
  try {
    encode_sector(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_route);
    EXPECT_STREQ(e.what(), "error:degenerate-route:SHORT");
  }
}

TEST(Encoder, DeterministicNodeLabels) {
  const auto s = two_route({{0, 0}, {100, 0}}, {{50, -50}, {50, 50}});
  EXPECT_EQ(sector_to_string(encode_sector(s)), sector_to_string(encode_sector(s)));
}

TEST(Planarity, DetectsOffNodeCrossing) {
  SectorGraph g;
  g.nodes = {{"A0", {0, 0}}, {"A1", {20, 0}}, {"B0", {10, -10}}, {"B1", {10, 10}}};
  g.routes["A"] = {"A0", "A1"};
  g.routes["B"] = {"B0", "B1"};
  const auto hit = find_off_node_crossing(g);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->first, "A");
  EXPECT_FALSE(is_planar(g));
}

// Random polyline sectors: the encoder either succeeds with a planar graph
// whose edges stay near the spacing, or reports a typed failure.
TEST(EncoderProperty, RandomSectorsArePlanarWithBoundedEdges) {
  int encoded = 0;
  for (std::uint64_t trial = 0; trial < 400; ++trial) {
    CounterRng r(2024, trial);
    ContinuousSector s;
    const int routes = static_cast<int>(r.between(2, 5));
    for (int k = 0; k < routes; ++k) {
      const std::string rid = "R" + std::to_string(k + 1);
      const int pts = static_cast<int>(r.between(2, 4));
      for (int i = 0; i < pts; ++i) {
        const std::string f = rid + "F" + std::to_string(i);
        s.fixes[f] = {r.unit() * 240, r.unit() * 240};
        s.routes[rid].push_back(f);
      }
    }
    try {
      const SectorGraph g = encode_sector(s);
      ++encoded;
      ASSERT_TRUE(is_planar(g)) << "trial " << trial;
      ASSERT_GE(max_edge(g, true), 10.0 - 1e-6) << "trial " << trial;
      ASSERT_LE(max_edge(g), 30.0 + 1e-6) << "trial " << trial;
    } catch (const Error& e) {
      ASSERT_TRUE(e.code() == ErrorCode::degenerate_route || e.code() == ErrorCode::non_planarizable) << e.what();
    }
  }
  EXPECT_GT(encoded, 300);
}

TEST(EncoderProperty, GridSectorsSurviveReencoding) {
  SyntheticSectorParams p;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SectorGraph g = generate_sector(seed, p);
    ASSERT_TRUE(is_planar(g));
    // Axis-aligned routes only: diagonal lattice legs are longer than the spacing.
    SectorGraph axis;
    axis.nodes = g.nodes;
    for (const auto& [rid, seq] : g.routes) {
      const Point a = g.position(seq.front()), b = g.position(seq[1]);
      if (a.x == b.x || a.y == b.y) axis.routes[rid] = seq;
    }
    if (axis.routes.size() < 2) continue;
    std::map<NodeId, Point, NaturalLess> used;
    for (const auto& [rid, seq] : axis.routes) {
      for (const auto& n : seq) used[n] = g.position(n);
    }
    axis.nodes = used;
    const SectorGraph once = encode_sector(as_continuous(axis));
    const SectorGraph twice = encode_sector(as_continuous(once));
    EXPECT_EQ(sector_to_string(once), sector_to_string(twice)) << "seed " << seed;
    EXPECT_EQ(count_intersections(once), count_intersections(axis)) << "seed " << seed;
  }
}

}  // namespace
}  // namespace atg
