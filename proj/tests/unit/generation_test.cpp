#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "atg/baseline.hpp"
#include "atg/graph_encoder.hpp"
#include "atg/llm_client.hpp"
#include "atg/prompting.hpp"
#include "atg/synthetic_sectors.hpp"

namespace atg {
namespace {

SyntheticSectorParams params(int routes, int ints) {
  SyntheticSectorParams p;
  p.n_routes = routes;
  p.n_intersections = ints;
  return p;
}

// ------------------------------------------------------------ generator

TEST(Synthetic, SameSeedSameBytes) {
  const auto p = params(7, 7);
  EXPECT_EQ(sector_to_string(generate_sector(99, p)), sector_to_string(generate_sector(99, p)));
  EXPECT_NE(sector_to_string(generate_sector(99, p)), sector_to_string(generate_sector(100, p)));
}

TEST(Synthetic, TwoRoutesOneCrossing) {
  const SectorGraph g = generate_sector(1, params(2, 1));
  EXPECT_EQ(g.routes.size(), 2u);
  EXPECT_EQ(count_intersections(g), 1u);
  EXPECT_TRUE(g.has_route("R1"));
  EXPECT_TRUE(g.has_route("R2"));
}

TEST(Synthetic, UnreachableTargetReportsSeedAndAttempts) {
  auto p = params(2, 40);
  p.max_attempts = 50;
  try {
    generate_sector(5, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::target_unreachable);
    EXPECT_EQ(e.detail(), "seed=5,attempts=50");
  }
}

TEST(Synthetic, RejectsTinyGrids) {
  auto p = params(7, 7);
  p.grid = {8, 12};
  EXPECT_THROW(generate_sector(1, p), Error);
}

TEST(SyntheticProperty, TargetsPlanarityAndSpacing) {
  for (int k = 4; k <= 14; k += 2) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const SectorGraph g = generate_sector(seed, params(7, k));
      ASSERT_EQ(count_intersections(g), static_cast<std::size_t>(k));
      ASSERT_EQ(g.routes.size(), 7u);
      ASSERT_TRUE(is_planar(g));
      for (const auto& [rid, seq] : g.routes) {
        ASSERT_GE(seq.size(), 2u);
        for (std::size_t i = 1; i < seq.size(); ++i) {
          const double d = geom::distance(g.position(seq[i - 1]), g.position(seq[i]));
          ASSERT_TRUE(std::abs(d - 20) < 1e-9 || std::abs(d - 20 * std::sqrt(2.0)) < 1e-9);
        }
      }
    }
  }
}

TEST(Synthetic, SuiteSeedsDependOnTargets) {
  EXPECT_NE(sector_seed(1, params(7, 7), 0), sector_seed(1, params(7, 8), 0));
  EXPECT_NE(sector_seed(1, params(7, 7), 0), sector_seed(1, params(7, 7), 1));
  EXPECT_EQ(generate_suite(3, 4, params(7, 7)).size(), 4u);
}

// ------------------------------------------------------------ baseline

TEST(Baseline, SampledScenariosAreValidAndDeterministic) {
  const SectorGraph g = generate_sector(4, params(7, 7));
  CounterRng a(1, 2), b(1, 2);
  const Scenario s = sample_random_scenario(g, 8, 12, a);
  EXPECT_EQ(scenario_to_string(s), scenario_to_string(sample_random_scenario(g, 8, 12, b)));
  ASSERT_EQ(s.aircraft.size(), 8u);
  EXPECT_EQ(s.aircraft[7].id, "AC8");
  for (const auto& ac : s.aircraft) {
    EXPECT_GE(ac.spawn_time, 0);
    EXPECT_LT(ac.spawn_time, 12);
    EXPECT_TRUE(g.has_route(ac.route));
  }
}

TEST(Baseline, EstimatesAreReproducible) {
  const auto sectors = generate_suite(2, 3, params(7, 7));
  BaselineOptions o;
  o.samples = 60;
  o.seed = 8;
  const auto e1 = estimate_muip_rand(sectors, 6, 12, o);
  const auto e2 = estimate_muip_rand(sectors, 6, 12, o);
  EXPECT_EQ(e1.values, e2.values);
  EXPECT_EQ(e1.samples, 60);
  EXPECT_GT(e1.stderr_, 0.0);
  o.samples_per_sector = true;
  EXPECT_EQ(estimate_muip_rand(sectors, 6, 12, o).samples, 180);
}

TEST(Baseline, MadipUsesDistanceToTarget) {
  const auto sectors = generate_suite(2, 2, params(7, 7));
  BaselineOptions o;
  o.samples = 40;
  const auto muip = estimate_muip_rand(sectors, 10, 12, o);
  const auto madip = estimate_madip_rand(sectors, 10, 12, 2, o);
  ASSERT_EQ(muip.values.size(), madip.values.size());
  for (std::size_t i = 0; i < muip.values.size(); ++i) EXPECT_EQ(madip.values[i], std::abs(muip.values[i] - 2));
}

TEST(Baseline, OneAircraftNeverInteracts) {
  const auto sectors = generate_suite(2, 2, params(7, 7));
  EXPECT_EQ(estimate_muip_rand(sectors, 1, 12, {}).mean, 0.0);
}

// ------------------------------------------------------------ prompting

TemplateSet templates() { return TemplateSet::load_default(); }

SectorGraph cross_sector() {
  SectorGraph g;
  g.nodes = {{"N0", {0, 40}}, {"N1", {20, 40}}, {"N2", {40, 40}}, {"N3", {20, 20}}, {"N4", {20, 60}}};
  g.routes["R1"] = {"N0", "N1", "N2"};
  g.routes["R2"] = {"N3", "N1", "N4"};
  return g;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

TEST(SectorText, OneIntersectionLineNamingBothRoutes) {
  const std::string t = render_sector_text(cross_sector());
  EXPECT_EQ(count(t, "- intersection at"), 1u);
  EXPECT_NE(t.find("- intersection at N1: routes R1, R2"), std::string::npos);
  EXPECT_NE(t.find("R1 (3 nodes): N0 -> N1 -> N2"), std::string::npos);
  EXPECT_NE(t.find("N4: 20, 60"), std::string::npos);
}

TEST(SectorText, BoundedSize) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::string t = render_sector_text(generate_sector(seed, params(7, 7)));
    EXPECT_LT(t.size(), 4000u) << "seed " << seed;
    std::istringstream in(t);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("N", 0) == 0 && line.find("->") == std::string::npos) EXPECT_LE(line.size(), 60u);
    }
  }
}

TEST(BenchmarkPrompt, NonInteractingTask) {
  BenchmarkParams p{Benchmark::traffic_volume, 5, 12, 7, 7, std::nullopt};
  const std::string text = build_benchmark_prompt(cross_sector(), p, templates());
  EXPECT_NE(text.find("5 aircraft"), std::string::npos);
  EXPECT_NE(text.find("no pair may interact"), std::string::npos);
  EXPECT_EQ(text, build_benchmark_prompt(cross_sector(), p, templates()));
  // Section order.
  const auto task = text.find("# Task"), rules = text.find("## Movement rules"),
             inter = text.find("## Interaction definition"), strat = text.find("## High-level strategy"),
             sector = text.find("## Sector"), output = text.find("## Output format"), fence = text.rfind("```json");
  EXPECT_LT(task, rules);
  EXPECT_LT(rules, inter);
  EXPECT_LT(inter, strat);
  EXPECT_LT(strat, sector);
  EXPECT_LT(sector, output);
  EXPECT_LT(output, fence);
  EXPECT_NE(text.find("1) Sector analysis"), std::string::npos);
  EXPECT_NE(text.find("3) Internal verification"), std::string::npos);
  EXPECT_EQ(text.find("{{"), std::string::npos);
}

TEST(BenchmarkPrompt, ControllabilityStatesTarget) {
  BenchmarkParams p{Benchmark::controllability, 10, 12, 7, 7, 3};
  const std::string text = build_benchmark_prompt(cross_sector(), p, templates());
  EXPECT_NE(text.find("exactly 3 unique interacting pairs"), std::string::npos);
  EXPECT_NE(text.find("Extra pairs count against you"), std::string::npos);
}

TEST(BenchmarkPrompt, ExampleMatchesParserSchema) {
  for (Benchmark b : kAllBenchmarks) {
    const std::string text = build_benchmark_prompt(cross_sector(), benchmark_grid(b).front(), templates());
    const Scenario s = extract_scenario_json(text);
    EXPECT_EQ(s.aircraft.size(), 2u);
    EXPECT_EQ(s.aircraft[0].route, "R1");
  }
}

TEST(ControllabilityPrompt, EmbedsSpecVerbatim) {
  const std::string spec = "two aircraft which interact in a cross-path manner";
  const Prompt p = build_controllability_prompt(cross_sector(), spec, false, templates());
  EXPECT_NE(p.text.find(spec), std::string::npos);
  EXPECT_NE(p.text.find("cross-path"), std::string::npos);
  EXPECT_NE(p.text.find("head-on"), std::string::npos);
  EXPECT_NE(p.text.find("catch-up"), std::string::npos);
  EXPECT_TRUE(p.warnings.empty());
  EXPECT_EQ(p.text.find("initial_fl"), std::string::npos);
  EXPECT_THROW(build_controllability_prompt(cross_sector(), "  ", false, templates()), Error);
}

TEST(ControllabilityPrompt, ThreeDimensionalMode) {
  const std::string spec = "one aircraft climbing from FL280 to FL340 crossing a level one";
  const Prompt flat = build_controllability_prompt(cross_sector(), spec, false, templates());
  ASSERT_EQ(flat.warnings.size(), 1u);
  const Prompt deep = build_controllability_prompt(cross_sector(), spec, true, templates());
  EXPECT_TRUE(deep.warnings.empty());
  EXPECT_NE(deep.text.find("initial_fl"), std::string::npos);
  EXPECT_NE(deep.text.find("ranges overlap"), std::string::npos);
  const Scenario ex = extract_scenario_json(deep.text);
  EXPECT_EQ(ex.aircraft[0].initial_fl, 280);
  EXPECT_EQ(ex.aircraft[0].exit_fl, 340);
}

TEST(ControllabilityPrompt, ExistingScenarioSection) {
  Scenario s;
  s.duration = 12;
  Aircraft a;
  a.id = "AC7";
  a.route = "R2";
  s.aircraft.push_back(a);
  const Prompt p = build_controllability_prompt(cross_sector(), "add a new aircraft which catches up with AC7", false,
                                                templates(), 12, s);
  EXPECT_NE(p.text.find("## Existing scenario"), std::string::npos);
  EXPECT_NE(p.text.find("\"AC7\""), std::string::npos);
}

TEST(Feedback, NamesPairTimeNodeAndClass) {
  InteractionEvent ev;
  ev.time = 10;
  ev.pair = AircraftPair::of("AC2", "AC1");
  ev.nodes = {"N7"};
  ev.cls = InteractionClass::head_on;
  FeedbackInput in;
  in.events = {ev};
  in.requirement = "no pair may interact.";
  in.attempt = 2;
  const std::string text = build_feedback(in, templates());
  EXPECT_NE(text.find("AC1 and AC2"), std::string::npos);
  EXPECT_NE(text.find("t=10"), std::string::npos);
  EXPECT_NE(text.find("N7"), std::string::npos);
  EXPECT_NE(text.find("head-on"), std::string::npos);
  EXPECT_NE(text.find("no pair may interact."), std::string::npos);
  EXPECT_NE(text.find("corrected full scenario"), std::string::npos);
}

TEST(Feedback, GraceOnlyCitesSpawnStep) {
  InteractionEvent ev;
  ev.time = 4;
  ev.pair = AircraftPair::of("AC1", "AC2");
  ev.nodes = {"N3"};
  Scenario s;
  s.duration = 12;
  Aircraft a1, a2;
  a1.id = "AC1";
  a2.id = "AC2";
  a2.spawn_time = 3;
  s.aircraft = {a1, a2};
  FeedbackInput in;
  in.report.spawn_grace_violations = {ev};
  in.scenario = &s;
  in.requirement = "no pair may interact.";
  const std::string text = build_feedback(in, templates());
  EXPECT_NE(text.find("spawn grace"), std::string::npos);
  EXPECT_NE(text.find("AC2 spawned at t=3"), std::string::npos);
}

TEST(Feedback, EmptyReportIsAPreconditionError) {
  try {
    build_feedback(FeedbackInput{}, templates());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::precondition);
  }
}

TEST(Templates, UnboundVariableAndIncludes) {
  TemplateSet t;
  t.set("inner", "[{{x}}]\n");
  t.set("outer", "a {{> inner}} b");
  EXPECT_EQ(t.render("outer", {{"x", "1"}}), "a [1] b");
  EXPECT_THROW(t.render("outer", {}), Error);
  EXPECT_THROW(t.render("missing", {}), Error);
}

TEST(Templates, DirectoryResolution) {
  EXPECT_EQ(TemplateSet::resolve_dir(std::string("/x/y")), std::filesystem::path("/x/y"));
  ::setenv("ATG_TEMPLATES", "/from/env", 1);
  EXPECT_EQ(TemplateSet::resolve_dir(), std::filesystem::path("/from/env"));
  ::unsetenv("ATG_TEMPLATES");
  EXPECT_EQ(TemplateSet::resolve_dir(), std::filesystem::path(ATG_DEFAULT_TEMPLATE_DIR));
  EXPECT_THROW(TemplateSet::load("/definitely/not/here"), Error);
}

}  // namespace
}  // namespace atg
