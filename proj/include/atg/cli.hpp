#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "atg/baseline.hpp"
#include "atg/error.hpp"
#include "atg/graph_encoder.hpp"
#include "atg/harness.hpp"
#include "atg/io_util.hpp"
#include "atg/json_io.hpp"
#include "atg/llm_client.hpp"
#include "atg/prompting.hpp"
#include "atg/rollout.hpp"
#include "atg/synthetic_sectors.hpp"

namespace atg::cli {

namespace detail {

// Writes atomically to `path`, or to `out` when no path is given.
inline void emit(std::ostream& out, const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

struct ParamFlags {
  std::string benchmark = "traffic_volume";
  int aircraft = 8;
  int duration = 12;
  int routes = 7;
  int intersections = 7;
  std::optional<int> target_pairs;

  void add_to(CLI::App* app) {
    app->add_option("--benchmark", benchmark, "traffic_volume|scenario_length|sector_complexity|controllability")
        ->capture_default_str();
    app->add_option("--aircraft", aircraft, "Aircraft count N")->capture_default_str();
    app->add_option("--duration", duration, "Scenario length T in time-steps")->capture_default_str();
    app->add_option("--routes", routes, "Routes per generated sector")->capture_default_str();
    app->add_option("--intersections", intersections, "Intersections per generated sector")->capture_default_str();
    app->add_option("--target-pairs", target_pairs, "Requested unique interacting pairs (controllability)");
  }

  BenchmarkParams params() const {
    BenchmarkParams p;
    p.benchmark = benchmark_from_string(benchmark);
    p.aircraft = aircraft;
    p.duration = duration;
    p.n_routes = routes;
    p.n_intersections = intersections;
    p.target_pairs = target_pairs;
    if (p.benchmark == Benchmark::controllability && !p.target_pairs) {
      throw Error(ErrorCode::invalid_input, "controllability needs --target-pairs");
    }
    return p;
  }
};

// Sector from --sector, or generated from --seed and --sector-index.
struct SectorSource {
  std::string file;
  std::uint64_t seed = 0;
  int index = 0;

  void add_to(CLI::App* app) {
    app->add_option("--sector", file, "Sector graph JSON (omit to generate one)");
    app->add_option("--seed", seed, "Suite seed when generating the sector")->capture_default_str();
    app->add_option("--sector-index", index, "Index within the generated suite")->capture_default_str();
  }

  SectorGraph load(const BenchmarkParams& p) const {
    if (!file.empty()) return sector_from_json(read_json_file(file));
    if (index < 0) throw Error(ErrorCode::invalid_input, "--sector-index must be >= 0");
    return generate_sector(sector_seed(seed, sector_params_for(p), static_cast<std::size_t>(index)),
                           sector_params_for(p));
  }
};

}  // namespace detail

/// Runs one command line. Exit codes: 0 success, 1 domain error, 2 usage.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Air traffic scenario generation toolkit", "atg"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  std::function<void()> run;

  // gen-sectors
  auto* gen = app.add_subcommand("gen-sectors", "Generate a seeded suite of grid sectors");
  std::uint64_t gen_seed = 0;
  int gen_count = 10, gen_routes = 7, gen_ints = 7, gen_w = 12, gen_h = 12;
  std::string gen_out = "sectors";
  gen->add_option("--seed", gen_seed, "Suite seed")->capture_default_str();
  gen->add_option("--count", gen_count, "Number of sectors")->capture_default_str();
  gen->add_option("--routes", gen_routes, "Routes per sector")->capture_default_str();
  gen->add_option("--intersections", gen_ints, "Intersections per sector")->capture_default_str();
  gen->add_option("--width", gen_w, "Grid width in lattice units")->capture_default_str();
  gen->add_option("--height", gen_h, "Grid height in lattice units")->capture_default_str();
  gen->add_option("--out-dir", gen_out, "Output directory")->capture_default_str();
  gen->callback([&] {
    run = [&] {
      SyntheticSectorParams p;
      p.n_routes = gen_routes;
      p.n_intersections = gen_ints;
      p.grid = {gen_w, gen_h};
      if (gen_count < 1) throw Error(ErrorCode::invalid_input, "--count must be >= 1");
      const auto suite = generate_suite(gen_seed, static_cast<std::size_t>(gen_count), p);
      std::filesystem::create_directories(gen_out);
      for (std::size_t i = 0; i < suite.size(); ++i) {
        const auto path = std::filesystem::path(gen_out) / ("sector_" + std::to_string(i) + ".json");
        write_file_atomic(path, sector_to_string(suite[i]));
        out << path.string() << "\n";
      }
    };
  });

  // encode
  auto* enc = app.add_subcommand("encode", "Discretise a continuous route file into a sector graph");
  std::string enc_in, enc_out;
  EncoderConfig enc_cfg;
  enc->add_option("--input", enc_in, "Continuous sector JSON {fixes, routes}")->required();
  enc->add_option("--out", enc_out, "Output graph JSON (default stdout)");
  enc->add_option("--spacing", enc_cfg.spacing, "Node spacing in nmi")->capture_default_str();
  enc->add_option("--cluster-radius", enc_cfg.cluster_radius, "Fix clustering radius in nmi")->capture_default_str();
  enc->add_option("--kink-tolerance", enc_cfg.kink_tolerance_deg, "Kink removal threshold in degrees")
      ->capture_default_str();
  enc->callback([&] {
    run = [&] {
      const SectorGraph g = encode_sector(continuous_sector_from_json(read_json_file(enc_in)), enc_cfg);
      detail::emit(out, enc_out, sector_to_string(g));
    };
  });

  // verify
  auto* ver = app.add_subcommand("verify", "Roll out a scenario and report interactions and rule violations");
  std::string ver_sector, ver_scenario, ver_out;
  detail::ParamFlags ver_params;
  bool ver_check_params = false;
  RolloutConfig ver_cfg;
  ver->add_option("--sector", ver_sector, "Sector graph JSON")->required();
  ver->add_option("--scenario", ver_scenario, "Scenario JSON")->required();
  ver->add_option("--out", ver_out, "Report path (default stdout)");
  ver->add_option("--grace", ver_cfg.grace_steps, "Spawn grace window in time-steps")->capture_default_str();
  ver->add_flag("--check-params", ver_check_params, "Also check aircraft count and duration against the flags below");
  ver_params.add_to(ver);
  ver->callback([&] {
    run = [&] {
      const SectorGraph g = sector_from_json(read_json_file(ver_sector));
      const json j = read_json_file(ver_scenario);
      std::optional<BenchmarkParams> params;
      if (ver_check_params) params = ver_params.params();
      const ValidationReport report = validate_scenario_json(j, g, params, ver_cfg);
      std::vector<InteractionEvent> events;
      const ScenarioParse parsed = parse_scenario(j);
      if (!parsed.structural) {
        Scenario runnable;
        runnable.duration = parsed.scenario.duration;
        for (const auto& a : parsed.scenario.aircraft) {
          if (g.has_route(a.route)) runnable.aircraft.push_back(a);
        }
        events = detect_interactions(runnable, g, ver_cfg);
      }
      detail::emit(out, ver_out, verification_to_json(events, report).dump(2) + "\n");
    };
  });

  // baseline
  auto* base = app.add_subcommand("baseline", "Monte Carlo random baseline for a benchmark grid");
  std::string base_bench = "traffic_volume", base_out;
  std::uint64_t base_seed = 0;
  int base_samples = 500, base_sectors = 10;
  std::optional<int> base_param;
  base->add_option("--benchmark", base_bench, "Benchmark axis")->capture_default_str();
  base->add_option("--seed", base_seed, "Suite and sampling seed")->capture_default_str();
  base->add_option("--samples", base_samples, "Random scenarios per parameter point")->capture_default_str();
  base->add_option("--sectors", base_sectors, "Sectors in the suite")->capture_default_str();
  base->add_option("--param", base_param, "Only this parameter point");
  base->add_option("--out", base_out, "Output JSON (default stdout)");
  base->callback([&] {
    run = [&] {
      const Benchmark b = benchmark_from_string(base_bench);
      if (base_samples < 1 || base_sectors < 1) throw Error(ErrorCode::invalid_input, "--samples and --sectors must be >= 1");
      SuiteCache suites(base_seed, base_sectors, {});
      ordered_json rows = ordered_json::array();
      for (const auto& p : benchmark_grid(b)) {
        if (base_param && p.parameter() != *base_param) continue;
        BaselineOptions bo;
        bo.samples = base_samples;
        bo.seed = derive_seed(base_seed, static_cast<std::uint64_t>(p.parameter()) * 16u + static_cast<std::uint64_t>(b));
        const auto e = estimate_baseline(suites.get(p), p, bo);
        rows.push_back({{"benchmark", std::string(to_string(b))}, {"parameter", p.parameter()}, {"mean", e.mean},
                        {"stderr", e.stderr_}, {"samples", e.samples}});
      }
      if (rows.empty()) throw Error(ErrorCode::invalid_input, "no parameter point matches --param");
      detail::emit(out, base_out, rows.dump(2) + "\n");
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Run benchmark cells for every model and record them in a store");
  std::vector<std::string> bench_names;
  std::string bench_models, bench_store = "results/store.jsonl", bench_templates;
  BenchOptions bench_opt;
  std::optional<std::size_t> bench_limit;
  bench->add_option("--benchmark", bench_names, "Benchmark axis (repeatable, or 'all')")->required();
  bench->add_option("--models", bench_models, "Models config JSON {models:[...]}")->required();
  bench->add_option("--suite-seed,--seed", bench_opt.suite_seed, "Sector suite seed")->capture_default_str();
  bench->add_option("--store", bench_store, "JSONL result store")->capture_default_str();
  bench->add_option("--max-inflight", bench_opt.max_inflight, "Concurrent requests")->capture_default_str();
  bench->add_flag("--resume", bench_opt.resume, "Continue an existing store, skipping finished cells");
  bench->add_option("--sectors", bench_opt.n_sectors, "Sectors per parameter point")->capture_default_str();
  bench->add_option("--samples", bench_opt.baseline_samples, "Random-baseline samples")->capture_default_str();
  bench->add_option("--limit", bench_limit, "Stop after this many cells");
  bench->add_option("--templates", bench_templates, "Prompt template directory");
  bench->callback([&] {
    run = [&] {
      for (const auto& n : bench_names) {
        if (n == "all") {
          bench_opt.benchmarks.assign(std::begin(kAllBenchmarks), std::end(kAllBenchmarks));
          break;
        }
        bench_opt.benchmarks.push_back(benchmark_from_string(n));
      }
      bench_opt.models = load_models_config(bench_models);
      bench_opt.store = bench_store;
      bench_opt.limit = bench_limit;
      const auto s = run_benchmark(bench_opt, TemplateSet::load_default(bench_templates));
      out << ordered_json{{"cells_run", s.cells_run},          {"cells_skipped", s.cells_skipped},
                          {"cells_ok", s.cells_ok},            {"cells_invalid", s.cells_invalid},
                          {"cells_failed", s.cells_failed},    {"baselines_computed", s.baselines_computed}}
                 .dump()
          << "\n";
    };
  });

  // refine
  auto* ref = app.add_subcommand("refine", "Generate, then feed verifier findings back for several rounds");
  std::string ref_models, ref_model, ref_out, ref_templates;
  int ref_rounds = 3;
  detail::ParamFlags ref_params;
  detail::SectorSource ref_sector;
  ref->add_option("--models", ref_models, "Models config JSON")->required();
  ref->add_option("--model", ref_model, "Model label (default: first in config)");
  ref->add_option("--rounds", ref_rounds, "Maximum feedback rounds")->capture_default_str();
  ref->add_option("--out", ref_out, "Trace JSON (default stdout)");
  ref->add_option("--templates", ref_templates, "Prompt template directory");
  ref_params.add_to(ref);
  ref_sector.add_to(ref);
  ref->callback([&] {
    run = [&] {
      const auto models = load_models_config(ref_models);
      const ProviderConfig* chosen = &models.front();
      if (!ref_model.empty()) {
        chosen = nullptr;
        for (const auto& m : models) {
          if (m.label() == ref_model) chosen = &m;
        }
        if (!chosen) throw Error(ErrorCode::invalid_input, "model " + ref_model + " not in config");
      }
      const BenchmarkParams p = ref_params.params();
      const SectorGraph g = ref_sector.load(p);
      std::unique_ptr<Transport> t;
      if (!chosen->mock_dir.empty()) t = std::make_unique<MockTransport>(chosen->mock_dir);
      else t = std::make_unique<HttpTransport>();
      LlmClient client(*chosen, *t);
      const auto trace = run_refinement(client, g, p, ref_rounds, TemplateSet::load_default(ref_templates));
      detail::emit(out, ref_out, trace_to_json(trace).dump(2) + "\n");
    };
  });

  // report
  auto* rep = app.add_subcommand("report", "Write benchmark tables, skills.csv and pareto.csv from a store");
  std::string rep_store = "results/store.jsonl", rep_out = "results";
  bool rep_compact = false;
  rep->add_option("--store", rep_store, "JSONL result store")->capture_default_str();
  rep->add_option("--out-dir", rep_out, "Directory for CSV files")->capture_default_str();
  rep->add_flag("--compact", rep_compact, "Compact the store (latest record per key, sorted) first");
  rep->callback([&] {
    run = [&] {
      ResultStore store(rep_store);
      if (!store.has_records()) throw Error(ErrorCode::empty_store, rep_store);
      if (rep_compact) store.compact();
      for (const auto& p : write_report(store, rep_out)) out << p.string() << "\n";
    };
  });

  // prompt
  auto* pr = app.add_subcommand("prompt", "Print a rendered prompt");
  std::string pr_kind = "benchmark", pr_spec, pr_existing, pr_templates;
  bool pr_3d = false;
  detail::ParamFlags pr_params;
  detail::SectorSource pr_sector;
  pr->add_option("--kind", pr_kind, "benchmark|controllability|sector")->capture_default_str();
  pr->add_option("--spec", pr_spec, "Free-text scenario specification (controllability kind)");
  pr->add_flag("--3d", pr_3d, "Include flight levels");
  pr->add_option("--existing", pr_existing, "Existing scenario JSON to modify");
  pr->add_option("--templates", pr_templates, "Prompt template directory");
  pr_params.add_to(pr);
  pr_sector.add_to(pr);
  pr->callback([&] {
    run = [&] {
      const BenchmarkParams p = pr_params.params();
      const SectorGraph g = pr_sector.load(p);
      if (pr_kind == "sector") {
        out << render_sector_text(g);
        return;
      }
      const TemplateSet templates = TemplateSet::load_default(pr_templates);
      if (pr_kind == "benchmark") {
        out << build_benchmark_prompt(g, p, templates);
      } else if (pr_kind == "controllability") {
        std::optional<Scenario> existing;
        if (!pr_existing.empty()) existing = scenario_from_json(read_json_file(pr_existing));
        const Prompt prompt = build_controllability_prompt(g, pr_spec, pr_3d, templates, p.duration, existing);
        for (const auto& w : prompt.warnings) err << "warning: " << w << "\n";
        out << prompt.text;
      } else {
        throw Error(ErrorCode::invalid_input, "unknown prompt kind " + pr_kind);
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }
  try {
    if (run) run();
    return 0;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error:io:" << e.what() << "\n";
    return 1;
  }
}

}  // namespace atg::cli
