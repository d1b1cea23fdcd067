#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "atg/baseline.hpp"
#include "atg/core_model.hpp"
#include "atg/error.hpp"
#include "atg/io_util.hpp"
#include "atg/json_io.hpp"
#include "atg/llm_client.hpp"
#include "atg/metrics.hpp"
#include "atg/prompting.hpp"
#include "atg/rollout.hpp"
#include "atg/synthetic_sectors.hpp"

namespace atg {

// ------------------------------------------------------------ store

/// Append-only JSONL. Every record has "type" and "key"; on load the last
/// record for a key wins. A torn final line (crash mid-append) is ignored.
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const { return path_; }

  bool has_records() const {
    std::error_code ec;
    return std::filesystem::exists(path_, ec) && std::filesystem::file_size(path_, ec) > 0;
  }

  std::vector<json> load() const {
    std::vector<json> out;
    if (!std::filesystem::exists(path_)) return out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot read store " + path_.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) lines.push_back(std::move(line));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      json j = json::parse(lines[i], nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("type") || !j.contains("key")) {
        if (i + 1 == lines.size()) break;
        throw Error(ErrorCode::schema, "store line " + std::to_string(i + 1) + " is malformed");
      }
      out.push_back(std::move(j));
    }
    return out;
  }

  std::map<std::string, json> latest() const {
    std::map<std::string, json> out;
    for (auto& r : load()) out[r["key"].get<std::string>()] = r;
    return out;
  }

  void append(const ordered_json& record) {
    std::lock_guard lock(mu_);
    if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << record.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::io, "cannot append to store " + path_.string());
  }

  /// Rewrites the store keeping the latest record per key, sorted by key.
  void compact() {
    std::lock_guard lock(mu_);
    std::string text;
    for (const auto& [key, rec] : latest()) text += ordered_json(rec).dump() + "\n";
    write_file_atomic(path_, text);
  }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

// ------------------------------------------------------------ cells

enum class CellStatus { ok, invalid, failed };

inline std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok: return "ok";
    case CellStatus::invalid: return "invalid";
    case CellStatus::failed: return "failed";
  }
  return "failed";
}

struct BenchmarkCell {
  std::string model;
  BenchmarkParams params;
  int sector = 0;
  std::string prompt_hash;
  CellStatus status = CellStatus::failed;
  std::string error;  // error code for failed cells, first violated rule for invalid ones
  int pairs = 0;
  double metric = 0.0;  // pairs, or |pairs - k| for controllability
  int completion_tokens = 0;
  std::optional<double> cost_usd;
  std::vector<int> budgets;
  std::optional<Scenario> scenario;

  std::string key() const {
    return "cell|" + model + "|" + std::string(to_string(params.benchmark)) + "|" +
           std::to_string(params.parameter()) + "|" + std::to_string(sector) + "|" + prompt_hash;
  }
};

inline ordered_json cell_to_json(const BenchmarkCell& c) {
  ordered_json j;
  j["type"] = "cell";
  j["key"] = c.key();
  j["model"] = c.model;
  j["benchmark"] = std::string(to_string(c.params.benchmark));
  j["parameter"] = c.params.parameter();
  j["sector"] = c.sector;
  j["prompt_hash"] = c.prompt_hash;
  j["status"] = std::string(to_string(c.status));
  j["error"] = c.error;
  j["pairs"] = c.pairs;
  j["metric"] = number_json(c.metric);
  j["completion_tokens"] = c.completion_tokens;
  j["cost_usd"] = c.cost_usd ? ordered_json(*c.cost_usd) : ordered_json(nullptr);
  j["budgets"] = c.budgets;
  j["scenario"] = c.scenario ? scenario_to_json(*c.scenario) : ordered_json(nullptr);
  return j;
}

inline std::string baseline_key(Benchmark b, int parameter) {
  return "baseline|" + std::string(to_string(b)) + "|" + std::to_string(parameter);
}

inline ordered_json baseline_to_json(Benchmark b, int parameter, const BaselineEstimate& e) {
  ordered_json j;
  j["type"] = "baseline";
  j["key"] = baseline_key(b, parameter);
  j["benchmark"] = std::string(to_string(b));
  j["parameter"] = parameter;
  j["mean"] = e.mean;
  j["stderr"] = e.stderr_;
  j["samples"] = e.samples;
  return j;
}

inline ordered_json model_to_json(const ProviderConfig& c) {
  ordered_json j;
  j["type"] = "model";
  j["key"] = "model|" + c.label();
  j["model"] = c.label();
  j["price_per_mtok"] = c.price_per_mtok ? ordered_json(*c.price_per_mtok) : ordered_json(nullptr);
  return j;
}

/// Scores one generated scenario against its cell. Scenarios breaking a
/// record rule (count, duration, unknown route, ...) are invalid; spawn-grace
/// breaches are interactions and count as pairs.
inline void score_cell(BenchmarkCell& cell, const Scenario& s, const SectorGraph& g, const RolloutConfig& cfg = {}) {
  const ValidationReport report = validate_scenario(s, g, cell.params, cfg);
  cell.scenario = s;
  if (!report.violations.empty()) {
    cell.status = CellStatus::invalid;
    cell.error = report.violations.front().rule;
    return;
  }
  cell.pairs = static_cast<int>(unique_pairs(detect_interactions(s, g, cfg)).size());
  cell.metric = cell.params.benchmark == Benchmark::controllability
                    ? std::abs(cell.pairs - cell.params.target_pairs.value_or(0))
                    : cell.pairs;
  cell.status = CellStatus::ok;
}

// ------------------------------------------------------------ run_benchmark

struct BenchOptions {
  std::vector<Benchmark> benchmarks;
  std::vector<ProviderConfig> models;
  std::uint64_t suite_seed = 0;
  std::filesystem::path store;
  bool resume = false;
  int max_inflight = 4;
  int n_sectors = 10;
  int baseline_samples = 500;
  std::optional<std::size_t> limit;  // stop after this many provider-backed cells
  GridSize grid{};
  RolloutConfig rollout{};
};

struct BenchSummary {
  std::size_t cells_run = 0;
  std::size_t cells_skipped = 0;
  std::size_t cells_ok = 0;
  std::size_t cells_invalid = 0;
  std::size_t cells_failed = 0;
  std::size_t baselines_computed = 0;
};

/// Sector suites are shared by every parameter point with the same
/// (routes, intersections) target.
class SuiteCache {
 public:
  SuiteCache(std::uint64_t seed, int n, GridSize grid) : seed_(seed), n_(n), grid_(grid) {}

  const std::vector<SectorGraph>& get(const BenchmarkParams& p) {
    const auto key = std::make_pair(p.n_routes, p.n_intersections);
    auto it = suites_.find(key);
    if (it == suites_.end()) {
      it = suites_.emplace(key, generate_suite(seed_, static_cast<std::size_t>(n_), sector_params_for(p, grid_))).first;
    }
    return it->second;
  }

 private:
  std::uint64_t seed_;
  int n_;
  GridSize grid_;
  std::map<std::pair<int, int>, std::vector<SectorGraph>> suites_;
};

/// Transports by model label; models without an entry get a MockTransport
/// (mock_dir set) or an HttpTransport.
using TransportMap = std::map<std::string, Transport*>;

inline BenchSummary run_benchmark(const BenchOptions& opt, const TemplateSet& templates,
                                  const TransportMap& injected = {}) {
  if (opt.models.empty()) throw Error(ErrorCode::empty_input, "no models configured");
  if (opt.benchmarks.empty()) throw Error(ErrorCode::empty_input, "no benchmarks selected");
  if (opt.n_sectors < 1) throw Error(ErrorCode::invalid_input, "n_sectors must be >= 1");
  ResultStore store(opt.store);
  if (store.has_records() && !opt.resume) {
    throw Error(ErrorCode::store_exists, opt.store.string());
  }
  const auto existing = store.latest();
  BenchSummary summary;

  std::vector<std::unique_ptr<Transport>> owned;
  std::map<std::string, std::unique_ptr<LlmClient>> clients;
  for (const auto& m : opt.models) {
    Transport* t = nullptr;
    if (auto it = injected.find(m.label()); it != injected.end()) {
      t = it->second;
    } else if (!m.mock_dir.empty()) {
      owned.push_back(std::make_unique<MockTransport>(m.mock_dir));
      t = owned.back().get();
    } else {
      owned.push_back(std::make_unique<HttpTransport>());
      t = owned.back().get();
    }
    ProviderConfig cfg = m;
    cfg.max_inflight = std::min(cfg.max_inflight, std::max(1, opt.max_inflight));
    clients[m.label()] = std::make_unique<LlmClient>(cfg, *t);
    const auto rec = model_to_json(m);
    auto prev = existing.find(rec["key"].get<std::string>());
    if (prev == existing.end() || json::parse(rec.dump()) != prev->second) store.append(rec);
  }

  SuiteCache suites(opt.suite_seed, opt.n_sectors, opt.grid);
  struct Task {
    const ProviderConfig* model;
    BenchmarkParams params;
    int sector;
    std::string prompt;
    std::string hash;
  };
  std::vector<Task> tasks;
  for (Benchmark b : opt.benchmarks) {
    for (const auto& params : benchmark_grid(b)) {
      const auto& sectors = suites.get(params);
      const std::string bkey = baseline_key(b, params.parameter());
      if (!existing.count(bkey)) {
        BaselineOptions bo;
        bo.samples = opt.baseline_samples;
        bo.seed = derive_seed(opt.suite_seed, static_cast<std::uint64_t>(params.parameter()) * 16u +
                                                  static_cast<std::uint64_t>(b));
        store.append(baseline_to_json(b, params.parameter(), estimate_baseline(sectors, params, bo)));
        ++summary.baselines_computed;
      }
      for (const auto& m : opt.models) {
        for (int i = 0; i < opt.n_sectors; ++i) {
          Task t{&m, params, i, build_benchmark_prompt(sectors[static_cast<std::size_t>(i)], params, templates), ""};
          t.hash = prompt_hash(t.prompt);
          BenchmarkCell probe{m.label(), params, i, t.hash};
          auto prev = existing.find(probe.key());
          if (prev != existing.end() && prev->second.value("status", "") == "ok") {
            ++summary.cells_skipped;
            continue;
          }
          tasks.push_back(std::move(t));
        }
      }
    }
  }
  if (opt.limit && tasks.size() > *opt.limit) tasks.resize(*opt.limit);

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr fatal;
  auto worker = [&] {
    for (;;) {
      {
        std::lock_guard lock(mu);
        if (fatal) return;
      }
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      const Task& t = tasks[idx];
      const SectorGraph& g = suites.get(t.params)[static_cast<std::size_t>(t.sector)];
      BenchmarkCell cell{t.model->label(), t.params, t.sector, t.hash};
      try {
        GenerationResult gen = complete_with_escalation(*clients.at(t.model->label()), t.prompt);
        for (const auto& r : gen.history) {
          cell.budgets.push_back(r.max_tokens);
          cell.completion_tokens += r.completion_tokens;
        }
        cell.cost_usd = gen.total_cost();
        score_cell(cell, gen.scenario, g, opt.rollout);
      } catch (const BudgetExhausted& e) {
        cell.status = CellStatus::failed;
        cell.error = std::string(to_string(e.code()));
        for (const auto& r : e.history()) {
          cell.budgets.push_back(r.max_tokens);
          cell.completion_tokens += r.completion_tokens;
        }
      } catch (const Error& e) {
        cell.status = CellStatus::failed;
        cell.error = std::string(to_string(e.code()));
      }
      try {
        store.append(cell_to_json(cell));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!fatal) fatal = std::current_exception();
        return;
      }
      std::lock_guard lock(mu);
      ++summary.cells_run;
      if (cell.status == CellStatus::ok) ++summary.cells_ok;
      if (cell.status == CellStatus::invalid) ++summary.cells_invalid;
      if (cell.status == CellStatus::failed) ++summary.cells_failed;
    }
  };
  const int n_workers = std::clamp(opt.max_inflight, 1, 64);
  std::vector<std::thread> pool;
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

// ------------------------------------------------------------ refinement

struct RefinementRound {
  int pairs = 0;
  bool valid = false;
  bool satisfied = false;
  std::optional<Scenario> scenario;
  std::string feedback;  // sent after this round, empty on the last
};

struct RefinementTrace {
  std::vector<RefinementRound> rounds;
  std::string status;  // resolved | unresolved | failed
  std::string error;

  std::vector<int> pair_counts() const {
    std::vector<int> out;
    for (const auto& r : rounds) out.push_back(r.pairs);
    return out;
  }
};

inline ordered_json trace_to_json(const RefinementTrace& t) {
  ordered_json j;
  j["status"] = t.status;
  if (!t.error.empty()) j["error"] = t.error;
  j["pair_counts"] = t.pair_counts();
  j["rounds"] = ordered_json::array();
  for (std::size_t i = 0; i < t.rounds.size(); ++i) {
    const auto& r = t.rounds[i];
    ordered_json rj;
    rj["round"] = i;
    rj["pairs"] = r.pairs;
    rj["valid"] = r.valid;
    rj["satisfied"] = r.satisfied;
    rj["scenario"] = r.scenario ? scenario_to_json(*r.scenario) : ordered_json(nullptr);
    rj["feedback"] = r.feedback;
    j["rounds"].push_back(std::move(rj));
  }
  return j;
}

/// Round 0 is plain generation; each later round replays the conversation
/// with the verifier's feedback appended.
inline RefinementTrace run_refinement(LlmClient& client, const SectorGraph& g, const BenchmarkParams& params,
                                      int max_rounds, const TemplateSet& templates, const RolloutConfig& cfg = {}) {
  if (max_rounds < 1) throw Error(ErrorCode::invalid_input, "max_rounds must be >= 1");
  RefinementTrace trace;
  std::vector<ChatMessage> conversation{{"user", build_benchmark_prompt(g, params, templates, cfg)}};
  for (int round = 0; round <= max_rounds; ++round) {
    GenerationResult gen;
    try {
      gen = complete_with_escalation(client, conversation);
    } catch (const Error& e) {
      trace.status = "failed";
      trace.error = std::string(to_string(e.code()));
      return trace;
    }
    RefinementRound r;
    const auto events = detect_interactions(gen.scenario, g, cfg);
    const ValidationReport report = validate_scenario(gen.scenario, g, params, cfg);
    r.pairs = static_cast<int>(unique_pairs(events).size());
    r.valid = report.valid();
    r.scenario = gen.scenario;
    const bool pair_goal = params.benchmark == Benchmark::controllability
                               ? r.pairs == params.target_pairs.value_or(0)
                               : r.pairs == 0;
    r.satisfied = pair_goal && r.valid;
    if (r.satisfied || round == max_rounds) {
      trace.rounds.push_back(std::move(r));
      trace.status = trace.rounds.back().satisfied ? "resolved" : "unresolved";
      return trace;
    }
    FeedbackInput fb;
    if (!pair_goal) fb.events = events;
    fb.report = report;
    fb.scenario = &*r.scenario;
    fb.requirement = requirement_text(params);
    fb.attempt = round + 1;
    fb.grace_steps = cfg.grace_steps;
    r.feedback = build_feedback(fb, templates);
    conversation.push_back({"assistant", gen.history.back().text});
    conversation.push_back({"user", r.feedback});
    trace.rounds.push_back(std::move(r));
  }
  trace.status = "unresolved";
  return trace;
}

// ------------------------------------------------------------ report

struct ReportFiles {
  std::map<std::string, std::string> files;  // file name -> content
};

namespace detail {

inline std::string csv_cell(const std::optional<double>& v) { return v ? format_fixed(*v, 3) : std::string(); }

struct AxisData {
  std::set<int> params;
  std::map<std::string, std::map<int, std::vector<double>>> values;  // model -> param -> ok metrics
  std::map<std::string, int> not_ok;                                 // model -> failed/invalid count
  std::map<int, double> random;
};

}  // namespace detail

/// Derives every report file from the store alone: one table per benchmark
/// present, skills.csv and pareto.csv.
inline ReportFiles build_report(const ResultStore& store) {
  const auto records = store.latest();
  std::map<Benchmark, detail::AxisData> axes;
  std::set<std::string, NaturalLess> models;
  std::map<std::string, std::optional<double>> prices;
  bool any_cell = false;
  for (const auto& [key, r] : records) {
    const std::string type = r.value("type", "");
    if (type == "model") {
      prices[r["model"].get<std::string>()] =
          r["price_per_mtok"].is_null() ? std::nullopt : std::optional<double>(r["price_per_mtok"].get<double>());
      continue;
    }
    if (type != "cell" && type != "baseline") continue;
    const Benchmark b = benchmark_from_string(r["benchmark"].get<std::string>());
    auto& ax = axes[b];
    const int p = r["parameter"].get<int>();
    ax.params.insert(p);
    if (type == "baseline") {
      ax.random[p] = r["mean"].get<double>();
      continue;
    }
    any_cell = true;
    const std::string m = r["model"].get<std::string>();
    models.insert(m);
    auto& slot = ax.values[m][p];
    if (r["status"] == "ok") {
      slot.push_back(r["metric"].get<double>());
    } else {
      ++ax.not_ok[m];
    }
  }
  if (!any_cell) throw Error(ErrorCode::empty_store, store.path().string());

  auto mean_of = [](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };

  ReportFiles out;
  std::map<std::string, SkillScores> skills;
  for (const auto& m : models) skills[m].model = m;
  for (const auto& [b, ax] : axes) {
    std::string csv = "model";
    for (int p : ax.params) csv += "," + std::to_string(p);
    csv += ",failed\n";
    for (const auto& m : models) {
      auto vit = ax.values.find(m);
      if (vit == ax.values.end()) continue;
      csv += m;
      std::vector<double> mu;
      for (int p : ax.params) {
        std::optional<double> v;
        if (auto pit = vit->second.find(p); pit != vit->second.end()) v = mean_of(pit->second);
        csv += "," + detail::csv_cell(v);
        auto rit = ax.random.find(p);
        if (v && rit != ax.random.end() && rit->second > 0) mu.push_back(normalized_skill(*v, rit->second));
      }
      auto nit = ax.not_ok.find(m);
      csv += "," + std::to_string(nit == ax.not_ok.end() ? 0 : nit->second) + "\n";
      if (!mu.empty()) {
        double s = 0;
        for (double x : mu) s += x;
        const double axis_mu = s / static_cast<double>(mu.size());
        switch (b) {
          case Benchmark::traffic_volume: skills[m].mu1 = axis_mu; break;
          case Benchmark::scenario_length: skills[m].mu2 = axis_mu; break;
          case Benchmark::sector_complexity: skills[m].mu3 = axis_mu; break;
          case Benchmark::controllability: skills[m].mu4 = axis_mu; break;
        }
      }
    }
    if (!ax.random.empty()) {
      csv += "random";
      for (int p : ax.params) {
        auto rit = ax.random.find(p);
        csv += "," + detail::csv_cell(rit == ax.random.end() ? std::nullopt : std::optional<double>(rit->second));
      }
      csv += ",\n";
    }
    out.files["table_" + std::string(to_string(b)) + ".csv"] = csv;
  }

  std::string sk = "model,mu1,mu2,mu3,mu4,skill_sum,cost_usd_per_mtok\n";
  std::vector<ParetoPoint> points;
  for (auto& [m, s] : skills) {
    if (auto pit = prices.find(m); pit != prices.end()) s.cost_usd_per_mtok = pit->second;
    sk += m + "," + detail::csv_cell(s.mu1) + "," + detail::csv_cell(s.mu2) + "," + detail::csv_cell(s.mu3) + "," +
          detail::csv_cell(s.mu4) + "," + format_fixed(s.skill_sum(), 3) + "," +
          detail::csv_cell(s.cost_usd_per_mtok) + "\n";
    if (s.cost_usd_per_mtok) points.push_back({m, *s.cost_usd_per_mtok, s.skill_sum()});
  }
  out.files["skills.csv"] = sk;
  std::string pa = "model,cost_usd_per_mtok,skill_sum\n";
  for (const auto& p : pareto_frontier(points)) pa += p.label + "," + format_fixed(p.cost, 3) + "," + format_fixed(p.skill, 3) + "\n";
  out.files["pareto.csv"] = pa;
  return out;
}

inline std::vector<std::filesystem::path> write_report(const ResultStore& store, const std::filesystem::path& out_dir) {
  const ReportFiles r = build_report(store);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : r.files) {
    write_file_atomic(out_dir / name, content);
    written.push_back(out_dir / name);
  }
  return written;
}

}  // namespace atg
