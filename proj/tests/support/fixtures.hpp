#pragma once
// Mock-provider fixture helpers.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "atg/harness.hpp"
#include "solver.hpp"

namespace atg::testing {

inline std::string fenced_reply(const Scenario& s) {
  return "Sector analysis done; placement below.\n```json\n" + scenario_to_json(s).dump() + "\n```\n";
}

inline json ok_entry(const std::string& content, int completion_tokens = 2000) {
  return json{{"content", content}, {"completion_tokens", completion_tokens}, {"prompt_tokens", 1500}};
}

inline json truncated_entry(int completion_tokens) {
  return json{{"content", "{\"duration\": 12, \"aircraft\": [{\"id\": \"AC1\""},
              {"finish_reason", "length"},
              {"completion_tokens", completion_tokens}};
}

/// prompt hash -> scripted responses answering every benchmark cell with a
/// solved scenario.
inline std::map<std::string, std::vector<json>> perfect_scripts(const std::vector<Benchmark>& benchmarks,
                                                                std::uint64_t suite_seed, int n_sectors,
                                                                const TemplateSet& templates) {
  std::map<std::string, std::vector<json>> out;
  SuiteCache suites(suite_seed, n_sectors, {});
  for (Benchmark b : benchmarks) {
    for (const auto& p : benchmark_grid(b)) {
      const auto& sectors = suites.get(p);
      for (int i = 0; i < n_sectors; ++i) {
        const SectorGraph& g = sectors[static_cast<std::size_t>(i)];
        const auto solved = solve_scenario(g, p.aircraft, p.duration, p.target_pairs.value_or(0));
        if (!solved) {
          throw std::runtime_error("no perfect scenario for " + std::string(to_string(b)) + " p=" +
                                   std::to_string(p.parameter()) + " sector " + std::to_string(i));
        }
        out[prompt_hash(build_benchmark_prompt(g, p, templates))] = {ok_entry(fenced_reply(*solved))};
      }
    }
  }
  return out;
}

inline void write_fixture_dir(const std::filesystem::path& dir, const std::map<std::string, std::vector<json>>& scripts) {
  std::filesystem::create_directories(dir);
  for (const auto& [hash, responses] : scripts) {
    write_file_atomic(dir / (hash + ".json"), json{{"responses", responses}}.dump() + "\n");
  }
}

inline void script_all(MockTransport& mock, const std::map<std::string, std::vector<json>>& scripts) {
  for (const auto& [hash, responses] : scripts) mock.script(hash, responses);
}

}  // namespace atg::testing
