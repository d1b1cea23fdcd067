#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "atg/llm_client.hpp"
#include "fixtures.hpp"

namespace atg {
namespace {

ProviderConfig mock_config() {
  ProviderConfig c;
  c.model = "mock/model";
  c.retry_base_ms = 0;
  c.price_per_mtok = 10.0;
  return c;
}

const char* kValid = R"({"duration": 12, "aircraft": [{"id": "AC1", "spawn_time": 0, "route": "R1", "speed": 1}]})";
const char* kMissingRoute = R"({"duration": 12, "aircraft": [{"id": "AC1", "spawn_time": 0, "speed": 1}]})";

TEST(WireFormat, RequestRoundTrips) {
  ProviderConfig c = mock_config();
  c.extra_body = {{"reasoning", {{"effort", "high"}}}};
  c.send_top_k = true;
  const ChatRequest r = make_request(c, {{"user", "hi"}, {"assistant", "x"}, {"user", "again"}}, 35000);
  const auto j = request_to_json(r);
  EXPECT_EQ(j["temperature"], 1.0);
  EXPECT_EQ(j["top_p"], 1.0);
  EXPECT_EQ(j["top_k"], 0);
  EXPECT_EQ(j["max_tokens"], 35000);
  EXPECT_EQ(j["reasoning"]["effort"], "high");
  EXPECT_EQ(request_from_json(json::parse(j.dump())), r);
}

TEST(WireFormat, TopKOmittedUnlessSupported) {
  const auto j = request_to_json(make_request(mock_config(), {{"user", "hi"}}, 100));
  EXPECT_FALSE(j.contains("top_k"));
}

TEST(WireFormatProperty, RandomRequestsRoundTrip) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    CounterRng r(12, i);
    ProviderConfig c = mock_config();
    c.temperature = r.unit() * 2;
    c.top_p = r.unit();
    c.send_top_k = r.coin();
    c.top_k = static_cast<int>(r.below(50));
    std::vector<ChatMessage> msgs;
    const int n = static_cast<int>(r.between(1, 5));
    for (int k = 0; k < n; ++k) {
      std::string content;
      const int len = static_cast<int>(r.below(40));
      for (int q = 0; q < len; ++q) content += static_cast<char>(r.between(32, 126));
      msgs.push_back({k % 2 ? "assistant" : "user", content + "\n\"{}é"});
    }
    const ChatRequest req = make_request(c, msgs, static_cast<int>(r.between(1, 50000)));
    ASSERT_EQ(request_from_json(json::parse(request_to_json(req).dump())), req);
  }
}

TEST(ProviderConfig, Validation) {
  ProviderConfig c = mock_config();
  c.max_tokens = 60000;
  EXPECT_THROW(c.validate(), Error);
  c = mock_config();
  c.escalation_step = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(provider_from_json(json{{"model", "m"}, {"api_key", "sk-123"}}), Error);
  const auto p = provider_from_json(json{{"model", "m"}, {"price_per_mtok", 4.4}});
  EXPECT_EQ(p.label(), "m");
  EXPECT_EQ(p.max_tokens, 35000);
  EXPECT_EQ(p.api_key_env, "ATG_API_KEY");
  EXPECT_DOUBLE_EQ(*p.price_per_mtok, 4.4);
}

TEST(Complete, OkAndTruncated) {
  MockTransport mock;
  mock.script(prompt_hash("p1"), {json{{"content", "hello"}, {"completion_tokens", 1234}}});
  mock.script(prompt_hash("p2"), {json{{"content", "cut"}, {"finish_reason", "length"}}});
  LlmClient client(mock_config(), mock);
  const auto ok = client.complete({{"user", "p1"}}, 35000);
  EXPECT_EQ(ok.outcome, Outcome::ok);
  EXPECT_EQ(ok.text, "hello");
  EXPECT_EQ(ok.completion_tokens, 1234);
  EXPECT_DOUBLE_EQ(*ok.cost_usd, 1234 * 10.0 / 1e6);
  EXPECT_EQ(client.complete({{"user", "p2"}}, 35000).outcome, Outcome::truncated);
}

TEST(Complete, ServerErrorsRetryThreeTimes) {
  MockTransport mock;
  mock.script("default", {json{{"status", 500}}});
  LlmClient client(mock_config(), mock);
  try {
    client.complete({{"user", "x"}}, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::transport);
    EXPECT_EQ(e.detail().rfind("attempts=3", 0), 0u);
  }
  EXPECT_EQ(mock.calls(), 3u);
}

TEST(Complete, RecoversAfterRateLimit) {
  MockTransport mock;
  mock.script(prompt_hash("x"), {json{{"status", 429}}, json{{"status", 0}}, json{{"content", "fine"}}});
  LlmClient client(mock_config(), mock);
  const auto rec = client.complete({{"user", "x"}}, 100);
  EXPECT_EQ(rec.text, "fine");
  EXPECT_EQ(rec.transport_attempts, 3);
}

TEST(Complete, AuthErrorsDoNotRetry) {
  MockTransport mock;
  mock.script("default", {json{{"status", 401}}});
  LlmClient client(mock_config(), mock);
  try {
    client.complete({{"user", "x"}}, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::auth);
  }
  EXPECT_EQ(mock.calls(), 1u);
}

TEST(Complete, MissingCredentialIsAnAuthError) {
  HttpTransport http;
  ProviderConfig c = mock_config();
  c.api_key_env = "ATG_TEST_KEY_THAT_IS_NOT_SET";
  ::unsetenv(c.api_key_env.c_str());
  LlmClient client(c, http);
  try {
    client.complete({{"user", "x"}}, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::auth);
  }
}

TEST(Complete, FixtureDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "atg_llm_fixture_dir";
  std::filesystem::remove_all(dir);
  testing::write_fixture_dir(dir, {{prompt_hash("known"), {testing::ok_entry("from file")}}});
  write_file_atomic(dir / "default.json", json{{"responses", {testing::ok_entry("fallback")}}}.dump());
  MockTransport mock(dir);
  LlmClient client(mock_config(), mock);
  EXPECT_EQ(client.complete({{"user", "known"}}, 100).text, "from file");
  EXPECT_EQ(client.complete({{"user", "other"}}, 100).text, "fallback");
}

TEST(Extract, PureJson) {
  const Scenario s = extract_scenario_json(kValid);
  ASSERT_EQ(s.aircraft.size(), 1u);
  EXPECT_EQ(s.aircraft[0].route, "R1");
}

TEST(Extract, ProseAndFence) {
  const Scenario s = extract_scenario_json(std::string("Here you go:\n```json\n") + kValid + "\n```\nDone {not json}.");
  EXPECT_EQ(s.duration, 12);
}

TEST(Extract, FirstValidCandidateWins) {
  const std::string text = std::string("```json\n") + kMissingRoute + "\n```\nfixed:\n```json\n" + kValid + "\n```";
  EXPECT_EQ(extract_scenario_json(text).aircraft[0].route, "R1");
  const std::string bare = std::string(kMissingRoute) + " and then " + kValid;
  EXPECT_EQ(extract_scenario_json(bare).aircraft[0].route, "R1");
}

TEST(Extract, FencedBeatsEarlierBareJson) {
  const std::string early = R"({"duration": 5, "aircraft": []})";
  const std::string text = early + "\n```json\n" + kValid + "\n```";
  EXPECT_EQ(extract_scenario_json(text).duration, 12);
}

TEST(Extract, BracesInsideStrings) {
  const std::string text =
      R"(noise {"duration": 12, "note": "a } brace", "aircraft": [{"id": "A{1}", "spawn_time": 0, "route": "R1", "speed": 2}]})";
  EXPECT_EQ(extract_scenario_json(text).aircraft[0].id, "A{1}");
}

TEST(Extract, NoValidScenarioCarriesReasons) {
  try {
    extract_scenario_json(std::string("```json\n{broken\n```\n") + kMissingRoute);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_valid_scenario);
    EXPECT_NE(e.detail().find("candidate 1"), std::string::npos);
    EXPECT_NE(e.detail().find("route"), std::string::npos);
  }
  EXPECT_THROW(extract_scenario_json("no json here"), Error);
}

TEST(Escalation, SuccessFirstTime) {
  MockTransport mock;
  mock.script(prompt_hash("p"), {testing::ok_entry(kValid, 500)});
  LlmClient client(mock_config(), mock);
  const auto r = complete_with_escalation(client, "p");
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].max_tokens, 35000);
}

TEST(Escalation, SucceedsAtSecondBudget) {
  MockTransport mock;
  mock.script(prompt_hash("p"), {testing::truncated_entry(35000), testing::ok_entry(kValid, 41000)});
  LlmClient client(mock_config(), mock);
  const auto r = complete_with_escalation(client, "p");
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.history[0].max_tokens, 35000);
  EXPECT_EQ(r.history[1].max_tokens, 45000);
  EXPECT_EQ(r.history[0].outcome, Outcome::truncated);
  EXPECT_DOUBLE_EQ(*r.total_cost(), (35000 + 41000) * 10.0 / 1e6);
  const auto bodies = mock.requests();
  EXPECT_EQ(bodies[1]["max_tokens"], 45000);
}

TEST(Escalation, FormatErrorsEscalateToo) {
  MockTransport mock;
  mock.script(prompt_hash("p"), {testing::ok_entry("no json at all"), testing::ok_entry(kValid)});
  LlmClient client(mock_config(), mock);
  const auto r = complete_with_escalation(client, "p");
  EXPECT_EQ(r.history[0].outcome, Outcome::format_error);
  EXPECT_EQ(r.history.size(), 2u);
}

TEST(Escalation, ExhaustsAtCap) {
  MockTransport mock;
  mock.script("default", {testing::truncated_entry(1)});
  LlmClient client(mock_config(), mock);
  try {
    complete_with_escalation(client, "p");
    FAIL();
  } catch (const BudgetExhausted& e) {
    std::vector<int> budgets;
    for (const auto& h : e.history()) budgets.push_back(h.max_tokens);
    EXPECT_EQ(budgets, (std::vector<int>{35000, 45000, 50000}));
    EXPECT_STREQ(e.what(), "error:budget-exhausted:cap=50000,budgets=35000/45000/50000");
  }
}

TEST(Gate, BoundsConcurrency) {
  RequestGate gate(2);
  std::atomic<int> active{0}, peak{0};
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) {
    ts.emplace_back([&] {
      gate.acquire();
      const int now = ++active;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
      gate.release();
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_LE(peak.load(), 2);
}

}  // namespace
}  // namespace atg
