#pragma once

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "atg/error.hpp"
#include "atg/io_util.hpp"
#include "atg/json_io.hpp"

namespace atg {

struct ProviderConfig {
  std::string name;  // label in stores and tables; defaults to model
  std::string endpoint = "https://openrouter.ai/api/v1/chat/completions";
  std::string model;
  double temperature = 1.0;
  double top_p = 1.0;
  int top_k = 0;
  bool send_top_k = false;  // only some endpoints accept top_k
  int max_tokens = 35000;
  int escalation_step = 10000;
  int escalation_cap = 50000;
  std::optional<double> price_per_mtok;  // USD per million output tokens
  std::string api_key_env = "ATG_API_KEY";
  json extra_body = json::object();  // passed through verbatim (reasoning effort etc.)
  int max_inflight = 4;
  int retry_base_ms = 1000;
  int timeout_s = 900;
  std::string mock_dir;  // non-empty: serve from fixtures instead of HTTP

  const std::string& label() const { return name.empty() ? model : name; }

  void validate() const {
    if (model.empty()) throw Error(ErrorCode::invalid_input, "provider model id is empty");
    if (max_tokens <= 0 || max_tokens > escalation_cap) {
      throw Error(ErrorCode::invalid_input, "need 0 < max_tokens <= escalation_cap");
    }
    if (escalation_step <= 0) throw Error(ErrorCode::invalid_input, "escalation_step must be > 0");
    if (max_inflight < 1) throw Error(ErrorCode::invalid_input, "max_inflight must be >= 1");
    if (!extra_body.is_object()) throw Error(ErrorCode::invalid_input, "extra_body must be an object");
  }
};

inline ProviderConfig provider_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::schema, "provider entry must be an object");
  for (const char* forbidden : {"api_key", "key", "token", "secret"}) {
    if (j.contains(forbidden)) {
      throw Error(ErrorCode::schema, std::string("credentials are not accepted in config files (\"") + forbidden +
                                         "\"); set api_key_env instead");
    }
  }
  ProviderConfig c;
  try {
    c.model = j.at("model").get<std::string>();
    c.name = j.value("name", c.model);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.temperature = j.value("temperature", c.temperature);
    c.top_p = j.value("top_p", c.top_p);
    c.top_k = j.value("top_k", c.top_k);
    c.send_top_k = j.value("send_top_k", c.send_top_k);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.escalation_step = j.value("escalation_step", c.escalation_step);
    c.escalation_cap = j.value("escalation_cap", c.escalation_cap);
    if (j.contains("price_per_mtok") && !j["price_per_mtok"].is_null()) c.price_per_mtok = j["price_per_mtok"].get<double>();
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    if (j.contains("extra_body")) c.extra_body = j["extra_body"];
    c.max_inflight = j.value("max_inflight", c.max_inflight);
    c.retry_base_ms = j.value("retry_base_ms", c.retry_base_ms);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.mock_dir = j.value("mock_dir", c.mock_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("provider config: ") + e.what());
  }
  c.validate();
  return c;
}

/// `{"models": [ProviderConfig...]}`; relative mock_dir paths resolve against
/// the config file's directory.
inline std::vector<ProviderConfig> load_models_config(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.is_object() || !j.contains("models") || !j["models"].is_array()) {
    throw Error(ErrorCode::schema, "models config needs a \"models\" array");
  }
  std::vector<ProviderConfig> out;
  for (const auto& m : j["models"]) {
    ProviderConfig c = provider_from_json(m);
    if (!c.mock_dir.empty() && std::filesystem::path(c.mock_dir).is_relative()) {
      c.mock_dir = (path.parent_path() / c.mock_dir).string();
    }
    out.push_back(std::move(c));
  }
  if (out.empty()) throw Error(ErrorCode::empty_input, "models config lists no models");
  return out;
}

// ------------------------------------------------------------ wire format

struct ChatMessage {
  std::string role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  int max_tokens = 0;
  json extra = json::object();

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

inline ChatRequest make_request(const ProviderConfig& cfg, std::vector<ChatMessage> messages, int max_tokens) {
  ChatRequest r;
  r.model = cfg.model;
  r.messages = std::move(messages);
  r.temperature = cfg.temperature;
  r.top_p = cfg.top_p;
  if (cfg.send_top_k) r.top_k = cfg.top_k;
  r.max_tokens = max_tokens;
  r.extra = cfg.extra_body;
  return r;
}

inline ordered_json request_to_json(const ChatRequest& r) {
  ordered_json j;
  j["model"] = r.model;
  j["messages"] = ordered_json::array();
  for (const auto& m : r.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  j["temperature"] = r.temperature;
  j["top_p"] = r.top_p;
  if (r.top_k) j["top_k"] = *r.top_k;
  j["max_tokens"] = r.max_tokens;
  for (const auto& [k, v] : r.extra.items()) {
    if (!j.contains(k)) j[k] = v;
  }
  return j;
}

inline ChatRequest request_from_json(const json& j) {
  static const std::set<std::string> core{"model", "messages", "temperature", "top_p", "top_k", "max_tokens"};
  ChatRequest r;
  try {
    r.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) r.messages.push_back({m.at("role"), m.at("content")});
    r.temperature = j.at("temperature").get<double>();
    r.top_p = j.at("top_p").get<double>();
    if (j.contains("top_k")) r.top_k = j["top_k"].get<int>();
    r.max_tokens = j.at("max_tokens").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("chat request: ") + e.what());
  }
  for (const auto& [k, v] : j.items()) {
    if (!core.count(k)) r.extra[k] = v;
  }
  return r;
}

// ------------------------------------------------------------ transports

struct HttpResponse {
  int status = 0;  // 0 = no response (connection failure)
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const ProviderConfig& cfg, const std::string& body, const std::string& api_key) = 0;
  virtual bool needs_credentials() const { return true; }
};

class HttpTransport : public Transport {
 public:
  HttpResponse post(const ProviderConfig& cfg, const std::string& body, const std::string& api_key) override {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(cfg.endpoint, m, url)) {
      throw Error(ErrorCode::invalid_input, "bad endpoint URL " + cfg.endpoint);
    }
    httplib::Client client(m[1].str());
    client.set_connection_timeout(30);
    client.set_read_timeout(cfg.timeout_s);
    client.set_write_timeout(60);
    const std::string path = m[2].matched ? m[2].str() : "/";
    httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }
};

/// Serves canned chat-completion responses. Fixtures are looked up by the
/// hash of the last user message: `<hash>.json`, else `default.json`. A
/// fixture is `{"responses": [entry...]}` played in order (the last entry
/// repeats). Entry fields: status (200), content, finish_reason ("stop"),
/// prompt_tokens, completion_tokens, error.
class MockTransport : public Transport {
 public:
  MockTransport() = default;
  explicit MockTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void script(const std::string& key, std::vector<json> responses) {
    std::lock_guard lock(mu_);
    scripts_[key] = std::move(responses);
  }

  HttpResponse post(const ProviderConfig&, const std::string& body, const std::string&) override {
    const json req = json::parse(body);
    std::string last_user;
    for (const auto& m : req["messages"]) {
      if (m["role"] == "user") last_user = m["content"].get<std::string>();
    }
    const std::string key = fnv1a_hex(last_user);
    std::lock_guard lock(mu_);
    ++calls_;
    requests_.push_back(req);
    const std::vector<json>* seq = find_script(key);
    if (!seq || seq->empty()) return {404, R"({"error":"no fixture"})", "no fixture for " + key};
    std::size_t& cursor = cursors_[key];
    const json& e = (*seq)[std::min(cursor, seq->size() - 1)];
    ++cursor;
    const int status = e.value("status", 200);
    if (status == 0) return {0, "", e.value("error", "connection refused")};
    if (status != 200) return {status, e.value("error", "mock error"), ""};
    ordered_json resp;
    resp["id"] = "mock-" + key + "-" + std::to_string(cursor);
    resp["model"] = req.value("model", "");
    resp["choices"] = ordered_json::array({ordered_json{
        {"index", 0},
        {"message", {{"role", "assistant"}, {"content", e.value("content", "")}}},
        {"finish_reason", e.value("finish_reason", "stop")}}});
    resp["usage"] = {{"prompt_tokens", e.value("prompt_tokens", 1000)},
                     {"completion_tokens", e.value("completion_tokens", 2000)}};
    return {200, resp.dump(), ""};
  }

  bool needs_credentials() const override { return false; }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::vector<json> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  const std::vector<json>* find_script(const std::string& key) {
    // The cursor stays per prompt key even when default.json answers.
    for (const std::string& name : {key, std::string("default")}) {
      if (auto it = scripts_.find(name); it != scripts_.end()) return &it->second;
      if (dir_.empty()) continue;
      const auto path = dir_ / (name + ".json");
      if (!std::filesystem::exists(path)) continue;
      const json j = read_json_file(path);
      if (!j.contains("responses") || !j["responses"].is_array()) {
        throw Error(ErrorCode::schema, "fixture " + path.string() + " needs a \"responses\" array");
      }
      auto& slot = scripts_[name];
      slot = j["responses"].get<std::vector<json>>();
      return &slot;
    }
    return nullptr;
  }

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<json>> scripts_;
  std::map<std::string, std::size_t> cursors_;
  std::vector<json> requests_;
  std::size_t calls_ = 0;
};

// ------------------------------------------------------------ client

enum class Outcome { ok, truncated, format_error, transport_error };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::ok: return "ok";
    case Outcome::truncated: return "truncated";
    case Outcome::format_error: return "format_error";
    case Outcome::transport_error: return "transport_error";
  }
  return "ok";
}

struct CompletionRecord {
  std::string request_id;
  std::string prompt_hash;
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::optional<double> cost_usd;
  int attempt = 0;  // escalation attempt index
  int max_tokens = 0;
  int transport_attempts = 1;
  Outcome outcome = Outcome::ok;
};

inline ordered_json record_to_json(const CompletionRecord& r) {
  ordered_json j;
  j["request_id"] = r.request_id;
  j["prompt_hash"] = r.prompt_hash;
  j["attempt"] = r.attempt;
  j["max_tokens"] = r.max_tokens;
  j["outcome"] = std::string(to_string(r.outcome));
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  j["cost_usd"] = r.cost_usd ? ordered_json(*r.cost_usd) : ordered_json(nullptr);
  j["text"] = r.text;
  return j;
}

inline std::string prompt_hash(const std::string& prompt) { return fnv1a_hex(prompt); }

/// Bounds concurrent requests and shares 429 back-off across workers.
class RequestGate {
 public:
  explicit RequestGate(int limit) : limit_(limit < 1 ? 1 : limit) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
    const auto until = cooldown_until_;
    lock.unlock();
    std::this_thread::sleep_until(until);
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    cv_.notify_one();
  }
  void cool_down(std::chrono::milliseconds d) {
    std::lock_guard lock(mu_);
    cooldown_until_ = std::max(cooldown_until_, std::chrono::steady_clock::now() + d);
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
  std::chrono::steady_clock::time_point cooldown_until_{};
};

class LlmClient {
 public:
  LlmClient(ProviderConfig cfg, Transport& transport)
      : cfg_(std::move(cfg)), transport_(transport), gate_(cfg_.max_inflight) {
    cfg_.validate();
  }

  const ProviderConfig& config() const { return cfg_; }

  /// One chat round-trip with transport retries (3 attempts, exponential
  /// back-off on connection failures, 429 and 5xx).
  CompletionRecord complete(const std::vector<ChatMessage>& messages, int max_tokens, int attempt_index = 0) {
    std::string key;
    if (transport_.needs_credentials()) {
      const char* v = std::getenv(cfg_.api_key_env.c_str());
      if (!v || !*v) throw Error(ErrorCode::auth, "environment variable " + cfg_.api_key_env + " is not set");
      key = v;
    }
    const std::string body = request_to_json(make_request(cfg_, messages, max_tokens)).dump();
    CompletionRecord rec;
    rec.prompt_hash = prompt_hash(messages.empty() ? std::string() : messages.back().content);
    rec.attempt = attempt_index;
    rec.max_tokens = max_tokens;
    std::string last_error;
    constexpr int kAttempts = 3;
    for (int i = 0; i < kAttempts; ++i) {
      rec.transport_attempts = i + 1;
      gate_.acquire();
      HttpResponse res;
      try {
        res = transport_.post(cfg_, body, key);
      } catch (...) {
        gate_.release();
        throw;
      }
      gate_.release();
      if (res.status == 401 || res.status == 403) {
        throw Error(ErrorCode::auth, "HTTP " + std::to_string(res.status) + " from " + cfg_.label());
      }
      const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
      if (res.status == 200) return finish(rec, res.body);
      last_error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
      if (!retryable) break;
      if (i + 1 < kAttempts) {
        const auto delay = std::chrono::milliseconds(static_cast<long long>(cfg_.retry_base_ms) << i);
        if (res.status == 429) gate_.cool_down(delay);
        std::this_thread::sleep_for(delay);
      }
    }
    throw Error(ErrorCode::transport, "attempts=" + std::to_string(rec.transport_attempts) + "," + last_error);
  }

 private:
  CompletionRecord finish(CompletionRecord rec, const std::string& body) {
    json j;
    try {
      j = json::parse(body);
      const auto& choice = j.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      rec.text = content.is_string() ? content.get<std::string>() : std::string();
      const std::string finish = choice.value("finish_reason", std::string("stop"));
      rec.outcome = finish == "length" ? Outcome::truncated : Outcome::ok;
      if (j.contains("usage") && j["usage"].is_object()) {
        rec.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        rec.completion_tokens = j["usage"].value("completion_tokens", 0);
      }
      rec.request_id = j.value("id", rec.prompt_hash + "-" + std::to_string(rec.attempt));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::transport, std::string("malformed completion body: ") + e.what());
    }
    if (cfg_.price_per_mtok) rec.cost_usd = rec.completion_tokens * *cfg_.price_per_mtok / 1e6;
    return rec;
  }

  ProviderConfig cfg_;
  Transport& transport_;
  RequestGate gate_;
};

// ------------------------------------------------------------ extraction

/// Candidate JSON texts in scan order: fenced blocks first, then top-level
/// brace-balanced spans.
inline std::vector<std::string> json_candidates(const std::string& text) {
  std::vector<std::string> out;
  static const std::regex fence(R"(```[A-Za-z0-9_-]*[ \t]*\r?\n([\s\S]*?)```)");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), fence); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].str());
  }
  std::size_t i = 0;
  while ((i = text.find('{', i)) != std::string::npos) {
    int depth = 0;
    bool in_str = false, esc = false;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (in_str) {
        if (esc) esc = false;
        else if (c == '\\') esc = true;
        else if (c == '"') in_str = false;
      } else if (c == '"') {
        in_str = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        break;
      }
    }
    if (j >= text.size()) {
      ++i;
      continue;
    }
    out.push_back(text.substr(i, j - i + 1));
    i = j + 1;
  }
  return out;
}

struct Extraction {
  std::optional<Scenario> scenario;
  std::vector<std::string> reasons;  // one per rejected candidate
};

inline Extraction try_extract_scenario(const std::string& text) {
  Extraction ex;
  std::size_t k = 0;
  for (const auto& cand : json_candidates(text)) {
    ++k;
    const json j = json::parse(cand, nullptr, false);
    if (j.is_discarded()) {
      ex.reasons.push_back("candidate " + std::to_string(k) + ": not valid JSON");
      continue;
    }
    ScenarioParse p = parse_scenario(j);
    if (p.ok()) {
      ex.scenario = std::move(p.scenario);
      return ex;
    }
    std::string why = "candidate " + std::to_string(k) + ": ";
    for (std::size_t n = 0; n < p.issues.size(); ++n) {
      if (n) why += "; ";
      why += (p.issues[n].aircraft_id.empty() ? "" : p.issues[n].aircraft_id + " ") + p.issues[n].detail;
    }
    ex.reasons.push_back(why);
  }
  if (k == 0) ex.reasons.push_back("no JSON candidate found");
  return ex;
}

/// First candidate that parses and satisfies the scenario schema.
inline Scenario extract_scenario_json(const std::string& text) {
  Extraction ex = try_extract_scenario(text);
  if (ex.scenario) return std::move(*ex.scenario);
  std::string msg;
  for (const auto& r : ex.reasons) msg += (msg.empty() ? "" : " | ") + r;
  throw Error(ErrorCode::no_valid_scenario, msg);
}

// ------------------------------------------------------------ escalation

struct GenerationResult {
  Scenario scenario;
  std::vector<CompletionRecord> history;
  std::optional<double> total_cost() const {
    std::optional<double> sum;
    for (const auto& r : history) {
      if (r.cost_usd) sum = sum.value_or(0.0) + *r.cost_usd;
    }
    return sum;
  }
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(int cap, std::vector<CompletionRecord> history)
      : Error(ErrorCode::budget_exhausted, describe(cap, history)), history_(std::move(history)) {}
  const std::vector<CompletionRecord>& history() const noexcept { return history_; }

 private:
  static std::string describe(int cap, const std::vector<CompletionRecord>& h) {
    std::string s = "cap=" + std::to_string(cap) + ",budgets=";
    for (std::size_t i = 0; i < h.size(); ++i) s += (i ? "/" : "") + std::to_string(h[i].max_tokens);
    return s;
  }
  std::vector<CompletionRecord> history_;
};

/// Budgets 35k, 45k, ... up to the cap; a truncated or unparseable reply
/// moves to the next budget.
inline GenerationResult complete_with_escalation(LlmClient& client, const std::vector<ChatMessage>& messages) {
  const ProviderConfig& cfg = client.config();
  GenerationResult out;
  int budget = cfg.max_tokens;
  for (int attempt = 0;; ++attempt) {
    CompletionRecord rec = client.complete(messages, budget, attempt);
    if (rec.outcome == Outcome::ok) {
      Extraction ex = try_extract_scenario(rec.text);
      if (ex.scenario) {
        out.scenario = std::move(*ex.scenario);
        out.history.push_back(std::move(rec));
        return out;
      }
      rec.outcome = Outcome::format_error;
    }
    out.history.push_back(std::move(rec));
    if (budget >= cfg.escalation_cap) throw BudgetExhausted(cfg.escalation_cap, std::move(out.history));
    budget = std::min(budget + cfg.escalation_step, cfg.escalation_cap);
  }
}

inline GenerationResult complete_with_escalation(LlmClient& client, const std::string& prompt) {
  return complete_with_escalation(client, std::vector<ChatMessage>{{"user", prompt}});
}

}  // namespace atg
