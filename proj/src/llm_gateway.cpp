#include "tabdsr/llm_gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tabdsr {

using nlohmann::json;

void LlmConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw std::invalid_argument(fmt::format("temperature {} outside [0, 2]", temperature));
  }
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  if (retry_limit < 0) throw std::invalid_argument("retry_limit must be >= 0");
  if (request_timeout.count() < 1) throw std::invalid_argument("request_timeout must be >= 1s");
}

LlmConfig llm_config_from_json(const json& j) {
  LlmConfig cfg;
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  cfg.endpoint_url = j.value("endpoint_url", cfg.endpoint_url);
  cfg.model_name = j.value("model_name", cfg.model_name);
  cfg.temperature = j.value("temperature", cfg.temperature);
  cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
  cfg.request_timeout = std::chrono::seconds(j.value("request_timeout", cfg.request_timeout.count()));
  cfg.retry_limit = j.value("retry_limit", cfg.retry_limit);
  cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
  cfg.validate();
  return cfg;
}

LlmConfig load_llm_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open config {}", path.string()));
  json j = json::parse(in, nullptr, true, true);
  if (j.contains("llm")) return llm_config_from_json(j["llm"]);
  return llm_config_from_json(j);
}

std::string_view to_string(GatewayErrorCode code) {
  switch (code) {
    case GatewayErrorCode::TransportError: return "TransportError";
    case GatewayErrorCode::AuthError: return "AuthError";
    case GatewayErrorCode::EmptyResponse: return "EmptyResponse";
    case GatewayErrorCode::ScriptExhausted: return "ScriptExhausted";
    case GatewayErrorCode::TagMismatch: return "TagMismatch";
  }
  return "Unknown";
}

// --- live -------------------------------------------------------------------

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body, std::chrono::seconds timeout) override {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw GatewayError(GatewayErrorCode::TransportError, "endpoint_url needs a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    std::string origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers hs;
    for (const auto& [k, v] : headers) hs.emplace(k, v);
    auto res = client.Post(path, hs, body, "application/json");
    if (!res) return HttpResponse{0, httplib::to_string(res.error())};
    return HttpResponse{res->status, res->body};
  }
};

}  // namespace

std::unique_ptr<HttpTransport> make_default_transport() { return std::make_unique<HttplibTransport>(); }

json build_chat_request_body(const LlmConfig& cfg, const ChatRequest& req) {
  json messages = json::array();
  if (!req.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
  return json{{"model", cfg.model_name},
              {"messages", std::move(messages)},
              {"temperature", cfg.temperature},
              {"max_tokens", cfg.max_tokens},
              {"stream", false}};
}

std::chrono::milliseconds backoff_delay(int attempt) {
  std::chrono::milliseconds delay{1000};
  for (int i = 0; i < attempt && delay < std::chrono::seconds(30); ++i) delay *= 2;
  return std::min<std::chrono::milliseconds>(delay, std::chrono::seconds(30));
}

LiveBackend::LiveBackend(std::unique_ptr<HttpTransport> transport, Sleeper sleeper)
    : transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string LiveBackend::complete(const LlmConfig& cfg, const ChatRequest& req) {
  const std::string body = build_chat_request_body(cfg, req).dump();
  std::vector<std::pair<std::string, std::string>> headers;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_failure;
  for (int attempt = 0; attempt <= cfg.retry_limit; ++attempt) {
    if (attempt > 0) sleeper_(backoff_delay(attempt - 1));
    HttpResponse res = transport_->post(cfg.endpoint_url, headers, body, cfg.request_timeout);
    if (res.status == 401 || res.status == 403) {
      throw GatewayError(GatewayErrorCode::AuthError, fmt::format("HTTP {}: {}", res.status, res.body));
    }
    if (res.status == 0 || res.status >= 500 || res.status == 429) {
      last_failure = res.status == 0 ? res.body : fmt::format("HTTP {}: {}", res.status, res.body);
      continue;
    }
    if (res.status < 200 || res.status >= 300) {
      throw GatewayError(GatewayErrorCode::TransportError, fmt::format("HTTP {}: {}", res.status, res.body));
    }

    json parsed = json::parse(res.body, nullptr, false);
    if (parsed.is_discarded()) {
      throw GatewayError(GatewayErrorCode::TransportError, "response body is not JSON");
    }
    const json* content = nullptr;
    if (parsed.contains("choices") && parsed["choices"].is_array() && !parsed["choices"].empty()) {
      const auto& choice = parsed["choices"][0];
      if (choice.contains("message") && choice["message"].contains("content")) {
        content = &choice["message"]["content"];
      }
    }
    if (!content || !content->is_string() || content->get_ref<const std::string&>().empty()) {
      throw GatewayError(GatewayErrorCode::EmptyResponse, "no message content in response");
    }
    return content->get<std::string>();
  }
  throw GatewayError(GatewayErrorCode::TransportError,
                     fmt::format("giving up after {} attempts: {}", cfg.retry_limit + 1, last_failure));
}

// --- transcripts --------------------------------------------------------------

TranscriptScript::TranscriptScript(std::vector<TranscriptEntry> entries) : entries_(std::move(entries)) {}

TranscriptScript TranscriptScript::parse(std::string_view jsonl) {
  std::vector<TranscriptEntry> entries;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("tag") || !j.contains("response") ||
        !j["tag"].is_string() || !j["response"].is_string()) {
      throw std::runtime_error(fmt::format("transcript line {}: expected {{\"tag\", \"response\"}}", lineno));
    }
    entries.push_back({j["tag"].get<std::string>(), j["response"].get<std::string>(), j.value("sample", "")});
  }
  return TranscriptScript(std::move(entries));
}

TranscriptScript TranscriptScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open transcript {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string TranscriptScript::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    json j{{"tag", e.expect_tag}, {"response", e.response_text}};
    if (!e.sample_id.empty()) j["sample"] = e.sample_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void TranscriptScript::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write transcript {}", path.string()));
  out << to_jsonl();
}

// --- mock -------------------------------------------------------------------

MockBackend::MockBackend(TranscriptScript script) : script_(std::move(script)) {
  streams_[""];
  for (std::size_t i = 0; i < script_.size(); ++i) {
    streams_[script_.entries()[i].sample_id].push_back(i);
  }
}

const std::string& MockBackend::stream_key(const std::string& sample_id) const {
  static const std::string kShared;
  auto it = streams_.find(sample_id);
  return it == streams_.end() ? kShared : it->first;
}

std::string MockBackend::complete(const LlmConfig&, const ChatRequest& req) {
  std::lock_guard lock(mu_);
  const auto& key = stream_key(req.sample_id);
  const auto& stream = streams_.at(key);
  auto& cursor = cursors_[key];
  if (cursor >= stream.size()) {
    throw GatewayError(GatewayErrorCode::ScriptExhausted,
                       fmt::format("no entry left for tag '{}' (stream '{}', {} consumed)", req.tag, key, cursor));
  }
  const auto& entry = script_.entries()[stream[cursor]];
  if (entry.expect_tag != req.tag) {
    throw GatewayError(GatewayErrorCode::TagMismatch,
                       fmt::format("entry {} of stream '{}' expects '{}', request is '{}'", cursor, key,
                                   entry.expect_tag, req.tag));
  }
  ++cursor;
  ++consumed_;
  return entry.response_text;
}

std::size_t MockBackend::consumed() const {
  std::lock_guard lock(mu_);
  return consumed_;
}

std::size_t MockBackend::cursor(const std::string& sample_id) const {
  std::lock_guard lock(mu_);
  auto it = cursors_.find(stream_key(sample_id));
  return it == cursors_.end() ? 0 : it->second;
}

// --- recording --------------------------------------------------------------

RecordingBackend::RecordingBackend(std::unique_ptr<ChatBackend> inner, std::filesystem::path out_path)
    : inner_(std::move(inner)), out_path_(std::move(out_path)) {
  std::ofstream out(out_path_, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write transcript {}", out_path_.string()));
}

std::string RecordingBackend::complete(const LlmConfig& cfg, const ChatRequest& req) {
  std::string text = inner_->complete(cfg, req);
  std::lock_guard lock(mu_);
  TranscriptEntry entry{req.tag, text, req.sample_id};
  std::ofstream out(out_path_, std::ios::binary | std::ios::app);
  out << TranscriptScript({entry}).to_jsonl();
  script_.append(std::move(entry));
  return text;
}

TranscriptScript RecordingBackend::script() const {
  std::lock_guard lock(mu_);
  return script_;
}

// --- gateway ----------------------------------------------------------------

Gateway::Gateway(LlmConfig cfg, std::shared_ptr<ChatBackend> backend)
    : cfg_(std::move(cfg)), backend_(std::move(backend)) {
  cfg_.validate();
  if (!backend_) throw std::invalid_argument("gateway needs a backend");
}

std::string Gateway::complete(const ChatRequest& req) {
  if (req.user_prompt.empty()) throw std::invalid_argument("user_prompt must not be empty");
  ++calls_;
  return backend_->complete(cfg_, req);
}

TranscriptScript record_transcript(const LlmConfig& cfg, ChatBackend& backend, const std::vector<ChatRequest>& reqs) {
  TranscriptScript script;
  for (const auto& req : reqs) {
    script.append({req.tag, backend.complete(cfg, req), req.sample_id});
  }
  return script;
}

}  // namespace tabdsr
