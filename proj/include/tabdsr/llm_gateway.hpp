#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tabdsr {

struct LlmConfig {
  std::string endpoint_url = "http://localhost:8000/v1/chat/completions";
  std::string model_name = "qwen2.5:7b";
  double temperature = 0.1;
  int max_tokens = 4096;
  std::chrono::seconds request_timeout{60};
  int retry_limit = 2;
  std::string api_key_env = "OPENAI_API_KEY";

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Reads LlmConfig fields from a JSON object; absent keys keep their default.
LlmConfig llm_config_from_json(const nlohmann::json& j);
LlmConfig load_llm_config(const std::filesystem::path& path);

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  /// decomposer | sanitizer | reasoner | forge
  std::string tag;
  /// Sample the call belongs to; selects a per-sample stream in transcripts.
  std::string sample_id;
};

enum class GatewayErrorCode { TransportError, AuthError, EmptyResponse, ScriptExhausted, TagMismatch };

std::string_view to_string(GatewayErrorCode code);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  GatewayErrorCode code() const noexcept { return code_; }

 private:
  GatewayErrorCode code_;
};

/// Interface every backend implements.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const LlmConfig& cfg, const ChatRequest& req) = 0;
  /// False when responses depend on call order (scripted replay); callers then
  /// issue a sample's requests in a fixed sequence.
  virtual bool order_independent() const { return true; }
};

// --- live backend -----------------------------------------------------------

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal POST transport. A status of 0 means the request never got a reply.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body, std::chrono::seconds timeout) = 0;
};

/// cpp-httplib based transport (http and https).
std::unique_ptr<HttpTransport> make_default_transport();

/// Body of an OpenAI-compatible chat-completions request.
nlohmann::json build_chat_request_body(const LlmConfig& cfg, const ChatRequest& req);

/// Delay before retry number `attempt` (0-based): 1s, 2s, 4s, ... capped at 30s.
std::chrono::milliseconds backoff_delay(int attempt);

class LiveBackend : public ChatBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit LiveBackend(std::unique_ptr<HttpTransport> transport = make_default_transport(),
                       Sleeper sleeper = {});

  std::string complete(const LlmConfig& cfg, const ChatRequest& req) override;

 private:
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
};

// --- scripted mock ----------------------------------------------------------

struct TranscriptEntry {
  std::string expect_tag;
  std::string response_text;
  /// Empty for entries in the shared stream.
  std::string sample_id;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

/// Ordered responses consumed strictly in order. Entries carrying a sample id
/// form one positional stream per sample; the rest form the shared stream.
class TranscriptScript {
 public:
  TranscriptScript() = default;
  explicit TranscriptScript(std::vector<TranscriptEntry> entries);

  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void append(TranscriptEntry e) { entries_.push_back(std::move(e)); }

  /// JSON lines: {"tag": ..., "response": ..., "sample": ...}.
  static TranscriptScript load(const std::filesystem::path& path);
  static TranscriptScript parse(std::string_view jsonl);
  void save(const std::filesystem::path& path) const;
  std::string to_jsonl() const;

 private:
  std::vector<TranscriptEntry> entries_;
};

class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(TranscriptScript script);

  std::string complete(const LlmConfig& cfg, const ChatRequest& req) override;
  bool order_independent() const override { return false; }

  /// Entries consumed so far across all streams.
  std::size_t consumed() const;
  /// Cursor of the stream the given sample reads from.
  std::size_t cursor(const std::string& sample_id = {}) const;

 private:
  const std::string& stream_key(const std::string& sample_id) const;

  mutable std::mutex mu_;
  TranscriptScript script_;
  std::map<std::string, std::vector<std::size_t>> streams_;
  std::map<std::string, std::size_t> cursors_;
  std::size_t consumed_ = 0;
};

/// Forwards to an inner backend and appends every (tag, response) pair to a
/// transcript file as soon as it arrives.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(std::unique_ptr<ChatBackend> inner, std::filesystem::path out_path);

  std::string complete(const LlmConfig& cfg, const ChatRequest& req) override;
  // Each sample's calls are recorded in the order a mock replay will issue them.
  bool order_independent() const override { return false; }
  TranscriptScript script() const;

 private:
  std::unique_ptr<ChatBackend> inner_;
  std::filesystem::path out_path_;
  mutable std::mutex mu_;
  TranscriptScript script_;
};

// --- gateway ----------------------------------------------------------------

/// Configured model access shared by all agents. Thread-safe.
class Gateway {
 public:
  Gateway(LlmConfig cfg, std::shared_ptr<ChatBackend> backend);

  std::string complete(const ChatRequest& req);

  const LlmConfig& config() const { return cfg_; }
  bool order_independent() const { return backend_->order_independent(); }
  std::size_t calls() const { return calls_.load(); }

 private:
  LlmConfig cfg_;
  std::shared_ptr<ChatBackend> backend_;
  std::atomic<std::size_t> calls_{0};
};

/// Runs each request through `backend` and returns the replayable script.
TranscriptScript record_transcript(const LlmConfig& cfg, ChatBackend& backend,
                                   const std::vector<ChatRequest>& reqs);

}  // namespace tabdsr
