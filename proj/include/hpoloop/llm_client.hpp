#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <variant>
#include <vector>

#include "hpoloop/errors.hpp"
#include "hpoloop/values.hpp"

namespace hpoloop {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

// Throws SchemaError when a user or assistant message is empty.
void check_messages(std::span<const ChatMessage> messages);

struct CompletionParams {
  std::string model = "gpt-4-1106-preview";
  double temperature = 1.0;
  std::optional<int> max_tokens;  // nullopt = unlimited
  std::chrono::milliseconds request_timeout{120'000};

  // Throws SchemaError when temperature is outside [0, 2] or max_tokens <= 0.
  void check() const;
};

// Request body for POST {base_url}/chat/completions.
json completion_request_body(std::span<const ChatMessage> messages, const CompletionParams& params);
// Extracts choices[0].message.content; throws MalformedResponse.
std::string parse_completion_response(std::string_view body);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{1000};
};

// Runs `op` until it succeeds or the policy is exhausted. Only NetworkError
// and retryable ApiError (429, 5xx) are retried; the wait before retry k
// (k = 1, 2, ...) is base_delay * 2^(k-1).
template <class Op>
auto with_retry(Op&& op, const RetryPolicy& policy, const Sleeper& sleep = real_sleep,
                int* attempts_out = nullptr) -> std::invoke_result_t<Op&> {
  if (policy.max_attempts < 1) throw SchemaError("retry policy needs max_attempts >= 1");
  for (int attempt = 1;; ++attempt) {
    if (attempts_out) *attempts_out = attempt;
    try {
      return op();
    } catch (const NetworkError&) {
      if (attempt >= policy.max_attempts) throw;
    } catch (const ApiError& e) {
      if (!e.retryable() || attempt >= policy.max_attempts) throw;
    }
    sleep(policy.base_delay * (1LL << (attempt - 1)));
  }
}

// One conversation stream. Scripted playback position lives here, so two
// runs sharing a backend never interleave replies.
class ChatSession {
 public:
  virtual ~ChatSession() = default;
  virtual std::string complete(std::span<const ChatMessage> messages,
                               const CompletionParams& params) = 0;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::unique_ptr<ChatSession> open_session() const = 0;
  virtual std::string describe() const = 0;
};

struct HttpBackendSpec {
  std::string base_url = "https://api.openai.com/v1";
  // Name of the environment variable holding the API key; the key itself is
  // never stored in plans or logs.
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
};

struct ScriptedBackendSpec {
  std::vector<std::string> transcript;
};

struct ProgrammaticBackendSpec {
  std::string strategy = "bisect-refine";
};

using BackendSpec = std::variant<HttpBackendSpec, ScriptedBackendSpec, ProgrammaticBackendSpec>;

inline constexpr const char* kDefaultApiKeyEnv = "OPENAI_API_KEY";
inline constexpr const char* kBaseUrlOverrideEnv = "OPENAI_BASE_URL";

class HttpBackend final : public ChatBackend {
 public:
  // Throws SchemaError for a malformed base_url.
  explicit HttpBackend(HttpBackendSpec spec, Sleeper sleeper = real_sleep);
  std::unique_ptr<ChatSession> open_session() const override;
  std::string describe() const override;

  // Single POST without retries.
  std::string post_once(std::span<const ChatMessage> messages, const CompletionParams& params) const;
  std::string complete(std::span<const ChatMessage> messages, const CompletionParams& params) const;

 private:
  HttpBackendSpec spec_;
  Sleeper sleeper_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

class ScriptedBackend final : public ChatBackend {
 public:
  // Throws SchemaError for an empty transcript.
  explicit ScriptedBackend(std::vector<std::string> transcript);
  std::unique_ptr<ChatSession> open_session() const override;
  std::string describe() const override;
  std::size_t size() const { return transcript_->size(); }

 private:
  std::shared_ptr<const std::vector<std::string>> transcript_;
};

// Transcript file: a JSON array of strings, or {"replies": [...]}.
std::vector<std::string> load_transcript_file(const std::string& path);

// Deterministic rule-based replies computed from the rendered conversation.
// The only builtin strategy is "bisect-refine".
class ProgrammaticBackend final : public ChatBackend {
 public:
  explicit ProgrammaticBackend(std::string strategy);
  std::unique_ptr<ChatSession> open_session() const override;
  std::string describe() const override;

 private:
  std::string strategy_;
};

// Reply of the bisect-refine policy for a full conversation.
std::string bisect_refine_reply(std::span<const ChatMessage> messages);

std::unique_ptr<ChatBackend> make_backend(const BackendSpec& spec);

}  // namespace hpoloop
