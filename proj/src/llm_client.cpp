#include "hpoloop/llm_client.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "hpoloop/text_util.hpp"

namespace hpoloop {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

void check_messages(std::span<const ChatMessage> messages) {
  if (messages.empty()) throw SchemaError("a completion needs at least one message");
  for (const auto& m : messages) {
    if (m.role != Role::system && m.content.empty()) {
      throw SchemaError(std::string(to_string(m.role)) + " message content must be non-empty");
    }
  }
}

void CompletionParams::check() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw SchemaError("temperature must be within [0, 2], got " + format_number(temperature));
  }
  if (max_tokens && *max_tokens <= 0) throw SchemaError("max_tokens must be positive");
  if (model.empty()) throw SchemaError("model must be non-empty");
}

json completion_request_body(std::span<const ChatMessage> messages, const CompletionParams& params) {
  json msgs = json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  json body{{"model", params.model}, {"messages", msgs}, {"temperature", params.temperature}};
  if (params.max_tokens) body["max_tokens"] = *params.max_tokens;
  return body;
}

std::string parse_completion_response(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw MalformedResponse(std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty()) {
    throw MalformedResponse("response has no choices");
  }
  const auto& first = doc["choices"][0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw MalformedResponse("first choice has no message");
  }
  const auto& content = first["message"].value("content", json());
  if (!content.is_string()) throw MalformedResponse("first choice message has no content");
  return content.get<std::string>();
}

// ---------------------------------------------------------------------------
// http

namespace {

class HttpSession final : public ChatSession {
 public:
  explicit HttpSession(const HttpBackend& backend) : backend_(backend) {}
  std::string complete(std::span<const ChatMessage> messages,
                       const CompletionParams& params) override {
    return backend_.complete(messages, params);
  }

 private:
  const HttpBackend& backend_;
};

}  // namespace

HttpBackend::HttpBackend(HttpBackendSpec spec, Sleeper sleeper)
    : spec_(std::move(spec)), sleeper_(std::move(sleeper)) {
  static const std::regex url_re(R"(^(https?://[^/\s]+)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(spec_.base_url, m, url_re)) {
    throw SchemaError("http backend base_url is not a valid http(s) URL: \"" + spec_.base_url + "\"");
  }
  scheme_host_port_ = m[1].str();
  path_prefix_ = m[2].matched ? m[2].str() : "";
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (spec_.retry.max_attempts < 1) throw SchemaError("retry max_attempts must be >= 1");
}

std::unique_ptr<ChatSession> HttpBackend::open_session() const {
  return std::make_unique<HttpSession>(*this);
}

std::string HttpBackend::describe() const { return "http " + spec_.base_url; }

std::string HttpBackend::post_once(std::span<const ChatMessage> messages,
                                   const CompletionParams& params) const {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(params.request_timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      params.request_timeout - secs);
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  client.set_connection_timeout(10, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(spec_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = completion_request_body(messages, params).dump();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
  if (!res) {
    throw NetworkError("request to " + spec_.base_url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ApiError(res->status, res->body.substr(0, 500));
  }
  return parse_completion_response(res->body);
}

std::string HttpBackend::complete(std::span<const ChatMessage> messages,
                                  const CompletionParams& params) const {
  check_messages(messages);
  params.check();
  return with_retry([&] { return post_once(messages, params); }, spec_.retry, sleeper_);
}

// ---------------------------------------------------------------------------
// scripted

namespace {

class ScriptedSession final : public ChatSession {
 public:
  explicit ScriptedSession(std::shared_ptr<const std::vector<std::string>> transcript)
      : transcript_(std::move(transcript)) {}

  std::string complete(std::span<const ChatMessage> messages, const CompletionParams&) override {
    check_messages(messages);
    if (next_ >= transcript_->size()) {
      throw TranscriptExhausted("scripted transcript exhausted after " +
                                std::to_string(transcript_->size()) + " replies");
    }
    return (*transcript_)[next_++];
  }

 private:
  std::shared_ptr<const std::vector<std::string>> transcript_;
  std::size_t next_ = 0;
};

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<std::string> transcript)
    : transcript_(std::make_shared<const std::vector<std::string>>(std::move(transcript))) {
  if (transcript_->empty()) throw SchemaError("scripted transcript must be non-empty");
}

std::unique_ptr<ChatSession> ScriptedBackend::open_session() const {
  return std::make_unique<ScriptedSession>(transcript_);
}

std::string ScriptedBackend::describe() const {
  return "scripted (" + std::to_string(transcript_->size()) + " replies)";
}

std::vector<std::string> load_transcript_file(const std::string& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("transcript " + path + " is not valid JSON", e.byte);
  }
  const json* list = &doc;
  if (doc.is_object() && doc.contains("replies")) list = &doc["replies"];
  if (!list->is_array()) throw SchemaError("transcript " + path + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& r : *list) {
    if (!r.is_string()) throw SchemaError("transcript " + path + " must contain only strings");
    out.push_back(r.get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// programmatic

namespace {

class ProgrammaticSession final : public ChatSession {
 public:
  std::string complete(std::span<const ChatMessage> messages, const CompletionParams&) override {
    check_messages(messages);
    return bisect_refine_reply(messages);
  }
};

}  // namespace

ProgrammaticBackend::ProgrammaticBackend(std::string strategy) : strategy_(std::move(strategy)) {
  if (strategy_ != "bisect-refine") {
    throw SchemaError("unknown programmatic strategy \"" + strategy_ + "\" (available: bisect-refine)");
  }
}

std::unique_ptr<ChatSession> ProgrammaticBackend::open_session() const {
  return std::make_unique<ProgrammaticSession>();
}

std::string ProgrammaticBackend::describe() const { return "mock:" + strategy_; }

std::unique_ptr<ChatBackend> make_backend(const BackendSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::unique_ptr<ChatBackend> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, HttpBackendSpec>) {
          return std::make_unique<HttpBackend>(s);
        } else if constexpr (std::is_same_v<T, ScriptedBackendSpec>) {
          return std::make_unique<ScriptedBackend>(s.transcript);
        } else {
          return std::make_unique<ProgrammaticBackend>(s.strategy);
        }
      },
      spec);
}

}  // namespace hpoloop
