#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hpoloop/llm_client.hpp"
#include "hpoloop/react.hpp"

namespace hpoloop {

// One request/reply pair as sent to the backend.
struct Exchange {
  std::vector<ChatMessage> messages;
  std::string reply;
};

// Forwards to another session and keeps every exchange.
class RecordingSession final : public ChatSession {
 public:
  explicit RecordingSession(ChatSession& inner) : inner_(inner) {}
  std::string complete(std::span<const ChatMessage> messages,
                       const CompletionParams& params) override;
  // Returns the exchanges recorded so far and clears them.
  std::vector<Exchange> take();

 private:
  ChatSession& inner_;
  std::vector<Exchange> exchanges_;
};

struct TranscriptSection {
  std::string agent;  // "creator", "executor" or "analysis"
  std::vector<Exchange> exchanges;
};

json transcript_to_json(const std::vector<TranscriptSection>& sections);
void write_transcript(const std::filesystem::path& path, const std::vector<TranscriptSection>& sections);
// Throws ParseError with the byte offset of malformed JSON.
std::vector<TranscriptSection> parse_transcript(std::string_view text);
std::vector<TranscriptSection> load_transcript(const std::filesystem::path& path);

struct ReplayedStep {
  std::string agent;
  std::size_t exchange = 0;  // 0-based within its section
  ReActStep step;            // observation recovered from the next prompt
};

struct ReplayResult {
  std::vector<ReplayedStep> steps;
  std::vector<std::pair<std::string, std::string>> final_answers;  // (agent, text)
  int format_failures = 0;
};

// Re-parses every reply through the ReAct parser.
ReplayResult replay_transcript(const std::vector<TranscriptSection>& sections);
std::string format_replay(const ReplayResult& r);

}  // namespace hpoloop
