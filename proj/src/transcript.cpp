#include "hpoloop/transcript.hpp"

#include "hpoloop/errors.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

std::string RecordingSession::complete(std::span<const ChatMessage> messages,
                                       const CompletionParams& params) {
  std::string reply = inner_.complete(messages, params);
  exchanges_.push_back({std::vector<ChatMessage>(messages.begin(), messages.end()), reply});
  return reply;
}

std::vector<Exchange> RecordingSession::take() {
  std::vector<Exchange> out;
  out.swap(exchanges_);
  return out;
}

namespace {

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw SchemaError("unknown role '" + s + "'");
}

}  // namespace

json transcript_to_json(const std::vector<TranscriptSection>& sections) {
  json out = json::array();
  for (const auto& s : sections) {
    json exchanges = json::array();
    for (const auto& e : s.exchanges) {
      json messages = json::array();
      for (const auto& m : e.messages)
        messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
      exchanges.push_back({{"messages", std::move(messages)}, {"reply", e.reply}});
    }
    out.push_back({{"agent", s.agent}, {"exchanges", std::move(exchanges)}});
  }
  return json{{"format_version", 1}, {"sections", std::move(out)}};
}

void write_transcript(const std::filesystem::path& path,
                      const std::vector<TranscriptSection>& sections) {
  write_file_atomic(path, transcript_to_json(sections).dump(2) + "\n");
}

std::vector<TranscriptSection> parse_transcript(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("transcript is not valid JSON: ") + e.what(), e.byte);
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw FormatVersionMismatch("unsupported transcript format version");
    std::vector<TranscriptSection> sections;
    for (const auto& s : j.at("sections")) {
      TranscriptSection section;
      section.agent = s.at("agent").get<std::string>();
      for (const auto& e : s.at("exchanges")) {
        Exchange ex;
        for (const auto& m : e.at("messages"))
          ex.messages.push_back({role_from_string(m.at("role").get<std::string>()),
                                 m.at("content").get<std::string>()});
        ex.reply = e.at("reply").get<std::string>();
        section.exchanges.push_back(std::move(ex));
      }
      sections.push_back(std::move(section));
    }
    return sections;
  } catch (const json::exception& e) {
    throw ParseError(std::string("transcript has an invalid structure: ") + e.what(), 0);
  } catch (const SchemaError& e) {
    throw ParseError(std::string("transcript has an invalid field: ") + e.what(), 0);
  }
}

std::vector<TranscriptSection> load_transcript(const std::filesystem::path& path) {
  try {
    return parse_transcript(read_file(path));
  } catch (const ParseError& e) {
    // drop the offset suffix; the rethrown error appends it again
    std::string msg = e.what();
    if (const auto at = msg.rfind(" (at byte "); at != std::string::npos) msg.erase(at);
    throw ParseError(path.string() + ": " + msg, e.byte_offset());
  }
}

namespace {

// The newest observation sits at the end of the next prompt, between the
// last "Observation: " and the trailing "Thought:" cue.
std::string recover_observation(const Exchange& next) {
  for (auto it = next.messages.rbegin(); it != next.messages.rend(); ++it) {
    if (it->role != Role::user) continue;
    const std::string& c = it->content;
    const auto pos = c.rfind("\nObservation: ");
    if (pos == std::string::npos) return "(not recorded)";
    std::string obs = c.substr(pos + 14);
    const auto cue = obs.rfind("\nThought:");
    if (cue != std::string::npos) obs.erase(cue);
    return obs;
  }
  return "(not recorded)";
}

}  // namespace

ReplayResult replay_transcript(const std::vector<TranscriptSection>& sections) {
  ReplayResult r;
  for (const auto& s : sections) {
    if (s.agent == "analysis") continue;  // plain completion, not ReAct
    for (std::size_t i = 0; i < s.exchanges.size(); ++i) {
      ParsedBlock parsed = parse_block(s.exchanges[i].reply);
      if (auto* step = std::get_if<ReActStep>(&parsed)) {
        step->observation = i + 1 < s.exchanges.size() ? recover_observation(s.exchanges[i + 1])
                                                       : "(not recorded)";
        r.steps.push_back({s.agent, i, std::move(*step)});
      } else if (auto* fin = std::get_if<FinalAnswer>(&parsed)) {
        r.final_answers.emplace_back(s.agent, fin->text);
      } else {
        ++r.format_failures;
      }
    }
  }
  return r;
}

std::string format_replay(const ReplayResult& r) {
  std::string out;
  int n = 0;
  for (const auto& s : r.steps) {
    out += "[" + s.agent + "] step " + std::to_string(++n) + "\n";
    out += format_step(s.step) + "\nObservation: " + s.step.observation + "\n\n";
  }
  for (const auto& [agent, text] : r.final_answers) out += "[" + agent + "] Final Answer: " + text + "\n\n";
  out += "steps: " + std::to_string(r.steps.size()) +
         ", final answers: " + std::to_string(r.final_answers.size()) +
         ", format failures: " + std::to_string(r.format_failures) + "\n";
  return out;
}

}  // namespace hpoloop
