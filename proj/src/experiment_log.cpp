#include "hpoloop/experiment_log.hpp"

#include <cmath>
#include <cstdio>

#include "hpoloop/errors.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

std::string_view to_string(TrialStatus s) {
  return s == TrialStatus::succeeded ? "succeeded" : "failed";
}

namespace {

TrialStatus status_from_string(const std::string& s) {
  if (s == "succeeded") return TrialStatus::succeeded;
  if (s == "failed") return TrialStatus::failed;
  throw SchemaError("unknown trial status '" + s + "'");
}

template <class T>
json opt_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json result_to_json(const TrialResult& r) {
  return json{{"status", std::string(to_string(r.status))},
              {"final_score", opt_to_json(r.final_score)},
              {"trajectory", r.trajectory ? trajectory_to_json(*r.trajectory) : json(nullptr)},
              {"analysis", r.analysis_text},
              {"error", r.error}};
}

TrialResult result_from_json(const json& j) {
  TrialResult r;
  r.status = status_from_string(j.at("status").get<std::string>());
  if (!j.at("final_score").is_null()) r.final_score = j["final_score"].get<double>();
  if (!j.at("trajectory").is_null()) r.trajectory = trajectory_from_json(j["trajectory"]);
  r.analysis_text = j.at("analysis").get<std::string>();
  r.error = j.at("error").get<std::string>();
  return r;
}

json metadata_to_json(const RunMetadata& m) {
  return json{{"task_id", m.task_id},
              {"space_id", m.space_id},
              {"strategy", m.strategy},
              {"seed", m.seed},
              {"run_index", m.run_index},
              {"goal_metric", m.goal_metric},
              {"direction", std::string(to_string(m.direction))},
              {"started_at", m.started_at},
              {"finished_at", m.finished_at},
              {"aborted", m.aborted},
              {"abort_reason", m.abort_reason}};
}

RunMetadata metadata_from_json(const json& j) {
  RunMetadata m;
  m.task_id = j.at("task_id").get<std::string>();
  m.space_id = j.at("space_id").get<std::string>();
  m.strategy = j.at("strategy").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.run_index = j.at("run_index").get<int>();
  m.goal_metric = j.at("goal_metric").get<std::string>();
  m.direction = direction_from_string(j.at("direction").get<std::string>());
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  m.aborted = j.at("aborted").get<bool>();
  m.abort_reason = j.at("abort_reason").get<std::string>();
  return m;
}

json analysis_to_json(const FinalAnalysis& a) {
  return json{{"best_config", config_to_json(a.best_config)},
              {"best_trial", a.best_trial},
              {"best_score", a.best_score},
              {"best_reasoning", a.best_reasoning},
              {"influence_notes", a.influence_notes},
              {"future_directions", a.future_directions}};
}

FinalAnalysis analysis_from_json(const json& j) {
  FinalAnalysis a;
  a.best_config = config_from_json(j.at("best_config"));
  a.best_trial = j.at("best_trial").get<int>();
  a.best_score = j.at("best_score").get<double>();
  a.best_reasoning = j.at("best_reasoning").get<std::string>();
  a.influence_notes = j.at("influence_notes").get<std::string>();
  a.future_directions = j.at("future_directions").get<std::string>();
  return a;
}

}  // namespace

void ExperimentLog::append(LogEntry entry) {
  const int expected = static_cast<int>(entries_.size()) + 1;
  if (entry.trial_index != expected) {
    throw IndexMismatch("expected trial index " + std::to_string(expected) + ", got " +
                        std::to_string(entry.trial_index));
  }
  entries_.push_back(std::move(entry));
  try {
    persist();
  } catch (...) {
    entries_.pop_back();
    throw;
  }
}

void ExperimentLog::persist() const {
  if (!path_) return;
  try {
    write_file_atomic(*path_, serialize_log_text(*this));
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError("cannot write " + path_->string() + ": " + e.what());
  }
}

json serialize_log(const ExperimentLog& log) {
  json entries = json::array();
  for (const auto& e : log.entries()) {
    entries.push_back(json{{"trial_index", e.trial_index},
                           {"config", config_to_json(e.config)},
                           {"rationale", e.rationale},
                           {"result", result_to_json(e.result)},
                           {"started_at", e.started_at},
                           {"finished_at", e.finished_at},
                           {"transcript_ref", opt_to_json(e.transcript_ref)}});
  }
  return json{{"format_version", kLogFormatVersion},
              {"metadata", metadata_to_json(log.metadata)},
              {"entries", std::move(entries)},
              {"final_analysis",
               log.final_analysis ? analysis_to_json(*log.final_analysis) : json(nullptr)}};
}

std::string serialize_log_text(const ExperimentLog& log) { return serialize_log(log).dump(2) + "\n"; }

ExperimentLog deserialize_log(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("run log is not valid JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer())
    throw ParseError("run log lacks an integer format_version", 0);
  const int version = j["format_version"].get<int>();
  if (version != kLogFormatVersion) {
    throw FormatVersionMismatch("run log format version " + std::to_string(version) +
                                " is not supported (expected " +
                                std::to_string(kLogFormatVersion) + ")");
  }
  try {
    ExperimentLog log(metadata_from_json(j.at("metadata")));
    for (const auto& e : j.at("entries")) {
      LogEntry entry;
      entry.trial_index = e.at("trial_index").get<int>();
      entry.config = config_from_json(e.at("config"));
      entry.rationale = e.at("rationale").get<std::string>();
      entry.result = result_from_json(e.at("result"));
      entry.started_at = e.at("started_at").get<std::string>();
      entry.finished_at = e.at("finished_at").get<std::string>();
      if (!e.at("transcript_ref").is_null())
        entry.transcript_ref = e["transcript_ref"].get<std::string>();
      log.append(std::move(entry));
    }
    if (!j.at("final_analysis").is_null())
      log.final_analysis = analysis_from_json(j["final_analysis"]);
    return log;
  } catch (const json::exception& e) {
    throw ParseError(std::string("run log has an invalid structure: ") + e.what(), 0);
  } catch (const IndexMismatch& e) {
    throw ParseError(std::string("run log entries out of order: ") + e.what(), 0);
  } catch (const SchemaError& e) {
    throw ParseError(std::string("run log has an invalid field: ") + e.what(), 0);
  } catch (const LogParseError& e) {
    throw ParseError(std::string("run log has an invalid trajectory: ") + e.what(), 0);
  }
}

ExperimentLog load_log(const std::filesystem::path& path) {
  try {
    return deserialize_log(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte_offset());
  }
}

std::optional<BestSoFar> best_so_far(const ExperimentLog& log, int t, Direction direction) {
  std::optional<BestSoFar> best;
  const auto& entries = log.entries();
  const std::size_t limit = std::min<std::size_t>(entries.size(), t < 0 ? 0 : t);
  for (std::size_t i = 0; i < limit; ++i) {
    const auto& r = entries[i].result;
    if (r.status != TrialStatus::succeeded || !r.final_score) continue;
    if (!best || better(direction, *r.final_score, best->score))
      best = BestSoFar{*r.final_score, entries[i].trial_index};
  }
  return best;
}

MilestoneReport milestone_report(std::span<const ExperimentLog> runs,
                                 const std::vector<int>& milestones, Direction direction) {
  MilestoneReport report;
  report.direction = direction;
  report.milestones = milestones;
  if (!runs.empty()) report.strategy = runs.front().metadata.strategy;
  std::vector<const ExperimentLog*> included;
  for (const auto& r : runs) {
    if (r.metadata.aborted) ++report.excluded_runs;
    else included.push_back(&r);
  }
  report.run_count = static_cast<int>(included.size());
  for (int t : milestones) {
    MilestoneRow row;
    row.t = t;
    std::optional<double> pivot;
    double shifted_sum = 0.0;
    for (const auto* log : included) {
      auto b = best_so_far(*log, t, direction);
      row.values.push_back(b ? std::optional<double>(b->score) : std::nullopt);
      if (b) {
        ++row.n;
        if (!pivot) pivot = b->score;
        shifted_sum += b->score - *pivot;
      } else {
        ++row.missing;
      }
    }
    if (row.n > 0) {
      // moments about the first value, so equal values give exactly 0
      const double shifted_mean = shifted_sum / row.n;
      row.mean = *pivot + shifted_mean;
      if (row.n > 1) {
        double ss = 0.0;
        for (const auto& v : row.values) {
          if (v) ss += (*v - *pivot - shifted_mean) * (*v - *pivot - shifted_mean);
        }
        row.sample_std = std::sqrt(ss / (row.n - 1));
      }
      row.single_run = row.n == 1;
    }
    if (row.missing > 0) {
      report.notes.push_back("t=" + std::to_string(t) + ": " + std::to_string(row.missing) +
                             " run(s) without a succeeded trial, excluded from stats");
    }
    report.rows.push_back(std::move(row));
  }
  if (report.excluded_runs > 0) {
    report.notes.push_back(std::to_string(report.excluded_runs) + " run" +
                           (report.excluded_runs == 1 ? "" : "s") + " excluded (aborted)");
  }
  report.notes.push_back(
      "std is the sample standard deviation across runs (n-1 denominator); n=1 rows report 0");
  return report;
}

json report_to_json(const MilestoneReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json values = json::array();
    for (const auto& v : r.values) values.push_back(opt_to_json(v));
    rows.push_back(json{{"t", r.t},
                        {"values", std::move(values)},
                        {"n", r.n},
                        {"missing", r.missing},
                        {"mean", opt_to_json(r.mean)},
                        {"sample_std", r.sample_std},
                        {"single_run", r.single_run}});
  }
  return json{{"strategy", report.strategy},
              {"direction", std::string(to_string(report.direction))},
              {"milestones", report.milestones},
              {"run_count", report.run_count},
              {"excluded_runs", report.excluded_runs},
              {"rows", std::move(rows)},
              {"notes", report.notes}};
}

MilestoneReport report_from_json(const json& j) {
  try {
    MilestoneReport report;
    report.strategy = j.at("strategy").get<std::string>();
    report.direction = direction_from_string(j.at("direction").get<std::string>());
    report.milestones = j.at("milestones").get<std::vector<int>>();
    report.run_count = j.at("run_count").get<int>();
    report.excluded_runs = j.at("excluded_runs").get<int>();
    report.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      MilestoneRow row;
      row.t = r.at("t").get<int>();
      for (const auto& v : r.at("values")) {
        row.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      }
      row.n = r.at("n").get<int>();
      row.missing = r.at("missing").get<int>();
      if (!r.at("mean").is_null()) row.mean = r["mean"].get<double>();
      row.sample_std = r.at("sample_std").get<double>();
      row.single_run = r.at("single_run").get<bool>();
      report.rows.push_back(std::move(row));
    }
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report has an invalid structure: ") + e.what(), 0);
  } catch (const SchemaError& e) {
    throw ParseError(std::string("report has an invalid field: ") + e.what(), 0);
  }
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string format_report_table(const MilestoneReport& report) {
  std::string out = "strategy: " + report.strategy + "  direction: " +
                    std::string(to_string(report.direction)) +
                    "  runs: " + std::to_string(report.run_count);
  if (report.excluded_runs > 0) out += " (" + std::to_string(report.excluded_runs) + " excluded)";
  out += "\n";
  out += pad_left("t", 5) + pad_left("mean", 14) + pad_left("std", 14) + pad_left("n", 5) + "\n";
  for (const auto& r : report.rows) {
    out += pad_left(std::to_string(r.t), 5);
    out += pad_left(r.mean ? fmt(*r.mean) : "-", 14);
    out += pad_left(r.mean ? fmt(r.sample_std) : "-", 14);
    out += pad_left(std::to_string(r.n), 5);
    if (r.single_run) out += "  (n=1)";
    out += "\n";
  }
  for (const auto& note : report.notes) out += "note: " + note + "\n";
  return out;
}

std::string trajectory_csv(std::span<const ExperimentLog> runs, Direction direction) {
  std::string out = "run,trial,score,best_so_far\n";
  for (const auto& log : runs) {
    for (const auto& e : log.entries()) {
      out += std::to_string(log.metadata.run_index) + "," + std::to_string(e.trial_index) + ",";
      if (e.result.final_score) out += format_number(*e.result.final_score);
      out += ",";
      if (auto b = best_so_far(log, e.trial_index, direction)) out += format_number(b->score);
      out += "\n";
    }
  }
  return out;
}

}  // namespace hpoloop
