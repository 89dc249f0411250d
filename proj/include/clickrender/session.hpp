#pragma once

#include "clickrender/protocol.hpp"
#include "clickrender/subject.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace clickrender {

inline constexpr const char* kSessionSchema = "clickrender.session/1";

enum class SessionMode { Simulated, Live };
enum class SessionStatus { InProgress, Partial, Complete };

const char* to_string(SessionMode m);
const char* to_string(SessionStatus s);
SessionMode session_mode_from_string(const std::string& s);
SessionStatus session_status_from_string(const std::string& s);

/// One subject's run through both sections. Trials are the source of truth;
/// blocks, region, rounds and cursor are derived and must match a replay.
struct SessionRecord {
  std::string id;
  SessionMode mode = SessionMode::Simulated;
  std::string subject_label;
  std::optional<SubjectModel> subject;  // simulated sessions only
  std::uint64_t seed = 0;
  double amplitude_pp_mN = kDefaultAmplitudePpMn;
  std::optional<double> started_unix_s;  // live sessions: wall clock at creation
  SessionStatus status = SessionStatus::InProgress;
  std::vector<BlockPlan> blocks;
  std::vector<TrialRecord> trials;
  std::optional<AcceptRegion> region;
  std::vector<RoundPlan> rounds;

  std::size_t cursor() const { return trials.size(); }
};

/// Copies plans and trials out of `engine`; status follows engine completion
/// unless `status` overrides it.
SessionRecord snapshot(const ProtocolEngine& engine, std::string id, SessionMode mode, std::string subject_label,
                       std::optional<SubjectModel> subject = std::nullopt,
                       std::optional<SessionStatus> status = std::nullopt);

/// Replays the trial log; the engine resumes exactly at the record's cursor.
ProtocolEngine restore(const SessionRecord& record);

/// Recomputes every derived field from (seed, trials) and checks the mode
/// invariant. Throws std::invalid_argument on the first mismatch.
void verify_derived(const SessionRecord& record);

std::string simulated_session_id(int subject_id, std::uint64_t seed);

/// Runs (or continues) a simulated session. `max_trials` bounds the number of
/// trials taken in this call; the result is Partial when stopped early.
SessionRecord run_simulated_session(const SubjectModel& subject, std::uint64_t seed,
                                    std::optional<std::size_t> max_trials = std::nullopt);
SessionRecord resume_session(const SessionRecord& record, Responder& responder,
                             std::optional<std::size_t> max_trials = std::nullopt);

/// Default roster keyed by `study_seed`; every session uses it as protocol seed.
std::vector<SessionRecord> run_population(std::uint64_t study_seed);

nlohmann::json to_json(const SessionRecord& r);
SessionRecord session_from_json(const nlohmann::json& j);

/// Write-then-rename, so a crash never leaves a torn file behind.
void save_session(const std::filesystem::path& path, const SessionRecord& r);
SessionRecord load_session(const std::filesystem::path& path);

/// subject,section,block,duty_pct,duration_ms,direction,answer1,answer2,rating
/// Section-2 rows carry the round number in the block column.
void write_trials_csv(std::ostream& os, const SessionRecord& r, bool header = true);

}  // namespace clickrender
