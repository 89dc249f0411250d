#include "clickrender/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace clickrender {

const char* to_string(SessionMode m) {
  return m == SessionMode::Simulated ? "SIMULATED" : "LIVE";
}

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::InProgress: return "IN_PROGRESS";
    case SessionStatus::Partial: return "PARTIAL";
    case SessionStatus::Complete: return "COMPLETE";
  }
  return "?";
}

SessionMode session_mode_from_string(const std::string& s) {
  if (s == "SIMULATED") return SessionMode::Simulated;
  if (s == "LIVE") return SessionMode::Live;
  throw std::invalid_argument("mode must be SIMULATED or LIVE, got '" + s + "'");
}

SessionStatus session_status_from_string(const std::string& s) {
  if (s == "IN_PROGRESS") return SessionStatus::InProgress;
  if (s == "PARTIAL") return SessionStatus::Partial;
  if (s == "COMPLETE") return SessionStatus::Complete;
  throw std::invalid_argument("unknown session status '" + s + "'");
}

SessionRecord snapshot(const ProtocolEngine& engine, std::string id, SessionMode mode, std::string subject_label,
                       std::optional<SubjectModel> subject, std::optional<SessionStatus> status) {
  SessionRecord r;
  r.id = std::move(id);
  r.mode = mode;
  r.subject_label = std::move(subject_label);
  r.subject = std::move(subject);
  r.seed = engine.seed();
  r.amplitude_pp_mN = engine.amplitude_pp_mN();
  r.status = status.value_or(engine.complete() ? SessionStatus::Complete : SessionStatus::InProgress);
  r.blocks = engine.blocks();
  r.trials = engine.trials();
  r.region = engine.region();
  r.rounds = engine.rounds();
  return r;
}

ProtocolEngine restore(const SessionRecord& record) {
  return ProtocolEngine::replay(record.seed, record.trials, record.amplitude_pp_mN);
}

void verify_derived(const SessionRecord& record) {
  const ProtocolEngine engine = restore(record);
  auto same = [](const nlohmann::json& a, const nlohmann::json& b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string("derived field mismatch: ") + what);
  };
  nlohmann::json blocks_a = nlohmann::json::array(), blocks_b = nlohmann::json::array();
  for (const auto& b : record.blocks) blocks_a.push_back(to_json(b));
  for (const auto& b : engine.blocks()) blocks_b.push_back(to_json(b));
  same(blocks_a, blocks_b, "blocks");
  same(record.region ? to_json(*record.region) : nlohmann::json(),
       engine.region() ? to_json(*engine.region()) : nlohmann::json(), "region");
  nlohmann::json rounds_a = nlohmann::json::array(), rounds_b = nlohmann::json::array();
  for (const auto& r : record.rounds) rounds_a.push_back(to_json(r));
  for (const auto& r : engine.rounds()) rounds_b.push_back(to_json(r));
  same(rounds_a, rounds_b, "rounds");
  if ((record.status == SessionStatus::Complete) != engine.complete())
    throw std::invalid_argument("derived field mismatch: status");
  for (const auto& t : record.trials) {
    const bool simulated = t.responder.rfind("sim-", 0) == 0;
    if (simulated != (record.mode == SessionMode::Simulated))
      throw std::invalid_argument(std::string(to_string(record.mode)) + " session holds a response from '" +
                                  t.responder + "'");
  }
}

std::string simulated_session_id(int subject_id, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "sim-s%02d-seed%llu", subject_id, static_cast<unsigned long long>(seed));
  return buf;
}

SessionRecord run_simulated_session(const SubjectModel& subject, std::uint64_t seed,
                                    std::optional<std::size_t> max_trials) {
  SimulatedResponder responder(subject);
  ProtocolEngine engine(seed);
  const bool finished = drive(engine, responder, max_trials);
  const auto status = engine.complete() ? SessionStatus::Complete
                                        : (finished && !max_trials ? SessionStatus::InProgress : SessionStatus::Partial);
  return snapshot(engine, simulated_session_id(subject.id, seed), SessionMode::Simulated, responder.id(), subject,
                  status);
}

SessionRecord resume_session(const SessionRecord& record, Responder& responder,
                             std::optional<std::size_t> max_trials) {
  ProtocolEngine engine = restore(record);
  drive(engine, responder, max_trials);
  SessionRecord out = snapshot(engine, record.id, record.mode, record.subject_label, record.subject,
                               engine.complete() ? SessionStatus::Complete : SessionStatus::Partial);
  out.started_unix_s = record.started_unix_s;
  return out;
}

std::vector<SessionRecord> run_population(std::uint64_t study_seed) {
  std::vector<SessionRecord> out;
  for (const auto& s : default_population(study_seed)) out.push_back(run_simulated_session(s, study_seed));
  return out;
}

nlohmann::json to_json(const SessionRecord& r) {
  nlohmann::json blocks = nlohmann::json::array(), trials = nlohmann::json::array(), rounds = nlohmann::json::array();
  for (const auto& b : r.blocks) blocks.push_back(to_json(b));
  for (const auto& t : r.trials) trials.push_back(to_json(t));
  for (const auto& x : r.rounds) rounds.push_back(to_json(x));
  nlohmann::json j{{"schema", kSessionSchema},
          {"id", r.id},
          {"mode", to_string(r.mode)},
          {"subject_label", r.subject_label},
          {"subject", r.subject ? to_json(*r.subject) : nlohmann::json()},
          {"seed", r.seed},
          {"amplitude_pp_mN", r.amplitude_pp_mN},
          {"status", to_string(r.status)},
          {"cursor", r.cursor()},
          {"blocks", blocks},
          {"region", r.region ? to_json(*r.region) : nlohmann::json()},
          {"rounds", rounds},
          {"trials", trials}};
  if (r.started_unix_s) j["started_unix_s"] = *r.started_unix_s;
  return j;
}

namespace {

BlockPlan block_from_json(const nlohmann::json& j) {
  return {j.at("duty_pct").get<int>(), direction_from_string(j.at("direction").get<std::string>()),
          j.at("durations").get<std::vector<int>>()};
}

RoundPlan round_from_json(const nlohmann::json& j) {
  RoundPlan r;
  r.round = j.at("round").get<int>();
  for (const auto& dj : j.at("duties")) {
    DutyRound d;
    d.duty_pct = dj.at("duty_pct").get<int>();
    d.durations = dj.at("durations").get<std::vector<int>>();
    if (dj.contains("best_ms")) d.best_ms = dj["best_ms"].get<int>();
    r.duties.push_back(std::move(d));
  }
  for (const auto& o : j.at("order")) r.order.push_back({o.at(0).get<int>(), o.at(1).get<int>()});
  return r;
}

}  // namespace

SessionRecord session_from_json(const nlohmann::json& j) {
  SessionRecord r;
  try {
    if (j.at("schema").get<std::string>() != kSessionSchema)
      throw std::invalid_argument("unsupported session schema '" + j.at("schema").get<std::string>() + "'");
    r.id = j.at("id").get<std::string>();
    r.mode = session_mode_from_string(j.at("mode").get<std::string>());
    r.subject_label = j.at("subject_label").get<std::string>();
    if (!j.at("subject").is_null()) r.subject = subject_from_json(j["subject"]);
    r.seed = j.at("seed").get<std::uint64_t>();
    r.amplitude_pp_mN = j.at("amplitude_pp_mN").get<double>();
    r.status = session_status_from_string(j.at("status").get<std::string>());
    if (j.contains("started_unix_s")) r.started_unix_s = j["started_unix_s"].get<double>();
    for (const auto& b : j.at("blocks")) r.blocks.push_back(block_from_json(b));
    if (!j.at("region").is_null()) r.region = region_from_json(j["region"]);
    for (const auto& x : j.at("rounds")) r.rounds.push_back(round_from_json(x));
    for (const auto& t : j.at("trials")) r.trials.push_back(trial_from_json(t));
    if (j.at("cursor").get<std::size_t>() != r.trials.size())
      throw std::invalid_argument("session cursor does not match the trial log");
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed session: ") + e.what());
  }
  return r;
}

void save_session(const std::filesystem::path& path, const SessionRecord& r) {
  const std::string text = to_json(r).dump(1) + "\n";
  const std::filesystem::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw std::system_error(errno, std::generic_category(), "open " + tmp.string());
  std::size_t off = 0;
  while (off < text.size()) {
    const ssize_t n = ::write(fd, text.data() + off, text.size() - off);
    if (n < 0) {
      const int err = errno;
      ::close(fd);
      throw std::system_error(err, std::generic_category(), "write " + tmp.string());
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::filesystem::rename(tmp, path);
}

SessionRecord load_session(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open session file " + path.string());
  try {
    return session_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_trials_csv(std::ostream& os, const SessionRecord& r, bool header) {
  if (header) os << "subject,section,block,duty_pct,duration_ms,direction,answer1,answer2,rating\n";
  for (const auto& t : r.trials) {
    os << r.subject_label << ',' << t.section << ',' << (t.section == 1 ? t.block : t.round) << ',' << t.duty_pct
       << ',' << t.duration_ms << ',' << (t.direction ? to_string(*t.direction) : "") << ','
       << (t.acceptable ? (*t.acceptable ? "YES" : "NO") : "") << ',' << (t.percept ? to_string(*t.percept) : "")
       << ',';
    if (t.rating) os << *t.rating;
    os << '\n';
  }
}

}  // namespace clickrender
