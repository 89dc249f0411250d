#include "clickrender/session.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

using namespace clickrender;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("clickrender-test-session-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("simulated session is complete, replayable and deterministic") {
  const auto subject = default_population(7)[6];
  const SessionRecord a = run_simulated_session(subject, 7);
  const SessionRecord b = run_simulated_session(subject, 7);
  CHECK(a.id == "sim-s07-seed7");
  CHECK(a.status == SessionStatus::Complete);
  CHECK(a.mode == SessionMode::Simulated);
  CHECK(a.cursor() == a.trials.size());
  CHECK(to_json(a) == to_json(b));
  CHECK_NOTHROW(verify_derived(a));
  CHECK(to_json(run_simulated_session(subject, 8)) != to_json(a));
}

TEST_CASE("JSON and file round trip") {
  const SessionRecord r = run_simulated_session(default_population(3)[0], 3);
  const auto j = to_json(r);
  CHECK(j.at("schema") == kSessionSchema);
  CHECK(j.at("cursor") == r.trials.size());
  CHECK(to_json(session_from_json(j)) == j);

  const auto dir = scratch("file");
  save_session(dir / "s.json", r);
  CHECK(to_json(load_session(dir / "s.json")) == j);
  CHECK_FALSE(std::filesystem::exists(dir / "s.json.tmp"));

  auto wrong_schema = j;
  wrong_schema["schema"] = "clickrender.session/0";
  CHECK_THROWS_AS(session_from_json(wrong_schema), std::invalid_argument);
  auto wrong_cursor = j;
  wrong_cursor["cursor"] = 3;
  CHECK_THROWS_AS(session_from_json(wrong_cursor), std::invalid_argument);
  CHECK_THROWS(load_session(dir / "missing.json"));
  std::ofstream(dir / "junk.json") << "{not json";
  CHECK_THROWS_AS(load_session(dir / "junk.json"), std::invalid_argument);
}

TEST_CASE("verify_derived catches edited derived fields") {
  const SessionRecord r = run_simulated_session(default_population(3)[1], 3);
  SessionRecord region = r;
  region.region->by_duty.begin()->second.max_ms += 10;
  CHECK_THROWS_AS(verify_derived(region), std::invalid_argument);
  SessionRecord rounds = r;
  rounds.rounds.pop_back();
  CHECK_THROWS_AS(verify_derived(rounds), std::invalid_argument);
  SessionRecord status = r;
  status.status = SessionStatus::InProgress;
  CHECK_THROWS_AS(verify_derived(status), std::invalid_argument);
  SessionRecord trial = r;
  trial.trials[10].duration_ms += 10;
  CHECK_THROWS_AS(verify_derived(trial), std::invalid_argument);
}

TEST_CASE("live and simulated responses never mix") {
  SessionRecord sim = run_simulated_session(default_population(3)[1], 3, 5);
  sim.trials[2].responder = "live:alice";
  CHECK_THROWS_AS(verify_derived(sim), std::invalid_argument);

  SessionRecord live = run_simulated_session(default_population(3)[1], 3, 5);
  live.mode = SessionMode::Live;
  live.subject.reset();
  CHECK_THROWS_AS(verify_derived(live), std::invalid_argument);
  for (auto& t : live.trials) t.responder = "live:alice";
  CHECK_NOTHROW(verify_derived(live));
}

TEST_CASE("a partial session resumes to the same result") {
  const auto subject = default_population(11)[4];
  const SessionRecord full = run_simulated_session(subject, 11);
  const SessionRecord part = run_simulated_session(subject, 11, 100);
  CHECK(part.status == SessionStatus::Partial);
  CHECK(part.trials.size() == 100);
  CHECK_NOTHROW(verify_derived(part));

  // Persist, reload, resume: the engine picks up exactly at the cursor.
  const auto dir = scratch("resume");
  save_session(dir / "p.json", part);
  const SessionRecord loaded = load_session(dir / "p.json");
  const ProtocolEngine engine = restore(loaded);
  CHECK(engine.trials().size() == 100);
  const Prompt next = *engine.next();
  CHECK(next.trial_index == 100);
  CHECK(next.duty_pct == full.trials[100].duty_pct);
  CHECK(next.duration_ms == full.trials[100].duration_ms);
  CHECK(to_json(engine.blocks()[0]) == to_json(full.blocks[0]));

  SimulatedResponder sim(subject);
  const SessionRecord done = resume_session(loaded, sim);
  CHECK(done.status == SessionStatus::Complete);
  CHECK(to_json(done) == to_json(full));
}

TEST_CASE("population run") {
  const auto sessions = run_population(20200101);
  REQUIRE(sessions.size() == 10);
  for (const auto& s : sessions) {
    CHECK(s.status == SessionStatus::Complete);
    CHECK(s.seed == 20200101);
    int max_rating = 0;
    for (const auto& t : s.trials)
      if (t.rating) max_rating = std::max(max_rating, *t.rating);
    CHECK(max_rating >= 6);
  }
}

TEST_CASE("trial CSV") {
  const SessionRecord r = run_simulated_session(default_population(3)[0], 3);
  std::ostringstream os;
  write_trials_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "subject,section,block,duty_pct,duration_ms,direction,answer1,answer2,rating");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == r.trials.size());
  CHECK(os.str().find("\nsim-s01,1,1,") != std::string::npos);
  std::ostringstream bare;
  write_trials_csv(bare, r, false);
  CHECK(bare.str().rfind("sim-s01,1,1,", 0) == 0);
}

TEST_CASE("mode and status strings") {
  CHECK(std::string(to_string(SessionMode::Live)) == "LIVE");
  CHECK(session_mode_from_string("SIMULATED") == SessionMode::Simulated);
  CHECK(session_status_from_string("PARTIAL") == SessionStatus::Partial);
  CHECK_THROWS_AS(session_mode_from_string("live"), std::invalid_argument);
  CHECK_THROWS_AS(session_status_from_string("DONE"), std::invalid_argument);
}
