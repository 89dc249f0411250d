#include "clickrender/subject.hpp"

#include <doctest.h>

#include <stdexcept>

using namespace clickrender;

namespace {

SubjectModel noiseless(SubjectModel s) {
  s.judgment_noise = 0.0;
  return s;
}

// Duration (1..251) with the highest rating; first one wins ties.
int argmax_duration(const SubjectModel& s, int duty) {
  int best = 1, best_rating = -1;
  for (int d = 1; d <= 251; ++d) {
    const int r = rate(s, StimulusParams{double(duty), double(d), 500});
    if (r > best_rating) best = d, best_rating = r;
  }
  return best;
}

}  // namespace

TEST_CASE("roster shape") {
  const auto roster = default_population();
  REQUIRE(roster.size() == 10);
  int groups[4] = {};
  for (const auto& s : roster) ++groups[s.group];
  CHECK(groups[1] == 6);
  CHECK(groups[2] == 3);
  CHECK(groups[3] == 1);
  CHECK(to_json(default_population()[3]) == to_json(roster[3]));
  CHECK(default_population(1)[0].seed != default_population(2)[0].seed);
  CHECK(to_json(default_population(1)[0]).at("detect_width_ms") == to_json(default_population(2)[0]).at("detect_width_ms"));
}

TEST_CASE("percept examples") {
  for (const auto& s : default_population()) {
    CHECK(percept(s, StimulusParams{5, 9, 500}) == Percept::Pulse);
    CHECK(percept(s, StimulusParams{50, 240, 500}) == Percept::Oscillation);
  }
  SubjectModel s = noiseless(default_population()[0]);
  const double onset = s.osc_onset_at(25);
  CHECK(percept(s, StimulusParams{25, onset, 500}) == Percept::Pulse);
  CHECK(percept(s, StimulusParams{25, onset + 0.01, 500}) == Percept::Oscillation);
}

TEST_CASE("onset interpolation") {
  SubjectModel s;
  s.osc_onset_ms = {150, 100, 80};
  CHECK(s.osc_onset_at(5) == 150);
  CHECK(s.osc_onset_at(15) == doctest::Approx(125));
  CHECK(s.osc_onset_at(37.5) == doctest::Approx(90));
  CHECK(s.osc_onset_at(1) == 150);
  CHECK(s.osc_onset_at(90) == 80);
}

TEST_CASE("sweep persistence shifts the transition in the sweep direction") {
  SubjectModel s = noiseless(default_population()[0]);
  const double onset = s.osc_onset_at(25);
  Presentation p{StimulusParams{25, onset * 1.2, 500}};
  CHECK(percept(s, p) == Percept::Oscillation);
  p.sweep = SweepContext::Increasing;
  CHECK(percept(s, p) == Percept::Pulse);
  p.params.duration_ms = onset * 0.8;
  p.sweep = SweepContext::Decreasing;
  CHECK(percept(s, p) == Percept::Oscillation);
  p.sweep = SweepContext::None;
  CHECK(percept(s, p) == Percept::Pulse);
}

TEST_CASE("judge examples") {
  int no_at_1ms = 0;
  for (const auto& raw : default_population()) {
    const auto s = noiseless(raw);
    CHECK(judge(s, StimulusParams{5, 100, 500}));
    CHECK_FALSE(judge(s, StimulusParams{25, 200, 500}));
    no_at_1ms += !judge(s, StimulusParams{50, 1, 500});
  }
  CHECK(no_at_1ms >= 8);
}

TEST_CASE("acceptability needs a felt vibration") {
  const auto s = noiseless(default_population()[0]);
  Presentation p{StimulusParams{5, 100, 500}};
  CHECK(acceptable(s, p));
  p.envelope_um = 6.9;  // isolated finger
  CHECK_FALSE(acceptable(s, p));
}

TEST_CASE("acceptable durations form one interval when noise is off") {
  for (const auto& raw : default_population()) {
    const auto s = noiseless(raw);
    for (int duty = 1; duty <= 100; duty += 3) {
      int transitions = 0;
      bool prev = false;
      for (double d = 1; d <= 300; d += 0.5) {
        const bool ok = judge(s, StimulusParams{double(duty), d, 500});
        transitions += ok != prev;
        prev = ok;
      }
      transitions += prev;  // close the interval at the end
      CHECK(transitions <= 2);
    }
  }
}

TEST_CASE("lapses hit at the configured rate, deterministically") {
  const auto s = default_population()[4];
  int lapses = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Presentation p{StimulusParams{5, 100, 500}};
    p.trial_index = static_cast<std::uint64_t>(i);
    lapses += !judge(s, p);
    CHECK(judge(s, p) == judge(s, p));
  }
  CHECK(double(lapses) / n == doctest::Approx(0.05).epsilon(0.2));
}

TEST_CASE("ratings") {
  auto s = noiseless(default_population()[0]);
  // width == preferred width -> peak
  CHECK(rate(s, StimulusParams{5, s.preferred_width_ms / 0.05, 500}) == 7);
  CHECK(rate(s, StimulusParams{25, 250, 500}) == 0);  // judged NO
  for (int d = 1; d <= 251; ++d) {
    const StimulusParams p{25, double(d), 500};
    const int r = rate(s, p);
    CHECK(r >= 0);
    CHECK(r <= 7);
    if (!judge(s, p)) CHECK(r == 0);
  }
  s.rating_peak = 5;
  CHECK(rate(s, StimulusParams{5, s.preferred_width_ms / 0.05, 500}) == 5);
}

TEST_CASE("group-1 subjects prefer longer clicks at lower duty") {
  for (const auto& raw : default_population()) {
    if (raw.group != 1) continue;
    const auto s = noiseless(raw);
    CHECK(argmax_duration(s, 5) > argmax_duration(s, 25));
    CHECK(argmax_duration(s, 25) > argmax_duration(s, 50));
  }
}

TEST_CASE("subject validation and JSON") {
  SubjectModel s;
  s.rating_peak = 8;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SubjectModel{};
  s.detect_width_ms = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SubjectModel{};
  s.osc_onset_ms[1] = -1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  const auto orig = default_population()[9];
  const auto j = to_json(orig);
  CHECK(j.at("osc_onset_ms").at("50") == 100.0);
  CHECK(to_json(subject_from_json(j)) == j);
  auto bad = j;
  bad.erase("group");
  CHECK_THROWS_AS(subject_from_json(bad), std::invalid_argument);
  CHECK(percept_from_string("PULSE") == Percept::Pulse);
  CHECK_THROWS_AS(percept_from_string("pulse"), std::invalid_argument);
}
