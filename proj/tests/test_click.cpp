#include "clickrender/click.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace clickrender;

namespace {

// Independent reference: a trigger needs an upward crossing while armed; the
// button re-arms once the stimulus has finished and the force is below release.
std::vector<double> reference_triggers(const std::vector<std::pair<double, double>>& samples, double duration_ms) {
  std::vector<double> out;
  bool armed = true, running = false;
  double start = 0, prev = 0;
  for (const auto& [t, f] : samples) {
    if (running && (t - start) * 1e3 >= duration_ms) running = false;
    if (!running && !armed && f < kReleaseThresholdMn) armed = true;
    if (armed && !running && prev < kTriggerThresholdMn && f >= kTriggerThresholdMn) {
      out.push_back(t);
      armed = false;
      running = true;
      start = t;
    }
    prev = f;
  }
  return out;
}

std::vector<double> engine_triggers(const std::vector<std::pair<double, double>>& samples, double duration_ms) {
  ClickEngineState s;
  s.stimulus.duration_ms = duration_ms;
  std::vector<double> out;
  for (const auto& [t, f] : samples) {
    auto u = update(s, f, t);
    if (u.event) out.push_back(u.event->t_s);
    s = std::move(u.state);
  }
  return out;
}

std::vector<std::pair<double, double>> sampled(const PressProfile& p, double dt) {
  std::vector<std::pair<double, double>> v;
  for (double t = 0; t < p.duration_s(); t += dt) v.emplace_back(t, p(t));
  return v;
}

}  // namespace

TEST_CASE("ramp to 900 mN triggers once at the first sample at or above 600") {
  ClickEngineState s;
  std::vector<double> fired;
  for (int i = 0; i <= 900; ++i) {
    auto u = update(s, i, i * 1e-3);
    if (u.event) fired.push_back(i);
    s = u.state;
  }
  REQUIRE(fired.size() == 1);
  CHECK(fired[0] == 600);
}

TEST_CASE("holding at 900 mN never re-triggers") {
  ClickEngineState s;
  int n = 0;
  for (int i = 0; i <= 1000000; i += 10) {
    auto u = update(s, 900, i * 1e-5);
    n += u.event.has_value();
    s = u.state;
  }
  CHECK(n == 1);
  CHECK(s.mode == ClickMode::Refractory);
}

TEST_CASE("900 -> 100 -> 900 triggers twice") {
  const auto p = PressProfile::piecewise_linear({{0.0, 0}, {0.1, 900}, {0.4, 900}, {0.5, 100}, {0.6, 100}, {0.7, 900}}, 1.0);
  const auto samples = sampled(p, 1e-4);
  CHECK(engine_triggers(samples, 160).size() == 2);
  CHECK(reference_triggers(samples, 160).size() == 2);
}

TEST_CASE("a dip that stays above release does not re-arm") {
  const auto p = PressProfile::piecewise_linear({{0.0, 0}, {0.1, 900}, {0.4, 900}, {0.5, 400}, {0.6, 900}}, 1.0);
  CHECK(engine_triggers(sampled(p, 1e-4), 160).size() == 1);
}

TEST_CASE("state machine agrees with the reference on random force histories") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> force(0, 1000), dur(1, 251);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> knots{{0.0, 0}};
    for (int k = 1; k <= 12; ++k) knots.emplace_back(k * 0.05, force(gen));
    const auto samples = sampled(PressProfile::piecewise_linear(knots, 0.65), 5e-4);
    const double d = dur(gen);
    CHECK(engine_triggers(samples, d) == reference_triggers(samples, d));
  }
}

TEST_CASE("engine validation and errors") {
  ClickEngineState s;
  s.release_threshold_mN = 700;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  ClickEngineState ok;
  CHECK_THROWS_AS(update(ok, -1, 0), std::invalid_argument);
  auto u = update(ok, 10, 1.0);
  CHECK_THROWS_AS(update(u.state, 10, 0.5), std::invalid_argument);
  CHECK(std::string(to_string(ClickMode::Refractory)) == "REFRACTORY");
}

TEST_CASE("active command follows the stimulus") {
  ClickEngineState s;
  CHECK(active_command(s, 0.3) == 0.0);
  s.active = ActiveStimulus{{25, 160, 500}, 1.0};
  CHECK(active_command(s, 1.010) == 250);
  CHECK(active_command(s, 1.100) == -250);
  CHECK(active_command(s, 1.200) == 0);
}

TEST_CASE("rendered click is the commanded rectangular pair, lagged by the sensor") {
  const StimulusParams params{25, 160, 500};
  const ClickRender r = render_click(params, single_finger_scenario());
  REQUIRE(r.events.size() == 1);
  const Trace& t = r.trace;
  const auto trigger = static_cast<Eigen::Index>(std::llround((0.4 - t.t0_s) / t.sample_period_s));
  CHECK(t.normal_mN[trigger] >= 600);
  CHECK(t.normal_mN[trigger - 1] < 600);
  CHECK(t.command_mN[trigger] == 250);
  const auto lag = static_cast<Eigen::Index>(std::llround(2e-3 / t.sample_period_s));
  const auto n = static_cast<Eigen::Index>(std::llround(0.160 / t.sample_period_s));
  double sq = 0;
  for (Eigen::Index i = trigger; i < trigger + n; ++i) {
    const double e = t.lateral_mN[i] - t.command_mN[std::max(trigger, i - lag)];
    sq += e * e;
  }
  CHECK(std::sqrt(sq / n) <= 0.10 * params.amplitude_pp_mN);
  // Before the trigger and well after the stimulus the channel is quiet.
  CHECK(t.lateral_mN.head(trigger).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(t.lateral_mN[trigger + n + 3 * lag * 5]) < 1.0);
}

TEST_CASE("no press, no click") {
  const ClickRender r = render_click({25, 160, 500}, single_finger_scenario(), {}, PressProfile::constant(0, 0.5));
  CHECK(r.events.empty());
  CHECK(r.trace.lateral_mN.cwiseAbs().maxCoeff() == 0.0);
  const ClickRender light =
      render_click({25, 160, 500}, single_finger_scenario(), {}, PressProfile::constant(500, 0.5));
  CHECK(light.events.empty());
}

TEST_CASE("two presses render two non-overlapping stimuli") {
  const ClickRender r = render_click({50, 200, 500}, single_finger_scenario(), {},
                                     PressProfile::repeated(PressProfile::default_click(), 2));
  REQUIRE(r.events.size() == 2);
  CHECK(r.events[1].t_s - r.events[0].t_s >= 0.2);
  CHECK(r.events[1].t_s - r.events[0].t_s == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("telemetry stream: LED edge, then trigger, once per press") {
  std::vector<TelemetryFrame> frames;
  const int triggers = stream_press({25, 160, 500}, PressProfile::repeated(PressProfile::default_click(), 2),
                                    [&](const TelemetryFrame& f) {
                                      frames.push_back(f);
                                      return true;
                                    });
  CHECK(triggers == 2);
  int led_on = 0, led_off = 0, trig = 0;
  bool led = false;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (i) CHECK(f.t_s >= frames[i - 1].t_s);
    CHECK(f.led == (f.normal_mN >= 600));
    if (f.event == "led_on") {
      ++led_on;
      CHECK_FALSE(led);
      // The frame where the force first reaches the threshold carries the edge.
      REQUIRE(i + 1 < frames.size());
      CHECK(frames[i + 1].event == "trigger");
      CHECK(frames[i + 1].t_s == f.t_s);
    }
    if (f.event == "led_off") ++led_off;
    if (f.event == "trigger") {
      ++trig;
      REQUIRE(f.trigger);
      CHECK(f.trigger->params.duration_ms == 160);
    }
    if (f.led != led) CHECK((f.event == "led_on" || f.event == "led_off"));
    led = f.led;
  }
  CHECK(led_on == 2);
  CHECK(led_off == 2);
  CHECK(trig == 2);
  // 50 Hz regular frames over 2 s; an LED edge landing on the grid replaces that sample's regular frame.
  int on_grid = 0;
  for (const auto& f : frames)
    if (f.event != "trigger" && std::llround(f.t_s / 1e-5) % 2000 == 0) ++on_grid;
  CHECK(on_grid == 100);

  const auto j = to_json(frames.front());
  CHECK(j.contains("t"));
  CHECK(j.contains("normal_mN"));
  CHECK_FALSE(j.contains("event"));
}

TEST_CASE("telemetry sink can stop the stream") {
  int n = 0;
  stream_press({25, 160, 500}, PressProfile::default_click(), [&](const TelemetryFrame&) { return ++n < 5; });
  CHECK(n == 5);
}
