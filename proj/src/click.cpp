#include "clickrender/click.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clickrender {

const char* to_string(ClickMode mode) {
  switch (mode) {
    case ClickMode::Idle: return "IDLE";
    case ClickMode::Armed: return "ARMED";
    case ClickMode::Triggered: return "TRIGGERED";
    case ClickMode::Refractory: return "REFRACTORY";
  }
  return "?";
}

void ClickEngineState::validate() const {
  if (!(release_threshold_mN < trigger_threshold_mN))
    throw std::invalid_argument("release threshold must sit below the trigger threshold");
  stimulus.validate();
}

ClickUpdate update(const ClickEngineState& state, double normal_mN, double t_s) {
  if (!(normal_mN >= 0.0)) throw std::invalid_argument("click engine: negative normal force");
  if (state.last_t_s && t_s < *state.last_t_s) throw std::invalid_argument("click engine: time went backwards");

  ClickUpdate out{state, std::nullopt};
  auto& s = out.state;
  const bool contact = normal_mN > 0.0;
  const bool crossed_up = normal_mN >= s.trigger_threshold_mN && s.last_normal_mN < s.trigger_threshold_mN;

  switch (s.mode) {
    case ClickMode::Idle:
      if (!contact) break;
      s.mode = ClickMode::Armed;
      [[fallthrough]];
    case ClickMode::Armed:
      if (crossed_up) {
        s.mode = ClickMode::Triggered;
        s.active = ActiveStimulus{s.stimulus, t_s};
        out.event = TriggerEvent{t_s, s.stimulus, s.finger_id};
      } else if (!contact) {
        s.mode = ClickMode::Idle;
      }
      break;
    case ClickMode::Triggered:
      // The stimulus always runs to completion, lift-off or not.
      if ((t_s - s.active->start_s) * 1e3 >= s.active->params.duration_ms) {
        s.active.reset();
        s.mode = normal_mN < s.release_threshold_mN ? ClickMode::Armed : ClickMode::Refractory;
      }
      break;
    case ClickMode::Refractory:
      if (normal_mN < s.release_threshold_mN) s.mode = ClickMode::Armed;
      break;
  }
  s.last_normal_mN = normal_mN;
  s.last_t_s = t_s;
  return out;
}

double active_command(const ClickEngineState& state, double t_s) {
  if (!state.active) return 0.0;
  return command_force(state.active->params, std::max(0.0, (t_s - state.active->start_s) * 1e3));
}

ClickRender render_click(const StimulusParams& params, DeviceState device, ClickEngineState engine,
                         const PressProfile& profile, double align_at_s) {
  params.validate();
  engine.stimulus = params;
  engine.validate();
  const Finger& target = device.finger(engine.finger_id);
  if (!device.grid.is_energized(target.x_mm, target.y_mm) || !target.grounded)
    throw std::invalid_argument("render_click: the pressing finger must be grounded over an energized cell");

  std::vector<TriggerEvent> events;
  const double t_origin = device.t_s;
  auto hook = [&](DeviceState& dev) {
    const double t = dev.t_s - t_origin;
    auto result = update(engine, dev.finger(engine.finger_id).normal_mN, t);
    engine = std::move(result.state);
    if (result.event) events.push_back(*result.event);
    const double cmd = active_command(engine, t);
    // Carriers stay on throughout; only electroadhesion enable and phase follow the command.
    dev.drive.ea_enabled = cmd != 0.0;
    if (cmd != 0.0) dev.drive.phase_deg = phase_for_force_sign(cmd > 0.0 ? 1 : -1);
    dev.commanded_mN = std::abs(cmd);
  };
  Trace trace = apply_press_profile(device, profile, engine.finger_id, hook);
  if (!events.empty()) {
    trace.t0_s = align_at_s - events.front().t_s;
  }
  return {std::move(trace), std::move(events), std::move(engine)};
}

namespace {
struct StopStream {};
}  // namespace

int stream_press(const StimulusParams& params, const PressProfile& profile,
                 const std::function<bool(const TelemetryFrame&)>& sink, double rate_hz) {
  params.validate();
  if (!(rate_hz > 0.0)) throw std::invalid_argument("telemetry rate must be positive");
  DeviceState device = single_finger_scenario();
  ClickEngineState engine;
  engine.stimulus = params;
  engine.validate();
  const auto every = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(1.0 / (rate_hz * device.params.dt_s))));

  int triggers = 0;
  bool led = false;
  std::uint64_t step = 0;
  auto emit = [&](TelemetryFrame f) {
    if (!sink(f)) throw StopStream{};
  };
  auto hook = [&](DeviceState& dev) {
    const double t = dev.t_s;
    const double normal = dev.finger(engine.finger_id).normal_mN;
    auto result = update(engine, normal, t);
    engine = std::move(result.state);
    const double cmd = active_command(engine, t);
    dev.drive.ea_enabled = cmd != 0.0;
    if (cmd != 0.0) dev.drive.phase_deg = phase_for_force_sign(cmd > 0.0 ? 1 : -1);
    dev.commanded_mN = std::abs(cmd);

    TelemetryFrame f{t, normal, dev.sensed_lateral_mN, normal >= engine.trigger_threshold_mN, std::nullopt, std::nullopt};
    const bool led_changed = f.led != led;
    led = f.led;
    if (led_changed) {
      f.event = led ? "led_on" : "led_off";
      emit(f);
    } else if (step % every == 0) {
      emit(f);
    }
    if (result.event) {
      ++triggers;
      TelemetryFrame tf = f;
      tf.event = "trigger";
      tf.trigger = result.event;
      emit(tf);
    }
    ++step;
  };
  try {
    apply_press_profile(device, profile, engine.finger_id, hook);
  } catch (const StopStream&) {
  }
  return triggers;
}

nlohmann::json to_json(const TelemetryFrame& f) {
  nlohmann::json j{{"t", f.t_s}, {"normal_mN", f.normal_mN}, {"lateral_mN", f.lateral_mN}, {"led", f.led}};
  if (f.event) j["event"] = *f.event;
  if (f.trigger)
    j["params"] = {{"duty_pct", f.trigger->params.duty_pct},
                   {"duration_ms", f.trigger->params.duration_ms},
                   {"amplitude_pp_mN", f.trigger->params.amplitude_pp_mN},
                   {"finger_id", f.trigger->finger_id}};
  return j;
}

}  // namespace clickrender
