#pragma once

#include "clickrender/device.hpp"
#include "clickrender/signal.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace clickrender {

inline constexpr double kTriggerThresholdMn = 600.0;
inline constexpr double kReleaseThresholdMn = 300.0;

enum class ClickMode { Idle, Armed, Triggered, Refractory };

const char* to_string(ClickMode mode);

struct ActiveStimulus {
  StimulusParams params;
  double start_s;
};

/// Button state machine. Fires one stimulus per upward crossing of the trigger
/// threshold and re-arms only after the force drops below the release threshold.
struct ClickEngineState {
  ClickMode mode = ClickMode::Idle;
  double trigger_threshold_mN = kTriggerThresholdMn;
  double release_threshold_mN = kReleaseThresholdMn;
  StimulusParams stimulus;  // rendered on the next trigger
  std::string finger_id = "index";
  std::optional<ActiveStimulus> active;
  double last_normal_mN = 0.0;
  std::optional<double> last_t_s;

  void validate() const;
};

struct TriggerEvent {
  double t_s;
  StimulusParams params;
  std::string finger_id;
};

struct ClickUpdate {
  ClickEngineState state;
  std::optional<TriggerEvent> event;
};

/// Throws std::invalid_argument on negative force or time running backwards.
ClickUpdate update(const ClickEngineState& state, double normal_mN, double t_s);

/// Lateral command of the running stimulus at `t_s` (0 when none is active).
double active_command(const ClickEngineState& state, double t_s);

struct ClickRender {
  Trace trace;
  std::vector<TriggerEvent> events;
  ClickEngineState engine;
};

/// Presses `finger_id` through `profile` with the engine wired to the drive:
/// at each step the engine sees the normal force, and a running stimulus sets
/// the electroadhesion phase (sign) and command magnitude. The trace is shifted
/// so the first trigger sits at `align_at_s` (unshifted when nothing triggered).
ClickRender render_click(const StimulusParams& params, DeviceState device, ClickEngineState engine = {},
                         const PressProfile& profile = PressProfile::default_click(), double align_at_s = 0.4);

/// One sample of the live gauge. Regular frames carry no event; event frames
/// are emitted at full rate as soon as the event happens.
struct TelemetryFrame {
  double t_s = 0.0;
  double normal_mN = 0.0;
  double lateral_mN = 0.0;  // sensed
  bool led = false;         // normal force at or above the trigger threshold
  std::optional<std::string> event;  // "led_on", "led_off" or "trigger"
  std::optional<TriggerEvent> trigger;
};

inline constexpr double kTelemetryRateHz = 50.0;

/// Presses the single-finger surface through `profile` with the click engine
/// armed for `params`, handing frames to `sink` in time order. A trigger frame
/// always follows the led_on frame of the sample that crossed the threshold.
/// Returns the number of triggers. `sink` may return false to stop early.
int stream_press(const StimulusParams& params, const PressProfile& profile,
                 const std::function<bool(const TelemetryFrame&)>& sink, double rate_hz = kTelemetryRateHz);

nlohmann::json to_json(const TelemetryFrame& f);

}  // namespace clickrender
