#pragma once

#include "clickrender/signal.hpp"
#include "clickrender/trace.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace clickrender {

/// Isolated-path coupling, -40 dB.
inline constexpr double kDefaultLeakGain = 0.01;
/// Vibration detection threshold at 10 Hz (peak displacement).
inline constexpr double kPerceptionThresholdUm = 100.0;
/// Calibration target for the 10 Hz envelope of an energized finger.
inline constexpr double kEnergizedEnvelopeTargetUm = 691.9;
/// Beat-force amplitude used for the 10 Hz localization scenario (half of 500 mN pp).
inline constexpr double kBeatForceAmplitudeMn = 250.0;

/// Conductive layer split into selectively energized cells.
/// Cell index = row * n_cols + col, origin at the lower-left corner.
struct ElectrodeGrid {
  int n_cols = 1;
  int n_rows = 1;
  double cell_size_mm = 20.0;
  std::set<int> energized;

  int cell_count() const { return n_cols * n_rows; }
  std::optional<int> cell_at(double x_mm, double y_mm) const;
  bool is_energized(double x_mm, double y_mm) const;
  void validate() const;
};

/// Linear second-order fingertip model m x'' + b x' + k x = F.
struct FingerMechanics {
  double mass_kg;
  double stiffness_N_per_m;
  double damping_Ns_per_m;

  void validate() const;
  double natural_hz() const;
  /// Steady-state |x / F| at `freq_hz` in um per mN.
  double gain_um_per_mN(double freq_hz) const;
};

/// Parameters found by calibrate_mechanics() for the 691.9 um target at 10 Hz
/// under 250 mN, with m = 2 g and damping ratio 0.5.
FingerMechanics default_finger_mechanics();

/// Bisection on stiffness (mass and damping ratio fixed) until the
/// steady-state envelope under `force_amplitude_mN` at `freq_hz` equals `target_um`.
FingerMechanics calibrate_mechanics(double target_um, double force_amplitude_mN, double freq_hz,
                                    double mass_kg = 2.0e-3, double damping_ratio = 0.5);

struct FingerState {
  double displacement_um = 0.0;
  double velocity_um_s = 0.0;
};

struct Finger {
  std::string id;
  double x_mm = 0.0;
  double y_mm = 0.0;
  bool in_contact = true;
  double normal_mN = 0.0;
  bool grounded = true;
  FingerMechanics mech = default_finger_mechanics();
  FingerState state;

  void validate() const;
  void set_normal_force(double mN);  // contact follows the force
};

struct DeviceParams {
  double dt_s = 1e-5;
  double leak_gain = kDefaultLeakGain;
  double sensor_tau_s = 2e-3;
  double ultrasonic_displacement_um = 0.021;  // surface vibration seen by every contacting finger
  double sensor_noise_mN = 0.0;               // std of lateral sensor noise
  std::uint64_t noise_seed = 0;

  void validate() const;
};

struct DeviceState {
  ElectrodeGrid grid;
  std::vector<Finger> fingers;
  DriveConfig drive;
  DeviceParams params;
  double t_s = 0.0;
  double commanded_mN = 0.0;  // magnitude-signed command, direction applied through drive.phase_deg
  double sensed_lateral_mN = 0.0;
  std::uint64_t step_index = 0;

  Finger& finger(const std::string& id);
  const Finger& finger(const std::string& id) const;
  void validate() const;
};

struct GatedForce {
  double force_mN = 0.0;
  bool no_contact = false;
};

/// Lateral force reaching one finger. Full command when its cell is energized,
/// electroadhesion is on, and the finger is grounded; the leak fraction otherwise;
/// nothing when electroadhesion is off or the finger is lifted (flagged).
GatedForce force_on_finger(const Finger& finger, const ElectrodeGrid& grid, const DriveConfig& cfg,
                           double commanded_mN, double leak_gain = kDefaultLeakGain);

/// Advance every finger and the sensor lag by one step (semi-implicit Euler).
/// Throws std::invalid_argument if dt differs from params.dt_s and
/// std::runtime_error on a non-finite state.
DeviceState step(DeviceState state, double dt_s);

struct SensorReading {
  double lateral_mN;
  double normal_mN;
};

/// Force plate: lagged lateral force (first order, params.sensor_tau_s) plus the applied normal load.
SensorReading virtual_force_sensor(const DeviceState& state);

/// LDV-style probe: low-frequency fingertip displacement plus the ultrasonic surface motion.
double displacement_probe(const DeviceState& state, const Finger& finger);

enum class Band { Beat10Hz, Ultrasonic30kHz };

double band_center_hz(Band band);

/// Band-passes one finger's displacement channel around `band` and returns the
/// mean peak envelope (lock-in magnitude over whole band periods, first period skipped).
/// Throws std::invalid_argument when the trace spans fewer than 5 band periods.
double displacement_envelope(const Trace& trace, const std::string& finger_id, Band band);

/// Normal force versus time for one press.
class PressProfile {
 public:
  PressProfile(std::function<double(double)> normal_mN, double duration_s);

  /// Press starting at 0.26 s, rising through 600 mN at 0.40 s to a 900 mN hold,
  /// released by 0.70 s; one second long.
  static PressProfile default_click();
  static PressProfile constant(double normal_mN, double duration_s);
  /// Linear interpolation through (t_s, mN) points, held flat past the ends.
  static PressProfile piecewise_linear(std::vector<std::pair<double, double>> points, double duration_s);
  /// Several copies of `press` back to back.
  static PressProfile repeated(const PressProfile& press, int count);

  double operator()(double t_s) const { return fn_(t_s); }
  double duration_s() const { return duration_s_; }

 private:
  std::function<double(double)> fn_;
  double duration_s_;
};

/// Called once per step before integration, after the profile has set the normal force.
using StepHook = std::function<void(DeviceState&)>;

/// Drives `finger_id`'s normal force through `profile` while recording a Trace.
/// Throws std::invalid_argument if the profile goes negative.
Trace apply_press_profile(DeviceState& state, const PressProfile& profile, const std::string& finger_id,
                          const StepHook& hook = {});

/// Two grounded fingers on a two-cell grid: "index" over the energized cell,
/// "middle" over the isolated one; carriers at 30 kHz / 29.99 kHz.
DeviceState localization_scenario();

/// One grounded "index" finger on an energized single-cell surface.
DeviceState single_finger_scenario();

struct LocalizationResult {
  Trace trace;
  double energized_10hz_um;
  double isolated_10hz_um;
  double energized_30khz_um;
  double isolated_30khz_um;
  double isolation_db;
};

/// Runs the beat-force drive on every contacting finger for `duration_s` and
/// measures both envelopes for the first energized and first isolated finger.
LocalizationResult run_localization(DeviceState state, double duration_s = 2.0,
                                    double beat_amplitude_mN = kBeatForceAmplitudeMn);

}  // namespace clickrender
