#pragma once

#include <Eigen/Core>

#include <iosfwd>

namespace clickrender {

/// Dual-carrier drive: piezo (in-plane ultrasonic oscillation) and
/// electroadhesion voltage. The lateral force on a grounded finger follows the
/// phase between the two; detuned carriers produce a force that beats at
/// |piezo_hz - ea_hz|.
struct DriveConfig {
  double piezo_hz = 30000.0;
  double ea_hz = 29990.0;
  int phase_deg = 0;  // 0 pushes the finger left (+), 180 pushes it right (-)
  bool ea_enabled = true;

  void validate() const;
};

/// One click stimulus: a single cycle of a rectangular lateral-force wave.
struct StimulusParams {
  double duty_pct = 25.0;
  double duration_ms = 160.0;
  double amplitude_pp_mN = 500.0;

  void validate() const;

  /// Width of the leading positive-force phase.
  double initial_width_ms() const { return duty_pct / 100.0 * duration_ms; }
};

inline constexpr double kDefaultAmplitudePpMn = 500.0;

double beat_frequency(const DriveConfig& cfg);

/// Commanded lateral force (mN) at `t_ms` after the trigger.
/// +A/2 over the positive phase, -A/2 until `duration_ms`, then 0.
double command_force(const StimulusParams& params, double t_ms);

/// Electroadhesion phase that produces a force of the given sign: +1 -> 0 deg, -1 -> 180 deg.
int phase_for_force_sign(int sign);

/// Direction (+1/-1) a phase pushes the finger.
int force_sign_for_phase(int phase_deg);

/// Carrier-averaged lateral force of the dual-carrier drive with the
/// ultrasonic carriers held analytically: A * cos(2 pi (fp - fe) t + phase).
double beat_force(const DriveConfig& cfg, double amplitude_mN, double t_s);

/// Debug render: synthesizes both carriers sample by sample at `sample_rate_hz`,
/// forms the instantaneous friction force (electroadhesive normal load times the
/// sign of the surface velocity) and removes the carrier band with a cascaded
/// one-carrier-period moving average. The result approximates beat_force().
Eigen::VectorXd render_carrier_force(const DriveConfig& cfg, double amplitude_mN,
                                     double sample_rate_hz, double duration_s);

/// command_force() sampled every `dt_s` over [0, span_s].
Eigen::VectorXd sample_command(const StimulusParams& params, double dt_s, double span_s);

/// Frequency of a roughly sinusoidal record from its zero crossings
/// (Schmitt trigger at +/- `hysteresis` x peak, crossing times interpolated).
double zero_crossing_frequency(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz,
                               double hysteresis = 0.05);

/// CSV with header `t_s,force_mN`.
void write_waveform_csv(std::ostream& os, double dt_s, const Eigen::Ref<const Eigen::VectorXd>& force_mN);

}  // namespace clickrender
