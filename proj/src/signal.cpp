#include "clickrender/signal.hpp"

#include "clickrender/format.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clickrender {

void DriveConfig::validate() const {
  if (!(piezo_hz > 0.0) || !(ea_hz > 0.0)) throw std::invalid_argument("carrier frequencies must be positive");
  if (phase_deg != 0 && phase_deg != 180) throw std::invalid_argument("phase must be 0 or 180 degrees");
}

void StimulusParams::validate() const {
  if (!(duty_pct > 0.0 && duty_pct <= 100.0)) throw std::invalid_argument("duty cycle must lie in (0, 100]");
  if (!(duration_ms >= 1.0)) throw std::invalid_argument("duration must be at least 1 ms");
  if (!(amplitude_pp_mN > 0.0)) throw std::invalid_argument("amplitude must be positive");
}

double beat_frequency(const DriveConfig& cfg) {
  cfg.validate();
  return std::abs(cfg.piezo_hz - cfg.ea_hz);
}

double command_force(const StimulusParams& params, double t_ms) {
  if (!(t_ms >= 0.0)) throw std::invalid_argument("command_force: t must be non-negative");
  const double positive_end = params.initial_width_ms();
  const double half = params.amplitude_pp_mN / 2.0;
  if (t_ms < positive_end) return half;
  if (t_ms < params.duration_ms) return -half;
  return 0.0;
}

int phase_for_force_sign(int sign) {
  if (sign == 1) return 0;
  if (sign == -1) return 180;
  throw std::invalid_argument("force sign must be +1 or -1, got " + std::to_string(sign));
}

int force_sign_for_phase(int phase_deg) {
  if (phase_deg == 0) return 1;
  if (phase_deg == 180) return -1;
  throw std::invalid_argument("phase must be 0 or 180 degrees");
}

double beat_force(const DriveConfig& cfg, double amplitude_mN, double t_s) {
  if (!cfg.ea_enabled) return 0.0;
  const double dphi = 2.0 * std::numbers::pi * (cfg.piezo_hz - cfg.ea_hz) * t_s;
  return amplitude_mN * std::cos(dphi + cfg.phase_deg * std::numbers::pi / 180.0);
}

namespace {

Eigen::VectorXd moving_average(const Eigen::VectorXd& x, Eigen::Index window) {
  Eigen::VectorXd y(x.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    acc += x[i];
    if (i >= window) acc -= x[i - window];
    y[i] = acc / static_cast<double>(window);  // zero history before the record
  }
  return y;
}

}  // namespace

Eigen::VectorXd render_carrier_force(const DriveConfig& cfg, double amplitude_mN, double sample_rate_hz,
                                     double duration_s) {
  cfg.validate();
  if (!(sample_rate_hz > 2.0 * std::max(cfg.piezo_hz, cfg.ea_hz)))
    throw std::invalid_argument("debug render needs a sample rate above twice the carriers");
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s * sample_rate_hz));
  const double two_pi = 2.0 * std::numbers::pi;
  const double phase = cfg.phase_deg * std::numbers::pi / 180.0;
  Eigen::VectorXd raw(n);
  // <(1 + sin(wt + psi))/2 * sgn(sin wt)> = cos(psi) / pi, hence the pi gain.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    // Sampled half a step off the carrier zeros so sgn() never lands on one.
    const double surface_velocity = std::sin(two_pi * cfg.piezo_hz * (t + 0.5 / sample_rate_hz));
    const double ea_load = cfg.ea_enabled ? 0.5 * (1.0 + std::sin(two_pi * cfg.ea_hz * t + phase)) : 0.0;
    const double sgn = surface_velocity > 0.0 ? 1.0 : (surface_velocity < 0.0 ? -1.0 : 0.0);
    raw[i] = std::numbers::pi * amplitude_mN * ea_load * sgn;
  }
  const auto window = std::max<Eigen::Index>(1, std::llround(sample_rate_hz / cfg.piezo_hz));
  return moving_average(moving_average(raw, window), window);
}

Eigen::VectorXd sample_command(const StimulusParams& params, double dt_s, double span_s) {
  const auto n = static_cast<Eigen::Index>(std::llround(span_s / dt_s)) + 1;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = command_force(params, static_cast<double>(i) * dt_s * 1e3);
  return out;
}

double zero_crossing_frequency(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz,
                               double hysteresis) {
  if (x.size() < 3) throw std::invalid_argument("zero_crossing_frequency: record too short");
  const double level = hysteresis * x.cwiseAbs().maxCoeff();
  std::vector<double> crossings;
  int state = 0;  // last confirmed side
  Eigen::Index last_sign_change = -1;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    if ((x[i - 1] < 0.0) != (x[i] < 0.0)) last_sign_change = i;
    const int side = x[i] > level ? 1 : (x[i] < -level ? -1 : 0);
    if (side == 0 || side == state) continue;
    if (state != 0 && last_sign_change > 0) {
      const Eigen::Index k = last_sign_change;
      const double frac = x[k - 1] / (x[k - 1] - x[k]);
      crossings.push_back((static_cast<double>(k - 1) + frac) / sample_rate_hz);
    }
    state = side;
  }
  if (crossings.size() < 2) return 0.0;
  const double span = crossings.back() - crossings.front();
  return static_cast<double>(crossings.size() - 1) / (2.0 * span);
}

void write_waveform_csv(std::ostream& os, double dt_s, const Eigen::Ref<const Eigen::VectorXd>& force_mN) {
  os << "t_s,force_mN\n";
  for (Eigen::Index i = 0; i < force_mN.size(); ++i)
    os << fmt_double(static_cast<double>(i) * dt_s) << ',' << fmt_double(force_mN[i]) << '\n';
}

}  // namespace clickrender
