#include "clickrender/device.hpp"

#include "clickrender/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace clickrender {

std::optional<int> ElectrodeGrid::cell_at(double x_mm, double y_mm) const {
  if (x_mm < 0.0 || y_mm < 0.0) return std::nullopt;
  const auto col = static_cast<int>(std::floor(x_mm / cell_size_mm));
  const auto row = static_cast<int>(std::floor(y_mm / cell_size_mm));
  if (col >= n_cols || row >= n_rows) return std::nullopt;
  return row * n_cols + col;
}

bool ElectrodeGrid::is_energized(double x_mm, double y_mm) const {
  const auto cell = cell_at(x_mm, y_mm);
  return cell && energized.contains(*cell);
}

void ElectrodeGrid::validate() const {
  if (n_cols <= 0 || n_rows <= 0) throw std::invalid_argument("electrode grid needs at least one cell");
  if (!(cell_size_mm > 0.0)) throw std::invalid_argument("electrode cell size must be positive");
  for (int idx : energized)
    if (idx < 0 || idx >= cell_count())
      throw std::invalid_argument("energized cell " + std::to_string(idx) + " lies outside the grid");
}

void FingerMechanics::validate() const {
  if (!(mass_kg > 0.0 && stiffness_N_per_m > 0.0 && damping_Ns_per_m > 0.0))
    throw std::invalid_argument("finger mechanics must be strictly positive");
}

double FingerMechanics::natural_hz() const {
  return std::sqrt(stiffness_N_per_m / mass_kg) / (2.0 * std::numbers::pi);
}

double FingerMechanics::gain_um_per_mN(double freq_hz) const {
  const double w = 2.0 * std::numbers::pi * freq_hz;
  const double re = stiffness_N_per_m - mass_kg * w * w;
  const double im = damping_Ns_per_m * w;
  // (1e-3 N per mN) / (N per m) -> m, times 1e6 -> um
  return 1e3 / std::hypot(re, im);
}

FingerMechanics default_finger_mechanics() {
  return {2.0e-3, 365.2070252459986, 0.8546426449060432};
}

FingerMechanics calibrate_mechanics(double target_um, double force_amplitude_mN, double freq_hz, double mass_kg,
                                    double damping_ratio) {
  if (!(target_um > 0.0 && force_amplitude_mN > 0.0 && freq_hz > 0.0 && mass_kg > 0.0 && damping_ratio > 0.0))
    throw std::invalid_argument("calibrate_mechanics: arguments must be positive");
  auto make = [&](double k) {
    return FingerMechanics{mass_kg, k, 2.0 * damping_ratio * std::sqrt(k * mass_kg)};
  };
  auto envelope = [&](double k) { return make(k).gain_um_per_mN(freq_hz) * force_amplitude_mN; };
  // Above resonance the envelope falls monotonically as k grows; start the bracket there.
  const double w = 2.0 * std::numbers::pi * freq_hz;
  double lo = mass_kg * w * w;
  double hi = 1e7;
  if (envelope(hi) > target_um) throw std::domain_error("calibrate_mechanics: target envelope too small");
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (envelope(mid) > target_um ? lo : hi) = mid;
  }
  return make(0.5 * (lo + hi));
}

void Finger::validate() const {
  mech.validate();
  if (normal_mN < 0.0) throw std::invalid_argument("finger '" + id + "' has negative normal force");
  if (!in_contact && normal_mN != 0.0)
    throw std::invalid_argument("finger '" + id + "' carries normal force without contact");
}

void Finger::set_normal_force(double mN) {
  if (mN < 0.0) throw std::invalid_argument("normal force must be non-negative");
  normal_mN = mN;
  in_contact = mN > 0.0;
}

void DeviceParams::validate() const {
  if (!(dt_s > 0.0)) throw std::invalid_argument("simulation step must be positive");
  if (!(leak_gain >= 0.0 && leak_gain <= 1.0)) throw std::invalid_argument("leak gain must lie in [0, 1]");
  if (!(sensor_tau_s > 0.0)) throw std::invalid_argument("sensor time constant must be positive");
  if (!(ultrasonic_displacement_um >= 0.0)) throw std::invalid_argument("ultrasonic displacement must be >= 0");
  if (!(sensor_noise_mN >= 0.0)) throw std::invalid_argument("sensor noise must be >= 0");
}

Finger& DeviceState::finger(const std::string& id) {
  for (auto& f : fingers)
    if (f.id == id) return f;
  throw std::out_of_range("no finger '" + id + "'");
}

const Finger& DeviceState::finger(const std::string& id) const {
  for (const auto& f : fingers)
    if (f.id == id) return f;
  throw std::out_of_range("no finger '" + id + "'");
}

void DeviceState::validate() const {
  grid.validate();
  drive.validate();
  params.validate();
  for (const auto& f : fingers) f.validate();
}

GatedForce force_on_finger(const Finger& finger, const ElectrodeGrid& grid, const DriveConfig& cfg,
                           double commanded_mN, double leak_gain) {
  if (!finger.in_contact) return {0.0, true};
  if (!cfg.ea_enabled) return {0.0, false};
  const double directed = commanded_mN * force_sign_for_phase(cfg.phase_deg);
  const bool coupled = finger.grounded && grid.is_energized(finger.x_mm, finger.y_mm);
  return {coupled ? directed : directed * leak_gain, false};
}

DeviceState step(DeviceState state, double dt_s) {
  if (dt_s != state.params.dt_s) throw std::invalid_argument("step: dt must equal the configured simulation step");
  double applied_total = 0.0;
  for (auto& f : state.fingers) {
    const double force_mN = force_on_finger(f, state.grid, state.drive, state.commanded_mN, state.params.leak_gain).force_mN;
    applied_total += force_mN;
    // SI units for the integration, um / um/s in storage.
    const double x = f.state.displacement_um * 1e-6;
    double v = f.state.velocity_um_s * 1e-6;
    const double accel = (force_mN * 1e-3 - f.mech.damping_Ns_per_m * v - f.mech.stiffness_N_per_m * x) / f.mech.mass_kg;
    v += accel * dt_s;
    const double x_next = x + v * dt_s;
    f.state.displacement_um = x_next * 1e6;
    f.state.velocity_um_s = v * 1e6;
    if (!std::isfinite(f.state.displacement_um) || !std::isfinite(f.state.velocity_um_s))
      throw std::runtime_error("step: non-finite state for finger '" + f.id + "' at t=" + std::to_string(state.t_s));
  }
  const double alpha = -std::expm1(-dt_s / state.params.sensor_tau_s);
  state.sensed_lateral_mN += alpha * (applied_total - state.sensed_lateral_mN);
  state.t_s += dt_s;
  ++state.step_index;
  return state;
}

SensorReading virtual_force_sensor(const DeviceState& state) {
  double normal = 0.0;
  for (const auto& f : state.fingers)
    if (f.in_contact) normal += f.normal_mN;
  double lateral = state.sensed_lateral_mN;
  if (state.params.sensor_noise_mN > 0.0)
    lateral += state.params.sensor_noise_mN * CounterRng(state.params.noise_seed).split(0x5e).normal(state.step_index);
  return {lateral, normal};
}

double displacement_probe(const DeviceState& state, const Finger& finger) {
  double ultrasonic = 0.0;
  if (finger.in_contact && state.params.ultrasonic_displacement_um > 0.0)
    ultrasonic = state.params.ultrasonic_displacement_um *
                 std::sin(2.0 * std::numbers::pi * state.drive.piezo_hz * state.t_s);
  return finger.state.displacement_um + ultrasonic;
}

double band_center_hz(Band band) {
  return band == Band::Beat10Hz ? 10.0 : 30000.0;
}

namespace {

// RBJ cookbook biquad, direct form I.
struct Biquad {
  double b0, b1, b2, a1, a2;

  static Biquad lowpass(double fc, double fs, double q) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
  }

  static Biquad highpass(double fc, double fs, double q) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double out = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x[i];
      y2 = y1;
      y1 = out;
      y[i] = out;
    }
    return y;
  }
};

// 4th-order Butterworth as two biquad sections.
constexpr std::array<double, 2> kButterworth4Q{0.5411961001461970, 1.3065629648763766};

Eigen::VectorXd band_pass(const Eigen::VectorXd& x, double fs, Band band) {
  Eigen::VectorXd y = x;
  for (double q : kButterworth4Q) {
    const Biquad section = band == Band::Beat10Hz ? Biquad::lowpass(100.0, fs, q) : Biquad::highpass(5000.0, fs, q);
    y = section.apply(y);
  }
  return y;
}

// Smallest number of band periods spanning a whole number of samples.
Eigen::Index lockin_window(double fc, double fs) {
  for (int periods = 1; periods <= 1000; ++periods) {
    const double samples = periods * fs / fc;
    if (std::abs(samples - std::round(samples)) < 1e-6 * samples) return static_cast<Eigen::Index>(std::llround(samples));
  }
  return static_cast<Eigen::Index>(std::llround(fs / fc));
}

}  // namespace

double displacement_envelope(const Trace& trace, const std::string& finger_id, Band band) {
  const double fc = band_center_hz(band);
  const double fs = 1.0 / trace.sample_period_s;
  if (fs <= 2.0 * fc) throw std::invalid_argument("displacement_envelope: sample rate cannot resolve the band");
  const Eigen::VectorXd& x = trace.displacement(finger_id);
  if (trace.duration_s() < 5.0 / fc) throw std::invalid_argument("displacement_envelope: trace shorter than 5 band periods");

  const Eigen::VectorXd filtered = band_pass(x, fs, band);
  const Eigen::Index window = lockin_window(fc, fs);
  const Eigen::Index n_windows = filtered.size() / window;
  if (n_windows < 2) throw std::invalid_argument("displacement_envelope: trace too short for the demodulator");

  const double w = 2.0 * std::numbers::pi * fc;
  double sum = 0.0;
  for (Eigen::Index k = 1; k < n_windows; ++k) {
    double in_phase = 0.0, quadrature = 0.0;
    for (Eigen::Index j = 0; j < window; ++j) {
      const Eigen::Index i = k * window + j;
      const double t = static_cast<double>(i) * trace.sample_period_s;
      in_phase += filtered[i] * std::cos(w * t);
      quadrature += filtered[i] * std::sin(w * t);
    }
    sum += 2.0 * std::hypot(in_phase, quadrature) / static_cast<double>(window);
  }
  return sum / static_cast<double>(n_windows - 1);
}

PressProfile::PressProfile(std::function<double(double)> normal_mN, double duration_s)
    : fn_(std::move(normal_mN)), duration_s_(duration_s) {
  if (!fn_) throw std::invalid_argument("press profile needs a force function");
  if (!(duration_s_ > 0.0)) throw std::invalid_argument("press profile duration must be positive");
}

PressProfile PressProfile::default_click() {
  constexpr double start = 0.26, cross = 0.40, hold_end = 0.55, release = 0.70, plateau = 900.0;
  // Raised-cosine rise reaches 600/900 of the plateau at cos(pi u) = -1/3.
  const double rise = (cross - start) / (std::acos(-1.0 / 3.0) / std::numbers::pi);
  const double fall = release - hold_end;
  auto fn = [=](double t) {
    if (t <= start || t >= release) return 0.0;
    if (t < start + rise) return plateau * 0.5 * (1.0 - std::cos(std::numbers::pi * (t - start) / rise));
    if (t <= hold_end) return plateau;
    return plateau * 0.5 * (1.0 + std::cos(std::numbers::pi * (t - hold_end) / fall));
  };
  return PressProfile(fn, 1.0);
}

PressProfile PressProfile::constant(double normal_mN, double duration_s) {
  return PressProfile([normal_mN](double) { return normal_mN; }, duration_s);
}

PressProfile PressProfile::piecewise_linear(std::vector<std::pair<double, double>> points, double duration_s) {
  if (points.empty()) throw std::invalid_argument("piecewise_linear: no points");
  std::sort(points.begin(), points.end());
  auto fn = [pts = std::move(points)](double t) {
    if (t <= pts.front().first) return pts.front().second;
    if (t >= pts.back().first) return pts.back().second;
    const auto hi = std::upper_bound(pts.begin(), pts.end(), t, [](double v, const auto& p) { return v < p.first; });
    const auto lo = hi - 1;
    const double span = hi->first - lo->first;
    if (span <= 0.0) return hi->second;
    return lo->second + (hi->second - lo->second) * (t - lo->first) / span;
  };
  return PressProfile(fn, duration_s);
}

PressProfile PressProfile::repeated(const PressProfile& press, int count) {
  if (count < 1) throw std::invalid_argument("repeated: count must be positive");
  const double period = press.duration_s();
  auto fn = [press, period, count](double t) {
    const double k = std::floor(t / period);
    if (k < 0.0 || k >= count) return 0.0;
    return press(t - k * period);
  };
  return PressProfile(fn, period * count);
}

namespace {

struct Recorder {
  Trace trace;
  Eigen::Index next = 0;

  Recorder(const DeviceState& state, Eigen::Index n) {
    trace.sample_period_s = state.params.dt_s;
    trace.t0_s = state.t_s;
    trace.lateral_mN.resize(n);
    trace.normal_mN.resize(n);
    trace.command_mN.resize(n);
    for (const auto& f : state.fingers) trace.displacement_um.emplace_back(f.id, Eigen::VectorXd(n));
  }

  void record(const DeviceState& state, double command_mN) {
    const auto reading = virtual_force_sensor(state);
    trace.lateral_mN[next] = reading.lateral_mN;
    trace.normal_mN[next] = reading.normal_mN;
    trace.command_mN[next] = command_mN;
    for (std::size_t j = 0; j < state.fingers.size(); ++j)
      trace.displacement_um[j].second[next] = displacement_probe(state, state.fingers[j]);
    ++next;
  }
};

Eigen::Index sample_count(double duration_s, double dt_s) {
  return static_cast<Eigen::Index>(std::llround(duration_s / dt_s));
}

}  // namespace

Trace apply_press_profile(DeviceState& state, const PressProfile& profile, const std::string& finger_id,
                          const StepHook& hook) {
  state.validate();
  state.finger(finger_id);  // existence check
  const Eigen::Index n = sample_count(profile.duration_s(), state.params.dt_s);
  Recorder rec(state, n);
  const double t_start = state.t_s;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double normal = profile(state.t_s - t_start);
    if (!(normal >= 0.0)) throw std::invalid_argument("press profile must be non-negative");
    state.finger(finger_id).set_normal_force(normal);
    if (hook) hook(state);
    rec.record(state, state.commanded_mN * (state.drive.ea_enabled ? force_sign_for_phase(state.drive.phase_deg) : 0));
    state = step(std::move(state), state.params.dt_s);
  }
  return std::move(rec.trace);
}

DeviceState localization_scenario() {
  DeviceState s;
  s.grid = ElectrodeGrid{2, 1, 20.0, {0}};
  s.drive = DriveConfig{30000.0, 29990.0, 0, true};
  Finger index;
  index.id = "index";
  index.x_mm = 10.0;
  index.y_mm = 10.0;
  index.set_normal_force(500.0);
  Finger middle = index;
  middle.id = "middle";
  middle.x_mm = 30.0;
  s.fingers = {index, middle};
  return s;
}

DeviceState single_finger_scenario() {
  DeviceState s;
  s.grid = ElectrodeGrid{1, 1, 20.0, {0}};
  s.drive = DriveConfig{30000.0, 29990.0, 0, false};
  Finger index;
  index.id = "index";
  index.x_mm = 10.0;
  index.y_mm = 10.0;
  index.set_normal_force(0.0);
  s.fingers = {index};
  return s;
}

LocalizationResult run_localization(DeviceState state, double duration_s, double beat_amplitude_mN) {
  state.validate();
  const Finger* energized = nullptr;
  const Finger* isolated = nullptr;
  for (const auto& f : state.fingers) {
    if (!f.in_contact) continue;
    const bool on = f.grounded && state.grid.is_energized(f.x_mm, f.y_mm);
    if (on && !energized) energized = &f;
    if (!on && !isolated) isolated = &f;
  }
  if (!energized || !isolated) throw std::invalid_argument("localization needs one energized and one isolated finger");
  const std::string energized_id = energized->id, isolated_id = isolated->id;

  const DriveConfig carriers = state.drive;
  state.drive.phase_deg = 0;
  const Eigen::Index n = sample_count(duration_s, state.params.dt_s);
  Recorder rec(state, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    state.commanded_mN = beat_force(carriers, beat_amplitude_mN, state.t_s);
    rec.record(state, state.commanded_mN);
    state = step(std::move(state), state.params.dt_s);
  }

  LocalizationResult out{std::move(rec.trace), 0, 0, 0, 0, 0};
  out.energized_10hz_um = displacement_envelope(out.trace, energized_id, Band::Beat10Hz);
  out.isolated_10hz_um = displacement_envelope(out.trace, isolated_id, Band::Beat10Hz);
  out.energized_30khz_um = displacement_envelope(out.trace, energized_id, Band::Ultrasonic30kHz);
  out.isolated_30khz_um = displacement_envelope(out.trace, isolated_id, Band::Ultrasonic30kHz);
  out.isolation_db = 20.0 * std::log10(out.energized_10hz_um / out.isolated_10hz_um);
  return out;
}

}  // namespace clickrender
