#include "clickrender/device.hpp"
#include "clickrender/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

using namespace clickrender;

namespace {

DeviceState energized_finger() {
  DeviceState s = single_finger_scenario();
  s.drive.ea_enabled = true;
  return s;
}

}  // namespace

TEST_CASE("electrode grid addressing") {
  const ElectrodeGrid g{2, 1, 20.0, {0}};
  CHECK(g.cell_at(10, 10) == 0);
  CHECK(g.cell_at(30, 10) == 1);
  CHECK_FALSE(g.cell_at(45, 10));
  CHECK_FALSE(g.cell_at(-1, 10));
  CHECK(g.is_energized(10, 10));
  CHECK_FALSE(g.is_energized(30, 10));
  CHECK_THROWS_AS((ElectrodeGrid{2, 1, 20.0, {2}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ElectrodeGrid{0, 1, 20.0, {}}.validate()), std::invalid_argument);
}

TEST_CASE("force gating") {
  const DeviceState s = localization_scenario();
  const Finger& index = s.finger("index");
  const Finger& middle = s.finger("middle");
  CHECK(force_on_finger(index, s.grid, s.drive, 250).force_mN == doctest::Approx(250));
  CHECK(force_on_finger(middle, s.grid, s.drive, 250).force_mN == doctest::Approx(2.5));

  DriveConfig off = s.drive;
  off.ea_enabled = false;
  CHECK(force_on_finger(index, s.grid, off, 250).force_mN == 0.0);
  CHECK(force_on_finger(middle, s.grid, off, 250).force_mN == 0.0);

  DriveConfig right = s.drive;
  right.phase_deg = 180;
  CHECK(force_on_finger(index, s.grid, right, 250).force_mN == doctest::Approx(-250));

  Finger lifted = index;
  lifted.set_normal_force(0);
  const auto g = force_on_finger(lifted, s.grid, s.drive, 250);
  CHECK(g.force_mN == 0.0);
  CHECK(g.no_contact);

  Finger floating = index;
  floating.grounded = false;
  CHECK(force_on_finger(floating, s.grid, s.drive, 250).force_mN == doctest::Approx(2.5));
}

TEST_CASE("finger contact follows normal force") {
  Finger f;
  f.set_normal_force(0);
  CHECK_FALSE(f.in_contact);
  f.set_normal_force(120);
  CHECK(f.in_contact);
  CHECK_THROWS_AS(f.set_normal_force(-1), std::invalid_argument);
  Finger bad;
  bad.in_contact = false;
  bad.normal_mN = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("equilibrium is a fixed point") {
  DeviceState s = energized_finger();
  s.finger("index").set_normal_force(500);
  const DeviceState next = step(s, s.params.dt_s);
  CHECK(next.finger("index").state.displacement_um == 0.0);
  CHECK(next.finger("index").state.velocity_um_s == 0.0);
  CHECK(next.t_s == doctest::Approx(s.params.dt_s));
  CHECK(next.step_index == 1);
  CHECK_THROWS_AS(step(s, 2 * s.params.dt_s), std::invalid_argument);
}

TEST_CASE("step response matches the analytic second-order solution") {
  DeviceState s = energized_finger();
  s.finger("index").set_normal_force(500);
  s.commanded_mN = 100;
  const FingerMechanics m = s.finger("index").mech;
  const double x_static_um = 100e-3 / m.stiffness_N_per_m * 1e6;
  const double wn = std::sqrt(m.stiffness_N_per_m / m.mass_kg);
  const double zeta = m.damping_Ns_per_m / (2 * std::sqrt(m.stiffness_N_per_m * m.mass_kg));
  const double wd = wn * std::sqrt(1 - zeta * zeta);
  for (int i = 1; i <= 20000; ++i) {
    s = step(std::move(s), s.params.dt_s);
    if (i % 2500) continue;
    const double t = s.t_s;
    const double exact = x_static_um * (1 - std::exp(-zeta * wn * t) *
                                                (std::cos(wd * t) + zeta / std::sqrt(1 - zeta * zeta) * std::sin(wd * t)));
    CHECK(std::abs(s.finger("index").state.displacement_um - exact) <= 0.005 * x_static_um);
  }
  // 200 ms is ~13 time constants: static spring law.
  CHECK(s.finger("index").state.displacement_um == doctest::Approx(x_static_um).epsilon(1e-3));
}

TEST_CASE("free vibration loses energy") {
  DeviceState s = energized_finger();
  s.finger("index").set_normal_force(500);
  s.finger("index").state.displacement_um = 300;
  const FingerMechanics m = s.finger("index").mech;
  auto energy = [&](const DeviceState& d) {
    const auto& st = d.finger("index").state;
    return 0.5 * m.stiffness_N_per_m * std::pow(st.displacement_um * 1e-6, 2) +
           0.5 * m.mass_kg * std::pow(st.velocity_um_s * 1e-6, 2);
  };
  double e = energy(s);
  for (int k = 0; k < 20; ++k) {
    for (int i = 0; i < 500; ++i) s = step(std::move(s), s.params.dt_s);
    const double e2 = energy(s);
    CHECK(e2 < e);
    e = e2;
  }
}

TEST_CASE("calibration hits the 10 Hz target") {
  const FingerMechanics m = default_finger_mechanics();
  CHECK(m.gain_um_per_mN(10) * kBeatForceAmplitudeMn == doctest::Approx(kEnergizedEnvelopeTargetUm).epsilon(1e-6));
  const FingerMechanics c = calibrate_mechanics(kEnergizedEnvelopeTargetUm, kBeatForceAmplitudeMn, 10);
  CHECK(c.stiffness_N_per_m == doctest::Approx(m.stiffness_N_per_m).epsilon(1e-6));
  CHECK(c.damping_Ns_per_m == doctest::Approx(m.damping_Ns_per_m).epsilon(1e-6));
  // Static gain, closed form.
  CHECK(m.gain_um_per_mN(0) == doctest::Approx(1e3 / m.stiffness_N_per_m).epsilon(1e-3));
  CHECK_THROWS_AS(calibrate_mechanics(-1, 250, 10), std::invalid_argument);
}

TEST_CASE("sensor lag is first order") {
  DeviceState s = energized_finger();
  s.finger("index").set_normal_force(500);
  s.commanded_mN = 250;
  const int three_tau = static_cast<int>(std::lround(3 * s.params.sensor_tau_s / s.params.dt_s));
  for (int i = 0; i < three_tau; ++i) s = step(std::move(s), s.params.dt_s);
  CHECK(virtual_force_sensor(s).lateral_mN >= 0.95 * 250);
  CHECK(virtual_force_sensor(s).lateral_mN == doctest::Approx(250 * (1 - std::exp(-3.0))).epsilon(1e-3));
  CHECK(virtual_force_sensor(s).normal_mN == 500);

  DeviceState quiet = energized_finger();
  quiet.finger("index").set_normal_force(500);
  for (int i = 0; i < 1000; ++i) quiet = step(std::move(quiet), quiet.params.dt_s);
  CHECK(virtual_force_sensor(quiet).lateral_mN == 0.0);
}

TEST_CASE("sensor noise is seeded") {
  DeviceState s = energized_finger();
  s.params.sensor_noise_mN = 2.0;
  s.params.noise_seed = 11;
  const double a = virtual_force_sensor(s).lateral_mN;
  CHECK(a != 0.0);
  CHECK(virtual_force_sensor(s).lateral_mN == a);
  s.params.noise_seed = 12;
  CHECK(virtual_force_sensor(s).lateral_mN != a);
}

TEST_CASE("default press profile") {
  const PressProfile p = PressProfile::default_click();
  CHECK(p.duration_s() == 1.0);
  DeviceState s = single_finger_scenario();
  const Trace t = apply_press_profile(s, p, "index");
  CHECK(t.normal_mN.maxCoeff() == doctest::Approx(900));
  int crossings = 0;
  Eigen::Index first = -1;
  for (Eigen::Index i = 1; i < t.size(); ++i)
    if (t.normal_mN[i - 1] < 600 && t.normal_mN[i] >= 600) {
      ++crossings;
      if (first < 0) first = i;
    }
  CHECK(crossings == 1);
  CHECK(t.time(first) == doctest::Approx(0.40).epsilon(1e-4));
  CHECK(t.normal_mN[0] == 0.0);
  CHECK(t.lateral_mN.cwiseAbs().maxCoeff() == 0.0);  // nothing commanded
  CHECK(s.t_s == doctest::Approx(1.0));
}

TEST_CASE("press profile construction") {
  const auto pl = PressProfile::piecewise_linear({{0.2, 100}, {0.0, 0}, {0.4, 300}}, 1.0);
  CHECK(pl(0.1) == doctest::Approx(50));
  CHECK(pl(0.3) == doctest::Approx(200));
  CHECK(pl(2.0) == 300);
  const auto rep = PressProfile::repeated(PressProfile::default_click(), 2);
  CHECK(rep.duration_s() == 2.0);
  CHECK(rep(1.5) == doctest::Approx(PressProfile::default_click()(0.5)));
  CHECK(rep(2.5) == 0.0);
  CHECK_THROWS_AS(PressProfile::constant(1, 0), std::invalid_argument);
  DeviceState s = single_finger_scenario();
  CHECK_THROWS_AS(apply_press_profile(s, PressProfile::constant(-1, 0.01), "index"), std::invalid_argument);
  CHECK_THROWS_AS(apply_press_profile(s, PressProfile::constant(1, 0.01), "thumb"), std::out_of_range);
}

TEST_CASE("envelope of a synthetic trace") {
  Trace t;
  const Eigen::Index n = 100000;
  t.lateral_mN = t.normal_mN = t.command_mN = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = i * t.sample_period_s;
    x[i] = 400 * std::sin(2 * std::numbers::pi * 10 * s) + 0.05 * std::sin(2 * std::numbers::pi * 30000 * s);
  }
  t.displacement_um = {{"f", x}};
  CHECK(displacement_envelope(t, "f", Band::Beat10Hz) == doctest::Approx(400).epsilon(0.01));
  CHECK(displacement_envelope(t, "f", Band::Ultrasonic30kHz) == doctest::Approx(0.05).epsilon(0.05));
  Trace shortt = t;
  shortt.displacement_um[0].second = x.head(1000);
  shortt.lateral_mN = shortt.normal_mN = shortt.command_mN = Eigen::VectorXd::Zero(1000);
  CHECK_THROWS_AS(displacement_envelope(shortt, "f", Band::Beat10Hz), std::invalid_argument);
}

TEST_CASE("localization scenario isolates the energized finger") {
  const LocalizationResult r = run_localization(localization_scenario(), 2.0);
  CHECK(r.energized_10hz_um == doctest::Approx(691.9).epsilon(0.05));
  CHECK(r.isolation_db >= 30.0);
  CHECK(r.isolated_10hz_um > 0.0);
  CHECK(std::abs(r.energized_30khz_um - r.isolated_30khz_um) <= 0.15 * r.isolated_30khz_um);

  DeviceState none = localization_scenario();
  none.grid.energized.clear();
  CHECK_THROWS_AS(run_localization(none, 1.0), std::invalid_argument);
}

TEST_CASE("trace CSV round trip") {
  DeviceState s = single_finger_scenario();
  const Trace t = apply_press_profile(s, PressProfile::constant(300, 0.001), "index");
  std::stringstream io;
  write_trace_csv(io, t);
  const Trace back = read_trace_csv(io);
  CHECK(back.size() == t.size());
  CHECK(back.sample_period_s == doctest::Approx(t.sample_period_s));
  CHECK(back.normal_mN.isApprox(t.normal_mN));
  CHECK(back.displacement("index").size() == t.size());
}

TEST_CASE("scenario JSON round trip") {
  const DeviceState s = localization_scenario();
  const auto doc = scenario_to_json(s);
  CHECK(doc.at("schema") == kScenarioSchema);
  const DeviceState back = scenario_from_json(doc);
  CHECK(scenario_to_json(back) == doc);
  auto bad = doc;
  bad["schema"] = "clickrender.scenario/0";
  CHECK_THROWS_AS(scenario_from_json(bad), std::invalid_argument);
}
