#include "clickrender/scenario.hpp"

#include <fstream>
#include <stdexcept>

namespace clickrender {

using nlohmann::json;

json scenario_to_json(const DeviceState& state) {
  json fingers = json::array();
  for (const auto& f : state.fingers) {
    fingers.push_back({{"id", f.id},
                       {"x_mm", f.x_mm},
                       {"y_mm", f.y_mm},
                       {"normal_mN", f.normal_mN},
                       {"grounded", f.grounded},
                       {"mass_kg", f.mech.mass_kg},
                       {"stiffness_N_per_m", f.mech.stiffness_N_per_m},
                       {"damping_Ns_per_m", f.mech.damping_Ns_per_m}});
  }
  return {{"schema", kScenarioSchema},
          {"grid",
           {{"n_cols", state.grid.n_cols},
            {"n_rows", state.grid.n_rows},
            {"cell_size_mm", state.grid.cell_size_mm},
            {"energized", state.grid.energized}}},
          {"fingers", fingers},
          {"drive",
           {{"piezo_hz", state.drive.piezo_hz},
            {"ea_hz", state.drive.ea_hz},
            {"phase_deg", state.drive.phase_deg},
            {"ea_enabled", state.drive.ea_enabled}}},
          {"device",
           {{"dt_s", state.params.dt_s},
            {"leak_gain", state.params.leak_gain},
            {"sensor_tau_s", state.params.sensor_tau_s},
            {"ultrasonic_displacement_um", state.params.ultrasonic_displacement_um},
            {"sensor_noise_mN", state.params.sensor_noise_mN},
            {"noise_seed", state.params.noise_seed}}}};
}

DeviceState scenario_from_json(const json& doc) {
  if (doc.value("schema", std::string{}) != kScenarioSchema)
    throw std::invalid_argument("scenario schema must be " + std::string(kScenarioSchema));
  DeviceState s;
  try {
    const auto& g = doc.at("grid");
    s.grid.n_cols = g.at("n_cols").get<int>();
    s.grid.n_rows = g.at("n_rows").get<int>();
    s.grid.cell_size_mm = g.at("cell_size_mm").get<double>();
    s.grid.energized = g.at("energized").get<std::set<int>>();
    const auto mech = default_finger_mechanics();
    for (const auto& jf : doc.at("fingers")) {
      Finger f;
      f.id = jf.at("id").get<std::string>();
      f.x_mm = jf.at("x_mm").get<double>();
      f.y_mm = jf.at("y_mm").get<double>();
      f.set_normal_force(jf.value("normal_mN", 0.0));
      f.grounded = jf.value("grounded", true);
      f.mech = {jf.value("mass_kg", mech.mass_kg), jf.value("stiffness_N_per_m", mech.stiffness_N_per_m),
                jf.value("damping_Ns_per_m", mech.damping_Ns_per_m)};
      s.fingers.push_back(std::move(f));
    }
    if (doc.contains("drive")) {
      const auto& d = doc["drive"];
      s.drive = {d.value("piezo_hz", 30000.0), d.value("ea_hz", 29990.0), d.value("phase_deg", 0),
                 d.value("ea_enabled", true)};
    }
    if (doc.contains("device")) {
      const auto& d = doc["device"];
      DeviceParams p;
      s.params = {d.value("dt_s", p.dt_s),
                  d.value("leak_gain", p.leak_gain),
                  d.value("sensor_tau_s", p.sensor_tau_s),
                  d.value("ultrasonic_displacement_um", p.ultrasonic_displacement_um),
                  d.value("sensor_noise_mN", p.sensor_noise_mN),
                  d.value("noise_seed", p.noise_seed)};
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

DeviceState load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path);
  return scenario_from_json(json::parse(in));
}

}  // namespace clickrender
