// clickrender: command-line front end for the simulator, the experiment engine
// and the session service.
#include "clickrender/analysis.hpp"
#include "clickrender/click.hpp"
#include "clickrender/device.hpp"
#include "clickrender/format.hpp"
#include "clickrender/scenario.hpp"
#include "clickrender/service.hpp"
#include "clickrender/session.hpp"

#include <CLI11.hpp>

#include <pthread.h>

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace clickrender;

namespace {

int cmd_simulate(double duty, double duration, double amplitude, const std::string& scenario_path,
                 const std::string& out) {
  const StimulusParams params{duty, duration, amplitude};
  params.validate();
  const DeviceState device = scenario_path.empty() ? single_finger_scenario() : load_scenario(scenario_path);
  const ClickRender r = render_click(params, device);
  if (out.empty() || out == "-") {
    write_trace_csv(std::cout, r.trace);
  } else {
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out);
    write_trace_csv(os, r.trace);
  }
  std::cerr << "triggers: " << r.events.size();
  if (!r.events.empty()) std::cerr << " (first at t = " << fmt_double(r.events.front().t_s) << " s into the press)";
  std::cerr << "\n";
  return 0;
}

int cmd_isolate(double duration_s, const std::string& scenario_path) {
  const DeviceState device = scenario_path.empty() ? localization_scenario() : load_scenario(scenario_path);
  const LocalizationResult r = run_localization(device, duration_s);
  std::cout << "10 Hz envelope, energized finger: " << fmt_double(r.energized_10hz_um) << " um\n"
            << "10 Hz envelope, isolated finger:  " << fmt_double(r.isolated_10hz_um) << " um\n"
            << "isolation: " << fmt_double(r.isolation_db) << " dB\n"
            << "30 kHz envelope, energized finger: " << fmt_double(r.energized_30khz_um) << " um\n"
            << "30 kHz envelope, isolated finger:  " << fmt_double(r.isolated_30khz_um) << " um\n"
            << "perception threshold at 10 Hz: " << fmt_double(kPerceptionThresholdUm) << " um\n";
  return 0;
}

void write_outputs(const std::filesystem::path& dir, const SessionRecord& r) {
  std::filesystem::create_directories(dir);
  save_session(dir / (r.id + ".json"), r);
  std::ofstream csv(dir / (r.id + ".trials.csv"));
  write_trials_csv(csv, r);
}

int cmd_run_simulated(std::uint64_t seed, const std::string& subject, const std::filesystem::path& out) {
  const auto roster = default_population(seed);
  for (const auto& s : roster) {
    if (subject != "all" && std::to_string(s.id) != subject) continue;
    const SessionRecord r = run_simulated_session(s, seed);
    write_outputs(out, r);
    std::cout << r.id << ": " << r.trials.size() << " trials, " << to_string(r.status) << "\n";
  }
  return 0;
}

// Terminal responder for a live run: one line per answer.
std::optional<Response> ask(const Prompt& p) {
  for (;;) {
    if (p.expects == ResponseKind::JudgeAndPercept)
      std::cout << "[block " << p.block << ", " << p.position + 1 << "/" << p.count
                << "] acceptable click? (y/n) then percept (p = pulse, o = oscillation), e.g. 'y p'; q quits: "
                << std::flush;
    else
      std::cout << "[round " << p.round << ", " << p.position + 1 << "/" << p.count << "] rating 0-7 (q quits): "
                << std::flush;
    std::string line;
    if (!std::getline(std::cin, line) || line == "q") return std::nullopt;
    std::istringstream in(line);
    Response r;
    if (p.expects == ResponseKind::JudgeAndPercept) {
      char a = 0, b = 0;
      in >> a >> b;
      if ((a == 'y' || a == 'n') && (b == 'p' || b == 'o')) {
        r.acceptable = a == 'y';
        r.percept = b == 'p' ? Percept::Pulse : Percept::Oscillation;
        return r;
      }
    } else {
      int v = -1;
      if (in >> v && v >= 0 && v <= 7) {
        r.rating = v;
        return r;
      }
    }
    std::cout << "  not understood\n";
  }
}

int cmd_run_live(std::uint64_t seed, const std::string& label, const std::filesystem::path& out,
                 const std::string& resume) {
  SessionRecord rec;
  if (!resume.empty()) {
    rec = load_session(resume);
    verify_derived(rec);
  } else {
    rec = snapshot(ProtocolEngine(seed), "live-" + label + "-seed" + std::to_string(seed), SessionMode::Live, label);
    rec.started_unix_s =
        std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
  }
  ProtocolEngine engine = restore(rec);
  const double t_offset = rec.trials.empty() ? 0.0 : rec.trials.back().t_s;
  const auto t0 = std::chrono::steady_clock::now();
  while (auto p = engine.next()) {
    std::cout << "present: duty " << p->duty_pct << "%, duration " << p->duration_ms << " ms\n";
    auto r = ask(*p);
    if (!r) break;
    const double t = t_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    engine.submit(*r, t, "live:" + rec.subject_label);
    SessionRecord next = snapshot(engine, rec.id, rec.mode, rec.subject_label, std::nullopt,
                                  engine.complete() ? SessionStatus::Complete : SessionStatus::InProgress);
    next.started_unix_s = rec.started_unix_s;
    rec = std::move(next);
    write_outputs(out, rec);
  }
  if (!engine.complete()) {
    rec.status = SessionStatus::Partial;
    write_outputs(out, rec);
  }
  std::cout << rec.id << ": " << rec.trials.size() << " trials, " << to_string(rec.status) << "\n";
  return 0;
}

int cmd_analyze(const std::vector<std::string>& files, const std::filesystem::path& out, bool svg) {
  std::vector<SessionRecord> sessions;
  for (const auto& f : files) {
    sessions.push_back(load_session(f));
    verify_derived(sessions.back());
  }
  const AnalysisResult r = analyze(sessions);
  write_artifacts(out, r, svg);
  std::cout << summary_json(r).dump(2) << "\n";
  return 0;
}

int cmd_serve(const ServiceConfig& cfg) {
  // Block the stop signals before any server thread exists, then wait for one here.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
  Service service(cfg);
  service.start();
  std::cout << "REST on http://" << cfg.host << ":" << service.port() << "/api/v1, telemetry on ws://" << cfg.host
            << ":" << service.telemetry_port() << ", data in " << cfg.data_dir.string() << std::endl;
  int sig = 0;
  sigwait(&stop_signals, &sig);
  service.stop();
  return 0;
}

int cmd_calibrate(double target_um, double force_mN, double freq_hz, double mass_kg, double zeta) {
  const FingerMechanics m = calibrate_mechanics(target_um, force_mN, freq_hz, mass_kg, zeta);
  std::cout << "mass_kg " << fmt_double(m.mass_kg) << "\nstiffness_N_per_m " << fmt_double(m.stiffness_N_per_m)
            << "\ndamping_Ns_per_m " << fmt_double(m.damping_Ns_per_m) << "\nnatural_hz " << fmt_double(m.natural_hz())
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electroadhesion button-click simulator and experiment engine"};
  app.require_subcommand(1);

  double duty = 25, duration = 160, amplitude = kDefaultAmplitudePpMn;
  std::string scenario, out_file;
  auto* simulate = app.add_subcommand("simulate", "Render one click and write the trace CSV");
  simulate->add_option("--duty", duty, "Duty cycle, %")->capture_default_str();
  simulate->add_option("--duration", duration, "Stimulus duration, ms")->capture_default_str();
  simulate->add_option("--amplitude", amplitude, "Peak-to-peak lateral force, mN")->capture_default_str();
  simulate->add_option("--scenario", scenario, "Device scenario JSON (default: single grounded finger)");
  simulate->add_option("-o,--out", out_file, "Trace CSV path (default: stdout)");

  double iso_duration = 2.0;
  auto* isolate = app.add_subcommand("isolate", "Run the two-finger localization scenario");
  isolate->add_option("--duration", iso_duration, "Simulated seconds")->capture_default_str();
  isolate->add_option("--scenario", scenario, "Device scenario JSON (default: index over energized cell)");

  bool simulated = false, live = false;
  std::uint64_t seed = 1;
  std::string subject = "all", label = "subject", resume;
  std::string out_dir = "sessions";
  auto* run = app.add_subcommand("run", "Execute the two-section experiment");
  auto* sim_flag = run->add_flag("--simulated", simulated, "Use the calibrated simulated roster");
  auto* live_flag = run->add_flag("--live", live, "Answer prompts on this terminal");
  sim_flag->excludes(live_flag);
  run->add_option("--seed", seed, "Protocol and roster seed")->capture_default_str();
  run->add_option("--subject", subject, "Roster id 1-10 or 'all' (simulated)")->capture_default_str();
  run->add_option("--label", label, "Subject label (live)")->capture_default_str();
  run->add_option("--resume", resume, "Continue a saved live session file");
  run->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();

  std::vector<std::string> session_files;
  std::string analysis_dir = "analysis";
  bool svg = false;
  auto* an = app.add_subcommand("analyze", "Overlap map, percentage curves, rating fits and grouping");
  an->add_option("sessions", session_files, "Session JSON files")->required()->check(CLI::ExistingFile);
  an->add_option("-o,--out", analysis_dir, "Output directory")->capture_default_str();
  an->add_flag("--svg", svg, "Also render SVG plots");

  ServiceConfig cfg;
  std::string data_dir = cfg.data_dir.string();
  auto* serve = app.add_subcommand("serve", "REST session API and WebSocket telemetry");
  serve->add_option("--host", cfg.host)->capture_default_str();
  serve->add_option("--port", cfg.port)->capture_default_str();
  serve->add_option("--telemetry-port", cfg.telemetry_port)->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Session directory (env CLICKRENDER_DATA_DIR)")->capture_default_str();

  double target = kEnergizedEnvelopeTargetUm, force = kBeatForceAmplitudeMn, freq = 10.0, mass = 2.0e-3, zeta = 0.5;
  auto* cal = app.add_subcommand("calibrate", "Fit fingertip stiffness/damping to a displacement envelope");
  cal->add_option("--target-um", target)->capture_default_str();
  cal->add_option("--force-mN", force)->capture_default_str();
  cal->add_option("--freq-hz", freq)->capture_default_str();
  cal->add_option("--mass-kg", mass)->capture_default_str();
  cal->add_option("--zeta", zeta)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(duty, duration, amplitude, scenario, out_file);
    if (*isolate) return cmd_isolate(iso_duration, scenario);
    if (*run) {
      if (simulated == live) throw CLI::ValidationError("run", "choose exactly one of --simulated or --live");
      return simulated ? cmd_run_simulated(seed, subject, out_dir) : cmd_run_live(seed, label, out_dir, resume);
    }
    if (*an) return cmd_analyze(session_files, analysis_dir, svg);
    if (*serve) {
      cfg.data_dir = data_dir;
      return cmd_serve(cfg);
    }
    if (*cal) return cmd_calibrate(target, force, freq, mass, zeta);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
