#pragma once

#include "clickrender/click.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>

namespace clickrender {

/// Parses a client press request:
///   {"type": "press", "profile": "default" | [[t_s, mN], ...],
///    "duration_s"?: s, "duty_pct"?, "duration_ms"?, "amplitude_pp_mN"?, "realtime"?: bool}
/// Throws std::invalid_argument on malformed input.
struct PressRequest {
  StimulusParams params;
  PressProfile profile = PressProfile::default_click();
  bool realtime = false;
};
PressRequest press_request_from_json(const nlohmann::json& j);

/// WebSocket endpoint. Each text message from the client is a press request;
/// the server answers with telemetry frames, then {"type": "done", ...}.
class TelemetryServer {
 public:
  TelemetryServer(std::string host, int port);
  ~TelemetryServer();

  void start();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace clickrender
