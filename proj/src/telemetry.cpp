#include "clickrender/telemetry.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <chrono>
#include <mutex>
#include <set>
#include <thread>
#include <vector>
#include <stdexcept>

namespace clickrender {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

PressRequest press_request_from_json(const nlohmann::json& j) {
  PressRequest r;
  try {
    if (!j.is_object()) throw std::invalid_argument("press request must be a JSON object");
    if (j.value("type", std::string("press")) != "press")
      throw std::invalid_argument("unknown message type '" + j["type"].get<std::string>() + "'");
    r.params.duty_pct = j.value("duty_pct", r.params.duty_pct);
    r.params.duration_ms = j.value("duration_ms", r.params.duration_ms);
    r.params.amplitude_pp_mN = j.value("amplitude_pp_mN", r.params.amplitude_pp_mN);
    r.params.validate();
    r.realtime = j.value("realtime", false);
    if (j.contains("profile") && !(j["profile"].is_string() && j["profile"] == "default")) {
      const auto& p = j["profile"];
      if (!p.is_array() || p.empty()) throw std::invalid_argument("profile must be \"default\" or [[t_s, mN], ...]");
      std::vector<std::pair<double, double>> pts;
      for (const auto& q : p) {
        const double t = q.at(0).get<double>(), f = q.at(1).get<double>();
        if (!(f >= 0.0)) throw std::invalid_argument("profile forces must be non-negative");
        if (!pts.empty() && !(t > pts.back().first)) throw std::invalid_argument("profile times must increase");
        pts.emplace_back(t, f);
      }
      const double duration = j.value("duration_s", pts.back().first);
      if (!(duration > 0.0 && duration <= 30.0)) throw std::invalid_argument("duration_s must lie in (0, 30]");
      r.profile = PressProfile::piecewise_linear(std::move(pts), duration);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed press request: ") + e.what());
  }
  return r;
}

struct TelemetryServer::Impl {
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread accept_thread;
  std::mutex m;
  std::set<int> live_fds;
  std::vector<std::thread> workers;
  bool stopping = false;

  void serve(tcp::socket socket) {
    const int fd = socket.native_handle();
    {
      std::lock_guard lock(m);
      if (stopping) return;
      live_fds.insert(fd);
    }
    try {
      websocket::stream<tcp::socket> ws(std::move(socket));
      ws.accept();
      ws.text(true);
      for (;;) {
        beast::flat_buffer buf;
        ws.read(buf);
        nlohmann::json reply;
        try {
          const auto req = press_request_from_json(nlohmann::json::parse(beast::buffers_to_string(buf.data())));
          const auto t0 = std::chrono::steady_clock::now();
          int frames = 0;
          const int triggers = stream_press(req.params, req.profile, [&](const TelemetryFrame& f) {
            if (req.realtime) std::this_thread::sleep_until(t0 + std::chrono::duration<double>(f.t_s));
            ws.write(asio::buffer(to_json(f).dump()));
            ++frames;
            return true;
          });
          reply = {{"type", "done"}, {"frames", frames}, {"triggers", triggers}};
        } catch (const std::invalid_argument& e) {
          reply = {{"type", "error"}, {"error", e.what()}};
        } catch (const nlohmann::json::exception& e) {
          reply = {{"type", "error"}, {"error", e.what()}};
        }
        ws.write(asio::buffer(reply.dump()));
      }
    } catch (const std::exception&) {
      // Client went away or the server is shutting down.
    }
    std::lock_guard lock(m);
    live_fds.erase(fd);
  }
};

TelemetryServer::TelemetryServer(std::string host, int port) : impl_(std::make_unique<Impl>()) {
  const tcp::endpoint ep(asio::ip::make_address(host), static_cast<unsigned short>(port));
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  port_ = impl_->acceptor.local_endpoint().port();
}

TelemetryServer::~TelemetryServer() { stop(); }

void TelemetryServer::start() {
  impl_->accept_thread = std::thread([this] {
    for (;;) {
      boost::system::error_code ec;
      tcp::socket socket(impl_->ioc);
      impl_->acceptor.accept(socket, ec);
      if (ec) break;
      std::lock_guard lock(impl_->m);
      if (impl_->stopping) break;
      impl_->workers.emplace_back([this, s = std::move(socket)]() mutable { impl_->serve(std::move(s)); });
    }
  });
}

void TelemetryServer::stop() {
  {
    std::lock_guard lock(impl_->m);
    if (impl_->stopping) return;
    impl_->stopping = true;
    // shutdown() is safe across threads and wakes any blocked read or accept.
    for (int fd : impl_->live_fds) ::shutdown(fd, SHUT_RDWR);
    ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  }
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  boost::system::error_code ec;
  impl_->acceptor.close(ec);
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->m);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) w.join();
}

}  // namespace clickrender
