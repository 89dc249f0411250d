#pragma once

#include "clickrender/protocol.hpp"
#include "clickrender/session.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace clickrender {

class TelemetryServer;

/// $CLICKRENDER_DATA_DIR, else ./clickrender-data.
std::filesystem::path default_data_dir();

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Session registry backed by one JSON file per session. Each session is
/// guarded by its own mutex; every acknowledged response is on disk before the
/// ack is returned.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  ApiResponse create(const nlohmann::json& body);
  ApiResponse list() const;
  ApiResponse get(const std::string& id) const;
  ApiResponse next(const std::string& id) const;
  ApiResponse submit(const std::string& id, const nlohmann::json& body);
  /// Continues a partial simulated session with its stored subject model.
  ApiResponse resume(const std::string& id, const nlohmann::json& body);

  std::optional<std::string> trials_csv(const std::string& id) const;
  /// Analysis artifact over `ids` (all sessions when empty). Runs on copies.
  ApiResponse artifact(const std::string& name, const std::vector<std::string>& ids, std::string& text) const;

  std::vector<SessionRecord> snapshot_all() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  struct Entry {
    Entry(SessionRecord r, ProtocolEngine e) : record(std::move(r)), engine(std::move(e)) {}
    mutable std::mutex m;
    SessionRecord record;
    ProtocolEngine engine;
  };
  std::shared_ptr<Entry> find(const std::string& id) const;
  std::filesystem::path path_for(const std::string& id) const;
  nlohmann::json ack_for(const Entry& e, std::size_t trial_index) const;

  std::filesystem::path dir_;
  mutable std::mutex m_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;            // 0 picks a free port
  int telemetry_port = 8081;  // 0 picks a free port
  std::filesystem::path data_dir = default_data_dir();
};

/// REST API under /api/v1 plus the WebSocket telemetry channel.
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds both ports and serves on background threads.
  void start();
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

  int port() const { return port_; }
  int telemetry_port() const;
  SessionStore& store() { return store_; }

 private:
  void install_routes();

  ServiceConfig cfg_;
  SessionStore store_;
  std::unique_ptr<httplib::Server> http_;
  std::unique_ptr<TelemetryServer> telemetry_;
  std::thread http_thread_;
  int port_ = 0;
};

}  // namespace clickrender
