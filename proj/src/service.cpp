#include "clickrender/service.hpp"

#include "clickrender/analysis.hpp"
#include "clickrender/telemetry.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <regex>
#include <sstream>

namespace clickrender {

namespace {

const std::regex kIdPattern("[A-Za-z0-9_.-]{1,80}");

ApiResponse error(int status, const std::string& message, nlohmann::json extra = nlohmann::json::object()) {
  extra["error"] = message;
  return {status, std::move(extra)};
}

double unix_now() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

std::optional<Response> parse_response(const nlohmann::json& body, std::string& why) {
  Response r;
  if (body.contains("acceptable")) {
    const auto& a = body["acceptable"];
    if (a.is_boolean()) r.acceptable = a.get<bool>();
    else if (a == "YES" || a == "NO") r.acceptable = a == "YES";
    else return why = "acceptable must be YES or NO", std::nullopt;
  }
  if (body.contains("percept")) {
    if (!body["percept"].is_string()) return why = "percept must be PULSE or OSCILLATION", std::nullopt;
    try {
      r.percept = percept_from_string(body["percept"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      return why = e.what(), std::nullopt;
    }
  }
  if (body.contains("rating")) {
    if (!body["rating"].is_number_integer()) return why = "rating must be an integer 0..7", std::nullopt;
    r.rating = body["rating"].get<int>();
  }
  return r;
}

bool same_answers(const TrialRecord& t, const Response& r) {
  return t.acceptable == r.acceptable && t.percept == r.percept && t.rating == r.rating;
}

nlohmann::json summary_of(const SessionRecord& r) {
  return {{"id", r.id},
          {"mode", to_string(r.mode)},
          {"subject_label", r.subject_label},
          {"seed", r.seed},
          {"status", to_string(r.status)},
          {"cursor", r.cursor()}};
}

}  // namespace

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("CLICKRENDER_DATA_DIR"); env && *env) return env;
  return "clickrender-data";
}

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    SessionRecord rec = load_session(entry.path());
    verify_derived(rec);
    ProtocolEngine engine = restore(rec);
    auto e = std::make_shared<Entry>(std::move(rec), std::move(engine));
    sessions_.emplace(e->record.id, std::move(e));
  }
}

std::filesystem::path SessionStore::path_for(const std::string& id) const { return dir_ / (id + ".json"); }

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(m_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

ApiResponse SessionStore::create(const nlohmann::json& body) {
  if (!body.is_object()) return error(400, "body must be a JSON object");
  SessionRecord rec;
  try {
    const SessionMode mode = session_mode_from_string(body.value("mode", std::string("LIVE")));
    const std::uint64_t seed = body.value("seed", std::uint64_t{1});
    if (mode == SessionMode::Simulated) {
      const int subject_id = body.value("subject", 1);
      const auto roster = default_population(body.value("roster_seed", seed));
      if (subject_id < 1 || subject_id > static_cast<int>(roster.size()))
        return error(400, "subject must be a roster id 1.." + std::to_string(roster.size()));
      std::optional<std::size_t> max_trials;
      if (body.contains("max_trials")) max_trials = body["max_trials"].get<std::size_t>();
      rec = run_simulated_session(roster[subject_id - 1], seed, max_trials);
    } else {
      const std::string label = body.value("subject", std::string("live"));
      if (!std::regex_match(label, kIdPattern)) return error(400, "subject label must match [A-Za-z0-9_.-]{1,80}");
      const ProtocolEngine engine(seed, body.value("amplitude_pp_mN", kDefaultAmplitudePpMn));
      rec = snapshot(engine, "live-" + label + "-seed" + std::to_string(seed), mode, label);
      rec.started_unix_s = unix_now();
    }
    if (body.contains("id")) rec.id = body["id"].get<std::string>();
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  } catch (const nlohmann::json::exception& e) {
    return error(400, e.what());
  }
  if (!std::regex_match(rec.id, kIdPattern)) return error(400, "session id must match [A-Za-z0-9_.-]{1,80}");

  std::lock_guard lock(m_);
  if (sessions_.count(rec.id)) return error(409, "session '" + rec.id + "' already exists", {{"id", rec.id}});
  save_session(path_for(rec.id), rec);
  ProtocolEngine engine = restore(rec);
  auto e = std::make_shared<Entry>(std::move(rec), std::move(engine));
  ApiResponse out{201, summary_of(e->record)};
  sessions_.emplace(e->record.id, std::move(e));
  return out;
}

ApiResponse SessionStore::list() const {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::lock_guard lock(m_);
    for (const auto& [id, e] : sessions_) entries.push_back(e);
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries) {
    std::lock_guard lock(e->m);
    out.push_back(summary_of(e->record));
  }
  return {200, {{"sessions", out}}};
}

ApiResponse SessionStore::get(const std::string& id) const {
  auto e = find(id);
  if (!e) return error(404, "no session '" + id + "'");
  std::lock_guard lock(e->m);
  return {200, to_json(e->record)};
}

ApiResponse SessionStore::next(const std::string& id) const {
  auto e = find(id);
  if (!e) return error(404, "no session '" + id + "'");
  std::lock_guard lock(e->m);
  auto p = e->engine.next();
  const double total = static_cast<double>(kSection1Trials);
  nlohmann::json progress{{"cursor", e->record.cursor()},
                          {"section1", std::min(1.0, e->record.cursor() / total)},
                          {"round", p ? p->round : 0}};
  if (p && p->count) progress["within"] = static_cast<double>(p->position) / p->count;
  return {200,
          {{"id", id},
           {"status", to_string(e->record.status)},
           {"phase", e->engine.phase()},
           {"prompt", p ? to_json(*p) : nlohmann::json()},
           {"progress", progress}}};
}

nlohmann::json SessionStore::ack_for(const Entry& e, std::size_t trial_index) const {
  // Rebuild the engine as it stood right after this trial; the ack is a pure
  // function of the log prefix, so replays match the original byte for byte.
  const std::vector<TrialRecord> prefix(e.record.trials.begin(), e.record.trials.begin() + trial_index + 1);
  const ProtocolEngine then = ProtocolEngine::replay(e.record.seed, prefix, e.record.amplitude_pp_mN);
  auto p = then.next();
  return {{"id", e.record.id},
          {"trial", to_json(e.record.trials[trial_index])},
          {"cursor", trial_index + 1},
          {"phase", then.phase()},
          {"next", p ? to_json(*p) : nlohmann::json()}};
}

ApiResponse SessionStore::submit(const std::string& id, const nlohmann::json& body) {
  auto e = find(id);
  if (!e) return error(404, "no session '" + id + "'");
  if (!body.is_object() || !body.contains("trial_index") || !body["trial_index"].is_number_unsigned())
    return error(400, "body needs a non-negative integer trial_index");
  std::string why;
  auto response = parse_response(body, why);
  if (!response) return error(400, why);
  const auto index = body["trial_index"].get<std::size_t>();

  std::lock_guard lock(e->m);
  if (e->record.mode != SessionMode::Live)
    return error(409, "simulated sessions do not take responses", {{"phase", e->engine.phase()}});
  if (index < e->record.cursor()) {
    if (!same_answers(e->record.trials[index], *response))
      return error(409, "trial " + std::to_string(index) + " was already recorded with different answers",
                   {{"trial", to_json(e->record.trials[index])}});
    return {200, ack_for(*e, index)};
  }
  if (index > e->record.cursor())
    return error(409, "trial_index is ahead of the session",
                 {{"phase", e->engine.phase()}, {"expected_trial_index", e->record.cursor()}});

  ProtocolEngine staged = e->engine;
  try {
    const double elapsed = unix_now() - e->record.started_unix_s.value_or(unix_now());
    const double t = std::max(elapsed, e->record.trials.empty() ? 0.0 : e->record.trials.back().t_s);
    staged.submit(*response, t, "live:" + e->record.subject_label);
  } catch (const PhaseError& pe) {
    return error(409, pe.what(), {{"phase", pe.phase}});
  }
  SessionRecord staged_record =
      snapshot(staged, e->record.id, e->record.mode, e->record.subject_label, e->record.subject);
  staged_record.started_unix_s = e->record.started_unix_s;
  save_session(path_for(id), staged_record);  // durable before the ack leaves
  e->engine = std::move(staged);
  e->record = std::move(staged_record);
  return {200, ack_for(*e, index)};
}

ApiResponse SessionStore::resume(const std::string& id, const nlohmann::json& body) {
  auto e = find(id);
  if (!e) return error(404, "no session '" + id + "'");
  std::lock_guard lock(e->m);
  if (e->record.mode != SessionMode::Simulated || !e->record.subject)
    return error(409, "only simulated sessions can be resumed server-side", {{"phase", e->engine.phase()}});
  std::optional<std::size_t> max_trials;
  if (body.is_object() && body.contains("max_trials")) max_trials = body["max_trials"].get<std::size_t>();
  SimulatedResponder responder(*e->record.subject);
  SessionRecord updated = resume_session(e->record, responder, max_trials);
  save_session(path_for(id), updated);
  e->engine = restore(updated);
  e->record = std::move(updated);
  return {200, summary_of(e->record)};
}

std::optional<std::string> SessionStore::trials_csv(const std::string& id) const {
  auto e = find(id);
  if (!e) return std::nullopt;
  std::lock_guard lock(e->m);
  std::ostringstream os;
  write_trials_csv(os, e->record);
  return os.str();
}

std::vector<SessionRecord> SessionStore::snapshot_all() const {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::lock_guard lock(m_);
    for (const auto& [id, e] : sessions_) entries.push_back(e);
  }
  std::vector<SessionRecord> out;
  for (const auto& e : entries) {
    std::lock_guard lock(e->m);
    out.push_back(e->record);
  }
  return out;
}

ApiResponse SessionStore::artifact(const std::string& name, const std::vector<std::string>& ids,
                                   std::string& text) const {
  const auto names = artifact_names(true);
  if (std::find(names.begin(), names.end(), name) == names.end())
    return error(404, "unknown artifact '" + name + "'", {{"available", names}});
  std::vector<SessionRecord> records;
  if (ids.empty()) {
    records = snapshot_all();
  } else {
    for (const auto& id : ids) {
      auto e = find(id);
      if (!e) return error(404, "no session '" + id + "'");
      std::lock_guard lock(e->m);
      records.push_back(e->record);
    }
  }
  std::ostringstream os;
  write_artifact(os, analyze(records), name);
  text = os.str();
  return {200, nullptr};
}

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.data_dir), http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Service::~Service() { stop(); }

int Service::telemetry_port() const { return telemetry_ ? telemetry_->port() : 0; }

void Service::install_routes() {
  auto& s = *http_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req, nlohmann::json& out) {
    if (req.body.empty()) {
      out = nlohmann::json::object();
      return true;
    }
    out = nlohmann::json::parse(req.body, nullptr, false);
    return !out.is_discarded();
  };
  const std::string id = R"(([A-Za-z0-9_.\-]+))";

  s.Get("/api/v1/health", [reply, this](const httplib::Request&, httplib::Response& res) {
    reply(res, {200,
                {{"ok", true},
                 {"session_schema", kSessionSchema},
                 {"telemetry_port", telemetry_port()}}});
  });
  s.Post("/api/v1/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (!parse(req, body)) return reply(res, error(400, "body is not valid JSON"));
    reply(res, store_.create(body));
  });
  s.Get("/api/v1/sessions", [=, this](const httplib::Request&, httplib::Response& res) { reply(res, store_.list()); });
  s.Get("/api/v1/sessions/" + id, [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, store_.get(req.matches[1]));
  });
  s.Get("/api/v1/sessions/" + id + "/next", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, store_.next(req.matches[1]));
  });
  s.Post("/api/v1/sessions/" + id + "/responses", [=, this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (!parse(req, body)) return reply(res, error(400, "body is not valid JSON"));
    reply(res, store_.submit(req.matches[1], body));
  });
  s.Post("/api/v1/sessions/" + id + "/resume", [=, this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (!parse(req, body)) return reply(res, error(400, "body is not valid JSON"));
    reply(res, store_.resume(req.matches[1], body));
  });
  s.Get("/api/v1/sessions/" + id + "/trials.csv", [=, this](const httplib::Request& req, httplib::Response& res) {
    auto csv = store_.trials_csv(req.matches[1]);
    if (!csv) return reply(res, error(404, "no session '" + std::string(req.matches[1]) + "'"));
    res.set_content(*csv, "text/csv");
  });
  s.Get(R"(/api/v1/analysis/([a-z]+\.(csv|json|svg)))", [=, this](const httplib::Request& req, httplib::Response& res) {
    std::vector<std::string> ids;
    if (req.has_param("ids")) {
      std::istringstream in(req.get_param_value("ids"));
      for (std::string tok; std::getline(in, tok, ',');)
        if (!tok.empty()) ids.push_back(tok);
    }
    std::string text;
    const std::string name = req.matches[1];
    const ApiResponse r = store_.artifact(name, ids, text);
    if (r.status != 200) return reply(res, r);
    const auto ext = name.substr(name.rfind('.') + 1);
    res.set_content(text, ext == "csv" ? "text/csv" : ext == "json" ? "application/json" : "image/svg+xml");
  });
}

void Service::start() {
  port_ = cfg_.port == 0 ? http_->bind_to_any_port(cfg_.host) : (http_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
  if (port_ < 0) throw std::runtime_error("cannot bind HTTP port " + std::to_string(cfg_.port));
  telemetry_ = std::make_unique<TelemetryServer>(cfg_.host, cfg_.telemetry_port);
  telemetry_->start();
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void Service::stop() {
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  if (telemetry_) telemetry_->stop();
}

void Service::wait() {
  if (http_thread_.joinable()) http_thread_.join();
}

}  // namespace clickrender
