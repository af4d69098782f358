#include "arena/service.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>

#include "arena/errors.hpp"
#include "httplib.h"

namespace arena {

namespace {

constexpr const char* kJson = "application/json";

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message, json details = json::object()) {
  send_json(res, status, {{"code", code}, {"message", message}, {"details", details}});
}

std::string bearer(const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) return {};
  return h.substr(prefix.size());
}

bool same_secret(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json doc = json::parse(req.body);
    if (!doc.is_object()) throw ArenaError(ErrorCode::kSchemaViolation, "body must be an object");
    return doc;
  } catch (const json::parse_error& e) {
    throw ArenaError(ErrorCode::kSchemaViolation, std::string("malformed JSON: ") + e.what());
  }
}

std::string required_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw ArenaError(ErrorCode::kSchemaViolation, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

void allow_only(const json& body, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : body.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ArenaError(ErrorCode::kSchemaViolation, "unknown field '" + k + "'");
  }
}

Criterion criterion_param(const httplib::Request& req) {
  if (!req.has_param("criterion")) return Criterion::kTaskCompletion;
  return criterion_from_string(req.get_param_value("criterion"));
}

json stability_to_json(const StabilityReport& r) {
  return {{"stable", r.stable},
          {"tau_window", r.tau_window},
          {"max_dev", r.max_dev},
          {"completed", r.completed},
          {"checkpoints", r.checkpoints},
          {"min_comparisons", r.min_comparisons}};
}

class Unauthorized : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RateLimited : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace

struct ArenaService::Slot {
  Slot(EventLog l, Clock clock)
      : log(std::move(l)),
        comp(std::move(clock), [this](const Event& e) { log.append(e); }) {}

  std::mutex mu;  // serializes commands
  EventLog log;
  Competition comp;
  std::int64_t last_snapshot = 0;

  mutable std::mutex pub_mu;
  std::shared_ptr<const CompetitionState> published;

  std::shared_ptr<const CompetitionState> read() const {
    std::lock_guard<std::mutex> lock(pub_mu);
    return published;
  }
};

ServiceConfig ServiceConfig::from_env(ServiceConfig base) {
  if (const char* v = std::getenv("ARENA_ADDR"); v && *v) base.addr = v;
  if (const char* v = std::getenv("ARENA_DATA_DIR"); v && *v) base.data_dir = v;
  if (const char* v = std::getenv("ARENA_ADMIN_TOKEN"); v && *v) base.admin_token = v;
  return base;
}

ServiceConfig ServiceConfig::from_env() { return from_env(ServiceConfig{}); }

std::string generate_token() {
  std::random_device rd;
  std::string out;
  char buf[9];
  for (int i = 0; i < 4; ++i) {
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    out += buf;
  }
  return out;
}

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

int http_status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kNonFiniteScore:
    case ErrorCode::kMissingTaskScore:
    case ErrorCode::kAgentSetMismatch:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kMissingTruth:
      return 400;
    case ErrorCode::kUnknownJudge:
      return 401;
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownMatch:
      return 404;
    case ErrorCode::kDuplicate:
    case ErrorCode::kAlreadyCompleted:
    case ErrorCode::kNotAssignedToJudge:
    case ErrorCode::kEmptyCompetition:
      return 409;
    case ErrorCode::kMatchExpired:
      return 410;
    case ErrorCode::kNoMatchAvailable:
      return 204;
    case ErrorCode::kNumerical:
    case ErrorCode::kStorageFailure:
    case ErrorCode::kCorruptLog:
      return 500;
  }
  return 500;
}

std::pair<std::string, int> split_addr(const std::string& addr, int default_port) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) return {addr, default_port};
  const std::string port = addr.substr(colon + 1);
  if (port.empty() || port.find_first_not_of("0123456789") != std::string::npos) {
    throw ArenaError(ErrorCode::kSchemaViolation, "bad listen address '" + addr + "'");
  }
  return {addr.substr(0, colon), std::stoi(port)};
}

ArenaService::ArenaService(ServiceConfig cfg)
    : cfg_(std::move(cfg)), server_(std::make_unique<httplib::Server>()) {
  if (!cfg_.clock) cfg_.clock = wall_clock_ms;
  if (cfg_.admin_token.empty()) {
    throw ArenaError(ErrorCode::kSchemaViolation, "admin token must be configured");
  }
  if (cfg_.snapshot_every < 1) throw ArenaError(ErrorCode::kDomain, "snapshot_every must be >= 1");
  std::filesystem::create_directories(cfg_.data_dir);
  load_existing();
  routes();
}

ArenaService::~ArenaService() { stop(); }

void ArenaService::load_existing() {
  for (const auto& id : list_competitions(cfg_.data_dir)) {
    EventLog log(log_path(cfg_.data_dir, id));  // drops a torn tail first
    Recovery rec = recover(cfg_.data_dir, id);
    auto slot = std::make_unique<Slot>(std::move(log), cfg_.clock);
    slot->comp = Competition::restore(std::move(rec.state), {}, cfg_.clock,
                                      [s = slot.get()](const Event& e) { s->log.append(e); });
    slot->last_snapshot = rec.snapshot_seq;
    slot->published = std::make_shared<const CompetitionState>(slot->comp.state());
    reindex_tokens(*slot);
    slots_[id] = std::move(slot);
  }
}

ArenaService::Slot* ArenaService::find_slot(const std::string& id) const {
  std::shared_lock lock(registry_mu_);
  auto it = slots_.find(id);
  return it == slots_.end() ? nullptr : it->second.get();
}

ArenaService::Slot& ArenaService::require_slot(const std::string& id) const {
  Slot* s = find_slot(id);
  if (!s) throw ArenaError(ErrorCode::kNotFound, "unknown competition '" + id + "'");
  return *s;
}

std::size_t ArenaService::competition_count() const {
  std::shared_lock lock(registry_mu_);
  return slots_.size();
}

void ArenaService::reindex_tokens(const Slot& slot) {
  const auto& st = slot.comp.state();
  for (auto it = tokens_.begin(); it != tokens_.end();) {
    it = it->second.competition == st.id ? tokens_.erase(it) : std::next(it);
  }
  for (const auto& [judge, info] : st.judges) {
    if (!info.revoked) tokens_[info.token] = {st.id, judge};
  }
}

// Caller holds slot.mu.
void ArenaService::after_mutation(Slot& slot) {
  const auto& st = slot.comp.state();
  if (st.last_seq - slot.last_snapshot >= cfg_.snapshot_every) {
    try {
      write_snapshot(cfg_.data_dir, st);
      slot.last_snapshot = st.last_seq;
    } catch (const std::exception& e) {
      std::cerr << "warning: snapshot failed: " << e.what() << "\n";
    }
  }
  auto snap = std::make_shared<const CompetitionState>(st);
  std::lock_guard<std::mutex> lock(slot.pub_mu);
  slot.published = std::move(snap);
}

bool ArenaService::over_cap(const std::string& token) {
  if (cfg_.request_cap_per_minute <= 0) return false;
  const std::int64_t window = cfg_.clock() / 60000;
  std::lock_guard<std::mutex> lock(cap_mu_);
  auto& [start, count] = cap_[token];
  if (start != window) {
    start = window;
    count = 0;
  }
  return ++count > cfg_.request_cap_per_minute;
}

bool ArenaService::authorize_admin(const httplib::Request& req) const {
  return same_secret(bearer(req), cfg_.admin_token);
}

ArenaService::Principal ArenaService::authorize_judge(const httplib::Request& req) const {
  const std::string token = bearer(req);
  std::shared_lock lock(registry_mu_);
  auto it = tokens_.find(token);
  if (token.empty() || it == tokens_.end()) throw Unauthorized("invalid judge token");
  return it->second;
}

void ArenaService::routes() {
  auto& srv = *server_;
  // Every handler runs inside this wrapper so errors share one body shape.
  auto wrap = [this](auto fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        const std::string token = bearer(req);
        if (!token.empty() && over_cap(token)) throw RateLimited("request cap exceeded");
        fn(req, res);
      } catch (const Unauthorized& e) {
        send_error(res, 401, "unauthorized", e.what());
      } catch (const RateLimited& e) {
        send_error(res, 429, "rate_limited", e.what());
      } catch (const CorruptLogError& e) {
        send_error(res, 500, to_string(e.code()), e.what(), {{"seq", e.seq()}});
      } catch (const ArenaError& e) {
        const int status = http_status_of(e.code());
        if (status == 204) {
          res.status = 204;
          return;
        }
        send_error(res, status, to_string(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, to_string(ErrorCode::kSchemaViolation), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  };

  srv.Get("/api/v1/competitions", wrap([this](const auto& req, auto& res) {
            handle_list(req, res);
          }));
  srv.Post("/api/v1/competitions", wrap([this](const auto& req, auto& res) {
             handle_create(req, res);
           }));
  srv.Post(R"(/api/v1/competitions/([^/]+)/(agents|tasks|seeds|videos|judges))",
           wrap([this](const auto& req, auto& res) {
             handle_register(req.matches[1], req.matches[2], req, res);
           }));
  srv.Post(R"(/api/v1/competitions/([^/]+)/config)", wrap([this](const auto& req, auto& res) {
             handle_config(req.matches[1], req, res);
           }));
  srv.Get(R"(/api/v1/competitions/([^/]+)/next-match)",
          wrap([this](const auto& req, auto& res) {
            handle_next_match(req.matches[1], req, res);
          }));
  srv.Post(R"(/api/v1/matches/(\d+)/result)", wrap([this](const auto& req, auto& res) {
             handle_result(std::stoull(req.matches[1].str()), req, res);
           }));
  srv.Get(R"(/api/v1/competitions/([^/]+)/leaderboard)",
          wrap([this](const auto& req, auto& res) {
            handle_leaderboard(req.matches[1], req, res);
          }));
  srv.Get(R"(/api/v1/competitions/([^/]+)/stability)", wrap([this](const auto& req, auto& res) {
            handle_stability(req.matches[1], req, res);
          }));
  srv.Get(R"(/api/v1/competitions/([^/]+)/export)", wrap([this](const auto& req, auto& res) {
            handle_export(req.matches[1], req, res);
          }));
}

void ArenaService::handle_list(const httplib::Request& req, httplib::Response& res) {
  if (!authorize_admin(req)) throw Unauthorized("admin token required");
  json ids = json::array();
  std::shared_lock lock(registry_mu_);
  for (const auto& [id, slot] : slots_) ids.push_back(id);
  send_json(res, 200, {{"competitions", ids}});
}

void ArenaService::handle_create(const httplib::Request& req, httplib::Response& res) {
  if (!authorize_admin(req)) throw Unauthorized("admin token required");
  const json body = parse_body(req);
  allow_only(body, {"id", "name", "criteria", "rating", "engine", "rng_seed"});
  CreateOptions o;
  o.name = body.contains("name") ? required_string(body, "name") : std::string{};
  o.id = body.contains("id") ? required_string(body, "id") : o.name;
  if (body.contains("criteria")) {
    o.criteria.clear();
    for (const auto& c : body.at("criteria")) o.criteria.push_back(criterion_from_string(c));
  }
  if (body.contains("rating")) o.rating = rating_config_from_json(body.at("rating"));
  if (body.contains("engine")) o.engine = engine_config_from_json(body.at("engine"));
  o.rng_seed = body.contains("rng_seed") ? body.at("rng_seed").get<std::uint64_t>()
                                         : static_cast<std::uint64_t>(std::random_device{}()) << 32 |
                                               std::random_device{}();

  std::unique_lock lock(registry_mu_);
  if (slots_.count(o.id) || std::filesystem::exists(log_path(cfg_.data_dir, o.id))) {
    throw ArenaError(ErrorCode::kDuplicate, "competition '" + o.id + "' exists");
  }
  {
    // Validate before touching the filesystem.
    Competition probe(cfg_.clock);
    probe.create(o);
  }
  auto slot = std::make_unique<Slot>(EventLog(log_path(cfg_.data_dir, o.id)), cfg_.clock);
  std::lock_guard<std::mutex> slot_lock(slot->mu);
  slot->comp.create(o);
  after_mutation(*slot);
  slots_[o.id] = std::move(slot);
  send_json(res, 201, {{"id", o.id}});
}

void ArenaService::handle_register(const std::string& id, const std::string& entity,
                                   const httplib::Request& req, httplib::Response& res) {
  if (!authorize_admin(req)) throw Unauthorized("admin token required");
  Slot& slot = require_slot(id);
  const json body = parse_body(req);
  std::lock_guard<std::mutex> lock(slot.mu);
  json out;
  if (entity == "agents") {
    allow_only(body, {"name"});
    const auto name = required_string(body, "name");
    slot.comp.register_agent(name);
    out = {{"id", name}};
  } else if (entity == "tasks") {
    allow_only(body, {"name", "description"});
    const auto name = required_string(body, "name");
    slot.comp.register_task(name, body.contains("description")
                                      ? required_string(body, "description")
                                      : std::string{});
    out = {{"id", name}};
  } else if (entity == "seeds") {
    allow_only(body, {"task", "seed"});
    const auto seed = required_string(body, "seed");
    slot.comp.register_seed(required_string(body, "task"), seed);
    out = {{"id", seed}};
  } else if (entity == "videos") {
    allow_only(body, {"agent", "task", "seed", "uri", "duration_s"});
    VideoRef v{required_string(body, "agent"), required_string(body, "task"),
               required_string(body, "seed"), required_string(body, "uri"), std::nullopt};
    if (body.contains("duration_s")) v.duration_s = body.at("duration_s").get<double>();
    slot.comp.register_video(v);
    out = {{"id", v.agent + "/" + v.task + "/" + v.seed}};
  } else {
    allow_only(body, {"name"});
    const auto name = required_string(body, "name");
    const std::string token = generate_token();
    slot.comp.register_judge(name, token);
    std::unique_lock reg(registry_mu_);
    reindex_tokens(slot);
    out = {{"id", name}, {"token", token}};
  }
  after_mutation(slot);
  send_json(res, 201, out);
}

void ArenaService::handle_config(const std::string& id, const httplib::Request& req,
                                 httplib::Response& res) {
  if (!authorize_admin(req)) throw Unauthorized("admin token required");
  Slot& slot = require_slot(id);
  const json body = parse_body(req);
  std::lock_guard<std::mutex> lock(slot.mu);
  slot.comp.update_config(body);
  {
    std::unique_lock reg(registry_mu_);
    reindex_tokens(slot);
  }
  after_mutation(slot);
  send_json(res, 200, {{"id", id}, {"seq", slot.comp.state().last_seq}});
}

void ArenaService::handle_next_match(const std::string& id, const httplib::Request& req,
                                     httplib::Response& res) {
  const Principal who = authorize_judge(req);
  if (who.competition != id) throw Unauthorized("token not valid for this competition");
  Slot& slot = require_slot(id);
  const Criterion criterion = criterion_param(req);
  std::lock_guard<std::mutex> lock(slot.mu);
  const auto before = slot.comp.state().last_seq;
  std::optional<Match> m;
  try {
    m = slot.comp.next_match(criterion, who.judge);
  } catch (...) {
    if (slot.comp.state().last_seq != before) after_mutation(slot);  // expirations
    throw;
  }
  after_mutation(slot);
  const auto& st = slot.comp.state();
  auto side = [&](const AgentId& agent, const char* alias) {
    auto v = st.videos.find({agent, m->task, m->seed});
    return json{{"agent_alias", alias},
                {"video_uri", v == st.videos.end() ? json(nullptr) : json(v->second.uri)}};
  };
  auto desc = st.task_descriptions.find(m->task);
  send_json(res, 200,
            {{"match_id", m->id},
             {"task", m->task},
             {"task_description",
              desc == st.task_descriptions.end() ? std::string{} : desc->second},
             {"seed", m->seed},
             {"criterion", to_string(criterion)},
             {"first", side(m->first, "A")},
             {"second", side(m->second, "B")},
             {"deadline", m->deadline}});
}

void ArenaService::handle_result(MatchId match, const httplib::Request& req,
                                 httplib::Response& res) {
  const Principal who = authorize_judge(req);
  Slot& slot = require_slot(who.competition);
  const json body = parse_body(req);
  allow_only(body, {"outcome"});
  const VerdictOutcome outcome = verdict_outcome_from_string(required_string(body, "outcome"));
  std::lock_guard<std::mutex> lock(slot.mu);
  const SubmitResult r = slot.comp.submit_outcome({match, who.judge, outcome});
  if (r.applied) after_mutation(slot);
  send_json(res, 200,
            {{"match_id", match},
             {"outcome", to_string(outcome)},
             {"recorded", r.applied},
             {"completed", r.judge_completed}});
}

void ArenaService::handle_leaderboard(const std::string& id, const httplib::Request& req,
                                      httplib::Response& res) {
  if (!authorize_admin(req)) throw Unauthorized("admin token required");
  const auto st = require_slot(id).read();
  const Criterion criterion = criterion_param(req);
  const json body{{"competition", id},
                  {"criterion", to_string(criterion)},
                  {"tasks", st->tasks},
                  {"rows", rows_to_json(leaderboard_of(*st, criterion))},
                  {"stability", stability_to_json(stability_of(*st, criterion,
                                                               st->engine.stability))}};
  const std::string text = body.dump();
  const std::string etag = "\"" + fnv1a_hex(text) + "\"";
  res.set_header("ETag", etag);
  if (req.get_header_value("If-None-Match") == etag) {
    res.status = 304;
    return;
  }
  res.status = 200;
  res.set_content(text, kJson);
}

void ArenaService::handle_stability(const std::string& id, const httplib::Request& req,
                                    httplib::Response& res) {
  if (!authorize_admin(req)) throw Unauthorized("admin token required");
  const auto st = require_slot(id).read();
  const Criterion criterion = criterion_param(req);
  json body = stability_to_json(stability_of(*st, criterion, st->engine.stability));
  body["criterion"] = to_string(criterion);
  send_json(res, 200, body);
}

void ArenaService::handle_export(const std::string& id, const httplib::Request& req,
                                 httplib::Response& res) {
  if (!authorize_admin(req)) throw Unauthorized("admin token required");
  const auto st = require_slot(id).read();
  const ExportFormat fmt = export_format_from_string(
      req.has_param("format") ? req.get_param_value("format") : "json");
  const std::string text = export_leaderboard(*st, criterion_param(req), fmt);
  res.status = 200;
  res.set_content(text, fmt == ExportFormat::kCsv ? "text/csv" : kJson);
}

int ArenaService::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) {
    throw ArenaError(ErrorCode::kStorageFailure,
                     "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

bool ArenaService::listen_after_bind() { return server_->listen_after_bind(); }

bool ArenaService::run() {
  const auto [host, port] = split_addr(cfg_.addr);
  bind(host, port);
  return listen_after_bind();
}

void ArenaService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void ArenaService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace arena
