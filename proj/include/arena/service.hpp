#pragma once

// HTTP facade over the engine under /api/v1. One event log per competition
// in the data directory; state is replayed from snapshot plus log on start.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <utility>

#include "arena/engine.hpp"
#include "arena/errors.hpp"
#include "arena/store.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace arena {

struct ServiceConfig {
  std::string addr = "127.0.0.1:8080";
  std::filesystem::path data_dir = "arena-data";
  std::string admin_token;
  Clock clock;                       // defaults to wall-clock milliseconds
  std::int64_t snapshot_every = 1000;
  long request_cap_per_minute = 0;   // per bearer token, 0 disables

  /// Reads ARENA_ADDR, ARENA_DATA_DIR and ARENA_ADMIN_TOKEN over `base`.
  static ServiceConfig from_env(ServiceConfig base);
  static ServiceConfig from_env();
};

/// 32 hex characters from the system entropy source.
std::string generate_token();

/// Wall clock in milliseconds since the epoch.
std::int64_t wall_clock_ms();

int http_status_of(ErrorCode code);

/// "host:port" with the port optional.
std::pair<std::string, int> split_addr(const std::string& addr, int default_port = 8080);

class ArenaService {
 public:
  explicit ArenaService(ServiceConfig cfg);
  ~ArenaService();

  ArenaService(const ArenaService&) = delete;
  ArenaService& operator=(const ArenaService&) = delete;

  /// Binds the listening socket; port 0 picks a free one. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires bind().
  bool listen_after_bind();
  /// bind + listen on cfg.addr.
  bool run();
  void stop();
  void wait_until_ready() const;

  std::size_t competition_count() const;
  const ServiceConfig& config() const { return cfg_; }

 private:
  struct Slot;
  struct Principal {
    std::string competition;
    JudgeId judge;
  };

  void load_existing();
  void routes();
  Slot* find_slot(const std::string& id) const;
  Slot& require_slot(const std::string& id) const;
  void reindex_tokens(const Slot& slot);
  void after_mutation(Slot& slot);

  bool authorize_admin(const httplib::Request& req) const;
  Principal authorize_judge(const httplib::Request& req) const;
  bool over_cap(const std::string& token);

  void handle_create(const httplib::Request& req, httplib::Response& res);
  void handle_register(const std::string& id, const std::string& entity,
                       const httplib::Request& req, httplib::Response& res);
  void handle_config(const std::string& id, const httplib::Request& req,
                     httplib::Response& res);
  void handle_next_match(const std::string& id, const httplib::Request& req,
                         httplib::Response& res);
  void handle_result(MatchId match, const httplib::Request& req, httplib::Response& res);
  void handle_leaderboard(const std::string& id, const httplib::Request& req,
                          httplib::Response& res);
  void handle_stability(const std::string& id, const httplib::Request& req,
                        httplib::Response& res);
  void handle_export(const std::string& id, const httplib::Request& req,
                     httplib::Response& res);
  void handle_list(const httplib::Request& req, httplib::Response& res);

  ServiceConfig cfg_;
  std::unique_ptr<httplib::Server> server_;

  mutable std::shared_mutex registry_mu_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  std::map<std::string, Principal> tokens_;

  std::mutex cap_mu_;
  std::map<std::string, std::pair<std::int64_t, long>> cap_;
};

}  // namespace arena
