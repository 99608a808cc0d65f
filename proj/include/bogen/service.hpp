#pragma once

#include "bogen/artifacts.hpp"
#include "bogen/config.hpp"
#include "bogen/session.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace bogen {

/// A live session plus the lock that serializes requests against it.
struct SessionSlot {
  std::mutex mutex;
  std::unique_ptr<Session> session;
};

/// Owns every live session. Ids are "s1", "s2", ... in creation order.
class SessionManager {
public:
  SessionManager(std::shared_ptr<const Artifacts> artifacts, SessionConfig defaults,
                 std::optional<std::filesystem::path> snapshot_dir = std::nullopt);

  std::shared_ptr<SessionSlot> create(Mode mode, std::optional<std::uint64_t> seed = std::nullopt);
  /// Throws NotFound.
  std::shared_ptr<SessionSlot> get(const std::string& id) const;
  std::vector<std::string> ids() const;
  std::size_t size() const;

  const Artifacts& artifacts() const { return *artifacts_; }
  const SessionConfig& defaults() const { return defaults_; }

private:
  std::shared_ptr<const Artifacts> artifacts_;
  SessionConfig defaults_;
  std::optional<std::filesystem::path> snapshot_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  std::size_t next_ = 1;
};

/// HTTP status for an exception from the library: 400 bad input, 404 unknown
/// id, 403 feature disabled, 412 precondition, 409 state conflict, 500 else.
int http_status(const std::exception& e);
nlohmann::json error_body(const std::exception& e);

/// Session bounds after applying the service's bounds mode.
SessionConfig effective_session_config(const ServiceConfig& config, const Artifacts& artifacts);

/// The HTTP+JSON front of the session engine.
class Service {
public:
  Service(std::shared_ptr<const Artifacts> artifacts, const ServiceConfig& config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  SessionManager& sessions();

  /// Binds host:port (port 0 picks a free one) and returns the bound port,
  /// or -1 on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace bogen
