#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "pm/backends.hpp"
#include "pm/corpus.hpp"
#include "pm/error.hpp"
#include "pm/session.hpp"

namespace httplib {
class Server;
}

namespace pm {

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
};

/// The single (status, code) pair of every library error.
ApiError to_api_error(const Error& error);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  std::shared_ptr<const Corpus> corpus;    // null when no index is loaded
  std::filesystem::path corpus_dir;        // image_ref paths resolve against this
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<const Generator> generator;
  SessionConfig config;
  std::uint64_t default_seed = 0;
  bool async_creation = false;             // 202 + status polling
  std::string common_pairs_json = "[]";
  std::optional<std::filesystem::path> sessions_dir;  // persist created sessions
};

/// Routes requests to sessions. Transport-independent so it can be driven
/// directly or mounted on an httplib::Server.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options);
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body);

  /// Blocks until no asynchronous creation is running.
  void wait_idle();

  std::shared_ptr<const SessionState> session(std::string_view id) const;

 private:
  enum class Status { pending, ready, failed };
  struct Entry {
    Status status = Status::pending;
    std::shared_ptr<SessionState> state;
    ApiError error;
  };

  HttpResponse create(std::string_view body);
  HttpResponse status(const std::string& id);
  HttpResponse layout(const std::string& id);
  HttpResponse evaluate(const std::string& id, std::string_view body);
  HttpResponse selection(const std::string& id, std::string_view body);
  HttpResponse image(const std::string& record_id);
  std::shared_ptr<SessionState> ready_session(const std::string& id) const;
  std::string next_id(const SessionInput& input);
  void finish(const std::string& id, std::shared_ptr<SessionState> state, std::optional<ApiError> error);

  ServiceOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry> sessions_;
  std::uint64_t counter_ = 0;

  std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::size_t running_jobs_ = 0;
  std::vector<std::jthread> jobs_;
};

/// JSON documents served by the API.
std::string layout_document(const SessionState& state, std::string_view session_id);
std::string evaluation_document(const EvaluationResult& result);
std::string selection_document(const SelectionReport& report);

/// Installs every route on `server`; `static_dir` is mounted at "/".
void mount_routes(httplib::Server& server, SessionService& service,
                  const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace pm
