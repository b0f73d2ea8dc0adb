#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "oodret/retrieval_index.hpp"

namespace httplib {
class Server;
}

namespace oodret {

inline constexpr const char* kServiceVersion = "1.0.0";

struct ServiceSources {
  std::filesystem::path index;       // empty: no index loaded (queries answer 409)
  std::filesystem::path vocabulary;  // optional
  std::filesystem::path eval;        // optional eval.json
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-independent request handling over an immutable snapshot.
class QueryService {
 public:
  QueryService() = default;
  explicit QueryService(ServiceSources sources);

  /// Re-reads every source and swaps the snapshot in one step; on error the
  /// old snapshot stays.
  void reload();
  void reload(ServiceSources sources);

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

 private:
  struct Snapshot {
    std::optional<RetrievalIndex> index;
    Vocabulary vocabulary;
    std::optional<nlohmann::json> eval;
    std::filesystem::path sequence_root;
  };
  static std::shared_ptr<const Snapshot> build(const ServiceSources& sources);
  std::shared_ptr<const Snapshot> current() const;

  HttpResponse query(const Snapshot& snap, const std::string& body) const;
  HttpResponse sequence(const Snapshot& snap, const std::string& id) const;
  HttpResponse crop(const Snapshot& snap, const std::string& id, const std::string& n) const;

  mutable std::mutex mutex_;
  ServiceSources sources_;
  std::shared_ptr<const Snapshot> snapshot_ = std::make_shared<Snapshot>();
};

/// "host:port" split; throws invalid_argument.
std::pair<std::string, int> parse_listen(const std::string& text);

/// HTTP front end on a background thread.
class HttpServer {
 public:
  explicit HttpServer(QueryService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 binds an ephemeral port. Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  /// Blocks until stopped.
  void wait();

 private:
  QueryService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace oodret
