#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "triage/explain.hpp"
#include "triage/projection.hpp"
#include "triage/strategies.hpp"

namespace httplib {
class Server;
}

namespace triage {

inline constexpr int kSchemaVersion = 1;

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::vector<std::pair<std::string, std::string>> headers;
};

// Everything a loaded service serves; immutable once published.
struct ServiceAssets {
  EncoderModel<float> model;
  Tokenizer tokenizer;
  std::string model_hash;  // SHA-256 of the checkpoint file
  StrategyOptions options;
  Corpus corpus;
  std::optional<ProjectionMap> projection;
};

// Request handlers independent of the HTTP transport. Handlers only read the
// published assets, so they may run concurrently.
class TriageService {
 public:
  TriageService();

  void load(ServiceAssets assets);
  bool ready() const;

  HttpResponse health() const;
  HttpResponse map(const std::optional<std::string>& label, const std::optional<std::string>& if_none_match) const;
  HttpResponse triage(std::string_view body) const;
  HttpResponse list_instances(const std::optional<std::string>& offset, const std::optional<std::string>& limit) const;
  HttpResponse get_instance(std::string_view instance_id) const;

 private:
  struct Published;
  std::shared_ptr<const Published> snapshot() const;

  mutable std::mutex mutex_;
  std::shared_ptr<const Published> published_;
  std::chrono::steady_clock::time_point started_;
};

HttpResponse error_response(int status, std::string_view code, std::string_view message);

// Registers the /v1 routes (and an optional static mount for the UI).
void register_routes(httplib::Server& server, const TriageService& service, const std::string& static_dir = {});

}  // namespace triage
