#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "grandjury/decay.hpp"
#include "grandjury/ledger.hpp"

namespace grandjury::api {

// Transport-neutral request/response pair; the HTTP adapter maps onto these.
struct Request {
  std::string method;
  std::string path;
  std::multimap<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-cased names
  std::string body;
  std::map<std::string, std::string> form;  // multipart fields, file contents included
};

struct Response {
  int status = 200;
  Json body;
};

int status_for(ErrorCode code);
Json error_body(const Error& e);

// Body of POST /v1/evaluate.
struct EvaluateRequest {
  std::optional<double> previous_score;
  std::vector<double> votes;
  std::optional<std::vector<double>> reputations;
  std::optional<double> delta_t;
  std::optional<double> lambda;
  std::optional<TimeUnit> time_unit;
  std::optional<double> sigma2_crit;
  std::optional<ColdStart> cold_start;
};

EvaluateRequest parse_evaluate_request(const Json& body);

struct EvaluateOutcome {
  engine::BatchResult result;
  DecayConfig config;
  bool cold_start = false;
};

// Stateless scoring. Missing previous_score or delta_t selects the cold-start rule.
EvaluateOutcome evaluate(const EvaluateRequest& request, const DecayConfig& base);
Json to_json(const EvaluateOutcome& outcome);

struct ServiceOptions {
  // Bearer token for mutating endpoints. Empty disables the check.
  std::string token;
  // Token for POST /v1/config; falls back to `token` when empty.
  std::string admin_token;
  std::function<Timestamp()> clock = Timestamp::now;
};

class Service {
 public:
  Service(ledger::Ledger& ledger, ServiceOptions options = {});

  // Never throws: failures become error responses.
  Response handle(const Request& request);

  Json handle_evaluate(const Json& body) const;
  Json handle_submit_votes(const Json& body, bool commit,
                           const std::optional<std::string>& idempotency_key);

 private:
  Response route(const Request& request);
  void require_token(const Request& request, const std::string& token) const;

  ledger::Ledger& ledger_;
  ServiceOptions options_;
  std::mutex commit_mutex_;
};

// cpp-httplib front end. Runs the listener on a background thread.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and starts listening; port 0 picks a free port. Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks in the caller's thread.
  void listen_blocking(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace grandjury::api
