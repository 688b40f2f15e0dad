#include "grandjury/service.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "grandjury/analytics.hpp"
#include "grandjury/ingest.hpp"

namespace grandjury::api {
namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

std::optional<std::string> query_value(const Request& r, const std::string& key) {
  auto it = r.query.find(key);
  if (it == r.query.end()) return std::nullopt;
  return it->second;
}

bool parse_flag(const std::optional<std::string>& v) {
  if (!v) return false;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no" || v->empty()) return false;
  throw Error(ErrorCode::BadRequest, "boolean query parameter expected", *v);
}

std::vector<std::string> roster_from_query(const Request& r) {
  std::vector<std::string> roster;
  auto [lo, hi] = r.query.equal_range("roster");
  for (auto it = lo; it != hi; ++it) {
    std::istringstream in(it->second);
    std::string id;
    while (std::getline(in, id, ',')) {
      if (!id.empty()) roster.push_back(id);
    }
  }
  return roster;
}

Json parse_body(const Request& r) {
  if (r.body.empty()) return Json::object();
  try {
    return Json::parse(r.body);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BadRequest, "request body is not valid JSON", e.what());
  }
}

double number_field(const Json& body, const char* key) {
  double v = 0.0;
  if (!read_number(body.at(key), v)) {
    throw Error(ErrorCode::BadRequest, std::string(key) + " must be numeric", key);
  }
  return v;
}

std::vector<double> number_list(const Json& body, const char* key) {
  const auto& arr = body.at(key);
  if (!arr.is_array()) throw Error(ErrorCode::BadRequest, std::string(key) + " must be an array", key);
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    double x = 0.0;
    if (!read_number(v, x)) {
      throw Error(ErrorCode::BadRequest, std::string(key) + " entries must be numeric", key);
    }
    out.push_back(x);
  }
  return out;
}

bool present(const Json& body, const char* key) {
  return body.contains(key) && !body.at(key).is_null();
}

std::vector<VoteRecord> votes_from_json(const Json& arr) {
  if (!arr.is_array()) throw Error(ErrorCode::BadRequest, "votes must be an array");
  std::vector<VoteRecord> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto result = try_validate_vote_record(arr[i]);
    if (auto* err = std::get_if<Error>(&result)) {
      throw Error(err->code(), err->what(), "votes[" + std::to_string(i) + "]: " + err->detail());
    }
    out.push_back(std::get<VoteRecord>(std::move(result)));
  }
  return out;
}

Json states_json(const std::vector<ScoreState>& states) {
  Json arr = Json::array();
  for (const auto& s : states) arr.push_back(to_json(s));
  return arr;
}

}  // namespace

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownInference:
    case ErrorCode::UnknownCollection: return 404;
    case ErrorCode::AlreadyCommitted:
    case ErrorCode::DuplicateId:
    case ErrorCode::DuplicateCollection:
    case ErrorCode::NonMonotoneTime: return 409;
    case ErrorCode::UnknownReference: return 422;
    case ErrorCode::CorruptLedger:
    case ErrorCode::StorageFailure: return 500;
    default: return 400;
  }
}

Json error_body(const Error& e) {
  return Json{{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

EvaluateRequest parse_evaluate_request(const Json& body) {
  if (!body.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
  EvaluateRequest r;
  if (!present(body, "votes")) throw Error(ErrorCode::EmptyBatch, "votes is required");
  r.votes = number_list(body, "votes");
  if (present(body, "reputations")) r.reputations = number_list(body, "reputations");
  if (present(body, "previous_score")) r.previous_score = number_field(body, "previous_score");
  if (present(body, "delta_t")) r.delta_t = number_field(body, "delta_t");
  if (present(body, "lambda")) r.lambda = number_field(body, "lambda");
  if (present(body, "sigma2_crit")) r.sigma2_crit = number_field(body, "sigma2_crit");
  if (present(body, "time_unit")) r.time_unit = parse_time_unit(body.at("time_unit").get<std::string>());
  if (present(body, "cold_start")) {
    r.cold_start = parse_cold_start(body.at("cold_start").get<std::string>());
  }
  return r;
}

EvaluateOutcome evaluate(const EvaluateRequest& request, const DecayConfig& base) {
  EvaluateOutcome out;
  out.config = base;
  if (request.lambda) out.config.lambda = *request.lambda;
  if (request.time_unit) out.config.time_unit = *request.time_unit;
  if (request.sigma2_crit) out.config.sigma2_crit = *request.sigma2_crit;
  if (request.cold_start) out.config.cold_start = *request.cold_start;
  out.config.validate();

  std::vector<double> reps = request.reputations.value_or(std::vector<double>(request.votes.size(), 1.0));
  std::optional<engine::Prior> prior;
  if (request.previous_score && request.delta_t) {
    prior = engine::Prior{*request.previous_score, *request.delta_t};
  }
  out.cold_start = !prior;
  out.result = engine::evaluate(request.votes, reps, prior, out.config);
  return out;
}

Json to_json(const EvaluateOutcome& outcome) {
  Json j = engine::to_json(outcome.result);
  j["cold_start"] = outcome.cold_start;
  j["config"] = grandjury::to_json(outcome.config);
  return j;
}

Service::Service(ledger::Ledger& ledger, ServiceOptions options)
    : ledger_(ledger), options_(std::move(options)) {
  if (options_.admin_token.empty()) options_.admin_token = options_.token;
}

void Service::require_token(const Request& request, const std::string& token) const {
  if (token.empty()) return;
  auto it = request.headers.find("authorization");
  if (it == request.headers.end() || it->second != "Bearer " + token) {
    throw Error(ErrorCode::Unauthorized, "missing or invalid bearer token");
  }
}

Json Service::handle_evaluate(const Json& body) const {
  return to_json(evaluate(parse_evaluate_request(body), ledger_.config()));
}

Json Service::handle_submit_votes(const Json& body, bool commit,
                                  const std::optional<std::string>& idempotency_key) {
  const Json& raw = body.is_object() && body.contains("votes") ? body.at("votes") : body;
  auto records = votes_from_json(raw);
  if (records.empty()) throw Error(ErrorCode::EmptyBatch, "no votes submitted");

  std::lock_guard lock(commit_mutex_);
  auto before = ledger_.size();
  auto seqs = ledger_.append_votes(records, idempotency_key);
  bool replayed = ledger_.size() == before;

  Json results = Json::object();
  if (commit) {
    auto view = ledger_.snapshot();
    std::map<std::string, std::vector<std::uint64_t>> groups;
    for (auto seq : seqs) {
      if (!view.committed().count(seq)) groups[view.votes().at(seq).inference_id].push_back(seq);
    }
    // Server receipt time is the batch time; it is persisted in the commit.
    Timestamp receipt = options_.clock();
    auto config = ledger_.config();
    for (const auto& [id, group] : groups) {
      auto c = ledger_.commit_batch(id, group, config, receipt);
      results[id] = Json{{"batch_seq", c.batch_seq},
                         {"result", engine::to_json(c.result)},
                         {"state", to_json(c.state)}};
    }
  }
  return Json{{"seqs", seqs}, {"replayed", replayed}, {"results", results}};
}

Response Service::handle(const Request& request) {
  try {
    return route(request);
  } catch (const Error& e) {
    return Response{status_for(e.code()), error_body(e)};
  } catch (const nlohmann::json::exception& e) {
    return Response{400, error_body(Error(ErrorCode::BadRequest, "malformed request", e.what()))};
  } catch (const std::exception& e) {
    return Response{500, error_body(Error(ErrorCode::StorageFailure, "internal error", e.what()))};
  }
}

Response Service::route(const Request& request) {
  auto parts = split_path(request.path);
  const auto& method = request.method;
  auto not_found = [&] {
    return Error(ErrorCode::NotFound, "no route for " + method + " " + request.path);
  };
  if (parts.size() < 2 || parts[0] != "v1") throw not_found();
  const auto& resource = parts[1];

  if (resource == "health" && method == "GET") {
    return {200, Json{{"status", "ok"}, {"entries", ledger_.size()}, {"head", ledger_.head_checksum()}}};
  }

  if (resource == "evaluate" && method == "POST" && parts.size() == 2) {
    return {200, handle_evaluate(parse_body(request))};
  }

  if (resource == "votes" && method == "POST" && parts.size() == 2) {
    require_token(request, options_.token);
    std::optional<std::string> key;
    if (auto it = request.headers.find("idempotency-key"); it != request.headers.end()) key = it->second;
    if (auto q = query_value(request, "idempotency_key")) key = *q;
    return {200, handle_submit_votes(parse_body(request), parse_flag(query_value(request, "commit")), key)};
  }

  if (resource == "scores" && method == "GET") {
    auto view = ledger_.snapshot();
    if (parts.size() == 2) {
      std::vector<ScoreState> all;
      for (const auto& [id, s] : view.states()) all.push_back(s);
      return {200, states_json(all)};
    }
    if (parts.size() == 3) {
      const auto& id = parts[2];
      if (!view.inferences().count(id)) throw Error(ErrorCode::UnknownInference, "unknown inference", id);
      auto it = view.states().find(id);
      if (it == view.states().end()) throw Error(ErrorCode::NotFound, "no batch committed yet", id);
      return {200, to_json(it->second)};
    }
  }

  if (resource == "ambiguous" && method == "GET" && parts.size() == 2) {
    auto view = ledger_.snapshot();
    std::vector<ScoreState> flagged;
    for (const auto& [id, s] : view.states()) {
      if (s.ambiguous) flagged.push_back(s);
    }
    std::stable_sort(flagged.begin(), flagged.end(), [](const ScoreState& a, const ScoreState& b) {
      return b.last_batch_time < a.last_batch_time;
    });
    return {200, states_json(flagged)};
  }

  if (resource == "audit" && method == "GET" && parts.size() == 3) {
    Json items = Json::array();
    for (const auto& item : ledger_.audit_trail(parts[2])) items.push_back(ledger::to_json(item));
    return {200, Json{{"inference_id", parts[2]}, {"items", items}}};
  }

  if (resource == "collections") {
    if (method == "POST" && parts.size() == 2) {
      require_token(request, options_.token);
      std::string content;
      ingest::IngestOptions opts;
      std::string format;
      if (!request.form.empty()) {
        auto field = [&](const char* k) {
          auto it = request.form.find(k);
          return it == request.form.end() ? std::string() : it->second;
        };
        content = field("file");
        format = field("format");
        if (!field("collection_id").empty()) opts.collection_id = field("collection_id");
        opts.license = field("license");
        opts.source_uri = field("source_uri");
      } else {
        auto body = parse_body(request);
        content = body.value("content", "");
        format = body.value("format", "");
        if (body.contains("collection_id")) opts.collection_id = body.at("collection_id").get<std::string>();
        opts.license = body.value("license", "");
        opts.source_uri = body.value("source_uri", "");
      }
      if (auto q = query_value(request, "format"); q && format.empty()) format = *q;
      if (format.empty()) throw Error(ErrorCode::BadRequest, "format is required (csv or jsonl)");
      auto manifest = ingest::ingest_inference_collection(ledger_, content, ingest::parse_format(format), opts);
      return {201, to_json(manifest)};
    }
    if (method == "GET") {
      auto view = ledger_.snapshot();
      if (parts.size() == 2) {
        Json arr = Json::array();
        for (const auto& [id, m] : view.collections()) arr.push_back(to_json(m));
        return {200, arr};
      }
      if (parts.size() == 3) {
        auto it = view.collections().find(parts[2]);
        if (it == view.collections().end()) throw Error(ErrorCode::UnknownCollection, "unknown collection", parts[2]);
        return {200, to_json(it->second)};
      }
      if (parts.size() == 4 && parts[3] == "export") {
        auto fmt = ingest::parse_format(query_value(request, "format").value_or("jsonl"));
        return {200, Json{{"format", fmt == ingest::FileFormat::Csv ? "csv" : "jsonl"},
                          {"content", ingest::export_collection(view, parts[2], fmt)}}};
      }
    }
  }

  if (resource == "prompts" && parts.size() == 2) {
    if (method == "GET") {
      Json arr = Json::array();
      auto view = ledger_.snapshot();
      for (const auto& [id, p] : view.prompts()) arr.push_back(to_json(p));
      return {200, arr};
    }
    if (method == "POST") {
      require_token(request, options_.token);
      auto body = parse_body(request);
      if (body.is_object() && !present(body, "created_at")) body["created_at"] = options_.clock().to_iso8601();
      auto prompt = prompt_from_json(body);
      ledger_.register_prompt(prompt);
      return {201, to_json(prompt)};
    }
  }

  if (resource == "jurors" && parts.size() == 2) {
    if (method == "GET") {
      Json arr = Json::array();
      auto view = ledger_.snapshot();
      for (const auto& [id, j] : view.jurors()) arr.push_back(to_json(j));
      return {200, arr};
    }
    if (method == "POST") {
      require_token(request, options_.token);
      auto body = parse_body(request);
      if (body.is_object() && !present(body, "registered_at")) {
        body["registered_at"] = options_.clock().to_iso8601();
      }
      auto juror = juror_from_json(body);
      ledger_.register_juror(juror);
      return {201, to_json(juror)};
    }
  }

  if (resource == "config" && parts.size() == 2) {
    if (method == "GET") return {200, to_json(ledger_.config())};
    if (method == "POST") {
      require_token(request, options_.admin_token);
      auto config = merge_config(ledger_.config(), parse_body(request));
      ledger_.set_config(config);
      return {200, to_json(config)};
    }
  }

  if (resource == "analytics" && parts.size() == 3 && (method == "GET" || method == "POST")) {
    std::vector<VoteRecord> votes;
    std::vector<std::string> roster;
    std::optional<std::string> inference_id = query_value(request, "inference_id");
    int bins = 10;
    if (method == "POST") {
      auto body = parse_body(request);
      votes = votes_from_json(body.value("votes", Json::array()));
      if (body.contains("roster")) roster = body.at("roster").get<std::vector<std::string>>();
      if (present(body, "inference_id")) inference_id = body.at("inference_id").get<std::string>();
      if (present(body, "bins")) bins = body.at("bins").get<int>();
    } else {
      votes = ledger_.votes();
      roster = roster_from_query(request);
      if (auto b = query_value(request, "bins")) {
        try {
          bins = std::stoi(*b);
        } catch (const std::exception&) {
          throw Error(ErrorCode::BadRequest, "bins must be an integer", *b);
        }
      }
    }

    const auto& fn = parts[2];
    if (fn == "histogram") {
      return {200, Json{{"bins", analytics::to_json(analytics::vote_histogram(votes, bins, inference_id))}}};
    }
    if (fn == "completeness" || fn == "confidence") {
      if (!inference_id || inference_id->empty()) {
        throw Error(ErrorCode::BadRequest, "inference_id is required", "inference_id");
      }
      double value = fn == "completeness"
                         ? analytics::vote_completeness(votes, roster, *inference_id)
                         : analytics::population_confidence(votes, roster, *inference_id);
      return {200, Json{{"inference_id", *inference_id}, {fn, value}}};
    }
    if (fn == "distribution") {
      if (inference_id) {
        std::erase_if(votes, [&](const VoteRecord& v) { return v.inference_id != *inference_id; });
      }
      return {200, Json{{"distribution", analytics::to_json(analytics::votes_distribution(votes))}}};
    }
  }

  throw not_found();
}

}  // namespace grandjury::api
