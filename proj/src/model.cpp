#include "grandjury/model.hpp"

#include <charconv>
#include <cmath>

namespace grandjury {

std::string_view to_string(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::Seconds: return "seconds";
    case TimeUnit::Hours: return "hours";
    case TimeUnit::Days: return "days";
  }
  return "days";
}

std::string_view to_string(ColdStart rule) {
  return rule == ColdStart::MeanSeed ? "mean_seed" : "literal_zero";
}

TimeUnit parse_time_unit(std::string_view text) {
  if (text == "seconds") return TimeUnit::Seconds;
  if (text == "hours") return TimeUnit::Hours;
  if (text == "days") return TimeUnit::Days;
  throw Error(ErrorCode::InvalidConfig, "time_unit must be one of seconds, hours, days",
              std::string(text));
}

ColdStart parse_cold_start(std::string_view text) {
  if (text == "mean_seed") return ColdStart::MeanSeed;
  if (text == "literal_zero") return ColdStart::LiteralZero;
  throw Error(ErrorCode::InvalidConfig, "cold_start must be mean_seed or literal_zero",
              std::string(text));
}

double seconds_per(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::Seconds: return 1.0;
    case TimeUnit::Hours: return 3600.0;
    case TimeUnit::Days: return 86400.0;
  }
  return 86400.0;
}

void DecayConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "lambda must be a finite value >= 0");
  }
  // 0.25 is the largest population variance [0,1]-valued votes can reach.
  if (!std::isfinite(sigma2_crit) || sigma2_crit <= 0.0 || sigma2_crit > 0.25) {
    throw Error(ErrorCode::InvalidConfig, "sigma2_crit must lie in (0, 0.25]");
  }
}

bool read_number(const Json& value, double& out) {
  if (value.is_number()) {
    out = value.get<double>();
    return std::isfinite(out);
  }
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    std::string_view sv(s);
    while (!sv.empty() && sv.front() == ' ') sv.remove_prefix(1);
    while (!sv.empty() && sv.back() == ' ') sv.remove_suffix(1);
    if (!sv.empty() && sv.front() == '+') sv.remove_prefix(1);
    if (sv.empty()) return false;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc{} || ptr != sv.data() + sv.size() || !std::isfinite(v)) return false;
    out = v;
    return true;
  }
  return false;
}

std::string require_string(const Json& obj, std::string_view key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw Error(ErrorCode::MissingField, "missing field " + std::string(key), std::string(key));
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::MissingField, "field " + std::string(key) + " must be a string",
                std::string(key));
  }
  auto value = it->get<std::string>();
  if (value.empty()) {
    throw Error(ErrorCode::MissingField, "field " + std::string(key) + " is empty",
                std::string(key));
  }
  return value;
}

namespace {

std::string optional_string(const Json& obj, std::string_view key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw Error(ErrorCode::SchemaError, "field " + std::string(key) + " must be a string",
                std::string(key));
  }
  return it->get<std::string>();
}

double require_number(const Json& obj, std::string_view key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw Error(ErrorCode::MissingField, "missing field " + std::string(key), std::string(key));
  }
  double v = 0.0;
  if (!read_number(*it, v)) {
    throw Error(ErrorCode::SchemaError, "field " + std::string(key) + " must be numeric",
                std::string(key));
  }
  return v;
}

void require_object(const Json& j, std::string_view what) {
  if (!j.is_object()) {
    throw Error(ErrorCode::SchemaError, std::string(what) + " must be a JSON object");
  }
}

}  // namespace

VoteRecord validate_vote_record(const Json& raw) {
  require_object(raw, "vote record");
  VoteRecord rec;
  rec.inference_id = require_string(raw, "inference_id");
  rec.voter_id = require_string(raw, "voter_id");
  rec.voter_prompt_id = require_string(raw, "voter_prompt_id");
  auto time_text = require_string(raw, "vote_time");

  auto it = raw.find("vote");
  if (it == raw.end() || it->is_null() ||
      (it->is_string() && it->get_ref<const std::string&>().empty())) {
    throw Error(ErrorCode::MissingField, "missing field vote", "vote");
  }
  double v = 0.0;
  if (!read_number(*it, v)) {
    throw Error(ErrorCode::VoteOutOfRange, "vote must be a number in [0,1]", it->dump());
  }
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::VoteOutOfRange, "vote must lie in [0,1]", it->dump());
  }
  rec.vote = v;
  rec.vote_time = parse_iso8601_or_throw(time_text, "vote_time");
  return rec;
}

std::variant<VoteRecord, Error> try_validate_vote_record(const Json& raw) {
  try {
    return validate_vote_record(raw);
  } catch (const Error& e) {
    return e;
  } catch (const std::exception& e) {
    return Error(ErrorCode::SchemaError, e.what());
  }
}

Json to_json(const VoteRecord& v) {
  return Json{{"inference_id", v.inference_id},
              {"vote", v.vote},
              {"voter_id", v.voter_id},
              {"vote_time", v.vote_time.to_iso8601()},
              {"voter_prompt_id", v.voter_prompt_id}};
}

Json to_json(const Juror& j) {
  return Json{{"voter_id", j.voter_id},
              {"reputation", j.reputation},
              {"registered_at", j.registered_at.to_iso8601()}};
}

Json to_json(const VoterPrompt& p) {
  return Json{{"voter_prompt_id", p.voter_prompt_id},
              {"rubric_text", p.rubric_text},
              {"created_at", p.created_at.to_iso8601()},
              {"scale_note", p.scale_note}};
}

Json to_json(const InferenceRecord& r) {
  return Json{{"inference_id", r.inference_id},
              {"platform", r.platform},
              {"model", r.model},
              {"timestamp", r.timestamp.to_iso8601()},
              {"input", r.input},
              {"output", r.output},
              {"params", r.params}};
}

Json to_json(const DecayConfig& c) {
  return Json{{"lambda", c.lambda},
              {"time_unit", to_string(c.time_unit)},
              {"sigma2_crit", c.sigma2_crit},
              {"cold_start", to_string(c.cold_start)}};
}

Json to_json(const ScoreState& s) {
  return Json{{"inference_id", s.inference_id},
              {"t", s.t},
              {"score", s.score},
              {"freshness", s.freshness},
              {"last_variance", s.last_variance},
              {"ambiguous", s.ambiguous},
              {"last_batch_time", s.last_batch_time.to_iso8601()},
              {"last_alpha", s.last_alpha},
              {"last_delta_t", s.last_delta_t}};
}

Json to_json(const CollectionManifest& m) {
  return Json{{"collection_id", m.collection_id},
              {"source_uri", m.source_uri},
              {"license", m.license},
              {"record_count", m.record_count},
              {"ingested_at", m.ingested_at.to_iso8601()},
              {"inference_ids", m.inference_ids}};
}

CollectionManifest manifest_from_json(const Json& j) {
  require_object(j, "collection manifest");
  CollectionManifest m;
  m.collection_id = require_string(j, "collection_id");
  m.source_uri = optional_string(j, "source_uri");
  m.license = optional_string(j, "license");
  m.record_count = j.at("record_count").get<std::int64_t>();
  m.ingested_at = parse_iso8601_or_throw(require_string(j, "ingested_at"), "ingested_at");
  m.inference_ids = j.at("inference_ids").get<std::vector<std::string>>();
  if (m.record_count != static_cast<std::int64_t>(m.inference_ids.size())) {
    throw Error(ErrorCode::SchemaError, "record_count does not match inference_ids");
  }
  return m;
}

Juror juror_from_json(const Json& j) {
  require_object(j, "juror");
  Juror out;
  out.voter_id = require_string(j, "voter_id");
  if (j.contains("reputation") && !j.at("reputation").is_null()) {
    out.reputation = require_number(j, "reputation");
  }
  if (!(out.reputation > 0.0)) {
    throw Error(ErrorCode::NonPositiveReputation, "reputation must be > 0", out.voter_id);
  }
  out.registered_at = parse_iso8601_or_throw(require_string(j, "registered_at"), "registered_at");
  return out;
}

VoterPrompt prompt_from_json(const Json& j) {
  require_object(j, "voter prompt");
  VoterPrompt out;
  out.voter_prompt_id = require_string(j, "voter_prompt_id");
  out.rubric_text = require_string(j, "rubric_text");
  out.created_at = parse_iso8601_or_throw(require_string(j, "created_at"), "created_at");
  out.scale_note = optional_string(j, "scale_note");
  return out;
}

InferenceRecord inference_from_json(const Json& j) {
  require_object(j, "inference record");
  InferenceRecord out;
  out.inference_id = require_string(j, "inference_id");
  out.platform = require_string(j, "platform");
  out.model = require_string(j, "model");
  out.output = require_string(j, "output");
  out.input = optional_string(j, "input");
  out.timestamp = parse_iso8601_or_throw(require_string(j, "timestamp"), "timestamp",
                                         TimestampPolicy::AssumeUtc);
  if (auto it = j.find("params"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(ErrorCode::SchemaError, "params must be an object");
    for (const auto& [k, v] : it->items()) {
      out.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return out;
}

DecayConfig merge_config(const DecayConfig& base, const Json& patch) {
  require_object(patch, "config");
  DecayConfig c = base;
  for (const auto& [key, value] : patch.items()) {
    if (value.is_null()) continue;
    if (key == "lambda") {
      if (!read_number(value, c.lambda)) throw Error(ErrorCode::InvalidConfig, "lambda must be numeric");
    } else if (key == "sigma2_crit") {
      if (!read_number(value, c.sigma2_crit)) {
        throw Error(ErrorCode::InvalidConfig, "sigma2_crit must be numeric");
      }
    } else if (key == "time_unit") {
      if (!value.is_string()) throw Error(ErrorCode::InvalidConfig, "time_unit must be a string");
      c.time_unit = parse_time_unit(value.get<std::string>());
    } else if (key == "cold_start") {
      if (!value.is_string()) throw Error(ErrorCode::InvalidConfig, "cold_start must be a string");
      c.cold_start = parse_cold_start(value.get<std::string>());
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown config field " + key, key);
    }
  }
  c.validate();
  return c;
}

DecayConfig config_from_json(const Json& j) { return merge_config(DecayConfig{}, j); }

ScoreState score_state_from_json(const Json& j) {
  require_object(j, "score state");
  ScoreState s;
  s.inference_id = require_string(j, "inference_id");
  s.t = j.at("t").get<std::int64_t>();
  s.score = j.at("score").get<double>();
  s.freshness = j.at("freshness").get<double>();
  s.last_variance = j.at("last_variance").get<double>();
  s.ambiguous = j.at("ambiguous").get<bool>();
  s.last_batch_time = parse_iso8601_or_throw(require_string(j, "last_batch_time"), "last_batch_time");
  s.last_alpha = j.at("last_alpha").get<double>();
  s.last_delta_t = j.at("last_delta_t").get<double>();
  return s;
}

}  // namespace grandjury
