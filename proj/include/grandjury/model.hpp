#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "grandjury/error.hpp"
#include "grandjury/timestamp.hpp"

namespace grandjury {

using Json = nlohmann::json;

// One juror's judgment of one inference. vote is in [0,1], 1 = accept.
struct VoteRecord {
  std::string inference_id;
  double vote = 0.0;
  std::string voter_id;
  Timestamp vote_time;
  std::string voter_prompt_id;

  bool operator==(const VoteRecord&) const = default;
};

struct Juror {
  std::string voter_id;
  double reputation = 1.0;
  Timestamp registered_at;

  bool operator==(const Juror&) const = default;
};

// The published rubric under which votes are cast.
struct VoterPrompt {
  std::string voter_prompt_id;
  std::string rubric_text;
  Timestamp created_at;
  std::string scale_note;

  bool operator==(const VoterPrompt&) const = default;
};

// One model output under evaluation.
struct InferenceRecord {
  std::string inference_id;
  std::string platform;
  std::string model;
  Timestamp timestamp;
  std::string input;
  std::string output;
  std::map<std::string, std::string> params;

  bool operator==(const InferenceRecord&) const = default;
};

enum class TimeUnit { Seconds, Hours, Days };
enum class ColdStart { MeanSeed, LiteralZero };

std::string_view to_string(TimeUnit unit);
std::string_view to_string(ColdStart rule);
TimeUnit parse_time_unit(std::string_view text);
ColdStart parse_cold_start(std::string_view text);

// Length of one `unit` in seconds.
double seconds_per(TimeUnit unit);

struct DecayConfig {
  double lambda = 0.01;  // per time_unit
  TimeUnit time_unit = TimeUnit::Days;
  double sigma2_crit = 0.05;
  ColdStart cold_start = ColdStart::MeanSeed;

  // Throws Error(InvalidConfig).
  void validate() const;

  bool operator==(const DecayConfig&) const = default;
};

// Cumulative per-inference scoring state after `t` batches.
struct ScoreState {
  std::string inference_id;
  std::int64_t t = 0;
  double score = 0.0;
  double freshness = 0.0;
  double last_variance = 0.0;
  bool ambiguous = false;
  Timestamp last_batch_time;
  double last_alpha = 0.0;
  double last_delta_t = 0.0;

  bool operator==(const ScoreState&) const = default;
};

// Metadata for one ingested inference collection.
struct CollectionManifest {
  std::string collection_id;
  std::string source_uri;
  std::string license;
  std::int64_t record_count = 0;
  Timestamp ingested_at;
  std::vector<std::string> inference_ids;

  bool operator==(const CollectionManifest&) const = default;
};

Json to_json(const VoteRecord& v);
Json to_json(const CollectionManifest& m);
CollectionManifest manifest_from_json(const Json& j);
Json to_json(const Juror& j);
Json to_json(const VoterPrompt& p);
Json to_json(const InferenceRecord& r);
Json to_json(const DecayConfig& c);
Json to_json(const ScoreState& s);

// Decoders validate and throw Error on any violation.
Juror juror_from_json(const Json& j);
VoterPrompt prompt_from_json(const Json& j);
InferenceRecord inference_from_json(const Json& j);
DecayConfig config_from_json(const Json& j);
ScoreState score_state_from_json(const Json& j);

// Applies the fields present in `patch` on top of `base`; absent fields keep
// their base value.
DecayConfig merge_config(const DecayConfig& base, const Json& patch);

// Validates a raw field map into a VoteRecord. The vote may be a number or a
// numeric string; timestamps with offsets are normalized to UTC.
VoteRecord validate_vote_record(const Json& raw);

// Total form of validate_vote_record: never throws.
std::variant<VoteRecord, Error> try_validate_vote_record(const Json& raw);

// Reads a required, non-empty string field. Throws Error(MissingField).
std::string require_string(const Json& obj, std::string_view key);

// Lenient numeric read: accepts a JSON number or a string holding one.
// Returns false if the value is absent or not numeric.
bool read_number(const Json& value, double& out);

}  // namespace grandjury
