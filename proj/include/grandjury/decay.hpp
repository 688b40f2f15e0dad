#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grandjury/model.hpp"

// Time-decayed, reputation-weighted score aggregation. Every function here is
// pure; sequencing of batches per inference belongs to the ledger.
namespace grandjury::engine {

// e^(-lambda * delta_t). Throws NegativeInput for negative (or NaN) arguments.
double decay_factor(double lambda, double delta_t);

// sum(r_i * v_i) / sum(r_i), summed in a canonical pair order so the result
// does not depend on how the batch was ordered.
double weighted_mean(std::span<const double> votes, std::span<const double> reputations);

// alpha * prev + (1 - alpha) * mean, bounded to [min(prev, mean), max(prev, mean)].
double update_score(double prev_score, double alpha, double mean);

double freshness(double alpha);

// Unweighted population variance (divide by n).
double batch_variance(std::span<const double> votes);

// Strict comparison: variance equal to the threshold is not ambiguous.
bool flag_ambiguity(double variance, double sigma2_crit);

struct BatchInput {
  std::vector<double> votes;
  std::vector<double> reputations;
  Timestamp batch_time;
  std::optional<ScoreState> prev;
};

struct BatchResult {
  double alpha = 0.0;
  double delta_t = 0.0;  // in config time units
  double weighted_mean = 0.0;
  double score = 0.0;
  double freshness = 0.0;
  double variance = 0.0;
  bool ambiguous = false;

  bool operator==(const BatchResult&) const = default;
};

// The previous score and elapsed time for a stateless evaluation.
struct Prior {
  double score = 0.0;
  double delta_t = 0.0;
};

// Core update. With no prior the config's cold-start rule applies.
BatchResult evaluate(std::span<const double> votes, std::span<const double> reputations,
                     const std::optional<Prior>& prior, const DecayConfig& config);

// Elapsed time between two instants expressed in `unit`.
double elapsed(Timestamp from, Timestamp to, TimeUnit unit);

// Timestamp-driven form: delta_t is derived from prev.last_batch_time.
// Throws NonMonotoneTime when batch_time precedes the previous batch.
BatchResult evaluate_batch(const BatchInput& input, const DecayConfig& config);

// The state after applying `result` on top of `prev` (or a fresh state).
ScoreState advance(const std::string& inference_id, const std::optional<ScoreState>& prev,
                   const BatchResult& result, Timestamp batch_time);

Json to_json(const BatchResult& r);
BatchResult batch_result_from_json(const Json& j);

}  // namespace grandjury::engine
