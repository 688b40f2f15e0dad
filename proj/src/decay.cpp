#include "grandjury/decay.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace grandjury::engine {
namespace {

void check_votes(std::span<const double> votes) {
  if (votes.empty()) throw Error(ErrorCode::EmptyBatch, "batch contains no votes");
  for (double v : votes) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::VoteOutOfRange, "vote must lie in [0,1]", std::to_string(v));
    }
  }
}

void check_unit(double x, const char* name) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw Error(ErrorCode::DomainError, std::string(name) + " must lie in [0,1]",
                std::to_string(x));
  }
}

}  // namespace

double decay_factor(double lambda, double delta_t) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::NegativeInput, "lambda must be >= 0");
  if (!(delta_t >= 0.0)) throw Error(ErrorCode::NegativeInput, "delta_t must be >= 0");
  return std::exp(-lambda * delta_t);
}

double weighted_mean(std::span<const double> votes, std::span<const double> reputations) {
  check_votes(votes);
  if (votes.size() != reputations.size()) {
    throw Error(ErrorCode::LengthMismatch, "votes and reputations differ in length");
  }
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(votes.size());
  for (std::size_t i = 0; i < votes.size(); ++i) {
    double r = reputations[i];
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw Error(ErrorCode::NonPositiveReputation, "reputation must be > 0", std::to_string(r));
    }
    pairs.emplace_back(votes[i], r);
  }
  std::sort(pairs.begin(), pairs.end());
  double num = 0.0;
  double den = 0.0;
  for (const auto& [v, r] : pairs) {
    num += r * v;
    den += r;
  }
  return std::clamp(num / den, pairs.front().first, pairs.back().first);
}

double update_score(double prev_score, double alpha, double mean) {
  check_unit(prev_score, "prev_score");
  check_unit(alpha, "alpha");
  check_unit(mean, "mean");
  if (alpha == 1.0) return prev_score;
  // mean + alpha*(prev - mean) is monotone in alpha under rounding.
  double s = mean + alpha * (prev_score - mean);
  return std::clamp(s, std::min(prev_score, mean), std::max(prev_score, mean));
}

double freshness(double alpha) {
  check_unit(alpha, "alpha");
  return 1.0 - alpha;
}

double batch_variance(std::span<const double> votes) {
  check_votes(votes);
  std::vector<double> sorted(votes.begin(), votes.end());
  std::sort(sorted.begin(), sorted.end());
  double n = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  double mean = std::clamp(sum / n, sorted.front(), sorted.back());
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  return std::max(0.0, ss / n);
}

bool flag_ambiguity(double variance, double sigma2_crit) { return variance > sigma2_crit; }

BatchResult evaluate(std::span<const double> votes, std::span<const double> reputations,
                     const std::optional<Prior>& prior, const DecayConfig& config) {
  config.validate();
  BatchResult r;
  r.weighted_mean = weighted_mean(votes, reputations);
  r.variance = batch_variance(votes);
  r.ambiguous = flag_ambiguity(r.variance, config.sigma2_crit);

  if (prior) {
    r.delta_t = prior->delta_t;
    r.alpha = decay_factor(config.lambda, prior->delta_t);
    r.score = update_score(prior->score, r.alpha, r.weighted_mean);
  } else if (config.cold_start == ColdStart::MeanSeed) {
    r.delta_t = 0.0;
    r.alpha = 0.0;
    r.score = r.weighted_mean;
  } else {
    // Literal reading: S_0 = 0 and no elapsed time, so alpha = e^0 = 1.
    r.delta_t = 0.0;
    r.alpha = decay_factor(config.lambda, 0.0);
    r.score = update_score(0.0, r.alpha, r.weighted_mean);
  }
  r.freshness = freshness(r.alpha);
  return r;
}

double elapsed(Timestamp from, Timestamp to, TimeUnit unit) {
  double us = static_cast<double>(to.micros() - from.micros());
  return us / (seconds_per(unit) * 1e6);
}

BatchResult evaluate_batch(const BatchInput& input, const DecayConfig& config) {
  std::optional<Prior> prior;
  if (input.prev) {
    if (input.batch_time < input.prev->last_batch_time) {
      throw Error(ErrorCode::NonMonotoneTime, "batch_time precedes the previous batch",
                  input.batch_time.to_iso8601() + " < " +
                      input.prev->last_batch_time.to_iso8601());
    }
    prior = Prior{input.prev->score,
                  elapsed(input.prev->last_batch_time, input.batch_time, config.time_unit)};
  }
  return evaluate(input.votes, input.reputations, prior, config);
}

ScoreState advance(const std::string& inference_id, const std::optional<ScoreState>& prev,
                   const BatchResult& result, Timestamp batch_time) {
  ScoreState s;
  s.inference_id = inference_id;
  s.t = prev ? prev->t + 1 : 1;
  s.score = result.score;
  s.freshness = result.freshness;
  s.last_variance = result.variance;
  s.ambiguous = result.ambiguous;
  s.last_batch_time = batch_time;
  s.last_alpha = result.alpha;
  s.last_delta_t = result.delta_t;
  return s;
}

Json to_json(const BatchResult& r) {
  return Json{{"alpha", r.alpha},         {"delta_t", r.delta_t},
              {"weighted_mean", r.weighted_mean}, {"score", r.score},
              {"freshness", r.freshness}, {"variance", r.variance},
              {"ambiguous", r.ambiguous}};
}

BatchResult batch_result_from_json(const Json& j) {
  BatchResult r;
  r.alpha = j.at("alpha").get<double>();
  r.delta_t = j.at("delta_t").get<double>();
  r.weighted_mean = j.at("weighted_mean").get<double>();
  r.score = j.at("score").get<double>();
  r.freshness = j.at("freshness").get<double>();
  r.variance = j.at("variance").get<double>();
  r.ambiguous = j.at("ambiguous").get<bool>();
  return r;
}

}  // namespace grandjury::engine
