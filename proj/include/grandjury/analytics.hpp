#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grandjury/model.hpp"

// Population-level summaries over vote collections. All functions are pure
// and read-only.
namespace grandjury::analytics {

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  bool upper_closed = false;  // only the last bin includes its upper bound
  std::size_t count = 0;
};

// Uniform bins over [0,1]. Throws EmptySelection when no vote is selected and
// BadRequest when bins < 1.
std::vector<HistogramBin> vote_histogram(std::span<const VoteRecord> records, int bins,
                                         const std::optional<std::string>& inference_id = {});

// Share of distinct roster members with at least one vote on `inference_id`.
double vote_completeness(std::span<const VoteRecord> records,
                         std::span<const std::string> roster, const std::string& inference_id);

// completeness * (1 - variance / 0.25), clamped to [0,1]. The variance is
// taken over each distinct voter's latest vote on the inference.
double population_confidence(std::span<const VoteRecord> records,
                             std::span<const std::string> roster,
                             const std::string& inference_id);

struct DistributionSummary {
  std::string inference_id;
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// One summary per inference, ordered by inference_id.
std::vector<DistributionSummary> votes_distribution(std::span<const VoteRecord> records);

Json to_json(const std::vector<HistogramBin>& bins);
Json to_json(const DistributionSummary& s);
Json to_json(const std::vector<DistributionSummary>& s);

}  // namespace grandjury::analytics
