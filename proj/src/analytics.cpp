#include "grandjury/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "grandjury/decay.hpp"

namespace grandjury::analytics {
namespace {

constexpr double kMaxVariance = 0.25;

std::set<std::string> distinct_roster(std::span<const std::string> roster) {
  if (roster.empty()) throw Error(ErrorCode::EmptyRoster, "roster is empty");
  std::set<std::string> out(roster.begin(), roster.end());
  return out;
}

}  // namespace

std::vector<HistogramBin> vote_histogram(std::span<const VoteRecord> records, int bins,
                                         const std::optional<std::string>& inference_id) {
  if (bins < 1) throw Error(ErrorCode::BadRequest, "bins must be >= 1", std::to_string(bins));

  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  auto lower = [bins](int k) { return static_cast<double>(k) / bins; };
  for (int k = 0; k < bins; ++k) {
    out[k].lower = lower(k);
    out[k].upper = k + 1 == bins ? 1.0 : lower(k + 1);
    out[k].upper_closed = k + 1 == bins;
  }

  std::size_t selected = 0;
  for (const auto& r : records) {
    if (inference_id && r.inference_id != *inference_id) continue;
    ++selected;
    int idx = std::clamp(static_cast<int>(std::floor(r.vote * bins)), 0, bins - 1);
    // Keep membership consistent with the reported (rounded) bin edges.
    while (idx > 0 && r.vote < out[idx].lower) --idx;
    while (idx + 1 < bins && r.vote >= out[idx + 1].lower) ++idx;
    ++out[idx].count;
  }
  if (selected == 0) throw Error(ErrorCode::EmptySelection, "no votes selected");
  return out;
}

double vote_completeness(std::span<const VoteRecord> records,
                         std::span<const std::string> roster, const std::string& inference_id) {
  auto members = distinct_roster(roster);
  std::set<std::string> voted;
  for (const auto& r : records) {
    if (r.inference_id == inference_id && members.count(r.voter_id)) voted.insert(r.voter_id);
  }
  return static_cast<double>(voted.size()) / static_cast<double>(members.size());
}

double population_confidence(std::span<const VoteRecord> records,
                             std::span<const std::string> roster,
                             const std::string& inference_id) {
  double completeness = vote_completeness(records, roster, inference_id);

  // Latest vote per voter; ties on vote_time resolve to the later record.
  std::map<std::string, const VoteRecord*> latest;
  for (const auto& r : records) {
    if (r.inference_id != inference_id) continue;
    auto& slot = latest[r.voter_id];
    if (slot == nullptr || !(r.vote_time < slot->vote_time)) slot = &r;
  }
  if (latest.empty()) throw Error(ErrorCode::NoVotes, "no votes on inference", inference_id);

  std::vector<double> values;
  values.reserve(latest.size());
  for (const auto& [voter, rec] : latest) values.push_back(rec->vote);
  double variance = engine::batch_variance(values);
  return std::clamp(completeness * (1.0 - variance / kMaxVariance), 0.0, 1.0);
}

std::vector<DistributionSummary> votes_distribution(std::span<const VoteRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptySelection, "no votes selected");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : records) groups[r.inference_id].push_back(r.vote);

  std::vector<DistributionSummary> out;
  out.reserve(groups.size());
  for (auto& [id, values] : groups) {
    std::sort(values.begin(), values.end());
    DistributionSummary s;
    s.inference_id = id;
    s.n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.min = values.front();
    s.max = values.back();
    s.mean = std::clamp(sum / static_cast<double>(s.n), s.min, s.max);
    s.variance = engine::batch_variance(values);
    out.push_back(std::move(s));
  }
  return out;
}

Json to_json(const std::vector<HistogramBin>& bins) {
  Json arr = Json::array();
  for (const auto& b : bins) {
    arr.push_back(Json{{"lower", b.lower},
                       {"upper", b.upper},
                       {"upper_closed", b.upper_closed},
                       {"count", b.count}});
  }
  return arr;
}

Json to_json(const DistributionSummary& s) {
  return Json{{"inference_id", s.inference_id}, {"n", s.n},     {"mean", s.mean},
              {"variance", s.variance},         {"min", s.min}, {"max", s.max}};
}

Json to_json(const std::vector<DistributionSummary>& s) {
  Json arr = Json::array();
  for (const auto& d : s) arr.push_back(to_json(d));
  return arr;
}

}  // namespace grandjury::analytics
