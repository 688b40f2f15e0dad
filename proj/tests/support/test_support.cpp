#include "test_support.hpp"

namespace grandjury::testing {

void seed_registry(ledger::Ledger& ledger, int jurors, int inferences,
                   const std::vector<double>& reputations) {
  auto t0 = *parse_iso8601("2025-08-01T00:00:00Z");
  for (int j = 0; j < jurors; ++j) {
    double r = j < static_cast<int>(reputations.size()) ? reputations[j] : 1.0;
    ledger.register_juror(Juror{"j" + std::to_string(j), r, t0});
  }
  ledger.register_prompt(VoterPrompt{"p1", "Is this joke funny to you? Vote 1 to accept, 0 to reject.",
                                     t0, "0 = reject, 1 = accept"});
  std::vector<InferenceRecord> records;
  for (int i = 0; i < inferences; ++i) {
    records.push_back(InferenceRecord{"i" + std::to_string(i), "TestPlatform", "model-" + std::to_string(i),
                                      t0, "tell me a joke", "joke " + std::to_string(i), {}});
  }
  CollectionManifest m;
  m.collection_id = "seed";
  ledger.add_collection(m, records);
}

void build_worked_example(ledger::Ledger& ledger) {
  auto t0 = *parse_iso8601("2025-08-01T00:00:00Z");
  for (const char* id : {"j1", "j2", "j3"}) ledger.register_juror(Juror{id, 1.0, t0});
  ledger.register_prompt(VoterPrompt{"p1", "Is this joke funny? 1 = accept, 0 = reject.", t0,
                                     "0 = reject, 1 = accept"});
  InferenceRecord rec{"i1", "Azure AI", "gpt-4.1", *parse_iso8601("2025-08-01T22:57:27Z"),
                      "tell me a joke",
                      "Why did the scarecrow win an award? Because he was outstanding in his field!",
                      {{"temperature", "1.0"}}};
  CollectionManifest m;
  m.collection_id = "worked";
  ledger.add_collection(m, std::span<const InferenceRecord>(&rec, 1));

  DecayConfig cfg{0.1, TimeUnit::Days, 0.05, ColdStart::MeanSeed};
  ledger.set_config(cfg);

  VoteRecord first{"i1", 0.72, "j1", *parse_iso8601("2025-08-01T12:00:00Z"), "p1"};
  auto s1 = ledger.append_votes(std::span<const VoteRecord>(&first, 1));
  ledger.commit_batch("i1", s1, cfg);

  auto t3 = *parse_iso8601("2025-08-04T12:00:00Z");
  std::vector<VoteRecord> batch = {{"i1", 0.90, "j1", t3, "p1"},
                                   {"i1", 0.80, "j2", t3, "p1"},
                                   {"i1", 0.60, "j3", t3, "p1"}};
  auto s2 = ledger.append_votes(batch);
  ledger.commit_batch("i1", s2, cfg);
}

void build_random_ledger(ledger::Ledger& ledger, std::mt19937_64& rng) {
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  int jurors = 1 + static_cast<int>(rng() % 6);
  int inferences = 1 + static_cast<int>(rng() % 5);
  std::vector<double> reps;
  for (int j = 0; j < jurors; ++j) reps.push_back(rng() % 2 ? 1.0 : uniform(0.2, 4.0));
  seed_registry(ledger, jurors, inferences, reps);

  std::int64_t clock_us = 1754000000000000;
  int votes_left = 1 + static_cast<int>(rng() % 50);
  int batches = 1 + static_cast<int>(rng() % 10);
  const TimeUnit units[] = {TimeUnit::Seconds, TimeUnit::Hours, TimeUnit::Days};
  for (int b = 0; b < batches && votes_left > 0; ++b) {
    std::string id = "i" + std::to_string(rng() % inferences);
    int k = 1 + static_cast<int>(rng() % std::min(8, votes_left));
    votes_left -= k;
    std::vector<VoteRecord> batch;
    for (int i = 0; i < k; ++i) {
      clock_us += static_cast<std::int64_t>(uniform(0, 5e10));  // up to ~14h per vote
      double v = rng() % 2 ? grid_vote(rng) : uniform(0.0, 1.0);
      batch.push_back(VoteRecord{id, v, "j" + std::to_string(rng() % jurors),
                                 Timestamp::from_micros(clock_us), "p1"});
    }
    auto seqs = ledger.append_votes(batch);
    if (rng() % 5 == 0) continue;  // leave uncommitted
    DecayConfig cfg;
    cfg.time_unit = units[rng() % 3];
    cfg.lambda = uniform(0.0, 0.5) * seconds_per(cfg.time_unit) / 86400.0;  // per-day rate in cfg units
    cfg.sigma2_crit = uniform(0.01, 0.25);
    cfg.cold_start = rng() % 4 == 0 ? ColdStart::LiteralZero : ColdStart::MeanSeed;
    ledger.commit_batch(id, seqs, cfg);
  }
}

}  // namespace grandjury::testing
