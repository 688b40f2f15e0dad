// Acceptance suite. Prints one PASS/FAIL line per check and exits non-zero
// if any check fails.

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "grandjury/cli.hpp"
#include "grandjury/decay.hpp"
#include "grandjury/ingest.hpp"
#include "grandjury/ledger.hpp"
#include "grandjury/service.hpp"
#include "test_support.hpp"

namespace gj = grandjury;
namespace oracle = grandjury::testing::oracle;
using gj::Json;

namespace {

// Collects failure messages for one check; only the first few are printed.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++cases_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ += !ok;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": got " << got << ", want " << want << " +/- " << tol;
    expect(std::fabs(got - want) <= tol, msg.str());
  }
  bool ok() const { return failed_ == 0 && cases_ > 0; }
  std::size_t cases() const { return cases_; }
  std::size_t failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::size_t cases_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
};

int g_failed = 0;

void run_check(int number, const std::string& name, const std::function<std::string(Check&)>& body) {
  Check c;
  std::string summary;
  auto start = std::chrono::steady_clock::now();
  try {
    summary = body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("unexpected exception: ") + e.what());
  }
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  std::cout << (c.ok() ? "PASS" : "FAIL") << " [" << number << "] " << name << " (" << c.cases() << " checks, "
            << ms << " ms)";
  if (!summary.empty()) std::cout << " " << summary;
  std::cout << "\n";
  for (const auto& f : c.failures()) std::cout << "    " << f << "\n";
  if (c.failed() > c.failures().size()) std::cout << "    ... " << c.failed() - c.failures().size() << " more\n";
  g_failed += !c.ok();
}

const std::vector<double> kVotes = {0.90, 0.80, 0.60};
const std::vector<double> kUnit = {1.0, 1.0, 1.0};
constexpr double kMean = 23.0 / 30.0;

std::string worked_example(Check& c) {
  gj::DecayConfig cfg{0.1, gj::TimeUnit::Days, 0.05, gj::ColdStart::MeanSeed};
  gj::ScoreState prev;
  prev.inference_id = "i1";
  prev.t = 1;
  prev.score = 0.72;
  prev.last_batch_time = *gj::parse_iso8601("2025-08-01T12:00:00Z");
  gj::engine::BatchInput in{kVotes, kUnit, *gj::parse_iso8601("2025-08-04T12:00:00Z"), prev};
  auto r = gj::engine::evaluate_batch(in, cfg);
  c.near(r.delta_t, 3.0, 1e-12, "delta_t");
  c.near(r.alpha, 0.7408, 0.0005, "alpha");
  c.near(r.weighted_mean, kMean, 1e-9, "weighted mean");
  c.near(r.score, 0.733, 0.0015, "score");
  c.near(r.score, 0.73210, 5e-6, "score (unrounded)");
  c.near(r.freshness, 0.2592, 0.0005, "freshness");
  c.near(r.variance, 0.01556, 0.0005, "variance");
  c.expect(!r.ambiguous, "{0.9,0.8,0.6} must not be flagged at 0.05");

  std::vector<double> split = {1.0, 0.0, 0.0};
  auto s = gj::engine::evaluate_batch(gj::engine::BatchInput{split, kUnit, in.batch_time, prev}, cfg);
  c.expect(s.ambiguous, "{1,0,0} must be flagged at 0.05");

  std::ostringstream out;
  out.precision(6);
  out << "alpha=" << r.alpha << " mean=" << r.weighted_mean << " S=" << r.score << " F=" << r.freshness
      << " var=" << r.variance << " var{1,0,0}=" << s.variance;
  return out.str();
}

std::string engine_properties(Check& c) {
  constexpr int kCases = 12000;
  std::mt19937_64 rng(20250801);
  std::uniform_real_distribution<double> unit(0.0, 1.0), rep(0.05, 10.0), lam(0.0, 2.0), dt(0.0, 30.0);
  std::uniform_real_distribution<double> logk(-3.0, 3.0), crit(1e-6, 0.25);
  auto vote = [&] { return rng() % 2 ? gj::testing::grid_vote(rng) : unit(rng); };

  for (int i = 0; i < kCases; ++i) {
    std::size_t n = 1 + rng() % 12;
    std::vector<double> votes, reps;
    for (std::size_t k = 0; k < n; ++k) {
      votes.push_back(vote());
      reps.push_back(rng() % 3 ? rep(rng) : 1.0);
    }
    gj::DecayConfig cfg{lam(rng), gj::TimeUnit::Days, crit(rng), gj::ColdStart::MeanSeed};
    double prev = unit(rng);
    double delta = rng() % 10 == 0 ? 0.0 : dt(rng);
    auto r = gj::engine::evaluate(votes, reps, gj::engine::Prior{prev, delta}, cfg);
    const std::string tag = "case " + std::to_string(i);

    // Convexity.
    c.expect(std::min(prev, r.weighted_mean) <= r.score && r.score <= std::max(prev, r.weighted_mean),
             tag + ": score outside [min(prev, mean), max(prev, mean)]");
    // Freshness identity.
    c.expect(r.freshness + r.alpha == 1.0, tag + ": freshness + alpha != 1");

    // Reputation-scale invariance.
    double k = std::pow(10.0, logk(rng));
    std::vector<double> scaled = reps;
    for (auto& x : scaled) x *= k;
    auto rs = gj::engine::evaluate(votes, scaled, gj::engine::Prior{prev, delta}, cfg);
    c.near(rs.weighted_mean, r.weighted_mean, 1e-12, tag + ": scaled mean");
    c.near(rs.score, r.score, 1e-12, tag + ": scaled score");

    // Permutation invariance, bit for bit.
    std::vector<std::size_t> order(n);
    for (std::size_t k2 = 0; k2 < n; ++k2) order[k2] = k2;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> pv, pr;
    for (auto idx : order) {
      pv.push_back(votes[idx]);
      pr.push_back(reps[idx]);
    }
    c.expect(gj::engine::evaluate(pv, pr, gj::engine::Prior{prev, delta}, cfg) == r, tag + ": permutation changed result");

    // Larger delta_t moves the score toward the batch mean, from the same side.
    double later = delta + dt(rng) + 1e-9;
    auto r2 = gj::engine::evaluate(votes, reps, gj::engine::Prior{prev, later}, cfg);
    double d1 = r.score - r.weighted_mean, d2 = r2.score - r.weighted_mean;
    c.expect(std::fabs(d2) <= std::fabs(d1) && d1 * d2 >= 0, tag + ": not monotone toward mean in delta_t");
    if (cfg.lambda > 1e-3) {
      auto far = gj::engine::evaluate(votes, reps, gj::engine::Prior{prev, 1e9}, cfg);
      c.near(far.score, r.weighted_mean, 1e-12, tag + ": delta_t -> inf limit");
    }

    // Unanimous batches have zero variance and are never flagged.
    double u = vote();
    std::vector<double> same(n, u);
    auto ru = gj::engine::evaluate(same, reps, gj::engine::Prior{prev, delta}, cfg);
    c.expect(ru.variance == 0.0 && !ru.ambiguous, tag + ": unanimous batch flagged or non-zero variance");

    // Oracle equivalence on small grid batches.
    std::size_t m = 1 + rng() % 6;
    std::vector<double> gv, gr;
    for (std::size_t k2 = 0; k2 < m; ++k2) {
      gv.push_back(gj::testing::grid_vote(rng));
      gr.push_back(rep(rng));
    }
    auto ro = gj::engine::evaluate(gv, gr, gj::engine::Prior{prev, delta}, cfg);
    long double om = oracle::mean(gv, gr);
    c.near(ro.weighted_mean, static_cast<double>(om), 1e-12, tag + ": oracle mean");
    c.near(ro.score, static_cast<double>(oracle::score(prev, cfg.lambda, delta, om)), 1e-12, tag + ": oracle score");
    c.near(ro.variance, static_cast<double>(oracle::variance(gv)), 1e-12, tag + ": oracle variance");
    c.near(ro.alpha, static_cast<double>(std::exp(-static_cast<long double>(cfg.lambda) * delta)), 1e-12,
           tag + ": oracle alpha");
  }
  return std::to_string(kCases) + " randomized cases";
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replay_determinism(Check& c) {
  constexpr int kLedgers = 120;
  constexpr int kTampersPerLedger = 200;
  gj::testing::TempDir dir;
  std::size_t tampers = 0, detected = 0, total_votes = 0;
  for (int i = 0; i < kLedgers; ++i) {
    std::mt19937_64 rng(1000 + i);
    auto path = dir / ("l" + std::to_string(i) + ".ledger");
    std::map<std::string, gj::ScoreState> stored;
    std::size_t commits = 0, votes = 0;
    std::set<std::string> inferences;
    {
      auto l = gj::ledger::Ledger::open(path);
      gj::testing::build_random_ledger(*l, rng);
      auto view = l->snapshot();
      stored = view.states();
      votes = view.votes().size();
      for (const auto& [id, cs] : view.commits()) commits += cs.size();
      inferences = {};
      for (const auto& [id, rec] : view.inferences()) inferences.insert(id);
    }
    total_votes += votes;
    const std::string tag = "ledger " + std::to_string(i);
    c.expect(votes <= 50 && commits <= 10 && inferences.size() <= 5, tag + ": generator exceeded bounds");

    const auto bytes = read_bytes(path);
    auto entries = gj::ledger::parse_ledger(bytes);
    c.expect(gj::ledger::replay(entries) == stored, tag + ": replay differs from stored states");
    c.expect(gj::ledger::Ledger::open(path)->snapshot().states() == stored, tag + ": reopen differs");

    std::uniform_int_distribution<std::size_t> offset(0, bytes.size() - 1);
    for (int t = 0; t < kTampersPerLedger; ++t) {
      auto copy = bytes;
      auto at = offset(rng);
      char b;
      do {
        b = static_cast<char>(rng() % 256);
      } while (b == copy[at]);
      copy[at] = b;
      ++tampers;
      bool caught = false;
      try {
        gj::ledger::parse_ledger(copy);
      } catch (const gj::Error& e) {
        caught = e.code() == gj::ErrorCode::CorruptLedger;
      }
      detected += caught;
      c.expect(caught, tag + ": tamper at byte " + std::to_string(at) + " not detected");
    }
  }
  return std::to_string(kLedgers) + " ledgers, " + std::to_string(total_votes) + " votes, " +
         std::to_string(detected) + "/" + std::to_string(tampers) + " tampers detected";
}

std::string ingestion_fixture(Check& c) {
  auto l = gj::ledger::Ledger::in_memory();
  auto m = gj::ingest::ingest_inference_file(*l, gj::testing::fixture("table1_sample.csv"),
                                             gj::ingest::FileFormat::Csv, {"table1", "", ""});
  c.expect(m.record_count == 7, "record_count " + std::to_string(m.record_count));
  auto view = l->snapshot();
  std::set<std::string> platforms;
  for (const auto& id : m.inference_ids) platforms.insert(view.inferences().at(id).platform);
  const std::set<std::string> expected = {"Azure AI", "Anthropic", "Mistral", "Vertex AI",
                                          "NVIDIA NIM", "Bedrock", "Hugging Face"};
  c.expect(platforms == expected, "platform set mismatch");
  for (auto fmt : {gj::ingest::FileFormat::Csv, gj::ingest::FileFormat::Jsonl}) {
    auto text = gj::ingest::export_collection(view, "table1", fmt);
    auto back = gj::ingest::parse_inferences(text, fmt);
    c.expect(back.size() == 7, "re-export row count");
    for (std::size_t i = 0; i < back.size() && i < m.inference_ids.size(); ++i) {
      c.expect(back[i] == view.inferences().at(m.inference_ids[i]), "re-exported record differs");
    }
    auto l2 = gj::ledger::Ledger::in_memory();
    gj::ingest::ingest_inference_collection(*l2, text, fmt, {"table1", "", ""});
    c.expect(gj::ingest::export_collection(l2->snapshot(), "table1", fmt) == text, "second export differs");
  }
  return "record_count=" + std::to_string(m.record_count);
}

std::string api_equivalence(Check& c) {
  auto l = gj::ledger::Ledger::in_memory();
  gj::api::Service service(*l);
  gj::api::HttpServer server(service);
  int port = server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);
  client.set_keep_alive(true);
  client.set_tcp_nodelay(true);

  auto post = [&](const Json& body) {
    auto res = client.Post("/v1/evaluate", body.dump(), "application/json");
    if (!res) throw std::runtime_error("HTTP request failed");
    if (res->status != 200) throw std::runtime_error("HTTP " + std::to_string(res->status) + ": " + res->body);
    return Json::parse(res->body);
  };

  auto listing = post(Json{{"votes", {0.8, 0.6, 0.9}}});
  c.near(listing["score"].get<double>(), kMean, 1e-9, "listing payload score");
  c.near(listing["freshness"].get<double>(), 1.0, 0.0, "listing payload freshness");

  constexpr int kPayloads = 1000;
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> unit(0.0, 1.0), rep(0.1, 5.0), lam(0.0, 1.0), dt(0.0, 40.0),
      crit(0.001, 0.25);
  const char* units[] = {"seconds", "hours", "days"};
  double worst = 0;
  for (int i = 0; i < kPayloads; ++i) {
    Json body = Json::object();
    std::size_t n = 1 + rng() % 10;
    std::vector<double> votes, reps;
    for (std::size_t k = 0; k < n; ++k) {
      votes.push_back(rng() % 2 ? gj::testing::grid_vote(rng) : unit(rng));
      reps.push_back(rep(rng));
    }
    body["votes"] = votes;
    bool with_reps = rng() % 2;
    if (with_reps) body["reputations"] = reps;
    bool warm = rng() % 4 != 0;
    double prev = unit(rng), delta = dt(rng);
    if (warm) {
      body["previous_score"] = prev;
      body["delta_t"] = delta;
    }
    gj::DecayConfig cfg;
    if (rng() % 5) body["lambda"] = cfg.lambda = lam(rng);
    if (rng() % 3 == 0) {
      const char* u = units[rng() % 3];
      body["time_unit"] = u;
      cfg.time_unit = gj::parse_time_unit(u);
    }
    if (rng() % 3 == 0) body["sigma2_crit"] = cfg.sigma2_crit = crit(rng);
    if (!warm && rng() % 3 == 0) {
      body["cold_start"] = "literal_zero";
      cfg.cold_start = gj::ColdStart::LiteralZero;
    }

    std::vector<double> used_reps = with_reps ? reps : std::vector<double>(n, 1.0);
    std::optional<gj::engine::Prior> prior;
    if (warm) prior = gj::engine::Prior{prev, delta};
    auto direct = gj::engine::evaluate(votes, used_reps, prior, cfg);
    auto got = post(body);
    const std::string tag = "payload " + std::to_string(i);
    for (auto [key, want] : {std::pair{"alpha", direct.alpha}, std::pair{"weighted_mean", direct.weighted_mean},
                             std::pair{"score", direct.score}, std::pair{"freshness", direct.freshness},
                             std::pair{"variance", direct.variance}}) {
      double diff = std::fabs(got.at(key).get<double>() - want);
      worst = std::max(worst, diff);
      c.near(got.at(key).get<double>(), want, 1e-12, tag + " " + key);
    }
    c.expect(got.at("ambiguous").get<bool>() == direct.ambiguous, tag + ": ambiguous flag differs");
  }
  server.stop();
  std::ostringstream out;
  out << kPayloads << " payloads, max |diff| = " << worst << ", listing score = " << listing["score"].get<double>();
  return out.str();
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "grandjury");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = gj::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str() + err.str()};
}

std::string cli_report(Check& c) {
  gj::testing::TempDir dir;
  auto path = (dir / "worked.ledger").string();
  gj::testing::build_worked_example(*gj::ledger::Ledger::open(path));
  std::vector<std::string> args = {"--ledger", path, "report", "--collection", "worked", "--format", "json"};
  auto first = cli(args);
  auto second = cli(args);
  c.expect(first.code == 0, "report exit code " + std::to_string(first.code) + ": " + first.out);
  c.expect(first.out == second.out, "json output not byte-stable");
  auto doc = Json::parse(first.out);
  const auto& row = doc.at("rows").at(0);
  c.near(row.at("alpha").get<double>(), 0.7408, 0.0005, "alpha");
  c.near(row.at("weighted_mean").get<double>(), kMean, 1e-9, "weighted mean");
  c.near(row.at("score").get<double>(), 0.733, 0.0015, "score");
  c.near(row.at("freshness").get<double>(), 0.2592, 0.0005, "freshness");
  c.near(row.at("variance").get<double>(), 0.01556, 0.0005, "variance");
  c.expect(!row.at("ambiguous").get<bool>(), "worked example flagged");

  auto csv = cli({"--ledger", path, "report", "--collection", "worked", "--format", "csv"});
  c.expect(csv.code == 0 && csv.out.find("i1,0.7320951497015") != std::string::npos, "csv report row: " + csv.out);
  return "score=" + row.at("score").dump() + " freshness=" + row.at("freshness").dump();
}

}  // namespace

int main() {
  run_check(1, "worked example reproduction", worked_example);
  run_check(2, "engine property suite", engine_properties);
  run_check(3, "replay determinism and tamper detection", replay_determinism);
  run_check(4, "seven-row inference fixture", ingestion_fixture);
  run_check(5, "HTTP evaluate matches engine", api_equivalence);
  run_check(6, "CLI report on worked ledger", cli_report);
  std::cout << (g_failed == 0 ? "ALL PASS" : std::to_string(g_failed) + " FAILED") << "\n";
  return g_failed == 0 ? 0 : 1;
}
