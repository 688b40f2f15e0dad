#include "grandjury/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "grandjury/analytics.hpp"
#include "grandjury/csv.hpp"
#include "grandjury/ingest.hpp"
#include "grandjury/service.hpp"

namespace grandjury::cli {
namespace {

std::string number(double x) { return Json(x).dump(); }

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

struct ReportRow {
  std::string inference_id;
  std::optional<ScoreState> state;
  std::optional<engine::BatchResult> last_batch;
  std::size_t n_votes = 0;
  std::optional<double> completeness;
};

// Scoring flags shared by several subcommands. Unset fields leave the
// underlying config alone.
struct ConfigFlags {
  std::string config_file;
  std::optional<double> lambda;
  std::optional<std::string> time_unit;
  std::optional<double> sigma2_crit;
  std::optional<std::string> cold_start;

  void add_to(CLI::App& app) {
    app.add_option("--lambda", lambda, "decay constant per time unit")->envname("GRANDJURY_LAMBDA");
    app.add_option("--time-unit", time_unit, "seconds, hours or days")->envname("GRANDJURY_TIME_UNIT");
    app.add_option("--sigma2-crit", sigma2_crit, "ambiguity threshold")->envname("GRANDJURY_SIGMA2_CRIT");
    app.add_option("--cold-start", cold_start, "mean_seed or literal_zero")->envname("GRANDJURY_COLD_START");
  }

  // Flags and environment (already merged by CLI11) as a config patch.
  Json patch() const {
    Json p = Json::object();
    if (lambda) p["lambda"] = *lambda;
    if (time_unit) p["time_unit"] = *time_unit;
    if (sigma2_crit) p["sigma2_crit"] = *sigma2_crit;
    if (cold_start) p["cold_start"] = *cold_start;
    return p;
  }

  Json file_patch() const {
    if (config_file.empty()) return Json::object();
    std::ifstream in(config_file);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file", config_file);
    try {
      return Json::parse(in);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InvalidConfig, "config file is not valid JSON", e.what());
    }
  }

  bool any() const { return !config_file.empty() || !patch().empty(); }

  // Precedence: flags > env > file > base.
  DecayConfig resolve(const DecayConfig& base) const {
    return merge_config(merge_config(base, file_patch()), patch());
  }

  Json override_patch() const {
    Json p = file_patch();
    p.update(patch());
    return p;
  }
};

std::vector<std::uint64_t> parse_seq_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadRequest, "seq list must be comma-separated integers", item);
    }
  }
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0.0;
    if (!read_number(Json(item), v)) throw Error(ErrorCode::BadRequest, "not a number", item);
    out.push_back(v);
  }
  return out;
}

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::CorruptLedger ? kIntegrityError : kDataError;
}

}  // namespace

std::vector<std::string> read_roster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot read roster file", path);
  std::vector<std::string> roster;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    auto start = line.find_first_not_of(' ');
    if (start == std::string::npos || line[start] == '#') continue;
    roster.push_back(line.substr(start));
  }
  return roster;
}

std::string run_report(const std::vector<ledger::LedgerEntry>& entries, const ReportSpec& spec) {
  ledger::Projection view;
  for (const auto& e : entries) view.apply(e);

  std::vector<std::string> ids;
  if (spec.collection_id) {
    auto it = view.collections().find(*spec.collection_id);
    if (it == view.collections().end()) {
      throw Error(ErrorCode::UnknownCollection, "unknown collection", *spec.collection_id);
    }
    ids = it->second.inference_ids;
  } else {
    for (const auto& [id, rec] : view.inferences()) ids.push_back(id);
  }

  std::vector<VoteRecord> all_votes;
  for (const auto& [seq, v] : view.votes()) all_votes.push_back(v);

  std::vector<ReportRow> rows;
  for (const auto& id : ids) {
    ReportRow row;
    row.inference_id = id;
    if (auto s = view.states().find(id); s != view.states().end()) row.state = s->second;
    if (auto c = view.commits().find(id); c != view.commits().end() && !c->second.empty()) {
      row.last_batch = c->second.back().result;
    }
    if (auto v = view.votes_by_inference().find(id); v != view.votes_by_inference().end()) {
      row.n_votes = v->second.size();
    }
    if (spec.roster) row.completeness = analytics::vote_completeness(all_votes, *spec.roster, id);
    rows.push_back(std::move(row));
  }

  std::string head = entries.empty() ? std::string() : entries.back().checksum;
  std::ostringstream out;
  switch (spec.format) {
    case ReportFormat::Json: {
      Json arr = Json::array();
      for (const auto& r : rows) {
        Json j{{"inference_id", r.inference_id}, {"n_votes", r.n_votes}};
        j["t"] = r.state ? r.state->t : 0;
        j["score"] = r.state ? Json(r.state->score) : Json(nullptr);
        j["freshness"] = r.state ? Json(r.state->freshness) : Json(nullptr);
        j["variance"] = r.state ? Json(r.state->last_variance) : Json(nullptr);
        j["alpha"] = r.last_batch ? Json(r.last_batch->alpha) : Json(nullptr);
        j["delta_t"] = r.last_batch ? Json(r.last_batch->delta_t) : Json(nullptr);
        j["weighted_mean"] = r.last_batch ? Json(r.last_batch->weighted_mean) : Json(nullptr);
        j["ambiguous"] = r.state ? r.state->ambiguous : false;
        j["last_batch_time"] = r.state ? Json(r.state->last_batch_time.to_iso8601()) : Json(nullptr);
        j["completeness"] = r.completeness ? Json(*r.completeness) : Json(nullptr);
        arr.push_back(std::move(j));
      }
      Json doc{{"collection_id", spec.collection_id ? Json(*spec.collection_id) : Json(nullptr)},
               {"ledger_head", head},
               {"entries", entries.size()},
               {"rows", arr}};
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::Csv: {
      out << csv::format_row({"inference_id", "score", "freshness", "t", "variance", "ambiguous",
                              "n_votes", "completeness"});
      for (const auto& r : rows) {
        out << csv::format_row({r.inference_id, r.state ? number(r.state->score) : "",
                                r.state ? number(r.state->freshness) : "",
                                std::to_string(r.state ? r.state->t : 0),
                                r.state ? number(r.state->last_variance) : "",
                                r.state && r.state->ambiguous ? "true" : "false",
                                std::to_string(r.n_votes),
                                r.completeness ? number(*r.completeness) : ""});
      }
      break;
    }
    case ReportFormat::Text: {
      out << "ledger head: " << (head.empty() ? "(empty)" : head) << "\n";
      out << "entries:     " << entries.size() << "\n\n";
      char line[256];
      std::snprintf(line, sizeof line, "%-24s %8s %9s %4s %9s %9s %7s %12s\n", "inference_id", "score",
                    "freshness", "t", "variance", "ambiguous", "n_votes", "completeness");
      out << line;
      for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-24s %8s %9s %4lld %9s %9s %7zu %12s\n",
                      r.inference_id.c_str(), r.state ? fixed(r.state->score, 4).c_str() : "-",
                      r.state ? fixed(r.state->freshness, 4).c_str() : "-",
                      static_cast<long long>(r.state ? r.state->t : 0),
                      r.state ? fixed(r.state->last_variance, 4).c_str() : "-",
                      r.state && r.state->ambiguous ? "yes" : "no", r.n_votes,
                      r.completeness ? fixed(*r.completeness, 4).c_str() : "-");
        out << line;
      }
      break;
    }
  }
  return out.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GrandJury evaluation ledger: ingest, vote, score, replay and report"};
  app.require_subcommand(1);

  std::string ledger_path = "grandjury.ledger";
  ConfigFlags flags;
  app.add_option("--ledger", ledger_path, "ledger file")->envname("GRANDJURY_LEDGER");
  app.add_option("--config", flags.config_file, "DecayConfig JSON file")->envname("GRANDJURY_CONFIG");

  std::function<int()> action;
  auto open_ledger = [&](ledger::OpenMode mode = ledger::OpenMode::Strict) {
    ledger::LedgerOptions opts;
    opts.mode = mode;
    return ledger::Ledger::open(ledger_path, opts);
  };
  auto read_entries = [&] {
    if (!std::filesystem::exists(ledger_path)) {
      throw Error(ErrorCode::NotFound, "ledger does not exist", ledger_path);
    }
    return ledger::read_ledger_file(ledger_path);
  };

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string token;
  std::string admin_token;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--token", token, "bearer token for mutating endpoints")->envname("GRANDJURY_TOKEN");
  serve->add_option("--admin-token", admin_token, "token for POST /v1/config")
      ->envname("GRANDJURY_ADMIN_TOKEN");
  serve->callback([&] {
    action = [&] {
      auto ledger = open_ledger();
      api::Service service(*ledger, {token, admin_token});
      api::HttpServer server(service);
      if (token.empty()) err << "warning: no --token given; mutating endpoints are unauthenticated\n";
      err << "listening on " << host << ":" << port << " (ledger " << ledger_path << ")\n";
      server.listen_blocking(host, port);
      return kOk;
    };
  });

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "ingest an inference collection (csv or jsonl)");
  std::string ingest_file;
  std::string ingest_format;
  std::optional<std::string> collection_id;
  std::string license;
  ingest_cmd->add_option("file", ingest_file)->required();
  ingest_cmd->add_option("--format", ingest_format, "csv or jsonl (default: from extension)");
  ingest_cmd->add_option("--collection-id", collection_id);
  ingest_cmd->add_option("--license", license);
  ingest_cmd->callback([&] {
    action = [&] {
      auto fmt = ingest_format.empty() ? ingest::format_from_path(ingest_file) : ingest::parse_format(ingest_format);
      auto ledger = open_ledger();
      ingest::IngestOptions opts{collection_id, ingest_file, license};
      auto manifest = ingest::ingest_inference_file(*ledger, ingest_file, fmt, opts);
      out << to_json(manifest).dump() << '\n';
      return kOk;
    };
  });

  // export
  auto* export_cmd = app.add_subcommand("export", "write a collection back out");
  std::string export_id;
  std::string export_format = "csv";
  export_cmd->add_option("collection_id", export_id)->required();
  export_cmd->add_option("--format", export_format);
  export_cmd->callback([&] {
    action = [&] {
      ledger::Projection view;
      for (const auto& e : read_entries()) view.apply(e);
      out << ingest::export_collection(view, export_id, ingest::parse_format(export_format));
      return kOk;
    };
  });

  // jurors / prompts
  auto* jurors = app.add_subcommand("jurors", "juror registry");
  jurors->require_subcommand(1);
  auto* juror_add = jurors->add_subcommand("add", "register a pseudonymous juror");
  std::string juror_id;
  double reputation = 1.0;
  juror_add->add_option("voter_id", juror_id)->required();
  juror_add->add_option("--reputation", reputation);
  juror_add->callback([&] {
    action = [&] {
      auto ledger = open_ledger();
      Juror j{juror_id, reputation, Timestamp::now()};
      ledger->register_juror(j);
      out << to_json(j).dump() << '\n';
      return kOk;
    };
  });

  auto* prompts = app.add_subcommand("prompts", "voter prompt registry");
  prompts->require_subcommand(1);
  auto* prompt_add = prompts->add_subcommand("add", "publish a voter prompt (rubric)");
  std::string prompt_id;
  std::string rubric;
  std::string scale_note;
  prompt_add->add_option("voter_prompt_id", prompt_id)->required();
  prompt_add->add_option("--rubric", rubric)->required();
  prompt_add->add_option("--scale-note", scale_note);
  prompt_add->callback([&] {
    action = [&] {
      auto ledger = open_ledger();
      VoterPrompt p{prompt_id, rubric, Timestamp::now(), scale_note};
      ledger->register_prompt(p);
      out << to_json(p).dump() << '\n';
      return kOk;
    };
  });

  // votes append
  auto* votes = app.add_subcommand("votes", "vote ledger operations");
  votes->require_subcommand(1);
  auto* votes_append = votes->add_subcommand("append", "append votes from a csv/jsonl file");
  std::string votes_file;
  std::string votes_format;
  bool votes_commit = false;
  std::optional<std::string> idempotency_key;
  votes_append->add_option("file", votes_file)->required();
  votes_append->add_option("--format", votes_format);
  votes_append->add_flag("--commit", votes_commit, "commit one micro-batch per inference");
  votes_append->add_option("--idempotency-key", idempotency_key);
  flags.add_to(*votes_append);
  votes_append->callback([&] {
    action = [&] {
      auto fmt = votes_format.empty() ? ingest::format_from_path(votes_file) : ingest::parse_format(votes_format);
      auto records = ingest::parse_vote_file(votes_file, fmt);
      auto ledger = open_ledger();
      auto seqs = ledger->append_votes(records, idempotency_key);
      Json result{{"seqs", seqs}};
      if (votes_commit) {
        auto config = flags.resolve(ledger->config());
        auto view = ledger->snapshot();
        std::map<std::string, std::vector<std::uint64_t>> groups;
        for (auto s : seqs) {
          if (!view.committed().count(s)) groups[view.votes().at(s).inference_id].push_back(s);
        }
        Json commits = Json::array();
        for (const auto& [id, group] : groups) {
          commits.push_back(ledger::to_json(ledger->commit_batch(id, group, config)));
        }
        result["commits"] = commits;
      }
      out << result.dump() << '\n';
      return kOk;
    };
  });

  // score commit
  auto* score = app.add_subcommand("score", "scoring operations");
  score->require_subcommand(1);
  auto* score_commit = score->add_subcommand("commit", "commit a micro-batch for one inference");
  std::string commit_id;
  std::string commit_seqs;
  std::string commit_time;
  score_commit->add_option("inference_id", commit_id)->required();
  score_commit->add_option("--seqs", commit_seqs, "vote seqs (default: every uncommitted vote)");
  score_commit->add_option("--batch-time", commit_time, "ISO-8601 UTC (default: latest vote_time)");
  flags.add_to(*score_commit);
  score_commit->callback([&] {
    action = [&] {
      auto ledger = open_ledger();
      std::vector<std::uint64_t> seqs;
      if (!commit_seqs.empty()) {
        seqs = parse_seq_list(commit_seqs);
      } else {
        for (const auto& item : ledger->audit_trail(commit_id)) {
          if (!item.batch_seq) seqs.push_back(item.seq);
        }
      }
      std::optional<Timestamp> batch_time;
      if (!commit_time.empty()) batch_time = parse_iso8601_or_throw(commit_time, "--batch-time");
      auto c = ledger->commit_batch(commit_id, seqs, flags.resolve(ledger->config()), batch_time);
      out << ledger::to_json(c).dump() << '\n';
      return kOk;
    };
  });

  // evaluate (stateless)
  auto* eval = app.add_subcommand("evaluate", "stateless score update, no ledger access");
  std::string eval_votes;
  std::string eval_reps;
  std::optional<double> eval_prev;
  std::optional<double> eval_dt;
  eval->add_option("--votes", eval_votes, "comma-separated votes in [0,1]")->required();
  eval->add_option("--reputations", eval_reps);
  eval->add_option("--previous-score", eval_prev);
  eval->add_option("--delta-t", eval_dt, "elapsed time in config time units");
  flags.add_to(*eval);
  eval->callback([&] {
    action = [&] {
      api::EvaluateRequest req;
      req.votes = parse_number_list(eval_votes);
      if (!eval_reps.empty()) req.reputations = parse_number_list(eval_reps);
      req.previous_score = eval_prev;
      req.delta_t = eval_dt;
      out << api::to_json(api::evaluate(req, flags.resolve(DecayConfig{}))).dump() << '\n';
      return kOk;
    };
  });

  // report
  auto* report = app.add_subcommand("report", "per-inference score report");
  std::optional<std::string> report_collection;
  std::string roster_file;
  std::string report_format = "text";
  report->add_option("--collection", report_collection);
  report->add_option("--roster", roster_file, "file with one voter id per line");
  report->add_option("--format", report_format)->check(CLI::IsMember({"text", "json", "csv"}));
  report->callback([&] {
    action = [&] {
      ReportSpec spec;
      spec.collection_id = report_collection;
      if (!roster_file.empty()) spec.roster = read_roster(roster_file);
      spec.format = report_format == "json"  ? ReportFormat::Json
                    : report_format == "csv" ? ReportFormat::Csv
                                             : ReportFormat::Text;
      out << run_report(read_entries(), spec);
      return kOk;
    };
  });

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "recompute every score from the ledger");
  flags.add_to(*replay_cmd);
  replay_cmd->callback([&] {
    action = [&] {
      auto entries = read_entries();
      std::optional<Json> overrides;
      if (flags.any()) overrides = flags.override_patch();
      auto states = ledger::replay(entries, overrides);
      Json doc = Json::object();
      for (const auto& [id, s] : states) doc[id] = to_json(s);
      bool matches = true;
      if (!overrides) {
        ledger::Projection stored;
        for (const auto& e : entries) stored.apply(e);
        matches = stored.states() == states;
      }
      out << Json{{"states", doc}, {"overrides", overrides ? *overrides : Json(nullptr)},
                  {"matches_stored", matches}}
                 .dump(2)
          << '\n';
      return matches ? kOk : kIntegrityError;
    };
  });

  // verify
  auto* verify = app.add_subcommand("verify", "check the checksum chain and reference closure");
  std::string snapshot_path;
  bool repair = false;
  verify->add_option("--snapshot", snapshot_path, "also check a snapshot file against the log");
  verify->add_flag("--repair", repair, "drop a torn final line left by an interrupted write");
  verify->callback([&] {
    action = [&] {
      if (repair) open_ledger(ledger::OpenMode::RecoverTornTail);
      auto entries = read_entries();
      ledger::Projection view;
      for (const auto& e : entries) view.apply(e);
      if (!snapshot_path.empty()) ledger::verify_snapshot(snapshot_path, entries);
      out << Json{{"status", "ok"},
                  {"entries", entries.size()},
                  {"head", entries.empty() ? std::string() : entries.back().checksum}}
                 .dump()
          << '\n';
      return kOk;
    };
  });

  // snapshot
  auto* snapshot = app.add_subcommand("snapshot", "write a verifiable state snapshot");
  std::string snapshot_out;
  snapshot->add_option("file", snapshot_out)->required();
  snapshot->callback([&] {
    action = [&] {
      open_ledger()->write_snapshot(snapshot_out);
      out << Json{{"snapshot", snapshot_out}}.dump() << '\n';
      return kOk;
    };
  });

  // config
  auto* config = app.add_subcommand("config", "scoring parameters");
  config->require_subcommand(1);
  auto* config_show = config->add_subcommand("show", "print the effective config");
  flags.add_to(*config_show);
  config_show->callback([&] {
    action = [&] {
      DecayConfig base;
      if (std::filesystem::exists(ledger_path)) base = open_ledger()->config();
      out << to_json(flags.resolve(base)).dump(2) << '\n';
      return kOk;
    };
  });
  auto* config_set = config->add_subcommand("set", "record a new config in the ledger");
  flags.add_to(*config_set);
  config_set->callback([&] {
    action = [&] {
      auto ledger = open_ledger();
      auto resolved = flags.resolve(ledger->config());
      ledger->set_config(resolved);
      out << to_json(resolved).dump(2) << '\n';
      return kOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what();
    if (!e.detail().empty()) err << " (" << e.detail() << ")";
    err << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace grandjury::cli
