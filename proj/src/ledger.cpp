#include "grandjury/ledger.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "grandjury/sha256.hpp"

namespace grandjury::ledger {
namespace {

Error corrupt(const std::string& message, std::uint64_t seq) {
  return Error(ErrorCode::CorruptLedger, message, "seq " + std::to_string(seq));
}

Json canonical_body(const LedgerEntry& e) {
  return Json{{"seq", e.seq},
              {"kind", to_string(e.kind)},
              {"payload", e.payload},
              {"recorded_at", e.recorded_at.to_iso8601()}};
}

}  // namespace

std::string_view to_string(EntryKind kind) {
  switch (kind) {
    case EntryKind::Vote: return "vote";
    case EntryKind::Juror: return "juror";
    case EntryKind::Prompt: return "prompt";
    case EntryKind::Inference: return "inference";
    case EntryKind::BatchCommit: return "batch_commit";
    case EntryKind::Collection: return "collection";
    case EntryKind::Config: return "config";
    case EntryKind::Submission: return "submission";
  }
  return "vote";
}

EntryKind parse_entry_kind(std::string_view text) {
  static const std::map<std::string_view, EntryKind> kinds = {
      {"vote", EntryKind::Vote},
      {"juror", EntryKind::Juror},
      {"prompt", EntryKind::Prompt},
      {"inference", EntryKind::Inference},
      {"batch_commit", EntryKind::BatchCommit},
      {"collection", EntryKind::Collection},
      {"config", EntryKind::Config},
      {"submission", EntryKind::Submission},
  };
  auto it = kinds.find(text);
  if (it == kinds.end()) {
    throw Error(ErrorCode::CorruptLedger, "unknown entry kind", std::string(text));
  }
  return it->second;
}

std::string chain_checksum(const LedgerEntry& entry, const std::string& prev_checksum) {
  return sha256_hex(canonical_body(entry).dump() + prev_checksum);
}

std::string serialize_line(const LedgerEntry& entry) {
  Json j = canonical_body(entry);
  j["checksum"] = entry.checksum;
  return j.dump();
}

Json to_json(const BatchCommit& c) {
  return Json{{"inference_id", c.inference_id},
              {"batch_seq", c.batch_seq},
              {"vote_seqs", c.vote_seqs},
              {"batch_time", c.batch_time.to_iso8601()},
              {"result", engine::to_json(c.result)},
              {"config_snapshot", to_json(c.config_snapshot)},
              {"state", to_json(c.state)}};
}

BatchCommit batch_commit_from_json(const Json& j) {
  BatchCommit c;
  c.inference_id = require_string(j, "inference_id");
  c.batch_seq = j.at("batch_seq").get<std::int64_t>();
  c.vote_seqs = j.at("vote_seqs").get<std::vector<std::uint64_t>>();
  c.batch_time = parse_iso8601_or_throw(require_string(j, "batch_time"), "batch_time");
  c.result = engine::batch_result_from_json(j.at("result"));
  c.config_snapshot = config_from_json(j.at("config_snapshot"));
  c.state = score_state_from_json(j.at("state"));
  return c;
}

Json to_json(const AuditItem& item) {
  Json j = to_json(item.vote);
  j["seq"] = item.seq;
  j["batch_seq"] = item.batch_seq ? Json(*item.batch_seq) : Json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Projection

void Projection::check_references(std::span<const VoteRecord> records) const {
  for (const auto& r : records) {
    if (!inferences_.count(r.inference_id)) {
      throw Error(ErrorCode::UnknownReference, "unknown inference_id", r.inference_id);
    }
    if (!jurors_.count(r.voter_id)) {
      throw Error(ErrorCode::UnknownReference, "unknown voter_id", r.voter_id);
    }
    if (!prompts_.count(r.voter_prompt_id)) {
      throw Error(ErrorCode::UnknownReference, "unknown voter_prompt_id", r.voter_prompt_id);
    }
  }
}

BatchCommit Projection::plan_commit(const std::string& inference_id,
                                    std::span<const std::uint64_t> vote_seqs,
                                    const DecayConfig& config,
                                    std::optional<Timestamp> batch_time) const {
  if (!inferences_.count(inference_id)) {
    throw Error(ErrorCode::UnknownInference, "unknown inference", inference_id);
  }
  if (vote_seqs.empty()) throw Error(ErrorCode::EmptyBatch, "batch contains no votes");

  std::set<std::uint64_t> seen;
  engine::BatchInput input;
  Timestamp latest;
  for (auto seq : vote_seqs) {
    auto it = votes_.find(seq);
    if (it == votes_.end()) {
      throw Error(ErrorCode::UnknownReference, "seq is not a vote entry", std::to_string(seq));
    }
    if (it->second.inference_id != inference_id) {
      throw Error(ErrorCode::UnknownReference, "vote belongs to another inference",
                  std::to_string(seq));
    }
    if (committed_.count(seq) || !seen.insert(seq).second) {
      throw Error(ErrorCode::AlreadyCommitted, "vote already committed to a batch",
                  std::to_string(seq));
    }
    input.votes.push_back(it->second.vote);
    input.reputations.push_back(jurors_.at(it->second.voter_id).reputation);
    if (seen.size() == 1 || latest < it->second.vote_time) latest = it->second.vote_time;
  }

  input.batch_time = batch_time.value_or(latest);
  if (auto st = states_.find(inference_id); st != states_.end()) input.prev = st->second;

  BatchCommit c;
  c.inference_id = inference_id;
  c.batch_seq = input.prev ? input.prev->t + 1 : 1;
  c.vote_seqs.assign(vote_seqs.begin(), vote_seqs.end());
  c.batch_time = input.batch_time;
  c.config_snapshot = config;
  c.result = engine::evaluate_batch(input, config);
  c.state = engine::advance(inference_id, input.prev, c.result, input.batch_time);
  return c;
}

void Projection::apply(const LedgerEntry& entry) {
  try {
    switch (entry.kind) {
      case EntryKind::Vote: {
        auto rec = validate_vote_record(entry.payload);
        VoteRecord one[] = {rec};
        check_references(one);
        votes_by_inference_[rec.inference_id].push_back(entry.seq);
        votes_.emplace(entry.seq, std::move(rec));
        break;
      }
      case EntryKind::Juror: {
        auto j = juror_from_json(entry.payload);
        if (!jurors_.emplace(j.voter_id, j).second) throw corrupt("duplicate juror", entry.seq);
        break;
      }
      case EntryKind::Prompt: {
        auto p = prompt_from_json(entry.payload);
        if (!prompts_.emplace(p.voter_prompt_id, p).second) {
          throw corrupt("duplicate voter prompt", entry.seq);
        }
        break;
      }
      case EntryKind::Inference: {
        auto r = inference_from_json(entry.payload);
        if (!inferences_.emplace(r.inference_id, r).second) {
          throw corrupt("duplicate inference", entry.seq);
        }
        break;
      }
      case EntryKind::Collection: {
        auto m = manifest_from_json(entry.payload);
        for (const auto& id : m.inference_ids) {
          if (!inferences_.count(id)) throw corrupt("manifest references unknown inference", entry.seq);
        }
        if (!collections_.emplace(m.collection_id, m).second) {
          throw corrupt("duplicate collection", entry.seq);
        }
        break;
      }
      case EntryKind::Config:
        config_ = config_from_json(entry.payload);
        break;
      case EntryKind::Submission: {
        auto key = require_string(entry.payload, "idempotency_key");
        auto seqs = entry.payload.at("vote_seqs").get<std::vector<std::uint64_t>>();
        for (auto s : seqs) {
          if (!votes_.count(s)) throw corrupt("submission references a non-vote entry", entry.seq);
        }
        if (!submissions_.emplace(key, std::move(seqs)).second) {
          throw corrupt("duplicate idempotency key", entry.seq);
        }
        break;
      }
      case EntryKind::BatchCommit: {
        auto stored = batch_commit_from_json(entry.payload);
        auto config = stored.config_snapshot;
        if (overrides_) config = merge_config(config, *overrides_);
        auto planned = plan_commit(stored.inference_id, stored.vote_seqs, config, stored.batch_time);
        if (planned.batch_seq != stored.batch_seq) {
          throw corrupt("batch_seq out of order", entry.seq);
        }
        if (scoring_ == Scoring::Stored && !overrides_ && planned != stored) {
          throw corrupt("stored batch result disagrees with recomputation", entry.seq);
        }
        const auto& used = scoring_ == Scoring::Stored ? stored : planned;
        for (auto s : used.vote_seqs) committed_[s] = used.batch_seq;
        states_[used.inference_id] = used.state;
        commits_[used.inference_id].push_back(used);
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptLedger) throw;
    throw Error(ErrorCode::CorruptLedger,
                std::string("invalid ") + std::string(to_string(entry.kind)) + " entry: " + e.what(),
                "seq " + std::to_string(entry.seq));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptLedger,
                std::string("invalid ") + std::string(to_string(entry.kind)) + " entry: " + e.what(),
                "seq " + std::to_string(entry.seq));
  }
}

// ---------------------------------------------------------------------------
// Parsing

std::vector<LedgerEntry> parse_ledger(std::string_view bytes, OpenMode mode, std::size_t* consumed) {
  std::vector<LedgerEntry> out;
  std::string prev;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    std::uint64_t seq = out.size();
    if (nl == std::string_view::npos) {
      if (mode == OpenMode::RecoverTornTail) break;
      throw corrupt("truncated final line", seq);
    }
    std::string_view line = bytes.substr(pos, nl - pos);

    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception&) {
      throw corrupt("line is not valid JSON", seq);
    }
    try {
      if (!j.is_object() || j.size() != 5) throw corrupt("entry must have exactly five fields", seq);
      if (j.dump() != line) throw corrupt("entry is not in canonical form", seq);

      LedgerEntry e;
      e.seq = j.at("seq").get<std::uint64_t>();
      if (!j.at("seq").is_number_unsigned() || e.seq != seq) {
        throw corrupt("seq gap or reorder", seq);
      }
      e.kind = parse_entry_kind(j.at("kind").get<std::string>());
      e.payload = j.at("payload");
      auto recorded = parse_iso8601(j.at("recorded_at").get<std::string>());
      if (!recorded) throw corrupt("bad recorded_at", seq);
      e.recorded_at = *recorded;
      e.checksum = j.at("checksum").get<std::string>();
      if (e.checksum != chain_checksum(e, prev)) throw corrupt("checksum chain broken", seq);
      prev = e.checksum;
      out.push_back(std::move(e));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      throw corrupt(std::string("malformed entry: ") + ex.what(), seq);
    }
    pos = nl + 1;
  }
  if (consumed) *consumed = pos;
  return out;
}

std::vector<LedgerEntry> read_ledger_file(const std::filesystem::path& path, OpenMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot open ledger", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ledger(ss.str(), mode);
}

std::map<std::string, ScoreState> replay(std::span<const LedgerEntry> entries,
                                         const std::optional<Json>& overrides) {
  Projection p(Projection::Scoring::Recompute, overrides);
  for (const auto& e : entries) p.apply(e);
  return p.states();
}

// ---------------------------------------------------------------------------
// Ledger

Ledger::Ledger(std::filesystem::path path, LedgerOptions options)
    : path_(std::move(path)), options_(std::move(options)) {}

std::unique_ptr<Ledger> Ledger::in_memory(LedgerOptions options) {
  return std::unique_ptr<Ledger>(new Ledger({}, std::move(options)));
}

std::unique_ptr<Ledger> Ledger::open(const std::filesystem::path& path, LedgerOptions options) {
  std::unique_ptr<Ledger> ledger(new Ledger(path, options));
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::StorageFailure, "cannot open ledger", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    std::size_t consumed = 0;
    ledger->entries_ = parse_ledger(bytes, options.mode, &consumed);
    if (consumed < bytes.size()) {
      std::filesystem::resize_file(path, consumed);
    }
    for (const auto& e : ledger->entries_) ledger->projection_.apply(e);
  } else {
    std::ofstream create(path, std::ios::binary | std::ios::app);
    if (!create) throw Error(ErrorCode::StorageFailure, "cannot create ledger", path.string());
  }
  return ledger;
}

void Ledger::persist(const std::string& bytes) {
  std::size_t allowed = bytes.size();
  if (options_.fault_injector) allowed = std::min(allowed, options_.fault_injector(bytes.size()));

  if (!path_.empty()) {
    int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) {
      throw Error(ErrorCode::StorageFailure, "cannot open ledger for append", std::strerror(errno));
    }
    std::size_t written = 0;
    while (written < allowed) {
      auto n = ::write(fd, bytes.data() + written, allowed - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        int err = errno;
        ::close(fd);
        poisoned_ = true;
        throw Error(ErrorCode::StorageFailure, "ledger write failed", std::strerror(err));
      }
      written += static_cast<std::size_t>(n);
    }
    ::fdatasync(fd);
    ::close(fd);
  }
  if (allowed < bytes.size()) {
    poisoned_ = true;
    throw SimulatedCrash();
  }
}

void Ledger::append(std::vector<std::pair<EntryKind, Json>> items) {
  if (poisoned_) throw Error(ErrorCode::StorageFailure, "ledger writer is unusable after a failed write");
  std::vector<LedgerEntry> pending;
  pending.reserve(items.size());
  std::string prev = entries_.empty() ? std::string() : entries_.back().checksum;
  std::string bytes;
  Timestamp now = options_.clock();
  for (auto& [kind, payload] : items) {
    LedgerEntry e;
    e.seq = entries_.size() + pending.size();
    e.kind = kind;
    e.payload = std::move(payload);
    e.recorded_at = now;
    e.checksum = chain_checksum(e, prev);
    prev = e.checksum;
    try {
      bytes += serialize_line(e);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::SchemaError, "record is not serializable (invalid UTF-8?)", ex.what());
    }
    bytes += '\n';
    pending.push_back(std::move(e));
  }
  persist(bytes);
  for (auto& e : pending) {
    projection_.apply(e);
    entries_.push_back(std::move(e));
  }
}

std::uint64_t Ledger::register_juror(const Juror& juror) {
  std::unique_lock lock(mutex_);
  auto checked = juror_from_json(to_json(juror));
  if (projection_.jurors().count(checked.voter_id)) {
    throw Error(ErrorCode::DuplicateId, "juror already registered", checked.voter_id);
  }
  append({{EntryKind::Juror, to_json(checked)}});
  return entries_.back().seq;
}

std::uint64_t Ledger::register_prompt(const VoterPrompt& prompt) {
  std::unique_lock lock(mutex_);
  auto checked = prompt_from_json(to_json(prompt));
  if (projection_.prompts().count(checked.voter_prompt_id)) {
    throw Error(ErrorCode::DuplicateId, "voter prompt already registered", checked.voter_prompt_id);
  }
  append({{EntryKind::Prompt, to_json(checked)}});
  return entries_.back().seq;
}

std::uint64_t Ledger::set_config(const DecayConfig& config) {
  config.validate();
  std::unique_lock lock(mutex_);
  append({{EntryKind::Config, to_json(config)}});
  return entries_.back().seq;
}

std::uint64_t Ledger::add_collection(const CollectionManifest& manifest,
                                     std::span<const InferenceRecord> records) {
  std::unique_lock lock(mutex_);
  if (projection_.collections().count(manifest.collection_id)) {
    throw Error(ErrorCode::DuplicateCollection, "collection already ingested", manifest.collection_id);
  }
  std::set<std::string> ids;
  std::vector<std::pair<EntryKind, Json>> items;
  for (const auto& r : records) {
    auto checked = inference_from_json(to_json(r));
    if (projection_.inferences().count(checked.inference_id) || !ids.insert(checked.inference_id).second) {
      throw Error(ErrorCode::DuplicateId, "inference_id already exists", checked.inference_id);
    }
    items.emplace_back(EntryKind::Inference, to_json(checked));
  }
  CollectionManifest m = manifest;
  m.record_count = static_cast<std::int64_t>(records.size());
  m.inference_ids.clear();
  for (const auto& r : records) m.inference_ids.push_back(r.inference_id);
  items.emplace_back(EntryKind::Collection, to_json(m));
  append(std::move(items));
  return entries_.back().seq;
}

std::vector<std::uint64_t> Ledger::append_votes(std::span<const VoteRecord> records,
                                                const std::optional<std::string>& idempotency_key) {
  std::unique_lock lock(mutex_);
  if (idempotency_key) {
    if (idempotency_key->empty()) throw Error(ErrorCode::BadRequest, "idempotency key is empty");
    auto it = projection_.submissions().find(*idempotency_key);
    if (it != projection_.submissions().end()) return it->second;
  }
  std::vector<std::pair<EntryKind, Json>> items;
  for (const auto& r : records) items.emplace_back(EntryKind::Vote, to_json(validate_vote_record(to_json(r))));
  projection_.check_references(records);

  std::vector<std::uint64_t> seqs;
  for (std::size_t i = 0; i < records.size(); ++i) seqs.push_back(entries_.size() + i);
  if (idempotency_key && !records.empty()) {
    items.emplace_back(EntryKind::Submission,
                       Json{{"idempotency_key", *idempotency_key}, {"vote_seqs", seqs}});
  }
  if (!items.empty()) append(std::move(items));
  return seqs;
}

BatchCommit Ledger::commit_batch(const std::string& inference_id,
                                 std::span<const std::uint64_t> vote_seqs, const DecayConfig& config,
                                 std::optional<Timestamp> batch_time) {
  std::unique_lock lock(mutex_);
  auto commit = projection_.plan_commit(inference_id, vote_seqs, config, batch_time);
  append({{EntryKind::BatchCommit, to_json(commit)}});
  return commit;
}

std::vector<AuditItem> Ledger::audit_trail(const std::string& inference_id) const {
  std::shared_lock lock(mutex_);
  if (!projection_.inferences().count(inference_id)) {
    throw Error(ErrorCode::UnknownInference, "unknown inference", inference_id);
  }
  std::vector<AuditItem> out;
  auto it = projection_.votes_by_inference().find(inference_id);
  if (it == projection_.votes_by_inference().end()) return out;
  for (auto seq : it->second) {
    AuditItem item;
    item.vote = projection_.votes().at(seq);
    item.seq = seq;
    if (auto c = projection_.committed().find(seq); c != projection_.committed().end()) {
      item.batch_seq = c->second;
    }
    out.push_back(std::move(item));
  }
  return out;
}

Projection Ledger::snapshot(std::uint64_t* watermark) const {
  std::shared_lock lock(mutex_);
  if (watermark) *watermark = entries_.size();
  return projection_;
}

std::optional<ScoreState> Ledger::score_state(const std::string& inference_id) const {
  std::shared_lock lock(mutex_);
  auto it = projection_.states().find(inference_id);
  if (it == projection_.states().end()) return std::nullopt;
  return it->second;
}

std::vector<VoteRecord> Ledger::votes(const std::optional<std::string>& inference_id) const {
  std::shared_lock lock(mutex_);
  std::vector<VoteRecord> out;
  for (const auto& [seq, v] : projection_.votes()) {
    if (!inference_id || v.inference_id == *inference_id) out.push_back(v);
  }
  return out;
}

std::vector<LedgerEntry> Ledger::entries() const {
  std::shared_lock lock(mutex_);
  return entries_;
}

DecayConfig Ledger::config() const {
  std::shared_lock lock(mutex_);
  return projection_.config();
}

std::string Ledger::head_checksum() const {
  std::shared_lock lock(mutex_);
  return entries_.empty() ? std::string() : entries_.back().checksum;
}

std::uint64_t Ledger::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void Ledger::write_snapshot(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  Json states = Json::object();
  for (const auto& [id, s] : projection_.states()) states[id] = to_json(s);
  Json snap{{"entry_count", entries_.size()},
            {"head_checksum", entries_.empty() ? std::string() : entries_.back().checksum},
            {"states", states}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write snapshot", tmp.string());
    out << snap.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void verify_snapshot(const std::filesystem::path& snapshot_path, std::span<const LedgerEntry> entries) {
  std::ifstream in(snapshot_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot open snapshot", snapshot_path.string());
  Json snap;
  try {
    snap = Json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptLedger, "snapshot is not valid JSON", e.what());
  }
  auto count = snap.at("entry_count").get<std::uint64_t>();
  if (count > entries.size()) throw Error(ErrorCode::CorruptLedger, "snapshot is ahead of the ledger");
  auto head = snap.at("head_checksum").get<std::string>();
  if (head != (count == 0 ? std::string() : entries[count - 1].checksum)) {
    throw Error(ErrorCode::CorruptLedger, "snapshot head checksum does not match the ledger");
  }
  auto states = replay(entries.subspan(0, count));
  if (snap.at("states").size() != states.size()) {
    throw Error(ErrorCode::CorruptLedger, "snapshot state count differs from replay");
  }
  for (const auto& [id, s] : states) {
    if (!snap["states"].contains(id) || score_state_from_json(snap["states"][id]) != s) {
      throw Error(ErrorCode::CorruptLedger, "snapshot state differs from replay", id);
    }
  }
}

}  // namespace grandjury::ledger
