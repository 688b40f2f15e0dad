#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "grandjury/decay.hpp"
#include "grandjury/model.hpp"

// Append-only, hash-chained event log. One JSON object per line:
//
//   {"checksum":..., "kind":..., "payload":..., "recorded_at":..., "seq":...}
//
// checksum = sha256_hex(canonical({kind, payload, recorded_at, seq}) + previous checksum),
// with the genesis entry chained to the empty string. Lines are written in
// canonical form (sorted keys, no whitespace) and verified byte-for-byte on load.
namespace grandjury::ledger {

enum class EntryKind { Vote, Juror, Prompt, Inference, BatchCommit, Collection, Config, Submission };

std::string_view to_string(EntryKind kind);
EntryKind parse_entry_kind(std::string_view text);

struct LedgerEntry {
  std::uint64_t seq = 0;
  EntryKind kind = EntryKind::Vote;
  Json payload;
  Timestamp recorded_at;
  std::string checksum;
};

std::string chain_checksum(const LedgerEntry& entry, const std::string& prev_checksum);
std::string serialize_line(const LedgerEntry& entry);

struct BatchCommit {
  std::string inference_id;
  std::int64_t batch_seq = 0;
  std::vector<std::uint64_t> vote_seqs;
  Timestamp batch_time;
  engine::BatchResult result;
  DecayConfig config_snapshot;
  ScoreState state;

  bool operator==(const BatchCommit&) const = default;
};

Json to_json(const BatchCommit& c);
BatchCommit batch_commit_from_json(const Json& j);

struct AuditItem {
  VoteRecord vote;
  std::uint64_t seq = 0;
  std::optional<std::int64_t> batch_seq;  // nullopt while uncommitted
};

Json to_json(const AuditItem& item);

// Materialized view of a ledger prefix. Applying entries checks reference
// closure and commit ordering; it throws CorruptLedger on violations.
class Projection {
 public:
  enum class Scoring {
    Stored,     // trust each commit's persisted state
    Recompute,  // re-run the engine for every commit
  };

  explicit Projection(Scoring scoring = Scoring::Stored, std::optional<Json> overrides = {})
      : scoring_(scoring), overrides_(std::move(overrides)) {}

  void apply(const LedgerEntry& entry);

  const std::map<std::string, Juror>& jurors() const { return jurors_; }
  const std::map<std::string, VoterPrompt>& prompts() const { return prompts_; }
  const std::map<std::string, InferenceRecord>& inferences() const { return inferences_; }
  const std::map<std::string, CollectionManifest>& collections() const { return collections_; }
  const std::map<std::string, ScoreState>& states() const { return states_; }
  const std::map<std::uint64_t, VoteRecord>& votes() const { return votes_; }
  const std::map<std::uint64_t, std::int64_t>& committed() const { return committed_; }
  const std::map<std::string, std::vector<std::uint64_t>>& votes_by_inference() const {
    return votes_by_inference_;
  }
  const std::map<std::string, std::vector<BatchCommit>>& commits() const { return commits_; }
  const std::map<std::string, std::vector<std::uint64_t>>& submissions() const {
    return submissions_;
  }
  const DecayConfig& config() const { return config_; }

  // Builds the commit that `vote_seqs` would produce. Throws on invalid input.
  BatchCommit plan_commit(const std::string& inference_id, std::span<const std::uint64_t> vote_seqs,
                          const DecayConfig& config, std::optional<Timestamp> batch_time) const;

  // Throws UnknownReference when any record points at an unregistered id.
  void check_references(std::span<const VoteRecord> records) const;

 private:
  Scoring scoring_;
  std::optional<Json> overrides_;
  std::map<std::string, Juror> jurors_;
  std::map<std::string, VoterPrompt> prompts_;
  std::map<std::string, InferenceRecord> inferences_;
  std::map<std::string, CollectionManifest> collections_;
  std::map<std::string, ScoreState> states_;
  std::map<std::uint64_t, VoteRecord> votes_;
  std::map<std::uint64_t, std::int64_t> committed_;  // vote seq -> batch_seq
  std::map<std::string, std::vector<std::uint64_t>> votes_by_inference_;
  std::map<std::string, std::vector<BatchCommit>> commits_;
  std::map<std::string, std::vector<std::uint64_t>> submissions_;  // idempotency key -> seqs
  DecayConfig config_;
};

enum class OpenMode {
  Strict,           // any malformed byte is CorruptLedger
  RecoverTornTail,  // a final line without its newline is treated as an interrupted write and dropped
};

// Parses and verifies ledger bytes: canonical form, contiguous seqs from 0,
// and the checksum chain. Throws CorruptLedger naming the first bad line.
std::vector<LedgerEntry> parse_ledger(std::string_view bytes, OpenMode mode = OpenMode::Strict,
                                      std::size_t* consumed = nullptr);

std::vector<LedgerEntry> read_ledger_file(const std::filesystem::path& path,
                                          OpenMode mode = OpenMode::Strict);

// Recomputes every ScoreState from scratch in seq order. `overrides` is a
// partial DecayConfig applied on top of each commit's config snapshot.
std::map<std::string, ScoreState> replay(std::span<const LedgerEntry> entries,
                                         const std::optional<Json>& overrides = {});

// Test hook: invoked with the size of each pending write and returns how many
// bytes may reach the file before a simulated crash. Returning the full size
// lets the write complete.
using FaultInjector = std::function<std::size_t(std::size_t pending_bytes)>;

struct SimulatedCrash : std::runtime_error {
  SimulatedCrash() : std::runtime_error("simulated crash during ledger write") {}
};

struct LedgerOptions {
  OpenMode mode = OpenMode::Strict;
  std::function<Timestamp()> clock = Timestamp::now;
  FaultInjector fault_injector;
};

// Single-writer ledger. Mutations are serialized; readers see a consistent
// prefix. An empty path keeps the ledger in memory only.
class Ledger {
 public:
  static std::unique_ptr<Ledger> open(const std::filesystem::path& path, LedgerOptions options = {});
  static std::unique_ptr<Ledger> in_memory(LedgerOptions options = {});

  std::uint64_t register_juror(const Juror& juror);
  std::uint64_t register_prompt(const VoterPrompt& prompt);
  std::uint64_t set_config(const DecayConfig& config);
  // Appends the inference records and then the manifest in one write.
  std::uint64_t add_collection(const CollectionManifest& manifest,
                               std::span<const InferenceRecord> records);

  // All-or-nothing. With an idempotency key already seen, returns the seqs
  // of the original submission and appends nothing.
  std::vector<std::uint64_t> append_votes(std::span<const VoteRecord> records,
                                          const std::optional<std::string>& idempotency_key = {});

  // batch_time defaults to the latest vote_time among the batch's votes.
  BatchCommit commit_batch(const std::string& inference_id, std::span<const std::uint64_t> vote_seqs,
                           const DecayConfig& config, std::optional<Timestamp> batch_time = {});

  std::vector<AuditItem> audit_trail(const std::string& inference_id) const;

  // Copy of the current projection; consistent as of the returned watermark.
  Projection snapshot(std::uint64_t* watermark = nullptr) const;
  std::optional<ScoreState> score_state(const std::string& inference_id) const;
  std::vector<VoteRecord> votes(const std::optional<std::string>& inference_id = {}) const;
  std::vector<LedgerEntry> entries() const;
  DecayConfig config() const;
  std::string head_checksum() const;
  std::uint64_t size() const;

  // Writes {seq, checksum, states} for the current head.
  void write_snapshot(const std::filesystem::path& path) const;

 private:
  Ledger(std::filesystem::path path, LedgerOptions options);
  void append(std::vector<std::pair<EntryKind, Json>> items);
  void persist(const std::string& bytes);

  std::filesystem::path path_;
  LedgerOptions options_;
  mutable std::shared_mutex mutex_;
  std::vector<LedgerEntry> entries_;
  Projection projection_;
  bool poisoned_ = false;
};

// Checks a snapshot file against the ledger: the head checksum must match the
// entry at the snapshot's seq and its states must equal a replay of that prefix.
// Throws CorruptLedger on mismatch.
void verify_snapshot(const std::filesystem::path& snapshot_path,
                     std::span<const LedgerEntry> entries);

}  // namespace grandjury::ledger
