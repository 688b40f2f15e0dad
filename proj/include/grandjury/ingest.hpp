#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grandjury/ledger.hpp"
#include "grandjury/model.hpp"

namespace grandjury::ingest {

enum class FileFormat { Csv, Jsonl };

FileFormat parse_format(std::string_view text);
// Guesses from the extension (.csv, .jsonl, .ndjson). Throws BadRequest.
FileFormat format_from_path(const std::filesystem::path& path);

// Stable id for records that arrive without one: "inf-" followed by the first
// 16 hex digits of sha256(platform, model, canonical timestamp, output).
std::string derive_inference_id(const std::string& platform, const std::string& model,
                                Timestamp timestamp, const std::string& output);

// Parses an inference table. Required columns: platform, model, timestamp,
// input, output. inference_id is optional; any other column lands in params.
// Throws SchemaError (missing column) or RowError (first bad row).
std::vector<InferenceRecord> parse_inferences(std::string_view text, FileFormat format);

// Parses a vote table with the five vote fields. Extra columns are ignored.
std::vector<VoteRecord> parse_votes(std::string_view text, FileFormat format);
std::vector<VoteRecord> parse_vote_file(const std::filesystem::path& path, FileFormat format);

struct IngestOptions {
  std::optional<std::string> collection_id;  // default: "col-" + content hash of the file bytes
  std::string source_uri;
  std::string license;
};

// All-or-nothing: either every row lands in the ledger with its manifest, or nothing does.
CollectionManifest ingest_inference_collection(ledger::Ledger& ledger, std::string_view text,
                                               FileFormat format, IngestOptions options = {});
CollectionManifest ingest_inference_file(ledger::Ledger& ledger, const std::filesystem::path& path,
                                         FileFormat format, IngestOptions options = {});

// Writes a collection back out. CSV columns: inference_id, platform, model,
// timestamp, input, output, then the sorted union of param keys.
std::string export_collection(const ledger::Projection& view, const std::string& collection_id,
                              FileFormat format);

std::string read_file(const std::filesystem::path& path);

}  // namespace grandjury::ingest
