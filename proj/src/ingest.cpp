#include "grandjury/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "grandjury/csv.hpp"
#include "grandjury/sha256.hpp"

namespace grandjury::ingest {
namespace {

const std::vector<std::string> kInferenceColumns = {"platform", "model", "timestamp", "input",
                                                    "output"};
const std::vector<std::string> kVoteColumns = {"inference_id", "vote", "voter_id", "vote_time",
                                               "voter_prompt_id"};

struct Row {
  std::size_t number = 0;  // 1-based data row (CSV) or line (JSONL)
  Json fields;
};

Error row_error(std::size_t row, const std::string& what) {
  return Error(ErrorCode::RowError, "row " + std::to_string(row) + ": " + what,
               "row " + std::to_string(row));
}

void require_columns(const std::set<std::string>& present, const std::vector<std::string>& required,
                     const std::string& where) {
  std::string missing;
  for (const auto& c : required) {
    if (!present.count(c)) missing += (missing.empty() ? "" : ", ") + c;
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::SchemaError, "missing required column(s): " + missing + where, missing);
  }
}

std::vector<Row> read_rows(std::string_view text, FileFormat format,
                           const std::vector<std::string>& required) {
  std::vector<Row> rows;
  if (format == FileFormat::Csv) {
    auto table = csv::parse(text);
    if (table.empty()) throw Error(ErrorCode::SchemaError, "CSV file has no header row");
    const auto& header = table.front();
    std::set<std::string> names;
    for (const auto& h : header) {
      if (!names.insert(h).second) throw Error(ErrorCode::SchemaError, "duplicate column " + h, h);
    }
    require_columns(names, required, "");
    for (std::size_t i = 1; i < table.size(); ++i) {
      const auto& cells = table[i];
      if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
      if (cells.size() != header.size()) {
        throw row_error(i, "expected " + std::to_string(header.size()) + " fields, found " +
                               std::to_string(cells.size()));
      }
      Row r{i, Json::object()};
      for (std::size_t c = 0; c < header.size(); ++c) r.fields[header[c]] = cells[c];
      rows.push_back(std::move(r));
    }
    return rows;
  }

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception&) {
      throw row_error(number, "line is not valid JSON");
    }
    if (!j.is_object()) throw row_error(number, "line is not a JSON object");
    std::set<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.insert(k);
    require_columns(keys, required, " (line " + std::to_string(number) + ")");
    rows.push_back(Row{number, std::move(j)});
  }
  return rows;
}

std::string cell(const Json& fields, const std::string& key) {
  auto it = fields.find(key);
  if (it == fields.end() || it->is_null()) return {};
  return it->is_string() ? it->get<std::string>() : it->dump();
}

void check_utf8(std::size_t row, const std::string& value) {
  try {
    (void)Json(value).dump();
  } catch (const nlohmann::json::exception&) {
    throw row_error(row, "field is not valid UTF-8");
  }
}

InferenceRecord inference_from_row(const Row& row) {
  const auto& f = row.fields;
  InferenceRecord r;
  r.platform = cell(f, "platform");
  r.model = cell(f, "model");
  r.input = cell(f, "input");
  r.output = cell(f, "output");
  for (const auto* name : {"platform", "model", "output"}) {
    if (cell(f, name).empty()) throw row_error(row.number, std::string("empty ") + name);
  }
  auto ts = parse_iso8601(cell(f, "timestamp"), TimestampPolicy::AssumeUtc);
  if (!ts) throw row_error(row.number, "bad timestamp '" + cell(f, "timestamp") + "'");
  r.timestamp = *ts;

  for (const auto& [key, value] : f.items()) {
    if (key == "inference_id" ||
        std::find(kInferenceColumns.begin(), kInferenceColumns.end(), key) != kInferenceColumns.end()) {
      continue;
    }
    if (key == "params" && value.is_object()) {
      for (const auto& [pk, pv] : value.items()) {
        r.params[pk] = pv.is_string() ? pv.get<std::string>() : pv.dump();
      }
      continue;
    }
    auto text = value.is_string() ? value.get<std::string>() : value.dump();
    if (!value.is_null() && !text.empty()) r.params[key] = text;
  }

  r.inference_id = cell(f, "inference_id");
  if (r.inference_id.empty()) {
    r.inference_id = derive_inference_id(r.platform, r.model, r.timestamp, r.output);
  }
  for (const auto& s : {r.inference_id, r.platform, r.model, r.input, r.output}) check_utf8(row.number, s);
  for (const auto& [k, v] : r.params) {
    check_utf8(row.number, k);
    check_utf8(row.number, v);
  }
  return r;
}

}  // namespace

FileFormat parse_format(std::string_view text) {
  if (text == "csv") return FileFormat::Csv;
  if (text == "jsonl" || text == "ndjson") return FileFormat::Jsonl;
  throw Error(ErrorCode::BadRequest, "format must be csv or jsonl", std::string(text));
}

FileFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return FileFormat::Csv;
  if (ext == ".jsonl" || ext == ".ndjson") return FileFormat::Jsonl;
  throw Error(ErrorCode::BadRequest, "cannot infer file format from extension", path.string());
}

std::string derive_inference_id(const std::string& platform, const std::string& model,
                                Timestamp timestamp, const std::string& output) {
  std::string material = platform;
  material += '\x1f';
  material += model;
  material += '\x1f';
  material += timestamp.to_iso8601();
  material += '\x1f';
  material += output;
  return "inf-" + sha256_hex(material).substr(0, 16);
}

std::vector<InferenceRecord> parse_inferences(std::string_view text, FileFormat format) {
  auto rows = read_rows(text, format, kInferenceColumns);
  std::vector<InferenceRecord> out;
  std::set<std::string> ids;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    auto rec = inference_from_row(row);
    if (!ids.insert(rec.inference_id).second) {
      throw row_error(row.number, "duplicate inference_id " + rec.inference_id);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<VoteRecord> parse_votes(std::string_view text, FileFormat format) {
  auto rows = read_rows(text, format, kVoteColumns);
  std::vector<VoteRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    auto result = try_validate_vote_record(row.fields);
    if (auto* err = std::get_if<Error>(&result)) {
      throw row_error(row.number, std::string(to_string(err->code())) + ": " + err->what());
    }
    out.push_back(std::get<VoteRecord>(std::move(result)));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<VoteRecord> parse_vote_file(const std::filesystem::path& path, FileFormat format) {
  return parse_votes(read_file(path), format);
}

CollectionManifest ingest_inference_collection(ledger::Ledger& ledger, std::string_view text,
                                               FileFormat format, IngestOptions options) {
  auto records = parse_inferences(text, format);
  CollectionManifest m;
  m.collection_id = options.collection_id.value_or("col-" + sha256_hex(text).substr(0, 16));
  if (m.collection_id.empty()) throw Error(ErrorCode::BadRequest, "collection_id is empty");
  m.source_uri = options.source_uri;
  m.license = options.license;
  m.record_count = static_cast<std::int64_t>(records.size());
  m.ingested_at = Timestamp::now();
  for (const auto& r : records) m.inference_ids.push_back(r.inference_id);
  auto seq = ledger.add_collection(m, records);
  // The ledger stamps its own recorded_at; report that as the ingest time.
  for (const auto& e : ledger.entries()) {
    if (e.seq == seq) m.ingested_at = e.recorded_at;
  }
  return m;
}

CollectionManifest ingest_inference_file(ledger::Ledger& ledger, const std::filesystem::path& path,
                                         FileFormat format, IngestOptions options) {
  if (options.source_uri.empty()) options.source_uri = path.string();
  return ingest_inference_collection(ledger, read_file(path), format, std::move(options));
}

std::string export_collection(const ledger::Projection& view, const std::string& collection_id,
                              FileFormat format) {
  auto it = view.collections().find(collection_id);
  if (it == view.collections().end()) {
    throw Error(ErrorCode::UnknownCollection, "unknown collection", collection_id);
  }
  std::vector<const InferenceRecord*> records;
  for (const auto& id : it->second.inference_ids) records.push_back(&view.inferences().at(id));

  std::string out;
  if (format == FileFormat::Jsonl) {
    for (const auto* r : records) out += to_json(*r).dump() + "\n";
    return out;
  }
  std::set<std::string> param_keys;
  for (const auto* r : records) {
    for (const auto& [k, v] : r->params) param_keys.insert(k);
  }
  std::vector<std::string> header = {"inference_id", "platform", "model", "timestamp", "input", "output"};
  header.insert(header.end(), param_keys.begin(), param_keys.end());
  out += csv::format_row(header);
  for (const auto* r : records) {
    std::vector<std::string> row = {r->inference_id, r->platform, r->model,
                                    r->timestamp.to_iso8601(), r->input, r->output};
    for (const auto& k : param_keys) {
      auto p = r->params.find(k);
      row.push_back(p == r->params.end() ? std::string() : p->second);
    }
    out += csv::format_row(row);
  }
  return out;
}

}  // namespace grandjury::ingest
