#include <gtest/gtest.h>

#include <set>

#include "grandjury/csv.hpp"
#include "grandjury/ingest.hpp"
#include "test_support.hpp"

namespace grandjury::ingest {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::NotFound;
}

const char* kHeader = "platform,model,timestamp,input,output,temperature\n";

TEST(Csv, QuotingRoundTrip) {
  std::vector<std::string> row = {"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  auto line = csv::format_row(row);
  line.insert(line.size() - 1, "\r");
  auto parsed = csv::parse(line);
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0], row);
  EXPECT_EQ(code_of([] { csv::parse("a,\"open\n"); }), ErrorCode::SchemaError);
  EXPECT_EQ(csv::parse("\xEF\xBB\xBFx,y\n")[0][0], "x");
}

TEST(IngestCollection, SevenRowSampleHasSevenPlatforms) {
  auto l = ledger::Ledger::in_memory();
  auto m = ingest_inference_file(*l, testing::fixture("table1_sample.csv"), FileFormat::Csv,
                                 IngestOptions{"table1", "table1_sample.csv", "CC-BY-4.0"});
  EXPECT_EQ(m.record_count, 7);
  EXPECT_EQ(m.collection_id, "table1");
  auto view = l->snapshot();
  std::set<std::string> platforms;
  for (const auto& id : m.inference_ids) platforms.insert(view.inferences().at(id).platform);
  EXPECT_EQ(platforms.size(), 7u);
  const auto& first = view.inferences().at(m.inference_ids[0]);
  EXPECT_EQ(first.platform, "Azure AI");
  EXPECT_EQ(first.timestamp.to_iso8601(), "2025-08-01T22:57:27Z");
  EXPECT_EQ(first.params.at("temperature"), "1.0");
}

TEST(IngestCollection, HeaderOnlyIsEmptyCollection) {
  auto l = ledger::Ledger::in_memory();
  auto m = ingest_inference_collection(*l, kHeader, FileFormat::Csv, IngestOptions{"empty", "", ""});
  EXPECT_EQ(m.record_count, 0);
  EXPECT_TRUE(l->snapshot().collections().count("empty"));
}

TEST(IngestCollection, BadRowIngestsNothing) {
  auto l = ledger::Ledger::in_memory();
  std::string text = std::string(kHeader) +
                     "Azure AI,gpt-4.1,2025-08-01 22:57:27,tell me a joke,ok,1.0\n"
                     "Bedrock,nova,2025-08-01 22:57:27,tell me a joke,,1.0\n";
  try {
    ingest_inference_collection(*l, text, FileFormat::Csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RowError);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(l->size(), 0u);

  std::string badtime = std::string(kHeader) + "A,b,not a time,x,y,1\n";
  EXPECT_EQ(code_of([&] { ingest_inference_collection(*l, badtime, FileFormat::Csv); }), ErrorCode::RowError);
  EXPECT_EQ(l->size(), 0u);
}

TEST(IngestCollection, MissingColumnIsSchemaError) {
  auto l = ledger::Ledger::in_memory();
  EXPECT_EQ(code_of([&] {
              ingest_inference_collection(*l, "platform,model,timestamp,input\nA,b,2025-08-01T00:00:00Z,x\n",
                                          FileFormat::Csv);
            }),
            ErrorCode::SchemaError);
}

TEST(IngestCollection, DuplicateCollectionRefused) {
  auto l = ledger::Ledger::in_memory();
  auto path = testing::fixture("table1_sample.csv");
  auto m = ingest_inference_file(*l, path, FileFormat::Csv);
  EXPECT_EQ(m.collection_id.rfind("col-", 0), 0u);
  auto size = l->size();
  EXPECT_EQ(code_of([&] { ingest_inference_file(*l, path, FileFormat::Csv); }), ErrorCode::DuplicateCollection);
  // Same rows under a new collection id collide on inference ids.
  EXPECT_EQ(code_of([&] { ingest_inference_file(*l, path, FileFormat::Csv, IngestOptions{"again", "", ""}); }),
            ErrorCode::DuplicateId);
  EXPECT_EQ(l->size(), size);
}

TEST(DeriveInferenceId, StableAndSensitive) {
  auto ts = *parse_iso8601("2025-08-01T22:57:27Z");
  auto a = derive_inference_id("Azure AI", "gpt-4.1", ts, "out");
  EXPECT_EQ(a, derive_inference_id("Azure AI", "gpt-4.1", ts, "out"));
  EXPECT_EQ(a.size(), 20u);
  EXPECT_NE(a, derive_inference_id("Azure AI", "gpt-4.1", ts, "out2"));
  EXPECT_NE(a, derive_inference_id("Azure AIgpt-4.1", "", ts, "out"));
}

TEST(ExportCollection, CsvAndJsonlRoundTrip) {
  auto l = ledger::Ledger::in_memory();
  auto m = ingest_inference_file(*l, testing::fixture("table1_sample.csv"), FileFormat::Csv,
                                 IngestOptions{"table1", "", ""});
  auto view = l->snapshot();
  for (auto fmt : {FileFormat::Csv, FileFormat::Jsonl}) {
    auto text = export_collection(view, "table1", fmt);
    auto back = parse_inferences(text, fmt);
    ASSERT_EQ(back.size(), 7u);
    for (std::size_t i = 0; i < back.size(); ++i) {
      EXPECT_EQ(back[i], view.inferences().at(m.inference_ids[i]));
    }
    auto l2 = ledger::Ledger::in_memory();
    ingest_inference_collection(*l2, text, fmt, IngestOptions{"table1", "", ""});
    EXPECT_EQ(export_collection(l2->snapshot(), "table1", fmt), text);
  }
  EXPECT_EQ(code_of([&] { export_collection(view, "nope", FileFormat::Csv); }), ErrorCode::UnknownCollection);
}

TEST(ParseInferences, JsonlParamsAndIds) {
  std::string text =
      R"({"inference_id":"x1","platform":"P","model":"m","timestamp":"2025-08-01T00:00:00Z","input":"i","output":"o","params":{"top_p":"0.9"}})"
      "\n\n"
      R"({"platform":"P","model":"m","timestamp":"2025-08-01T00:00:00+01:00","input":"i","output":"o2"})"
      "\n";
  auto recs = parse_inferences(text, FileFormat::Jsonl);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].inference_id, "x1");
  EXPECT_EQ(recs[0].params.at("top_p"), "0.9");
  EXPECT_EQ(recs[1].inference_id.rfind("inf-", 0), 0u);
  EXPECT_EQ(recs[1].timestamp.to_iso8601(), "2025-07-31T23:00:00Z");
  EXPECT_EQ(code_of([] { parse_inferences("{not json}\n", FileFormat::Jsonl); }), ErrorCode::RowError);
}

TEST(ParseVotes, CoercionAndRange) {
  auto votes = parse_vote_file(testing::fixture("worked_votes.csv"), FileFormat::Csv);
  ASSERT_EQ(votes.size(), 3u);
  EXPECT_DOUBLE_EQ(votes[0].vote, 0.9);
  EXPECT_EQ(votes[2].voter_id, "j3");

  std::string header = "inference_id,vote,voter_id,vote_time,voter_prompt_id\n";
  auto one = parse_votes(header + "i1,\"0.9\",j1,2025-08-01T22:57:27Z,p1\n", FileFormat::Csv);
  EXPECT_DOUBLE_EQ(one[0].vote, 0.9);
  try {
    parse_votes(header + "i1,-0.1,j1,2025-08-01T22:57:27Z,p1\n", FileFormat::Csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RowError);
    EXPECT_NE(std::string(e.what()).find("VoteOutOfRange"), std::string::npos) << e.what();
  }
  EXPECT_EQ(code_of([&] { parse_votes("inference_id,vote\ni1,0.5\n", FileFormat::Csv); }), ErrorCode::SchemaError);
  auto jl = parse_votes(
      R"({"inference_id":"i1","vote":1,"voter_id":"j1","vote_time":"2025-08-01T22:57:27Z","voter_prompt_id":"p1"})",
      FileFormat::Jsonl);
  EXPECT_EQ(jl[0].vote, 1.0);
}

TEST(Formats, FromPath) {
  EXPECT_EQ(format_from_path("a.csv"), FileFormat::Csv);
  EXPECT_EQ(format_from_path("a.ndjson"), FileFormat::Jsonl);
  EXPECT_EQ(format_from_path("a.jsonl"), FileFormat::Jsonl);
  EXPECT_EQ(code_of([] { format_from_path("a.xlsx"); }), ErrorCode::BadRequest);
}

}  // namespace
}  // namespace grandjury::ingest
