#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "grandjury/ledger.hpp"

namespace grandjury::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kIntegrityError = 3,
};

enum class ReportFormat { Text, Json, Csv };

struct ReportSpec {
  std::optional<std::string> collection_id;  // all inferences when absent
  std::optional<std::vector<std::string>> roster;
  ReportFormat format = ReportFormat::Text;
};

// Renders the per-inference report for a verified ledger. Throws
// UnknownCollection for an unknown collection_id.
std::string run_report(const std::vector<ledger::LedgerEntry>& entries, const ReportSpec& spec);

// Reads a roster file: one voter id per line; blank lines and '#' comments ignored.
std::vector<std::string> read_roster(const std::string& path);

// Full command-line entry point. Output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace grandjury::cli
