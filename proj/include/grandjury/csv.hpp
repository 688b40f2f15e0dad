#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace grandjury::csv {

// RFC 4180 dialect: comma separator, double-quote quoting with "" escapes,
// LF or CRLF record terminators. Throws Error(SchemaError) on an unterminated
// quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

std::string escape_field(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

}  // namespace grandjury::csv
