#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace iw::csv {

/// Reads one CSV record, honouring double-quoted fields (embedded commas,
/// doubled quotes, newlines) and CRLF line endings. Returns nullopt at EOF.
std::optional<std::vector<std::string>> read_record(std::istream& in);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(const std::string& field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal string that round-trips the double (up to 17 significant
/// digits). NaN/inf serialize as "nan"/"inf"/"-inf".
std::string format_double(double v);

double parse_double(const std::string& s); // throws on garbage

long parse_long(const std::string& s); // throws on garbage

} // namespace iw::csv
