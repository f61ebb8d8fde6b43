#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace apogee {

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double x);

/// Strict double parse of the whole token. Throws ParseError.
double parse_double(std::string_view s);

/// Strict integer parse. Throws ParseError.
long long parse_int(std::string_view s);

/// Splits one CSV line on commas. No quoting: none of our formats needs it.
std::vector<std::string> split_csv_line(const std::string& line);

/// Reads all non-empty lines. Throws ParseError if the file cannot be opened.
std::vector<std::string> read_lines(const std::string& path);

/// Writes text to path, throwing ParseError on I/O failure.
void write_file(const std::string& path, const std::string& text);

/// Whole file as a string. Throws ParseError if unreadable.
std::string read_file(const std::string& path);

} // namespace apogee
