#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace uagc {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

double parse_double(std::string_view text);  // throws InputError
std::int64_t parse_int(std::string_view text);  // throws InputError
std::uint64_t parse_u64(std::string_view text);  // throws InputError

std::string_view trim(std::string_view text);

// Splits on a single-character delimiter. No quoting: none of the interchange
// formats in this project put delimiters inside fields.
std::vector<std::string_view> split(std::string_view line, char delim);

std::vector<double> parse_double_list(std::string_view text, char delim = ',');

}  // namespace uagc
