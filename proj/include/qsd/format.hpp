#pragma once

#include <string>
#include <string_view>

namespace qsd {

/// Shortest round-trip decimal form, '.' separator, locale independent.
std::string format_double(double v);

/// Strict full-string parse; throws Error(kParse) mentioning `where`.
double parse_double(std::string_view text, const std::string& where);
long long parse_int(std::string_view text, const std::string& where);

/// Writes via a temporary sibling file and rename.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace qsd
