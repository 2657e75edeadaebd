#pragma once

#include <string>
#include <vector>

namespace mval::csv {

// Minimal RFC 4180 reader/writer: quoted fields, embedded commas, quotes and
// newlines. Enough for survey exports; no type coercion here.
std::vector<std::vector<std::string>> parse(const std::string& text);
std::vector<std::vector<std::string>> read_file(const std::string& path);

std::string escape(const std::string& field);
void write_file(const std::string& path, const std::vector<std::vector<std::string>>& rows);

// Shortest decimal representation that round-trips the double.
std::string format_double(double v);

} // namespace mval::csv
