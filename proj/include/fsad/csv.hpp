#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fsad::csv {

using Row = std::vector<std::string>;

// RFC 4180 style reader: quoted fields may contain the delimiter, doubled
// quotes and line breaks. CRLF and LF line endings are both accepted. A
// UTF-8 byte order mark on the first line is dropped.
std::vector<Row> parse(std::string_view content, char delimiter = ',');

std::vector<Row> read_file(const std::filesystem::path& path, char delimiter = ',');

// Quotes the field only when it needs quoting.
std::string escape(std::string_view field, char delimiter = ',');

std::string format_row(const Row& row, char delimiter = ',');

}  // namespace fsad::csv
