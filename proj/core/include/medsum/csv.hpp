#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace medsum::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
    // 1-based physical line on which each row starts (quoted fields may span lines).
    std::vector<std::size_t> row_lines;
};

// RFC 4180 style: fields may be quoted with '"', embedded quotes doubled,
// quoted fields may contain the delimiter and newlines. CRLF is accepted.
// A UTF-8 byte order mark at the start of the text is skipped.
Table parse(std::string_view text, char delimiter = ',');

std::string quote_field(std::string_view field, char delimiter = ',');

std::string render(const Row& header, const std::vector<Row>& rows, char delimiter = ',');

}  // namespace medsum::csv
