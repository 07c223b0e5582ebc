#include "medsum/csv.hpp"

#include "medsum/error.hpp"

namespace medsum::csv {

Table parse(std::string_view text, char delimiter) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::vector<Row> records;
    std::vector<std::size_t> starts;
    Row current;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t line = 1;
    std::size_t record_line = 1;
    bool record_open = false;

    auto end_field = [&] {
        current.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(current));
        starts.push_back(record_line);
        current.clear();
        record_open = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (!record_open) {
            record_line = line;
            record_open = true;
        }
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            if (!field.empty() || field_was_quoted) {
                throw Error(ErrorCode::MalformedFile,
                            "unexpected quote inside unquoted field at line " + std::to_string(line));
            }
            in_quotes = true;
            field_was_quoted = true;
        } else if (c == delimiter) {
            end_field();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            // CR of a CRLF pair; the LF ends the record.
        } else if (c == '\n') {
            end_record();
            ++line;
        } else {
            if (field_was_quoted) {
                throw Error(ErrorCode::MalformedFile,
                            "text after closing quote at line " + std::to_string(line));
            }
            field.push_back(c);
        }
    }
    if (in_quotes) throw Error(ErrorCode::MalformedFile, "unterminated quoted field");
    if (record_open) end_record();

    Table table;
    if (records.empty()) throw Error(ErrorCode::MalformedFile, "missing header row");
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        // Skip blank lines.
        if (records[r].size() == 1 && records[r][0].empty()) continue;
        if (records[r].size() != table.header.size()) {
            throw Error(ErrorCode::MalformedFile,
                        "row at line " + std::to_string(starts[r]) + " has " + std::to_string(records[r].size()) +
                            " fields, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(records[r]));
        table.row_lines.push_back(starts[r]);
    }
    return table;
}

std::string quote_field(std::string_view field, char delimiter) {
    const bool needs_quotes = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string render(const Row& header, const std::vector<Row>& rows, char delimiter) {
    std::string out;
    auto emit = [&](const Row& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(delimiter);
            out += quote_field(row[i], delimiter);
        }
        out.push_back('\n');
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    return out;
}

}  // namespace medsum::csv
