#include "p4p/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "p4p/errors.hpp"

namespace p4p::csv {

std::size_t Table::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw SchemaError("missing column '" + name + "'");
}

bool Table::has_col(const std::string& name) const {
    for (const auto& h : header)
        if (h == name) return true;
    return false;
}

Table parse(const std::string& text) {
    if (text.empty()) throw EmptyFile("empty CSV input");
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };
    while (i < n) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            // swallow; newline handling below
        } else if (c == '\n') {
            end_record();
        } else {
            field.push_back(c);
        }
        ++i;
    }
    if (in_quotes) throw SchemaError("unterminated quoted field");
    if (!field.empty() || !record.empty()) end_record();
    if (records.empty()) throw EmptyFile("CSV has no header row");

    Table t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size()) {
            throw SchemaError("row " + std::to_string(r) + " has " +
                              std::to_string(records[r].size()) + " fields, header has " +
                              std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const Error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

std::string format_field(const std::string& raw) {
    bool needs_quote = raw.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quote) return raw;
    std::string out = "\"";
    for (char c : raw) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string to_text(const Table& t) {
    std::string out;
    auto emit_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            out += format_field(row[i]);
        }
        out.push_back('\n');
    };
    emit_row(t.header);
    for (const auto& row : t.rows) emit_row(row);
    return out;
}

void write_file(const std::string& path, const Table& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << to_text(t);
}

std::string fmt_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string fmt_int(std::int64_t x) { return std::to_string(x); }

std::optional<double> parse_double(const std::string& cell, const std::string& context) {
    if (cell.empty()) return std::nullopt;
    double v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw SchemaError(context + ": not a number: '" + cell + "'");
    return v;
}

std::optional<std::int64_t> parse_int(const std::string& cell, const std::string& context) {
    if (cell.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw SchemaError(context + ": not an integer: '" + cell + "'");
    return v;
}

} // namespace p4p::csv
