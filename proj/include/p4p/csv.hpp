#pragma once

// RFC-4180 CSV: quoted fields, escaped quotes, embedded separators/newlines.
// Missing numeric cells are the empty string; sentinel numbers are rejected
// at the schema layer.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace p4p::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const; // throws SchemaError if absent
    bool has_col(const std::string& name) const;
    std::size_t nrow() const { return rows.size(); }
};

Table parse(const std::string& text);
Table read_file(const std::string& path);

std::string format_field(const std::string& raw);
std::string to_text(const Table& t);
void write_file(const std::string& path, const Table& t);

// shortest round-trip decimal representation
std::string fmt_double(double x);
std::string fmt_int(std::int64_t x);

// empty cell -> nullopt; anything non-numeric throws SchemaError
std::optional<double> parse_double(const std::string& cell, const std::string& context);
std::optional<std::int64_t> parse_int(const std::string& cell, const std::string& context);

} // namespace p4p::csv
