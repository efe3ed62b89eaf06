#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace supplyshare::csv {

/// A parsed delimited-text table. Cells are kept as raw strings.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const;
};

/// RFC-4180 style parsing: quoted fields, doubled quotes, CRLF or LF endings.
/// A leading UTF-8 byte-order mark is skipped.
Table parse(std::string_view text);
Table read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);
/// Fixed-point text with `digits` decimals (used for figures and tables).
std::string format_fixed(double value, int digits);

std::optional<double> parse_double(std::string_view text);
std::string trim(std::string_view text);
std::string lower(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace supplyshare::csv
