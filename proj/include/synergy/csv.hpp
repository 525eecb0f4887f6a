#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synergy {

/// Unquoted comma-separated reader that tracks line numbers for diagnostics.
class CsvReader {
public:
    explicit CsvReader(const std::filesystem::path& path);

    /// Read the header row and check it begins with `prefix`. Returns all columns.
    std::vector<std::string> expect_header(std::initializer_list<std::string_view> prefix);

    /// Next non-empty row, or nullopt at end of file.
    std::optional<std::vector<std::string>> next();

    std::size_t line() const { return line_; }
    const std::filesystem::path& path() const { return path_; }

    /// Throw DataError tagged with file and current line.
    [[noreturn]] void fail(const std::string& message) const;

    double parse_double(const std::string& cell, std::string_view column) const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_ = 0;
};

std::vector<std::string> split_csv_line(std::string_view line);

/// Shortest text that round-trips to the same double.
std::string format_double(double v);

/// Parse a full-string double; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace synergy
