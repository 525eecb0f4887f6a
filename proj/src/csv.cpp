#include "synergy/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "synergy/error.hpp"

namespace synergy {

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError(path.string() + ": cannot open file");
}

std::vector<std::string> CsvReader::expect_header(std::initializer_list<std::string_view> prefix) {
    auto row = next();
    if (!row) fail("missing header");
    std::size_t i = 0;
    for (auto name : prefix) {
        if (i >= row->size() || (*row)[i] != name) fail("header column " + std::to_string(i + 1) + " must be '" + std::string(name) + "'");
        ++i;
    }
    return *row;
}

std::optional<std::vector<std::string>> CsvReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        return split_csv_line(line);
    }
    return std::nullopt;
}

void CsvReader::fail(const std::string& message) const {
    throw DataError(path_.string() + ":" + std::to_string(line_) + ": " + message);
}

double CsvReader::parse_double(const std::string& cell, std::string_view column) const {
    auto v = synergy::parse_double(cell);
    if (!v || !std::isfinite(*v)) fail("non-numeric value '" + cell + "' in column " + std::string(column));
    return *v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.emplace_back(line.substr(start));
            break;
        }
        cells.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace synergy
