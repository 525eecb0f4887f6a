#include "synergy/region.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy {

const std::string& RegionCode::str() const {
    if (level3) return *level3;
    if (level2) return *level2;
    return level1;
}

RegionCode parse_region_code(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (true) {
        auto dot = text.find('.', start);
        auto tok = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        tokens.emplace_back(tok);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& tok = tokens[i];
        if (tok.empty())
            throw ParseError("region code '" + std::string(text) + "': empty token at level " +
                             std::to_string(i + 1));
        for (unsigned char c : tok) {
            if (std::isspace(c) || c == ',' || c == ';')
                throw ParseError("region code '" + std::string(text) + "': invalid character in token '" +
                                 tok + "'");
        }
    }
    if (tokens.size() > 3)
        throw ParseError("region code '" + std::string(text) + "': too many levels, unexpected token '" +
                         tokens[3] + "'");

    RegionCode code;
    code.level1 = tokens[0];
    if (tokens.size() >= 2) code.level2 = code.level1 + "." + tokens[1];
    if (tokens.size() >= 3) code.level3 = *code.level2 + "." + tokens[2];
    return code;
}

std::string render(const RegionCode& code) { return code.str(); }

std::string_view to_string(NeighborClass c) {
    switch (c) {
        case NeighborClass::Self: return "self";
        case NeighborClass::Close: return "close";
        case NeighborClass::Far: return "far";
        case NeighborClass::Dissimilar: return "dissimilar";
    }
    return "?";
}

NeighborClass classify_neighbor(const RegionCode& roi, const RegionCode& other) {
    if (!roi.is_level3() || !other.is_level3())
        throw ContractError("classify_neighbor requires level-III codes, got '" + roi.str() + "' and '" +
                            other.str() + "'");
    if (*roi.level3 == *other.level3) return NeighborClass::Self;
    if (*roi.level2 == *other.level2) return NeighborClass::Close;
    if (roi.level1 == other.level1) return NeighborClass::Far;
    return NeighborClass::Dissimilar;
}

SubRegionTable::SubRegionTable(std::vector<SubRegion> groups) : groups_(std::move(groups)) {
    for (const auto& g : groups_) {
        if (g.letter.empty()) throw ConfigError("sub-region with empty id");
        for (const auto& c : g.member_codes) {
            auto parsed = parse_region_code(c);
            if (parsed.depth() > 2)
                throw ConfigError("sub-region " + g.letter + ": member '" + c + "' must be a level-I or level-II code");
            auto [it, inserted] = code_to_letter_.emplace(parsed.str(), g.letter);
            if (!inserted)
                throw ConfigError("region code '" + c + "' assigned to both " + it->second + " and " + g.letter);
        }
    }
    for (std::size_t i = 0; i < groups_.size(); ++i)
        for (std::size_t j = i + 1; j < groups_.size(); ++j)
            if (groups_[i].letter == groups_[j].letter)
                throw ConfigError("duplicate sub-region id " + groups_[i].letter);
}

const SubRegionTable& SubRegionTable::epa() {
    static const SubRegionTable table({
        {"A", {"5"}},    {"B", {"6"}},    {"C", {"7"}},           {"D", {"8.1"}},  {"E", {"8.2"}},
        {"F", {"8.3"}},  {"G", {"8.4"}},  {"H", {"8.5"}},         {"I", {"9.2"}},  {"J", {"9.3"}},
        {"K", {"9.4"}},  {"L", {"9.5", "9.6"}},                   {"M", {"10.1"}}, {"N", {"10.2"}},
        {"O", {"11.1"}}, {"P", {"12.1"}}, {"Q", {"13"}},          {"R", {"14", "15"}},
    });
    return table;
}

SubRegionTable SubRegionTable::load_csv(const std::filesystem::path& path) {
    CsvReader reader(path);
    reader.expect_header({"letter", "codes"});
    std::vector<SubRegion> groups;
    while (auto row = reader.next()) {
        if (row->size() != 2) reader.fail("expected 2 columns");
        SubRegion g;
        g.letter = (*row)[0];
        std::stringstream ss((*row)[1]);
        std::string code;
        while (std::getline(ss, code, ';'))
            if (!code.empty()) g.member_codes.push_back(code);
        if (g.member_codes.empty()) reader.fail("sub-region " + g.letter + " has no codes");
        groups.push_back(std::move(g));
    }
    try {
        return SubRegionTable(std::move(groups));
    } catch (const Error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void SubRegionTable::save_csv(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "letter,codes\n";
    for (const auto& g : groups_) {
        out << g.letter << ',';
        for (std::size_t i = 0; i < g.member_codes.size(); ++i) out << (i ? ";" : "") << g.member_codes[i];
        out << '\n';
    }
    write_text_file(path, out.str());
}

std::optional<std::string> SubRegionTable::try_subregion_of(const RegionCode& code) const {
    if (code.level2) {
        if (auto it = code_to_letter_.find(*code.level2); it != code_to_letter_.end()) return it->second;
    }
    if (auto it = code_to_letter_.find(code.level1); it != code_to_letter_.end()) return it->second;
    return std::nullopt;
}

const std::string& SubRegionTable::subregion_of(const RegionCode& code) const {
    if (code.level2) {
        if (auto it = code_to_letter_.find(*code.level2); it != code_to_letter_.end()) return it->second;
    }
    if (auto it = code_to_letter_.find(code.level1); it != code_to_letter_.end()) return it->second;
    throw UnmappedRegionError("region '" + code.str() + "' is not covered by the sub-region table");
}

const SubRegion& SubRegionTable::group(std::string_view letter) const {
    auto it = std::find_if(groups_.begin(), groups_.end(), [&](const auto& g) { return g.letter == letter; });
    if (it == groups_.end()) throw UnmappedRegionError("unknown sub-region '" + std::string(letter) + "'");
    return *it;
}

}  // namespace synergy
