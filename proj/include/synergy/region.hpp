#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synergy {

/**
 * Hierarchical region identifier with up to three levels.
 *
 * Each level stores the full dotted prefix, so "8.3.5" holds
 * level1 = "8", level2 = "8.3", level3 = "8.3.5". Tokens are opaque strings;
 * synthetic worlds use codes such as "S1.2.3".
 */
struct RegionCode {
    std::string level1;
    std::optional<std::string> level2;
    std::optional<std::string> level3;

    int depth() const { return level3 ? 3 : level2 ? 2 : level1.empty() ? 0 : 1; }
    bool is_level3() const { return level3.has_value(); }

    /// Longest populated prefix, i.e. the canonical text form.
    const std::string& str() const;

    auto operator<=>(const RegionCode&) const = default;
};

/// Parse dotted text into a RegionCode. Throws ParseError naming the bad token.
RegionCode parse_region_code(std::string_view text);

std::string render(const RegionCode& code);

enum class NeighborClass { Self, Close, Far, Dissimilar };

std::string_view to_string(NeighborClass c);

/// Similarity class of `other` relative to `roi`. Both must be level-III
/// codes, otherwise ContractError.
NeighborClass classify_neighbor(const RegionCode& roi, const RegionCode& other);

/// One experimental sub-region: an id (A-R for the EPA table) and the
/// level-I or level-II codes it absorbs.
struct SubRegion {
    std::string letter;
    std::vector<std::string> member_codes;
};

/**
 * Mapping from region codes to experimental sub-regions.
 *
 * Lookup uses the longest matching prefix of a code, so a level-III code is
 * resolved through its level-II entry when present, else its level-I entry.
 */
class SubRegionTable {
public:
    SubRegionTable() = default;
    /// Throws ConfigError if any code is claimed by two letters.
    explicit SubRegionTable(std::vector<SubRegion> groups);

    /// The built-in EPA ecoregion table (18 letters, A-R).
    static const SubRegionTable& epa();

    /// Load `letter,codes` CSV where codes is a ';'-separated list.
    static SubRegionTable load_csv(const std::filesystem::path& path);
    void save_csv(const std::filesystem::path& path) const;

    /// Letter whose member set contains the longest prefix of `code`.
    /// Throws UnmappedRegionError outside the table's domain.
    const std::string& subregion_of(const RegionCode& code) const;
    std::optional<std::string> try_subregion_of(const RegionCode& code) const;

    const std::vector<SubRegion>& groups() const { return groups_; }
    const SubRegion& group(std::string_view letter) const;

private:
    std::vector<SubRegion> groups_;
    std::map<std::string, std::string, std::less<>> code_to_letter_;
};

}  // namespace synergy
