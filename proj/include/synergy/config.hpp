#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synergy/evaluation.hpp"
#include "synergy/experiment.hpp"
#include "synergy/synth.hpp"
#include "synergy/training.hpp"

namespace synergy {

/**
 * Sectioned key=value document.
 *
 *     # comment
 *     [world]
 *     seed = 7
 *
 * Duplicate keys and text outside a section are rejected.
 */
class ConfigDocument {
public:
    static ConfigDocument parse(const std::string& text, const std::string& origin = "<config>");
    static ConfigDocument load(const std::filesystem::path& path);

    /// Raw value with its source line, if present.
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    bool has(const std::string& section, const std::string& key) const { return get(section, key).has_value(); }
    void set(const std::string& section, const std::string& key, std::string value);

    struct Entry {
        std::string value;
        std::size_t line = 0;
    };
    const std::map<std::string, std::map<std::string, Entry>>& sections() const { return sections_; }
    const std::string& origin() const { return origin_; }

private:
    std::string origin_;
    std::map<std::string, std::map<std::string, Entry>> sections_;
};

struct EvalConfig {
    std::vector<Metric> metrics{Metric::Rmse, Metric::Corr, Metric::Nse};
};

struct IoConfig {
    int workers = 1;
};

/// Typed view of every section. Seeds stay unset unless written explicitly.
struct AppConfig {
    WorldConfig world;
    bool world_seed_set = false;
    TrainConfig train;
    bool train_seed_set = false;
    ExperimentConfig experiment;
    EvalConfig eval;
    IoConfig io;

    /// Throws ConfigError on unknown sections/keys or malformed values.
    static AppConfig from_document(const ConfigDocument& doc);
    static AppConfig load(const std::filesystem::path& path);

    /// Replace every seed (world, train, experiment sampling).
    void override_seeds(std::uint64_t seed);
    void require_world_seed() const;
    void require_train_seed() const;
};

}  // namespace synergy
