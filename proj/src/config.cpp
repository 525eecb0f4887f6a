#include "synergy/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

/// Binds config keys of one section to typed fields.
class SectionReader {
public:
    SectionReader(const ConfigDocument& doc, std::string section) : doc_(doc), section_(std::move(section)) {}

    template <class T>
    void bind(const std::string& key, T& field) {
        known_.insert(key);
        auto v = doc_.get(section_, key);
        if (!v) return;
        try {
            field = convert<T>(*v);
        } catch (const ConfigError& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    void bind_custom(const std::string& key, const std::function<void(const std::string&)>& apply) {
        known_.insert(key);
        auto v = doc_.get(section_, key);
        if (!v) return;
        try {
            apply(*v);
        } catch (const Error& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    bool present(const std::string& key) const { return doc_.has(section_, key); }

    void reject_unknown() const {
        auto it = doc_.sections().find(section_);
        if (it == doc_.sections().end()) return;
        for (const auto& [key, entry] : it->second)
            if (!known_.count(key))
                throw ConfigError(doc_.origin() + ":" + std::to_string(entry.line) + ": unknown key " + section_ + "." + key);
    }

private:
    std::string where(const std::string& key) const {
        const auto& entry = doc_.sections().at(section_).at(key);
        return doc_.origin() + ":" + std::to_string(entry.line) + ": " + section_ + "." + key;
    }

    template <class T>
    static T convert(const std::string& v) {
        if constexpr (std::is_same_v<T, std::string>) {
            return v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw ConfigError("expected a boolean, got '" + v + "'");
        } else if constexpr (std::is_same_v<T, double>) {
            auto d = parse_double(v);
            if (!d) throw ConfigError("expected a number, got '" + v + "'");
            return *d;
        } else if constexpr (std::is_integral_v<T>) {
            T out{};
            auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
            return out;
        } else if constexpr (std::is_same_v<T, LevelSigmas>) {
            auto items = split_list(v);
            if (items.size() != 4) throw ConfigError("expected 4 comma-separated scales (level I, II, III, site)");
            LevelSigmas s{};
            for (std::size_t i = 0; i < 4; ++i) s[i] = convert<double>(items[i]);
            return s;
        } else {
            static_assert(sizeof(T) == 0, "unsupported config type");
        }
    }

    const ConfigDocument& doc_;
    std::string section_;
    std::set<std::string> known_;
};

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text, const std::string& origin) {
    ConfigDocument doc;
    doc.origin_ = origin;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto hash = raw.find('#');
        auto line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        auto fail = [&](const std::string& msg) { throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg); };
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) fail("empty section name");
            doc.sections_[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        if (section.empty()) fail("key outside of a section");
        auto key = trim(std::string_view(line).substr(0, eq));
        auto value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) fail("empty key");
        auto [it, inserted] = doc.sections_[section].emplace(key, Entry{value, line_no});
        if (!inserted) fail("duplicate key " + section + "." + key);
    }
    return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse(text, path.string());
}

std::optional<std::string> ConfigDocument::get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second.value;
}

void ConfigDocument::set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = Entry{std::move(value), 0};
}

AppConfig AppConfig::from_document(const ConfigDocument& doc) {
    static const std::set<std::string> known_sections{"world", "train", "experiment", "eval", "io"};
    for (const auto& [name, entries] : doc.sections())
        if (!known_sections.count(name)) throw ConfigError(doc.origin() + ": unknown section [" + name + "]");

    AppConfig cfg;
    cfg.io.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    SectionReader w(doc, "world");
    auto& wc = cfg.world;
    w.bind("seed", wc.seed);
    cfg.world_seed_set = w.present("seed");
    w.bind("n_level1", wc.n_level1);
    w.bind("n_level2", wc.n_level2);
    w.bind("n_level3", wc.n_level3);
    w.bind("sites_per_region", wc.sites_per_region);
    w.bind("days", wc.days);
    w.bind("start_date", wc.start_date);
    w.bind("mean_capacity", wc.mean.capacity);
    w.bind("mean_recession", wc.mean.recession);
    w.bind("mean_exponent", wc.mean.exponent);
    w.bind("mean_evap", wc.mean.evap_efficiency);
    w.bind("sigma_capacity", wc.sigma_capacity);
    w.bind("sigma_recession", wc.sigma_recession);
    w.bind("sigma_exponent", wc.sigma_exponent);
    w.bind("sigma_evap", wc.sigma_evap);
    w.bind("p_wet", wc.climate.p_wet);
    w.bind("p_wet_amplitude", wc.climate.p_wet_amplitude);
    w.bind("mean_depth", wc.climate.mean_depth);
    w.bind("depth_amplitude", wc.climate.depth_amplitude);
    w.bind("pet_mean", wc.climate.pet_mean);
    w.bind("pet_amplitude", wc.climate.pet_amplitude);
    w.bind("pet_noise", wc.climate.pet_noise);
    w.bind("temp_mean", wc.climate.temp_mean);
    w.bind("temp_amplitude", wc.climate.temp_amplitude);
    w.bind("temp_noise", wc.climate.temp_noise);
    w.bind("climate_sigma", wc.climate_sigma);
    w.bind("attr_noise", wc.attr_noise);
    w.bind("obs_noise", wc.obs_noise);
    w.bind("revisit_min", wc.revisit_min);
    w.bind("revisit_max", wc.revisit_max);
    w.bind_custom("target", [&](const std::string& v) {
        if (v == "soil_wetness") wc.target = TargetKind::SoilWetness;
        else if (v == "runoff") wc.target = TargetKind::Runoff;
        else throw ConfigError("expected soil_wetness or runoff, got '" + v + "'");
    });
    w.reject_unknown();

    SectionReader t(doc, "train");
    auto& tc = cfg.train;
    t.bind("seed", tc.seed);
    cfg.train_seed_set = t.present("seed");
    t.bind("window", tc.window);
    t.bind("batch", tc.batch);
    t.bind("epochs", tc.epochs);
    t.bind("hidden", tc.hidden);
    t.bind("rho", tc.rho);
    t.bind("epsilon", tc.epsilon);
    t.bind("clip", tc.clip);
    t.bind("dropout", tc.dropout);
    t.bind("warmup", tc.warmup);
    t.bind("max_redraws", tc.max_redraws);
    t.reject_unknown();
    tc.validate();

    SectionReader e(doc, "experiment");
    auto& ec = cfg.experiment;
    e.bind_custom("family", [&](const std::string& v) { ec.family = parse_family(v); });
    e.bind_custom("size_controlled", [&](const std::string& v) {
        if (v == "false" || v == "off") ec.size_control = SizeControl::Off;
        else if (v == "true" || v == "on") ec.size_control = SizeControl::On;
        else if (v == "both") ec.size_control = SizeControl::Both;
        else throw ConfigError("expected false, true or both, got '" + v + "'");
    });
    e.bind_custom("rois", [&](const std::string& v) { ec.rois = split_list(v); });
    e.bind("min_roi_sites", ec.min_roi_sites);
    e.bind("train_start", ec.train_start);
    e.bind("train_end", ec.train_end);
    e.bind("test_start", ec.test_start);
    e.bind("test_end", ec.test_end);
    std::uint64_t sampling = 0;
    e.bind("sampling_seed", sampling);
    if (e.present("sampling_seed")) ec.sampling_seed = sampling;
    e.bind("taxonomy", ec.taxonomy);
    e.reject_unknown();
    if (ec.family == Family::GlobalLocal && ec.size_control != SizeControl::Off)
        throw ConfigError(doc.origin() + ": experiment.size_controlled applies to similar_dissimilar only");
    for (const auto* d : {&ec.train_start, &ec.train_end, &ec.test_start, &ec.test_end}) {
        try {
            parse_date(*d);
        } catch (const ParseError& err) {
            throw ConfigError(doc.origin() + ": experiment window: " + err.what());
        }
    }

    SectionReader v(doc, "eval");
    v.bind_custom("metrics", [&](const std::string& value) {
        cfg.eval.metrics.clear();
        for (const auto& m : split_list(value)) cfg.eval.metrics.push_back(parse_metric(m));
        if (cfg.eval.metrics.empty()) throw ConfigError("no metrics listed");
    });
    v.reject_unknown();

    SectionReader io(doc, "io");
    io.bind("workers", cfg.io.workers);
    io.reject_unknown();
    if (cfg.io.workers < 1) throw ConfigError(doc.origin() + ": io.workers must be >= 1");
    return cfg;
}

AppConfig AppConfig::load(const std::filesystem::path& path) { return from_document(ConfigDocument::load(path)); }

void AppConfig::override_seeds(std::uint64_t seed) {
    world.seed = seed;
    world_seed_set = true;
    train.seed = seed;
    train_seed_set = true;
    experiment.sampling_seed = seed;
}

void AppConfig::require_world_seed() const {
    if (!world_seed_set) throw ConfigError("missing key world.seed");
}

void AppConfig::require_train_seed() const {
    if (!train_seed_set) throw ConfigError("missing key train.seed");
}

}  // namespace synergy
