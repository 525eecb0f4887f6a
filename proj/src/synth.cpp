#include "synergy/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy {

void LatentParams::validate() const {
    if (!(capacity > 0.0) || !(recession > 0.0 && recession < 1.0) || !(exponent >= 1.0) ||
        !(evap_efficiency >= 0.0 && evap_efficiency <= 1.0))
        throw ContractError("latent parameters out of range");
}

void WorldConfig::validate() const {
    if (n_level1 < 1 || n_level2 < 1 || n_level3 < 1 || sites_per_region < 1 || days < 1)
        throw ConfigError("world: region, site and day counts must be >= 1");
    auto check = [](const LevelSigmas& s, const char* name) {
        for (double v : s)
            if (!(v >= 0.0)) throw ConfigError(std::string("world: ") + name + " scales must be >= 0");
    };
    check(sigma_capacity, "sigma_capacity");
    check(sigma_recession, "sigma_recession");
    check(sigma_exponent, "sigma_exponent");
    check(sigma_evap, "sigma_evap");
    if (revisit_min < 1 || revisit_max < revisit_min || revisit_max > days)
        throw ConfigError("world: revisit range must lie within [1, days]");
    if (attr_noise < 0.0 || obs_noise < 0.0 || climate_sigma < 0.0) throw ConfigError("world: noise levels must be >= 0");
    if (climate.p_wet < 0.0 || climate.p_wet > 1.0) throw ConfigError("world: p_wet must lie in [0, 1]");
    if (climate.mean_depth <= 0.0) throw ConfigError("world: mean_depth must be > 0");
    mean.validate();
    parse_date(start_date);
}

RowMatrix gen_forcing(Rng& rng, int days, const ForcingParams& p) {
    RowMatrix out(days, 3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double omega = 2.0 * std::numbers::pi / 365.25;
    for (int t = 0; t < days; ++t) {
        const double season = std::sin(omega * (t + p.phase_days));
        const double p_wet = std::clamp(p.p_wet + p.p_wet_amplitude * season, 0.0, 1.0);
        const double depth_mean = std::max(1e-6, p.mean_depth * (1.0 + p.depth_amplitude * season));
        double precip = 0.0;
        if (unif(rng) < p_wet) precip = -depth_mean * std::log1p(-unif(rng));
        // PET and temperature peak half a year after the phase origin (early July).
        const double warm = std::sin(omega * (t + p.phase_days) - std::numbers::pi / 2.0);
        const double pet = std::max(0.0, p.pet_mean + p.pet_amplitude * warm + p.pet_noise * normal(rng));
        const double temp = p.temp_mean + p.temp_amplitude * warm + p.temp_noise * normal(rng);
        out(t, 0) = precip;
        out(t, 1) = pet;
        out(t, 2) = temp;
    }
    return out;
}

BucketTrace simulate_site(const LatentParams& latent, const RowMatrix& forcing) {
    latent.validate();
    const auto T = static_cast<std::size_t>(forcing.rows());
    const double C = latent.capacity;
    BucketTrace tr;
    tr.storage.resize(T + 1);
    tr.wetness.resize(T);
    tr.runoff.resize(T);
    tr.evaporation.resize(T);
    double S = C / 2.0;
    tr.storage[0] = S;
    for (std::size_t t = 0; t < T; ++t) {
        const double P = forcing(static_cast<Eigen::Index>(t), 0);
        const double pet = forcing(static_cast<Eigen::Index>(t), 1);
        const double rel = S / C;
        double E = latent.evap_efficiency * pet * rel;
        double Q = latent.recession * C * std::pow(rel, latent.exponent);
        double next = S + P - E - Q;
        if (next > C) {
            Q += next - C;
            next = C;
        } else if (next < 0.0) {
            // Outflows exceed what is available: scale them down to empty the bucket exactly.
            const double scale = (S + P) / (E + Q);
            E *= scale;
            Q *= scale;
            next = 0.0;
        }
        tr.wetness[t] = rel;
        tr.runoff[t] = Q;
        tr.evaporation[t] = E;
        S = next;
        tr.storage[t + 1] = S;
    }
    return tr;
}

std::vector<double> observe_target(const std::vector<double>& series, RevisitRange revisit, double noise, Rng& rng) {
    std::vector<double> out(series.size(), kMissing);
    std::uniform_int_distribution<int> gap(revisit.min_gap, revisit.max_gap);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t t = 0;
    while (t < series.size()) {
        out[t] = series[t] + (noise > 0.0 ? noise * normal(rng) : 0.0);
        t += static_cast<std::size_t>(revisit.min_gap == revisit.max_gap ? revisit.min_gap : gap(rng));
    }
    return out;
}

namespace {

std::string sequence_label(std::size_t index) {
    std::string s;
    ++index;
    while (index > 0) {
        --index;
        s.insert(s.begin(), static_cast<char>('A' + index % 26));
        index /= 26;
    }
    return s;
}

struct NodeDraw {
    std::array<double, 4> z{};  // C, k, gamma, beta
    double climate = 0.0;
};

NodeDraw draw_node(std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    NodeDraw d;
    for (double& v : d.z) v = normal(rng);
    d.climate = normal(rng);
    return d;
}

}  // namespace

SyntheticWorld gen_world(const WorldConfig& cfg) {
    cfg.validate();
    SyntheticWorld world;
    auto& ds = world.data;
    const Date start = parse_date(cfg.start_date);
    for (int t = 0; t < cfg.days; ++t) ds.time_axis.push_back(start + std::chrono::days(t));
    ds.feature_names.assign(kForcingNames.begin(), kForcingNames.end());
    ds.attr_names.assign(kAttrNames.begin(), kAttrNames.end());
    ds.synthetic = true;

    const std::array<const LevelSigmas*, 4> sigmas{&cfg.sigma_capacity, &cfg.sigma_recession, &cfg.sigma_exponent,
                                                   &cfg.sigma_evap};
    const std::array<double, 4> means{cfg.mean.capacity, cfg.mean.recession, cfg.mean.exponent,
                                      cfg.mean.evap_efficiency};
    const std::chrono::year_month_day ymd(start);
    const double phase =
        static_cast<double>((start - Date(std::chrono::year_month_day(ymd.year(), std::chrono::January, std::chrono::day(1)))).count());

    std::vector<SubRegion> groups;
    for (int i = 1; i <= cfg.n_level1; ++i) {
        const std::string c1 = "S" + std::to_string(i);
        const auto s1 = derive_seed(cfg.seed, "region/" + c1);
        const auto d1 = draw_node(s1);
        for (int j = 1; j <= cfg.n_level2; ++j) {
            const std::string c2 = c1 + "." + std::to_string(j);
            const auto s2 = derive_seed(s1, "region/" + c2);
            const auto d2 = draw_node(s2);
            groups.push_back({sequence_label(groups.size()), {c2}});
            for (int k = 1; k <= cfg.n_level3; ++k) {
                const std::string c3 = c2 + "." + std::to_string(k);
                const auto s3 = derive_seed(s2, "region/" + c3);
                const auto d3 = draw_node(s3);
                const RegionCode region = parse_region_code(c3);

                ForcingParams climate = cfg.climate;
                climate.phase_days = phase;
                const double cf = std::exp(cfg.climate_sigma * (d1.climate + d2.climate));
                climate.p_wet = std::clamp(climate.p_wet * cf, 0.0, 1.0);
                climate.mean_depth *= cf;
                climate.pet_mean *= std::exp(cfg.climate_sigma * 0.5 * (d1.climate - d2.climate));
                climate.pet_amplitude = std::min(climate.pet_amplitude, climate.pet_mean);

                for (int n = 1; n <= cfg.sites_per_region; ++n) {
                    char suffix[16];
                    std::snprintf(suffix, sizeof(suffix), "-%02d", n);
                    const std::string id = c3 + suffix;
                    const auto site_seed = derive_seed(s3, "site/" + std::to_string(n));
                    Rng latent_rng = make_rng(site_seed, "latent");
                    std::normal_distribution<double> normal(0.0, 1.0);

                    std::array<double, 4> v{};
                    for (std::size_t p = 0; p < 4; ++p) {
                        const auto& sg = *sigmas[p];
                        v[p] = means[p] + sg[0] * d1.z[p] + sg[1] * d2.z[p] + sg[2] * d3.z[p] + sg[3] * normal(latent_rng);
                    }
                    LatentParams lp;
                    lp.capacity = std::max(v[0], 1.0);
                    lp.recession = std::clamp(v[1], 1e-3, 0.999);
                    lp.exponent = std::max(v[2], 1.0);
                    lp.evap_efficiency = std::clamp(v[3], 0.0, 1.0);

                    Site site;
                    site.id = id;
                    site.region = region;
                    const double c_noise = cfg.attr_noise > 0.0 ? cfg.attr_noise * normal(latent_rng) : 0.0;
                    const double k_noise = cfg.attr_noise > 0.0 ? cfg.attr_noise * normal(latent_rng) : 0.0;
                    site.static_attrs = {lp.capacity * std::exp(c_noise), lp.recession * std::exp(k_noise)};

                    Rng forcing_rng = make_rng(site_seed, "forcing");
                    site.forcing = gen_forcing(forcing_rng, cfg.days, climate);
                    const auto trace = simulate_site(lp, site.forcing);
                    Rng obs_rng = make_rng(site_seed, "observe");
                    const auto& truth = cfg.target == TargetKind::SoilWetness ? trace.wetness : trace.runoff;
                    site.target = observe_target(truth, {cfg.revisit_min, cfg.revisit_max}, cfg.obs_noise, obs_rng);

                    ds.sites.push_back(std::move(site));
                    world.truth.push_back(lp);
                }
            }
        }
    }
    world.taxonomy = SubRegionTable(std::move(groups));
    ds.validate();
    return world;
}

void save_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
    save_dataset(world.data, dir);
    std::string truth = "site_id,C,k,gamma,beta\n";
    for (std::size_t i = 0; i < world.truth.size(); ++i) {
        const auto& lp = world.truth[i];
        truth += world.data.sites[i].id + "," + format_double(lp.capacity) + "," + format_double(lp.recession) + "," +
                 format_double(lp.exponent) + "," + format_double(lp.evap_efficiency) + "\n";
    }
    write_text_file(dir / "latent_truth.csv", truth);
    world.taxonomy.save_csv(dir / "taxonomy.csv");
}

}  // namespace synergy
