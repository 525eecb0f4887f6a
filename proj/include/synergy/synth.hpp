#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synergy/dataset.hpp"
#include "synergy/region.hpp"
#include "synergy/rng.hpp"

namespace synergy {

/// Hidden bucket parameters of one synthetic site.
struct LatentParams {
    double capacity = 150.0;    // C, storage units
    double recession = 0.05;    // k, 1/day
    double exponent = 2.0;      // gamma
    double evap_efficiency = 0.8;  // beta

    /// Throws ContractError when outside C > 0, 0 < k < 1, gamma >= 1, 0 <= beta <= 1.
    void validate() const;
};

/// Offset scales for one latent parameter at levels I, II, III and site.
using LevelSigmas = std::array<double, 4>;

struct ForcingParams {
    double p_wet = 0.3;            // mean wet-day probability
    double p_wet_amplitude = 0.1;  // seasonal swing of p_wet
    double mean_depth = 8.0;       // mean wet-day depth
    double depth_amplitude = 0.3;  // relative seasonal swing of depth
    double pet_mean = 3.0;
    double pet_amplitude = 2.0;
    double pet_noise = 0.3;
    double temp_mean = 12.0;
    double temp_amplitude = 10.0;
    double temp_noise = 2.0;
    double phase_days = 0.0;  // day-of-year of t = 0
};

enum class TargetKind { SoilWetness, Runoff };

struct WorldConfig {
    int n_level1 = 4;
    int n_level2 = 3;  // per level-I node
    int n_level3 = 3;  // per level-II node
    int sites_per_region = 12;
    int days = 730;
    std::string start_date = "2015-04-01";

    // Exposed C and k vary mostly between sites; hidden gamma and beta carry
    // small regional offsets plus site scatter.
    LatentParams mean{50.0, 0.1, 2.0, 0.8};
    LevelSigmas sigma_capacity{5.0, 5.0, 5.0, 20.0};
    LevelSigmas sigma_recession{0.01, 0.01, 0.01, 0.04};
    LevelSigmas sigma_exponent{0.2, 0.1, 0.05, 0.1};
    LevelSigmas sigma_evap{0.05, 0.03, 0.02, 0.03};

    ForcingParams climate;
    double climate_sigma = 0.2;  // log-scale spread of p_wet, depth and PET per level-I/II node

    double attr_noise = 0.1;  // log-normal multiplicative noise on exposed C and k
    double obs_noise = 0.01;  // additive noise on retained targets
    int revisit_min = 2;
    int revisit_max = 3;
    TargetKind target = TargetKind::SoilWetness;
    std::uint64_t seed = 0;

    /// Throws ConfigError.
    void validate() const;
};

struct SyntheticWorld {
    Dataset data;
    std::vector<LatentParams> truth;  // aligned with data.sites
    SubRegionTable taxonomy;          // one sub-region per level-II node
};

/// Forcing columns produced by gen_forcing.
inline constexpr std::array<const char*, 3> kForcingNames{"precip", "pet", "temp"};
inline constexpr std::array<const char*, 2> kAttrNames{"capacity", "recession"};

/// T x 3 matrix of precipitation, potential evapotranspiration and temperature.
RowMatrix gen_forcing(Rng& rng, int days, const ForcingParams& params);

struct BucketTrace {
    std::vector<double> storage;  // length T + 1, storage[0] = C / 2
    std::vector<double> wetness;  // storage[t] / C
    std::vector<double> runoff;   // Q_t including spill
    std::vector<double> evaporation;
};

/// Daily bucket: E = beta pet S/C, Q = k C (S/C)^gamma, excess spills into Q.
BucketTrace simulate_site(const LatentParams& latent, const RowMatrix& forcing);

struct RevisitRange {
    int min_gap = 1;
    int max_gap = 1;
};

/// Keep observations at cumulative gaps drawn from `revisit`, starting at t = 0.
std::vector<double> observe_target(const std::vector<double>& series, RevisitRange revisit, double noise, Rng& rng);

SyntheticWorld gen_world(const WorldConfig& cfg);

/// Writes sites/forcing/target CSVs plus latent_truth.csv and taxonomy.csv.
void save_world(const SyntheticWorld& world, const std::filesystem::path& dir);

}  // namespace synergy
