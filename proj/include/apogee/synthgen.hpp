#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "apogee/motordb.hpp"
#include "apogee/physics.hpp"
#include "apogee/rng.hpp"

namespace apogee {

/// Sampling box for the latent parameters plus the altimeter noise level.
struct PriorSpec {
    double cd_low = 0.3;
    double cd_high = 0.9;
    double alpha_low = 0.8;
    double alpha_high = 1.2;
    double noise_sigma = 3.0; // m

    void validate() const; // throws ValidationError
};

inline constexpr std::pair<double, double> kDefaultMassRange{0.25, 0.55}; // kg

/// Five-entry network input, fixed order.
struct FeatureVector {
    double h_obs = 0.0;         // m, noisy apogee
    double motor_index = 0.0;
    double dry_mass = 0.0;      // kg
    double total_impulse = 0.0; // Ns
    double burn_time = 0.0;     // s

    std::array<double, 5> as_array() const {
        return {h_obs, motor_index, dry_mass, total_impulse, burn_time};
    }
    static FeatureVector from_array(const std::array<double, 5>& a) {
        return {a[0], a[1], a[2], a[3], a[4]};
    }
};

struct LabeledSample {
    FeatureVector features;
    FlightParams target;       // the true sampled theta
    double clean_apogee = 0.0; // m, pre-noise
};

/// Per-feature z-score statistics. Constant features get std clamped to 1.
struct NormStats {
    std::array<double, 5> mean{};
    std::array<double, 5> std{};
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::optional<NormStats> norm;
    uint64_t seed = 0;
    long rejected = 0; // NoLiftoff draws discarded during generation
};

/// Draws (theta, config): cd and alpha uniform over the prior box, motor
/// uniform over the database, dry mass uniform over mass_range.
std::pair<FlightParams, RocketConfig> sample_flight_setup(
    RngStream& rng, const PriorSpec& priors, const MotorDatabase& db,
    std::pair<double, double> mass_range, double reference_area = kDefaultReferenceArea);

/// h + N(0, sigma^2), clamped at 0 (altimeters never report negative apogee).
double add_noise(double h, double sigma, RngStream& rng);

FeatureVector build_features(double h_obs, const RocketConfig& config);

/// Alg. pipeline: sample -> simulate -> noise -> features, n times, with
/// per-sample RNG streams keyed by (master_seed, i) so the result is
/// bit-identical for any thread count. NoLiftoff draws are resampled and
/// counted. NormStats are computed over all n feature vectors.
Dataset generate_dataset(size_t n, const PriorSpec& priors, const MotorDatabase& db,
                         std::pair<double, double> mass_range, const SimOptions& sim_opts,
                         uint64_t master_seed, int threads = 0,
                         double reference_area = kDefaultReferenceArea);

NormStats compute_norm_stats(const std::vector<LabeledSample>& samples);

std::array<double, 5> normalize(const FeatureVector& features, const NormStats& norm);

// --- dataset files -------------------------------------------------------
// CSV column order matches FeatureVector plus the labels; doubles are
// written shortest-round-trip so read(write(x)) is exact.

inline constexpr const char* kDatasetCsvHeader =
    "h_obs,motor_index,dry_mass,total_impulse,burn_time,cd_true,alpha_true,clean_apogee";

std::string dataset_to_csv(const Dataset& ds);
void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path); // norm left empty

/// Sidecar JSON with keys mean, std, seed. Lives next to the dataset CSV.
std::string norm_sidecar_path(const std::string& dataset_path);
void write_norm_sidecar(const NormStats& norm, uint64_t seed, const std::string& path);
std::pair<NormStats, uint64_t> read_norm_sidecar(const std::string& path);

} // namespace apogee
