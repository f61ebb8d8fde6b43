#include "apogee/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "apogee/csvio.hpp"
#include "apogee/errors.hpp"

namespace apogee {

using nlohmann::json;

void PriorSpec::validate() const {
    if (!(cd_low < cd_high)) throw ValidationError("priors: cd_low must be < cd_high");
    if (!(alpha_low < alpha_high)) throw ValidationError("priors: alpha_low must be < alpha_high");
    if (!(noise_sigma >= 0.0)) throw ValidationError("priors: noise_sigma must be >= 0");
}

std::pair<FlightParams, RocketConfig> sample_flight_setup(RngStream& rng, const PriorSpec& priors,
                                                          const MotorDatabase& db,
                                                          std::pair<double, double> mass_range,
                                                          double reference_area) {
    // Draw order is part of the determinism contract: cd, alpha, motor, mass.
    FlightParams params;
    params.cd = rng.uniform(priors.cd_low, priors.cd_high);
    params.alpha = rng.uniform(priors.alpha_low, priors.alpha_high);
    RocketConfig config;
    config.motor = db.at(rng.uniform_int(db.size()));
    config.dry_mass = rng.uniform(mass_range.first, mass_range.second);
    config.reference_area = reference_area;
    return {params, config};
}

double add_noise(double h, double sigma, RngStream& rng) {
    if (sigma == 0.0) return h;
    return std::max(h + sigma * rng.normal(), 0.0);
}

FeatureVector build_features(double h_obs, const RocketConfig& config) {
    if (!std::isfinite(h_obs))
        throw ValidationError("build_features: observed apogee must be finite");
    FeatureVector f;
    f.h_obs = h_obs;
    f.motor_index = static_cast<double>(config.motor.motor_index);
    f.dry_mass = config.dry_mass;
    f.total_impulse = config.motor.total_impulse;
    f.burn_time = config.motor.burn_time;
    return f;
}

namespace {

LabeledSample generate_one(uint64_t master_seed, uint64_t index, const PriorSpec& priors,
                           const MotorDatabase& db, std::pair<double, double> mass_range,
                           const SimOptions& sim_opts, double reference_area, long& rejected) {
    constexpr int kMaxResamples = 1000;
    RngStream stream(master_seed, index);
    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
        auto [params, config] = sample_flight_setup(stream, priors, db, mass_range, reference_area);
        SimResult sim;
        try {
            sim = simulate_flight(params, config, sim_opts);
        } catch (const SimulationError& e) {
            throw SimulationError("sample " + std::to_string(index) + " (cd=" +
                                  format_double(params.cd) + ", alpha=" +
                                  format_double(params.alpha) + ", motor=" + config.motor.name +
                                  "): " + e.what());
        }
        if (!sim.lifted_off()) {
            ++rejected;
            continue;
        }
        LabeledSample s;
        s.clean_apogee = sim.apogee;
        s.target = params;
        s.features = build_features(add_noise(sim.apogee, priors.noise_sigma, stream), config);
        return s;
    }
    throw SimulationError("sample " + std::to_string(index) + ": " +
                          std::to_string(kMaxResamples) +
                          " consecutive NoLiftoff draws; priors and motors are incompatible");
}

} // namespace

Dataset generate_dataset(size_t n, const PriorSpec& priors, const MotorDatabase& db,
                         std::pair<double, double> mass_range, const SimOptions& sim_opts,
                         uint64_t master_seed, int threads, double reference_area) {
    if (n < 1) throw ValidationError("generate_dataset: n must be >= 1");
    if (!(mass_range.first < mass_range.second))
        throw ValidationError("generate_dataset: mass range low must be < high");
    if (db.size() == 0) throw ValidationError("generate_dataset: empty motor database");
    priors.validate();

    Dataset ds;
    ds.seed = master_seed;
    ds.samples.resize(n);

    unsigned worker_count = threads > 0 ? static_cast<unsigned>(threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
    worker_count = std::min<unsigned>(worker_count, n);

    std::atomic<size_t> next{0};
    std::atomic<long> rejected{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        long local_rejected = 0;
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) break;
            try {
                ds.samples[i] = generate_one(master_seed, i, priors, db, mass_range, sim_opts,
                                             reference_area, local_rejected);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                failure = e.what();
                failed.store(true);
                break;
            }
        }
        rejected.fetch_add(local_rejected);
    };

    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(worker_count);
        for (unsigned w = 0; w < worker_count; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw SimulationError("generate_dataset: " + failure);

    ds.rejected = rejected.load();
    ds.norm = compute_norm_stats(ds.samples);
    return ds;
}

NormStats compute_norm_stats(const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw ValidationError("compute_norm_stats: no samples");
    NormStats norm;
    const double n = static_cast<double>(samples.size());
    for (const auto& s : samples) {
        const auto x = s.features.as_array();
        for (size_t j = 0; j < 5; ++j) norm.mean[j] += x[j];
    }
    for (size_t j = 0; j < 5; ++j) norm.mean[j] /= n;
    for (const auto& s : samples) {
        const auto x = s.features.as_array();
        for (size_t j = 0; j < 5; ++j) {
            const double d = x[j] - norm.mean[j];
            norm.std[j] += d * d;
        }
    }
    for (size_t j = 0; j < 5; ++j) {
        norm.std[j] = std::sqrt(norm.std[j] / n);
        if (norm.std[j] < 1e-12) norm.std[j] = 1.0; // constant-feature guard
    }
    return norm;
}

std::array<double, 5> normalize(const FeatureVector& features, const NormStats& norm) {
    const auto x = features.as_array();
    std::array<double, 5> z{};
    for (size_t j = 0; j < 5; ++j) z[j] = (x[j] - norm.mean[j]) / norm.std[j];
    return z;
}

std::string dataset_to_csv(const Dataset& ds) {
    std::string out(kDatasetCsvHeader);
    out += '\n';
    for (const auto& s : ds.samples) {
        const auto x = s.features.as_array();
        for (size_t j = 0; j < 5; ++j) {
            out += format_double(x[j]);
            out += ',';
        }
        out += format_double(s.target.cd);
        out += ',';
        out += format_double(s.target.alpha);
        out += ',';
        out += format_double(s.clean_apogee);
        out += '\n';
    }
    return out;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    write_file(path, dataset_to_csv(ds));
}

Dataset read_dataset_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines[0] != kDatasetCsvHeader)
        throw ParseError("dataset " + path + ": missing or wrong header");
    Dataset ds;
    ds.samples.reserve(lines.size() - 1);
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 8)
            throw ParseError("dataset " + path + ": line " + std::to_string(i + 1) +
                             ": expected 8 fields, got " + std::to_string(f.size()));
        try {
            LabeledSample s;
            s.features = FeatureVector::from_array({parse_double(f[0]), parse_double(f[1]),
                                                    parse_double(f[2]), parse_double(f[3]),
                                                    parse_double(f[4])});
            s.target.cd = parse_double(f[5]);
            s.target.alpha = parse_double(f[6]);
            s.clean_apogee = parse_double(f[7]);
            ds.samples.push_back(s);
        } catch (const ParseError& e) {
            throw ParseError("dataset " + path + ": line " + std::to_string(i + 1) + ": " +
                             e.what());
        }
    }
    return ds;
}

std::string norm_sidecar_path(const std::string& dataset_path) {
    const std::string suffix = ".csv";
    if (dataset_path.size() > suffix.size() &&
        dataset_path.compare(dataset_path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return dataset_path.substr(0, dataset_path.size() - suffix.size()) + ".norm.json";
    return dataset_path + ".norm.json";
}

void write_norm_sidecar(const NormStats& norm, uint64_t seed, const std::string& path) {
    json doc{{"mean", norm.mean}, {"std", norm.std}, {"seed", seed}};
    write_file(path, doc.dump(2) + "\n");
}

std::pair<NormStats, uint64_t> read_norm_sidecar(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("norm sidecar " + path + ": " + e.what());
    }
    try {
        NormStats norm;
        const auto mean = doc.at("mean").get<std::vector<double>>();
        const auto std_ = doc.at("std").get<std::vector<double>>();
        if (mean.size() != 5 || std_.size() != 5)
            throw ParseError("norm sidecar " + path + ": mean/std must have 5 entries");
        std::copy(mean.begin(), mean.end(), norm.mean.begin());
        std::copy(std_.begin(), std_.end(), norm.std.begin());
        return {norm, doc.at("seed").get<uint64_t>()};
    } catch (const json::exception& e) {
        throw ParseError("norm sidecar " + path + ": " + e.what());
    }
}

} // namespace apogee
