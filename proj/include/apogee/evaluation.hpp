#pragma once

#include <limits>
#include <string>
#include <vector>

#include "apogee/inference.hpp"
#include "apogee/motordb.hpp"
#include "apogee/synthgen.hpp"
#include "apogee/train.hpp"

namespace apogee {

/// Fixed-parameter baseline: the standard uncalibrated workflow of a
/// geometry-derived drag coefficient and nominal motor performance.
inline constexpr double kBaselineCd = 0.52;
inline constexpr double kBaselineAlpha = 1.0;

/// Published per-flight record. The paper_* fields carry the published
/// prediction columns and are NaN for user-supplied flights.
struct RealFlight {
    int id = 0;
    std::string motor_name;  // database key (delay suffix stripped)
    std::string designation; // as printed, e.g. "E35-5W"
    char config_label = 'A';
    double measured_apogee = 0.0; // m
    bool valid = true;            // false for the four anomalous flights
    double dry_mass = 0.0;        // kg, resolved from the config label

    double paper_predicted = std::numeric_limits<double>::quiet_NaN();
    double paper_cd = std::numeric_limits<double>::quiet_NaN();
    double paper_alpha = std::numeric_limits<double>::quiet_NaN();
    double paper_openrocket = std::numeric_limits<double>::quiet_NaN();

    bool has_paper_columns() const { return paper_predicted == paper_predicted; }
};

// Config-label dry masses for the published flights (overridable per row in
// a flights CSV).
inline constexpr double kConfigADryMass = 0.322; // kg
inline constexpr double kConfigBDryMass = 0.448; // kg

/// The 12 published flights, embedded verbatim.
std::vector<RealFlight> builtin_real_flights();

/// CSV schema: id,motor,config,measured_m,valid,dry_mass_kg. An empty
/// dry_mass_kg falls back to the config-label mapping. Errors name the line.
std::vector<RealFlight> load_real_flights_csv(const std::string& path);

/// simulate_flight with (cd = 0.52, alpha = 1.0), ignoring any inference.
double baseline_predict(const RocketConfig& config, const SimOptions& sim_opts = {});

struct FlightRow {
    RealFlight flight;
    double predicted = std::numeric_limits<double>::quiet_NaN(); // ours [m]
    double baseline = std::numeric_limits<double>::quiet_NaN();  // [m]
    double error = std::numeric_limits<double>::quiet_NaN(); // predicted - measured [m]
    double cd_hat = std::numeric_limits<double>::quiet_NaN();
    double alpha_hat = std::numeric_limits<double>::quiet_NaN();
    double cd_std = std::numeric_limits<double>::quiet_NaN();
    double alpha_std = std::numeric_limits<double>::quiet_NaN();
    std::string failure; // set when this flight could not be evaluated
};

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    double mean_bias = 0.0; // mean (pred - meas); positive = over-prediction
    int positive_errors = 0;
    int count = 0;
};

struct EvalReport {
    std::vector<FlightRow> rows;
    Metrics ours;     // over valid flights with a prediction
    Metrics baseline; // same flights, baseline column
    bool paper_columns = false;
};

/// Aggregates over the valid rows. Throws ValidationError on empty input.
Metrics compute_metrics(const std::vector<double>& predicted,
                        const std::vector<double>& measured);

/// Full harness: per-flight inference + replay + baseline, aggregates over
/// the valid flights. Per-flight failures are recorded in the row and
/// evaluation continues. With paper_columns, the embedded published
/// predictions are scored instead of the model (model may be null then).
EvalReport run_evaluation(const nn::EnsembleModel* model, const std::vector<RealFlight>& flights,
                          const MotorDatabase& db, const SimOptions& sim_opts = {},
                          bool paper_columns = false);

/// Aligned text table mirroring the published layout.
std::string format_report_text(const EvalReport& report);

/// Machine-readable report with all rows and aggregates.
std::string report_to_json(const EvalReport& report);

// --- synthetic parity ------------------------------------------------------

struct ParityStats {
    double cd_mae = 0.0;
    double alpha_mae = 0.0;
    size_t count = 0;
};

/// Held-out parameter MAE of the ensemble mean prediction.
ParityStats parameter_mae(const nn::EnsembleModel& model, const Dataset& dataset);

/// True-vs-predicted CSV (plot-ready): cd_true,cd_pred,alpha_true,alpha_pred.
void write_parity_csv(const nn::EnsembleModel& model, const Dataset& dataset,
                      const std::string& path);

} // namespace apogee
