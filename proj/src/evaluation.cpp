#include "apogee/evaluation.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "apogee/csvio.hpp"
#include "apogee/errors.hpp"

namespace apogee {

using nlohmann::json;

std::vector<RealFlight> builtin_real_flights() {
    // Published flight table, embedded verbatim. Flights 5-8 were excluded
    // by the authors due to documented anomalies.
    struct Row {
        int id;
        const char* motor;
        const char* designation;
        char cfg;
        double measured, ours, openrocket, cd, alpha;
        bool valid;
    };
    static constexpr Row kRows[] = {
        {1, "E35", "E35-5W", 'B', 169.8, 170.8, 198.2, 0.659, 0.887, true},
        {2, "F24", "F24-4W", 'A', 281.3, 286.3, 315.6, 0.845, 0.836, true},
        {3, "F24", "F24-4W", 'A', 246.6, 263.6, 315.6, 0.888, 0.783, true},
        {4, "E35", "E35-5W", 'A', 174.7, 180.9, 218.4, 0.838, 0.822, true},
        {5, "E35", "E35-5W", 'A', 154.5, 171.0, 218.4, 0.866, 0.791, false},
        {6, "E35", "E35-5W", 'A', 131.1, 161.2, 218.4, 0.893, 0.758, false},
        {7, "E35", "E35-5W", 'A', 166.1, 176.4, 218.4, 0.851, 0.808, false},
        {8, "F24", "F24-4W", 'A', 199.9, 238.0, 315.6, 0.939, 0.721, false},
        {9, "F24", "F24-4W", 'A', 241.4, 260.5, 315.6, 0.894, 0.776, true},
        {10, "F39", "F39", 'B', 185.9, 206.2, 226.5, 0.890, 0.768, true},
        {11, "F39", "F39", 'B', 196.3, 211.7, 226.5, 0.878, 0.782, true},
        {12, "F39", "F39", 'B', 198.1, 212.6, 226.5, 0.876, 0.784, true},
    };
    std::vector<RealFlight> flights;
    for (const Row& r : kRows) {
        RealFlight f;
        f.id = r.id;
        f.motor_name = r.motor;
        f.designation = r.designation;
        f.config_label = r.cfg;
        f.measured_apogee = r.measured;
        f.valid = r.valid;
        f.dry_mass = r.cfg == 'A' ? kConfigADryMass : kConfigBDryMass;
        f.paper_predicted = r.ours;
        f.paper_openrocket = r.openrocket;
        f.paper_cd = r.cd;
        f.paper_alpha = r.alpha;
        flights.push_back(std::move(f));
    }
    return flights;
}

std::vector<RealFlight> load_real_flights_csv(const std::string& path) {
    const auto lines = read_lines(path);
    const std::string header = "id,motor,config,measured_m,valid,dry_mass_kg";
    if (lines.empty() || lines[0] != header)
        throw ParseError("flights " + path + ": line 1: expected header '" + header + "'");
    std::vector<RealFlight> flights;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string where = "flights " + path + ": line " + std::to_string(i + 1);
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 6) throw ParseError(where + ": expected 6 fields");
        try {
            RealFlight fl;
            fl.id = static_cast<int>(parse_int(f[0]));
            fl.motor_name = f[1];
            fl.designation = f[1];
            if (f[2] != "A" && f[2] != "B") throw ParseError("config must be A or B");
            fl.config_label = f[2][0];
            fl.measured_apogee = parse_double(f[3]);
            if (f[4] == "1" || f[4] == "true") fl.valid = true;
            else if (f[4] == "0" || f[4] == "false") fl.valid = false;
            else throw ParseError("valid must be 0/1/true/false");
            fl.dry_mass = f[5].empty() ? (fl.config_label == 'A' ? kConfigADryMass : kConfigBDryMass)
                                       : parse_double(f[5]);
            if (!(fl.measured_apogee > 0.0)) throw ParseError("measured_m must be > 0");
            if (!(fl.dry_mass > 0.0)) throw ParseError("dry_mass_kg must be > 0");
            flights.push_back(std::move(fl));
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return flights;
}

double baseline_predict(const RocketConfig& config, const SimOptions& sim_opts) {
    return simulate_flight({kBaselineCd, kBaselineAlpha}, config, sim_opts).apogee;
}

Metrics compute_metrics(const std::vector<double>& predicted,
                        const std::vector<double>& measured) {
    if (predicted.empty() || predicted.size() != measured.size())
        throw ValidationError("compute_metrics: need matching non-empty inputs");
    Metrics m;
    m.count = static_cast<int>(predicted.size());
    double sq = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const double err = predicted[i] - measured[i];
        m.mae += std::abs(err);
        m.mean_bias += err;
        sq += err * err;
        if (err > 0.0) ++m.positive_errors;
    }
    m.mae /= m.count;
    m.mean_bias /= m.count;
    m.rmse = std::sqrt(sq / m.count);
    return m;
}

EvalReport run_evaluation(const nn::EnsembleModel* model, const std::vector<RealFlight>& flights,
                          const MotorDatabase& db, const SimOptions& sim_opts,
                          bool paper_columns) {
    if (!paper_columns && model == nullptr)
        throw ValidationError("run_evaluation: a model is required unless scoring paper columns");

    EvalReport report;
    report.paper_columns = paper_columns;
    for (const RealFlight& flight : flights) {
        FlightRow row;
        row.flight = flight;
        try {
            if (paper_columns) {
                if (!flight.has_paper_columns())
                    throw ValidationError("flight has no published prediction columns");
                row.predicted = flight.paper_predicted;
                row.baseline = flight.paper_openrocket;
                row.cd_hat = flight.paper_cd;
                row.alpha_hat = flight.paper_alpha;
            } else {
                RocketConfig config;
                config.motor = db.get(flight.motor_name);
                config.dry_mass = flight.dry_mass;
                const InferenceResult inf =
                    predict(*model, flight.measured_apogee, config, sim_opts);
                row.predicted = inf.replayed_apogee;
                row.cd_hat = inf.cd_mean;
                row.alpha_hat = inf.alpha_mean;
                row.cd_std = inf.cd_std;
                row.alpha_std = inf.alpha_std;
                row.baseline = baseline_predict(config, sim_opts);
            }
            row.error = row.predicted - flight.measured_apogee;
        } catch (const std::exception& e) {
            row.failure = e.what();
        }
        report.rows.push_back(std::move(row));
    }

    std::vector<double> ours, base, meas_ours, meas_base;
    for (const FlightRow& row : report.rows) {
        if (!row.flight.valid || !row.failure.empty()) continue;
        ours.push_back(row.predicted);
        meas_ours.push_back(row.flight.measured_apogee);
        if (row.baseline == row.baseline) {
            base.push_back(row.baseline);
            meas_base.push_back(row.flight.measured_apogee);
        }
    }
    if (!ours.empty()) report.ours = compute_metrics(ours, meas_ours);
    if (!base.empty()) report.baseline = compute_metrics(base, meas_base);
    return report;
}

namespace {

std::string fmt(const char* spec, double v) {
    if (v != v) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

} // namespace

std::string format_report_text(const EvalReport& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%3s  %-8s %-3s %9s %9s %9s %8s %7s %7s %7s %7s\n", "#",
                  "motor", "cfg", "meas_m", "ours_m", "base_m", "err_m", "cd_hat", "a_hat",
                  "cd_std", "a_std");
    out += line;
    out += std::string(93, '-') + "\n";
    for (const FlightRow& row : report.rows) {
        const RealFlight& f = row.flight;
        if (!row.failure.empty()) {
            std::snprintf(line, sizeof(line), "%3d  %-8s %-3c %9.1f  FAILED: %s\n", f.id,
                          f.designation.c_str(), f.config_label, f.measured_apogee,
                          row.failure.c_str());
            out += line;
            continue;
        }
        std::snprintf(line, sizeof(line), "%3d%c %-8s %-3c %9.1f %9.1f %9.1f %+8.1f %7s %7s %7s %7s\n",
                      f.id, f.valid ? ' ' : '*', f.designation.c_str(), f.config_label,
                      f.measured_apogee, row.predicted, row.baseline, row.error,
                      fmt("%.3f", row.cd_hat).c_str(), fmt("%.3f", row.alpha_hat).c_str(),
                      fmt("%.3f", row.cd_std).c_str(), fmt("%.3f", row.alpha_std).c_str());
        out += line;
    }
    out += std::string(93, '-') + "\n";
    std::snprintf(line, sizeof(line),
                  "valid flights: %d   (* marks flights excluded as anomalous)\n",
                  report.ours.count);
    out += line;
    std::snprintf(line, sizeof(line), "ours     MAE %6.1f m   RMSE %6.1f m   bias %+6.1f m   positive errors %d/%d\n",
                  report.ours.mae, report.ours.rmse, report.ours.mean_bias,
                  report.ours.positive_errors, report.ours.count);
    out += line;
    std::snprintf(line, sizeof(line), "baseline MAE %6.1f m   RMSE %6.1f m   bias %+6.1f m   positive errors %d/%d\n",
                  report.baseline.mae, report.baseline.rmse, report.baseline.mean_bias,
                  report.baseline.positive_errors, report.baseline.count);
    out += line;
    return out;
}

namespace {

json metrics_to_json(const Metrics& m) {
    return json{{"mae", m.mae},
                {"rmse", m.rmse},
                {"mean_bias", m.mean_bias},
                {"positive_errors", m.positive_errors},
                {"count", m.count}};
}

json nan_to_null(double v) { return v == v ? json(v) : json(nullptr); }

} // namespace

std::string report_to_json(const EvalReport& report) {
    json rows = json::array();
    for (const FlightRow& row : report.rows) {
        const RealFlight& f = row.flight;
        json r{{"id", f.id},
               {"motor", f.motor_name},
               {"designation", f.designation},
               {"config", std::string(1, f.config_label)},
               {"measured_m", f.measured_apogee},
               {"valid", f.valid},
               {"dry_mass_kg", f.dry_mass},
               {"predicted_m", nan_to_null(row.predicted)},
               {"baseline_m", nan_to_null(row.baseline)},
               {"error_m", nan_to_null(row.error)},
               {"cd_hat", nan_to_null(row.cd_hat)},
               {"alpha_hat", nan_to_null(row.alpha_hat)},
               {"cd_std", nan_to_null(row.cd_std)},
               {"alpha_std", nan_to_null(row.alpha_std)}};
        if (!row.failure.empty()) r["failure"] = row.failure;
        rows.push_back(std::move(r));
    }
    json doc{{"rows", rows},
             {"aggregates",
              {{"ours", metrics_to_json(report.ours)},
               {"baseline", metrics_to_json(report.baseline)}}},
             {"paper_columns", report.paper_columns}};
    return doc.dump(2) + "\n";
}

ParityStats parameter_mae(const nn::EnsembleModel& model, const Dataset& dataset) {
    if (dataset.samples.empty()) throw ValidationError("parameter_mae: empty dataset");
    ParityStats stats;
    for (const LabeledSample& s : dataset.samples) {
        const InferenceResult r = predict_params(model, s.features);
        stats.cd_mae += std::abs(r.cd_mean - s.target.cd);
        stats.alpha_mae += std::abs(r.alpha_mean - s.target.alpha);
    }
    stats.count = dataset.samples.size();
    stats.cd_mae /= static_cast<double>(stats.count);
    stats.alpha_mae /= static_cast<double>(stats.count);
    return stats;
}

void write_parity_csv(const nn::EnsembleModel& model, const Dataset& dataset,
                      const std::string& path) {
    std::string out = "cd_true,cd_pred,alpha_true,alpha_pred\n";
    for (const LabeledSample& s : dataset.samples) {
        const InferenceResult r = predict_params(model, s.features);
        out += format_double(s.target.cd) + ',' + format_double(r.cd_mean) + ',' +
               format_double(s.target.alpha) + ',' + format_double(r.alpha_mean) + '\n';
    }
    write_file(path, out);
}

} // namespace apogee
