#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "apogee/csvio.hpp"
#include "apogee/errors.hpp"
#include "apogee/evaluation.hpp"
#include "apogee/motordb.hpp"

using namespace apogee;

namespace {

const std::string kDefaultDbPath = std::string(APOGEE_DATA_DIR) + "/motors.json";

const MotorDatabase& default_db() {
    static MotorDatabase db = load_motor_db(kDefaultDbPath);
    return db;
}

const nn::EnsembleModel& shared_model() {
    static nn::EnsembleModel model = [] {
        const Dataset ds = generate_dataset(600, {}, default_db(), kDefaultMassRange, {}, 31);
        nn::NetworkConfig net;
        net.hidden_dims = {16, 16};
        nn::TrainConfig train;
        train.epochs = 10;
        train.batch_size = 64;
        train.ensemble_size = 2;
        train.threads = 1;
        return nn::train_ensemble(ds, net, train, 13, default_db().size()).model;
    }();
    return model;
}

} // namespace

TEST_CASE("builtin flights: twelve rows, eight valid, published values") {
    const auto flights = builtin_real_flights();
    REQUIRE(flights.size() == 12);
    int valid = 0;
    for (const auto& f : flights) valid += f.valid ? 1 : 0;
    CHECK(valid == 8);
    for (int id : {5, 6, 7, 8}) CHECK_FALSE(flights[id - 1].valid);

    const RealFlight& f2 = flights[1];
    CHECK(f2.motor_name == "F24");
    CHECK(f2.designation == "F24-4W");
    CHECK(f2.config_label == 'A');
    CHECK(f2.measured_apogee == 281.3);
    CHECK(f2.paper_predicted == 286.3);
    CHECK(f2.paper_openrocket == 315.6);
    CHECK(f2.paper_cd == 0.845);
    CHECK(f2.paper_alpha == 0.836);
    CHECK(f2.dry_mass == 0.322);

    CHECK(flights[0].config_label == 'B');
    CHECK(flights[0].dry_mass == 0.448);
    for (const auto& f : flights) CHECK(f.measured_apogee > 0.0);
}

TEST_CASE("metrics: constant error case and Jensen inequality") {
    const std::vector<double> meas{100.0, 150.0, 200.0};
    const std::vector<double> pred{105.0, 155.0, 205.0};
    const Metrics m = compute_metrics(pred, meas);
    CHECK(m.mae == doctest::Approx(5.0));
    CHECK(m.rmse == doctest::Approx(5.0));
    CHECK(m.mean_bias == doctest::Approx(5.0));
    CHECK(m.positive_errors == 3);
    CHECK(m.count == 3);

    RngStream rng(77, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a, b;
        for (int i = 0; i < 10; ++i) {
            a.push_back(rng.uniform(100.0, 300.0));
            b.push_back(rng.uniform(100.0, 300.0));
        }
        const Metrics r = compute_metrics(a, b);
        CHECK(r.mae <= r.rmse + 1e-12);
    }

    CHECK_THROWS_AS(compute_metrics({}, {}), ValidationError);
}

TEST_CASE("paper columns: published per-flight arithmetic") {
    // Scoring the published prediction columns over the 8 valid flights.
    const EvalReport report =
        run_evaluation(nullptr, builtin_real_flights(), default_db(), {}, true);
    REQUIRE(report.rows.size() == 12);
    CHECK(report.paper_columns);
    CHECK(report.ours.count == 8);

    // "ours" column: matches the published MAE 12.3 / RMSE 14.0 within print
    // rounding; values below are the exact recomputation
    CHECK(report.ours.mae == doctest::Approx(12.3125).epsilon(1e-9));
    CHECK(report.ours.rmse == doctest::Approx(14.04346).epsilon(1e-6));
    CHECK(std::abs(report.ours.mae - 12.3) < 0.1);
    CHECK(std::abs(report.ours.rmse - 14.0) < 0.1);

    // every valid-flight error is positive, bias equals the MAE
    CHECK(report.ours.positive_errors == 8);
    CHECK(report.ours.mean_bias == doctest::Approx(report.ours.mae).epsilon(1e-12));

    // OpenRocket column: the arithmetic over the published per-flight values
    // gives 43.6 / 46.806. (The published summary row prints 19.9 / 23.1,
    // which does not follow from the published per-flight columns; the
    // acceptance harness tracks that discrepancy.)
    CHECK(report.baseline.mae == doctest::Approx(43.6).epsilon(1e-9));
    CHECK(report.baseline.rmse == doctest::Approx(46.80590).epsilon(1e-6));
    CHECK(report.baseline.positive_errors == 8);

    // the learned column dominates the baseline column on the published data
    CHECK(report.ours.mae < report.baseline.mae);
    CHECK(report.ours.rmse < report.baseline.rmse);
}

TEST_CASE("baseline: fixed parameters, monotone dominance") {
    RocketConfig config;
    config.motor = default_db().get("F24");
    config.dry_mass = 0.322;
    const double base = baseline_predict(config);
    CHECK(base == simulate_flight({0.52, 1.0}, config).apogee);

    // more drag and less thrust than the baseline always flies lower
    CHECK(simulate_flight({0.7, 0.9}, config).apogee < base);
    CHECK(simulate_flight({0.88, 0.78}, config).apogee < base);
}

TEST_CASE("run evaluation: fresh model, structure and determinism") {
    const EvalReport report =
        run_evaluation(&shared_model(), builtin_real_flights(), default_db());
    REQUIRE(report.rows.size() == 12);
    CHECK(report.ours.count == 8);
    CHECK(report.baseline.count == 8);
    for (const auto& row : report.rows) {
        REQUIRE(row.failure.empty());
        CHECK(row.predicted > 0.0);
        CHECK(row.baseline > 0.0);
        CHECK(row.cd_hat > 0.3);
        CHECK(row.cd_hat < 0.9);
        CHECK(row.error == row.predicted - row.flight.measured_apogee);
        // inferred drag above baseline + thrust below nominal implies the
        // baseline predicts higher than the replay
        if (row.cd_hat > kBaselineCd && row.alpha_hat < kBaselineAlpha)
            CHECK(row.baseline > row.predicted);
    }

    const EvalReport again =
        run_evaluation(&shared_model(), builtin_real_flights(), default_db());
    CHECK(report_to_json(report) == report_to_json(again));
}

TEST_CASE("run evaluation: per-flight failures do not abort") {
    auto flights = builtin_real_flights();
    flights[3].motor_name = "NOPE";
    const EvalReport report = run_evaluation(&shared_model(), flights, default_db());
    REQUIRE(report.rows.size() == 12);
    CHECK_FALSE(report.rows[3].failure.empty());
    CHECK(report.rows[3].failure.find("unknown motor") != std::string::npos);
    CHECK(report.ours.count == 7); // flight 4 was valid but failed
    for (size_t i = 0; i < report.rows.size(); ++i)
        if (i != 3) CHECK(report.rows[i].failure.empty());
}

TEST_CASE("flights csv: parse, defaults, line-numbered errors") {
    const std::string path = "flights_tmp.csv";
    write_file(path, "id,motor,config,measured_m,valid,dry_mass_kg\n"
                     "1,F24,A,281.3,1,\n"
                     "2,E35,B,169.8,true,0.5\n"
                     "3,F39,B,185.9,0,\n");
    const auto flights = load_real_flights_csv(path);
    std::remove(path.c_str());
    REQUIRE(flights.size() == 3);
    CHECK(flights[0].dry_mass == kConfigADryMass); // label mapping fallback
    CHECK(flights[1].dry_mass == 0.5);             // explicit override wins
    CHECK(flights[1].valid);
    CHECK_FALSE(flights[2].valid);
    CHECK_FALSE(flights[0].has_paper_columns());

    write_file(path, "id,motor,config,measured_m,valid,dry_mass_kg\n"
                     "1,F24,A,notanumber,1,\n");
    try {
        load_real_flights_csv(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::remove(path.c_str());

    write_file(path, "wrong,header\n");
    CHECK_THROWS_AS(load_real_flights_csv(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("report rendering: text table and json aggregates") {
    const EvalReport report =
        run_evaluation(nullptr, builtin_real_flights(), default_db(), {}, true);
    const std::string text = format_report_text(report);
    CHECK(text.find("E35-5W") != std::string::npos);
    CHECK(text.find("MAE") != std::string::npos);
    CHECK(text.find("positive errors 8/8") != std::string::npos);

    const auto doc = nlohmann::json::parse(report_to_json(report));
    CHECK(doc.at("rows").size() == 12);
    CHECK(doc.at("aggregates").at("ours").at("mae").get<double>() ==
          doctest::Approx(12.3125).epsilon(1e-9));
    CHECK(doc.at("aggregates").at("ours").at("positive_errors").get<int>() == 8);
    CHECK(doc.at("paper_columns").get<bool>());
}

TEST_CASE("synthetic parity: held-out MAE and parity csv") {
    const Dataset heldout = generate_dataset(300, {}, default_db(), kDefaultMassRange, {}, 777);
    const ParityStats parity = parameter_mae(shared_model(), heldout);
    CHECK(parity.count == 300);
    // a barely trained model still beats the prior-width upper bound
    CHECK(parity.cd_mae > 0.0);
    CHECK(parity.cd_mae < 0.3);
    CHECK(parity.alpha_mae < 0.2);

    const std::string path = "parity_tmp.csv";
    write_parity_csv(shared_model(), heldout, path);
    const auto lines = read_lines(path);
    std::remove(path.c_str());
    REQUIRE(lines.size() == 301);
    CHECK(lines[0] == "cd_true,cd_pred,alpha_true,alpha_pred");
    const auto fields = split_csv_line(lines[1]);
    REQUIRE(fields.size() == 4);
    CHECK(parse_double(fields[0]) == heldout.samples[0].target.cd);
}
