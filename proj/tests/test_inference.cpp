#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "apogee/errors.hpp"
#include "apogee/inference.hpp"
#include "apogee/motordb.hpp"
#include "apogee/synthgen.hpp"
#include "apogee/train.hpp"

using namespace apogee;

namespace {

const std::string kDefaultDbPath = std::string(APOGEE_DATA_DIR) + "/motors.json";

const MotorDatabase& default_db() {
    static MotorDatabase db = load_motor_db(kDefaultDbPath);
    return db;
}

// Small model trained once and shared by the cases below.
const nn::EnsembleModel& shared_model(int k = 3) {
    static nn::EnsembleModel model = [] {
        const Dataset ds = generate_dataset(600, {}, default_db(), kDefaultMassRange, {}, 404);
        nn::NetworkConfig net;
        net.hidden_dims = {16, 16};
        nn::TrainConfig train;
        train.epochs = 10;
        train.batch_size = 64;
        train.ensemble_size = 3;
        train.threads = 1;
        return nn::train_ensemble(ds, net, train, 11, default_db().size()).model;
    }();
    return model;
}

RocketConfig flight_config(const char* motor, double dry_mass) {
    RocketConfig c;
    c.motor = default_db().get(motor);
    c.dry_mass = dry_mass;
    return c;
}

} // namespace

TEST_CASE("predict: aggregation equals hand-assembled member forwards") {
    const nn::EnsembleModel& model = shared_model();
    const RocketConfig config = flight_config("F24", 0.322);
    const InferenceResult r = predict(model, 250.0, config);

    REQUIRE(r.per_member.size() == 3);
    double cd_sum = 0.0, alpha_sum = 0.0;
    for (size_t m = 0; m < model.members.size(); ++m) {
        const auto z = normalize(build_features(250.0, config), model.norm);
        nn::Matrix x(1, 5);
        std::copy(z.begin(), z.end(), x.row(0));
        const nn::Matrix pred = nn::forward_eval(model.members[m], model.net, x);
        CHECK(r.per_member[m][0] == pred.at(0, 0));
        CHECK(r.per_member[m][1] == pred.at(0, 1));
        cd_sum += pred.at(0, 0);
        alpha_sum += pred.at(0, 1);
    }
    // mean-of-members recomputation to 1e-12
    CHECK(std::abs(r.cd_mean - cd_sum / 3.0) < 1e-12);
    CHECK(std::abs(r.alpha_mean - alpha_sum / 3.0) < 1e-12);

    // replay equals an independent simulation, bit-identical
    const SimResult replay = simulate_flight({r.cd_mean, r.alpha_mean}, config);
    CHECK(r.replayed_apogee == replay.apogee);

    // population std across members
    double cd_var = 0.0;
    for (const auto& pm : r.per_member) cd_var += (pm[0] - r.cd_mean) * (pm[0] - r.cd_mean);
    CHECK(r.cd_std == doctest::Approx(std::sqrt(cd_var / 3.0)).epsilon(1e-12));
}

TEST_CASE("predict: single-member ensemble has zero spread") {
    const Dataset ds = generate_dataset(300, {}, default_db(), kDefaultMassRange, {}, 8);
    nn::NetworkConfig net;
    net.hidden_dims = {8};
    nn::TrainConfig train;
    train.epochs = 5;
    train.batch_size = 64;
    train.ensemble_size = 1;
    train.threads = 1;
    const nn::EnsembleModel model =
        nn::train_ensemble(ds, net, train, 2, default_db().size()).model;

    const InferenceResult r = predict(model, 180.0, flight_config("E35", 0.448));
    CHECK(r.cd_std == 0.0);
    CHECK(r.alpha_std == 0.0);
    REQUIRE(r.per_member.size() == 1);
    CHECK(r.cd_mean == r.per_member[0][0]);
    CHECK(r.alpha_mean == r.per_member[0][1]);
}

TEST_CASE("predict: motor outside the training database is rejected") {
    const nn::EnsembleModel& model = shared_model();
    RocketConfig config = flight_config("F24", 0.322);
    config.motor.motor_index = 3; // one past the training db
    CHECK_THROWS_AS(predict(model, 200.0, config), MotorIndexError);
}

TEST_CASE("predict: deterministic") {
    const nn::EnsembleModel& model = shared_model();
    const RocketConfig config = flight_config("F39", 0.448);
    const InferenceResult a = predict(model, 190.0, config);
    const InferenceResult b = predict(model, 190.0, config);
    CHECK(a.cd_mean == b.cd_mean);
    CHECK(a.alpha_mean == b.alpha_mean);
    CHECK(a.replayed_apogee == b.replayed_apogee);
}

TEST_CASE("batch predict: order, errors isolated per item") {
    const nn::EnsembleModel& model = shared_model();
    CHECK(batch_predict(model, {}).empty());

    std::vector<std::pair<double, RocketConfig>> flights;
    flights.emplace_back(200.0, flight_config("F24", 0.322));
    const auto single = batch_predict(model, flights);
    REQUIRE(single.size() == 1);
    REQUIRE(single[0].ok);
    const InferenceResult direct = predict(model, 200.0, flights[0].second);
    CHECK(single[0].result.cd_mean == direct.cd_mean);
    CHECK(single[0].result.replayed_apogee == direct.replayed_apogee);

    // a bad item in the middle does not abort the batch
    RocketConfig bad = flight_config("E35", 0.448);
    bad.motor.motor_index = 99;
    flights.emplace_back(170.0, bad);
    flights.emplace_back(185.0, flight_config("F39", 0.448));
    const auto batch = batch_predict(model, flights);
    REQUIRE(batch.size() == 3);
    CHECK(batch[0].ok);
    CHECK_FALSE(batch[1].ok);
    CHECK(batch[1].error.find("motor index") != std::string::npos);
    CHECK(batch[2].ok);
}
