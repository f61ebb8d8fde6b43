#include "apogee/inference.hpp"

#include <cmath>

#include "apogee/errors.hpp"
#include "apogee/synthgen.hpp"

namespace apogee {

InferenceResult predict_params(const nn::EnsembleModel& model, const FeatureVector& features) {
    const auto z = normalize(features, model.norm);
    nn::Matrix x(1, 5);
    std::copy(z.begin(), z.end(), x.row(0));

    InferenceResult res;
    res.per_member.reserve(model.members.size());
    for (const auto& member : model.members) {
        const nn::Matrix pred = nn::forward_eval(member, model.net, x);
        res.per_member.push_back({pred.at(0, 0), pred.at(0, 1)});
        res.cd_mean += pred.at(0, 0);
        res.alpha_mean += pred.at(0, 1);
    }
    const double k = static_cast<double>(model.members.size());
    res.cd_mean /= k;
    res.alpha_mean /= k;
    double cd_var = 0.0, alpha_var = 0.0;
    for (const auto& [cd, alpha] : res.per_member) {
        cd_var += (cd - res.cd_mean) * (cd - res.cd_mean);
        alpha_var += (alpha - res.alpha_mean) * (alpha - res.alpha_mean);
    }
    res.cd_std = std::sqrt(cd_var / k); // population std, divide by K
    res.alpha_std = std::sqrt(alpha_var / k);
    return res;
}

InferenceResult predict(const nn::EnsembleModel& model, double h_obs, const RocketConfig& config,
                        const SimOptions& sim_opts) {
    if (static_cast<size_t>(config.motor.motor_index) >= model.meta.motor_count)
        throw MotorIndexError("predict: motor index " + std::to_string(config.motor.motor_index) +
                              " outside the training database (size " +
                              std::to_string(model.meta.motor_count) + ")");

    InferenceResult res = predict_params(model, build_features(h_obs, config));
    res.replayed_apogee =
        simulate_flight({res.cd_mean, res.alpha_mean}, config, sim_opts).apogee;
    return res;
}

std::vector<BatchItem> batch_predict(const nn::EnsembleModel& model,
                                     const std::vector<std::pair<double, RocketConfig>>& flights,
                                     const SimOptions& sim_opts) {
    std::vector<BatchItem> out;
    out.reserve(flights.size());
    for (const auto& [h_obs, config] : flights) {
        BatchItem item;
        try {
            item.result = predict(model, h_obs, config, sim_opts);
            item.ok = true;
        } catch (const std::exception& e) {
            item.error = e.what();
        }
        out.push_back(std::move(item));
    }
    return out;
}

} // namespace apogee
