#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "apogee/physics.hpp"
#include "apogee/synthgen.hpp"
#include "apogee/train.hpp"

namespace apogee {

/// Ensemble point estimate with disagreement-based uncertainty. Stds are
/// population standard deviations over the K members (epistemic proxy, not
/// a calibrated probability).
struct InferenceResult {
    double cd_mean = 0.0;
    double alpha_mean = 0.0;
    double cd_std = 0.0;
    double alpha_std = 0.0;
    std::vector<std::array<double, 2>> per_member; // raw (cd, alpha) pairs
    double replayed_apogee = 0.0; // simulate_flight at the mean parameters [m]
};

/// Ensemble aggregation on a ready-made feature vector, no replay
/// (replayed_apogee is left at 0). Shared by predict and the synthetic
/// parity evaluator.
InferenceResult predict_params(const nn::EnsembleModel& model, const FeatureVector& features);

/// Single amortized prediction: feature build -> normalize -> K eval-mode
/// forwards -> aggregate -> replay. No iterative optimization anywhere.
/// Throws MotorIndexError when the config's motor index lies outside the
/// database the model was trained against.
InferenceResult predict(const nn::EnsembleModel& model, double h_obs, const RocketConfig& config,
                        const SimOptions& sim_opts = {});

struct BatchItem {
    bool ok = false;
    InferenceResult result;
    std::string error; // set when ok is false
};

/// Elementwise predict, order preserved; per-item failures are recorded
/// without aborting the batch.
std::vector<BatchItem> batch_predict(const nn::EnsembleModel& model,
                                     const std::vector<std::pair<double, RocketConfig>>& flights,
                                     const SimOptions& sim_opts = {});

} // namespace apogee
